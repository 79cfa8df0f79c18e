"""SVG charts for benchmark records (MSE and PSNR against input SNR)."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _series(records):
    by = defaultdict(list)
    for r in records:
        by[(r.example, r.method)].append(r)
    return {k: sorted(v, key=lambda r: r.snr_db) for k, v in sorted(by.items())}


def benchmark_svg(records, path) -> None:
    """One row of two panels per example: mean log10 MSE and mean PSNR, one line per method."""
    records = list(records)
    if not records:
        raise ValueError("no records to plot")
    series = _series(records)
    examples = sorted({r.example for r in records})
    fig, axes = plt.subplots(len(examples), 2, figsize=(10, 3.6 * len(examples)), squeeze=False)
    for row, eid in enumerate(examples):
        ax_mse, ax_psnr = axes[row]
        for (e, method), rs in series.items():
            if e != eid:
                continue
            snr = [r.snr_db for r in rs]
            style = dict(marker="o", lw=2.2 if method == "adaptive-cmcd" else 1.2, label=method)
            ax_mse.plot(snr, [r.log10_mse for r in rs], gid=f"ex{eid}-mse-{method}", **style)
            ax_psnr.plot(snr, [r.psnr_db for r in rs], gid=f"ex{eid}-psnr-{method}", **style)
        ax_mse.set(xlabel="input SNR (dB)", ylabel="mean log10 MSE", title=f"Example {eid}: MSE")
        ax_psnr.set(xlabel="input SNR (dB)", ylabel="mean PSNR (dB)", title=f"Example {eid}: PSNR")
        for ax in (ax_mse, ax_psnr):
            ax.grid(alpha=0.3)
        ax_psnr.legend(fontsize=7, loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
