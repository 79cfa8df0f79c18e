"""Metaplectic time-frequency analysis: metaplectic transforms, metaplectic Wigner
distributions, generalized metaplectic convolutions, Cohen-type distributions built
from them, Wigner-domain adaptive filtering and a denoising benchmark."""

from .signals import SampledSignal, UniformGrid, add_awgn, generate, metrics
from .symplectic import SymplecticMatrix, exp_param, log_param, special, validate
from .metaplectic import inverse_mt, mt
from .tfd import TFDistribution
from .wigner import MWDConfig, cmcd_reconstruct, mwd, tf_grids, wd_invert, wigner
from .gmconv import GMCMatrices, convolve_direct, convolve_spectral
from .cohen import CMCDConfig, KernelSpec, cmcd
from .lsfilter import PipelineConfig, denoise, design_lsaf

__version__ = "0.1.0"
