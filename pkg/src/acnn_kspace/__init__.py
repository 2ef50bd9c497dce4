"""Attention-guided residual k-space interpolation for multi-slice, multi-coil MRI."""

from .data import PhantomSpec, gen_phantom, read_volume, split_dataset, write_volume
from .estimator import ACNNReconstructor, CartesianUndersampler, RadialUndersampler
from .kspace import ComplexVolume, apply_mask, fft2c, ifft2c, pack_channels, rss_combine, unpack_channels
from .metrics import MetricsReport, nmse, psnr, ssim, wilcoxon_rank_sum
from .network.models import ModelConfig, build_model, count_params
from .sampling import GriddingConfig, NufftPlan, grid_radial, make_cartesian_mask, make_radial_trajectory

__version__ = "0.1.0"

__all__ = [
    "ACNNReconstructor",
    "CartesianUndersampler",
    "ComplexVolume",
    "GriddingConfig",
    "MetricsReport",
    "ModelConfig",
    "NufftPlan",
    "PhantomSpec",
    "RadialUndersampler",
    "apply_mask",
    "build_model",
    "count_params",
    "fft2c",
    "gen_phantom",
    "grid_radial",
    "ifft2c",
    "make_cartesian_mask",
    "make_radial_trajectory",
    "nmse",
    "pack_channels",
    "psnr",
    "read_volume",
    "rss_combine",
    "split_dataset",
    "ssim",
    "unpack_channels",
    "wilcoxon_rank_sum",
    "write_volume",
]
