"""Guided grayscale image denoising via group sparsity residual shrinkage.

The estimator fuses two nonlocal-self-similarity priors: groups of similar
patches are collected from both the noisy image and a pre-filtered guide,
coded under per-group PCA dictionaries, and the noisy codes are
soft-shrunk toward the guide codes inside an iterative loop with noise
re-estimation and an adaptive (SSIM-driven) choice of the patch-search
target.
"""

__version__ = "0.1.0"

from .image import NoiseSpec, add_awgn, load_image, save_image
from .metrics import SsimParams, mse, psnr, ssim
from .patch import PatchGroup, aggregate, exemplar_grid, extract_group, knn_search
from .pipeline import (
    DenoiseConfig,
    IterationLog,
    collect_group_residuals,
    default_config,
    denoise,
)
from .prefilter import PrefilterSpec, block_dct_filter, prefilter
from .sparse import (
    Dictionary,
    LambdaSchedule,
    compute_lambdas,
    decode,
    encode,
    estimate_row_sigmas,
    gsrc_shrink,
    learn_pca_dictionary,
    residual_histogram,
    soft_threshold,
)

__all__ = [
    "NoiseSpec",
    "add_awgn",
    "load_image",
    "save_image",
    "SsimParams",
    "mse",
    "psnr",
    "ssim",
    "PatchGroup",
    "aggregate",
    "exemplar_grid",
    "extract_group",
    "knn_search",
    "DenoiseConfig",
    "IterationLog",
    "collect_group_residuals",
    "default_config",
    "denoise",
    "PrefilterSpec",
    "block_dct_filter",
    "prefilter",
    "Dictionary",
    "LambdaSchedule",
    "compute_lambdas",
    "decode",
    "encode",
    "estimate_row_sigmas",
    "gsrc_shrink",
    "learn_pca_dictionary",
    "residual_histogram",
    "soft_threshold",
]
