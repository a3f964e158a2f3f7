"""Objective image quality metrics: MSE, PSNR and box-window SSIM.

SSIM uses a uniform (box) window over all fully-interior positions with
population window statistics. That variant is fully specified and cheap to
reproduce, which matters because the denoising pipeline branches on tiny
SSIM differences.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

#: PSNR value reported when the images are identical (MSE = 0).
PSNR_CAP = 99.0


@dataclass(frozen=True)
class SsimParams:
    """Box-window SSIM parameters.

    The window may have any side length >= 2: windows are averaged over all
    fully-interior positions, so no center pixel is needed and even sides
    (the 8-pixel default) are fine.
    """

    window: int = 8
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    def __post_init__(self):
        if self.window < 2:
            raise ValueError(f"window must be >= 2, got {self.window}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be > 0")
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be > 0")


def _check_same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b):
    """Mean squared per-pixel difference."""
    a, b = _check_same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b):
    """Peak signal-to-noise ratio in dB for the 0..255 scale.

    Returns PSNR_CAP (99 dB) when the images are identical.
    """
    err = mse(a, b)
    if err == 0.0:
        return PSNR_CAP
    return float(10.0 * np.log10(255.0**2 / err))


def _window_means(img, window):
    sw = sliding_window_view(img, (window, window))
    return sw.mean(axis=(-2, -1))


def ssim(a, b, params=SsimParams()):
    """Mean structural similarity over all fully-interior box windows."""
    a, b = _check_same_shape(a, b)
    win = params.window
    if a.shape[0] < win or a.shape[1] < win:
        raise ValueError(f"image {a.shape} smaller than SSIM window {win}")
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    mu_a = _window_means(a, win)
    mu_b = _window_means(b, win)
    # population window statistics via E[xy] - E[x]E[y]
    var_a = _window_means(a * a, win) - mu_a * mu_a
    var_b = _window_means(b * b, win) - mu_b * mu_b
    cov = _window_means(a * b, win) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
