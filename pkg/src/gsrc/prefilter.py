"""Guide image production: external pre-filtered files or a built-in
sliding block-DCT hard-threshold filter.

The external mode ingests the output of any first-stage denoiser so the
main pipeline can run against high-quality guides. The block-DCT mode keeps
the package self-contained: orthonormal 2-D DCT on overlapping blocks,
hard-threshold of all non-DC coefficients at ``threshold_factor * sigma``,
inverse transform, and plain averaging of the overlaps.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft

from . import kernels
from .image import load_image, validate_image
from .patch import exemplar_grid

MODE_EXTERNAL = "external-file"
MODE_BLOCK_DCT = "block-dct"

#: Classical hard-threshold constant for transform-domain denoising.
DEFAULT_THRESHOLD_FACTOR = 2.7


@dataclass(frozen=True)
class PrefilterSpec:
    mode: str = MODE_BLOCK_DCT
    path: Path | None = None
    dct_block: int = 8
    dct_threshold_factor: float = DEFAULT_THRESHOLD_FACTOR

    def __post_init__(self):
        if self.mode not in (MODE_EXTERNAL, MODE_BLOCK_DCT):
            raise ValueError(f"unknown prefilter mode {self.mode!r}")
        if self.mode == MODE_EXTERNAL and self.path is None:
            raise ValueError("external-file mode requires a path")
        if self.mode == MODE_BLOCK_DCT:
            if self.dct_block < 4:
                raise ValueError(f"dct_block must be >= 4, got {self.dct_block}")
            if self.dct_threshold_factor <= 0:
                raise ValueError("dct_threshold_factor must be > 0")


def block_dct_filter(noisy, sigma, block=8, threshold_factor=DEFAULT_THRESHOLD_FACTOR):
    """Sliding block-DCT hard-threshold denoiser.

    Blocks advance by block/2 along each axis (final positions clamped to
    the border); every non-DC coefficient with magnitude below
    threshold_factor * sigma is zeroed; overlapping reconstructions are
    averaged.
    """
    noisy = validate_image(noisy)
    h, w = noisy.shape
    if block > min(h, w):
        raise ValueError(f"DCT block {block} exceeds image size {w}x{h}")
    grid = exemplar_grid(w, h, block, max(block // 2, 1))
    rows = grid[:, 0][:, None].copy()
    cols = grid[:, 1][:, None].copy()
    # gather_groups packs column-major; fold back to (n, block, block) blocks
    stacked = kernels.gather_groups(noisy, rows, cols, block)
    blocks = stacked[:, :, 0].reshape(-1, block, block).transpose(0, 2, 1)
    coef = scipy.fft.dctn(blocks, type=2, norm="ortho", axes=(1, 2))
    keep = np.abs(coef) >= threshold_factor * sigma
    keep[:, 0, 0] = True  # DC always survives
    rec = scipy.fft.idctn(coef * keep, type=2, norm="ortho", axes=(1, 2))
    vals = np.zeros((h, w), dtype=np.float64)
    cnts = np.zeros((h, w), dtype=np.float64)
    packed = np.ascontiguousarray(
        rec.transpose(0, 2, 1).reshape(-1, block * block, 1)
    )
    kernels.scatter_groups(vals, cnts, rows, cols, block, packed)
    return vals / cnts


def prefilter(noisy, spec, sigma):
    """Produce the guide image for a noisy input.

    External mode loads the file verbatim (dimensions must match the noisy
    image); block-dct mode runs :func:`block_dct_filter`.
    """
    noisy = validate_image(noisy)
    if spec.mode == MODE_EXTERNAL:
        guide = load_image(spec.path)
        if guide.shape != noisy.shape:
            raise ValueError(
                f"guide dimensions {guide.shape[1]}x{guide.shape[0]} do not match "
                f"noisy image {noisy.shape[1]}x{noisy.shape[0]}"
            )
        return guide
    return block_dct_filter(
        noisy, sigma, block=spec.dct_block, threshold_factor=spec.dct_threshold_factor
    )
