"""Overlapped patch grids, windowed kNN search, groups and aggregation.

A *group* is a (b, k) matrix whose columns are column-major vectorizations
of k similar b_side x b_side patches (b = b_side**2). The same member index
list can be applied to several images so that the resulting coefficient
matrices stay column-aligned.

The heavy inner loops live in :mod:`gsrc.kernels`; this module provides the
public single-exemplar operations on top of the batch kernels.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class PatchGroup:
    """k similar patches: member positions (k, 2) and the (b, k) matrix."""

    members: np.ndarray
    matrix: np.ndarray

    @property
    def exemplar(self):
        return int(self.members[0, 0]), int(self.members[0, 1])


def exemplar_grid(width, height, b_side, stride):
    """Top-left positions of the exemplar patches, row-major.

    Positions advance by ``stride`` along each axis; the final position is
    clamped so the last row/column of patches touches the image border.

    Returns an (n, 2) int64 array of (row, col) pairs.
    """
    if b_side > min(width, height):
        raise ValueError(f"patch side {b_side} exceeds image size {width}x{height}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    rows = list(range(0, height - b_side, stride)) + [height - b_side]
    cols = list(range(0, width - b_side, stride)) + [width - b_side]
    grid = [(r, c) for r in rows for c in cols]
    return np.array(grid, dtype=np.int64).reshape(len(grid), 2)


def knn_search(target, exemplar, k, b_side, window):
    """k most similar patch positions around one exemplar.

    Candidates are valid top-left positions inside a window x window region
    centered on the exemplar (clipped at image bounds); similarity is the
    squared Euclidean distance between vectorized patches. The exemplar is
    always first; ties break on (row, col); short candidate lists repeat
    cyclically.

    Returns a (k, 2) int64 array of (row, col) pairs.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if window < b_side:
        raise ValueError(f"window {window} must be >= patch side {b_side}")
    target = np.ascontiguousarray(target, dtype=np.float64)
    er, ec = int(exemplar[0]), int(exemplar[1])
    rows, cols = kernels.knn_batch(
        target,
        np.array([er], dtype=np.int64),
        np.array([ec], dtype=np.int64),
        b_side,
        window,
        k,
    )
    return np.stack([rows[0], cols[0]], axis=1)


def extract_group(source, members, b_side):
    """Build a PatchGroup from an image and a member position list."""
    source = np.ascontiguousarray(source, dtype=np.float64)
    members = np.asarray(members, dtype=np.int64).reshape(-1, 2)
    h, w = source.shape
    if (
        members.min() < 0
        or members[:, 0].max() > h - b_side
        or members[:, 1].max() > w - b_side
    ):
        raise ValueError("member position out of bounds for patch extraction")
    mats = kernels.gather_groups(
        source, members[None, :, 0].copy(), members[None, :, 1].copy(), b_side
    )
    return PatchGroup(members=members, matrix=mats[0])


def aggregate(groups, width, height, b_side):
    """Average processed patch columns back into an image.

    ``groups`` is a sequence of (PatchGroup, processed (b, k) matrix) pairs.
    Every pixel becomes the plain average of all patch contributions that
    cover it; a pixel covered by no patch is an error.
    """
    vals = np.zeros((height, width), dtype=np.float64)
    cnts = np.zeros((height, width), dtype=np.float64)
    for group, processed in groups:
        processed = np.asarray(processed, dtype=np.float64)
        if processed.shape != group.matrix.shape:
            raise ValueError(
                f"processed matrix shape {processed.shape} does not match "
                f"group shape {group.matrix.shape}"
            )
        kernels.scatter_groups(
            vals,
            cnts,
            group.members[None, :, 0].copy(),
            group.members[None, :, 1].copy(),
            b_side,
            np.ascontiguousarray(processed[None]),
        )
    if np.any(cnts == 0):
        raise ValueError("aggregation left uncovered pixels")
    return vals / cnts
