"""Pure-numpy implementations of the hot patch kernels.

This is the fallback backend used when the compiled extension is not
available (see ``gsrc.kernels``). The compiled backend implements the same
contracts; only the last floating-point bits of the distance reductions may
differ between backends (summation order), never the semantics.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def knn_batch(target, ex_rows, ex_cols, b_side, window, k):
    """Find the k most similar patch positions for each exemplar.

    Candidates are all valid top-left positions inside a window x window
    region centered on the exemplar top-left, clipped to the image. The
    candidate at offset (0, 0) (the exemplar itself) always occupies slot 0;
    the remaining slots are filled in ascending (squared distance, row, col)
    order. If fewer than k candidates exist, the ordered candidate list is
    repeated cyclically.

    Args:
        target: 2-D float64 image searched for similar patches.
        ex_rows, ex_cols: int64 arrays of exemplar top-left positions.
        b_side: patch side length.
        window: search window side length (>= b_side).
        k: number of members returned per exemplar.

    Returns:
        (rows, cols): int64 arrays of shape (n_exemplars, k).
    """
    h, w = target.shape
    max_r = h - b_side
    max_c = w - b_side
    lo = (window - 1) // 2
    hi = window // 2
    n = ex_rows.shape[0]
    out_r = np.empty((n, k), dtype=np.int64)
    out_c = np.empty((n, k), dtype=np.int64)
    patches = sliding_window_view(target, (b_side, b_side))
    for i in range(n):
        er = int(ex_rows[i])
        ec = int(ex_cols[i])
        r0 = max(er - lo, 0)
        r1 = min(er + hi, max_r)
        c0 = max(ec - lo, 0)
        c1 = min(ec + hi, max_c)
        cand = patches[r0 : r1 + 1, c0 : c1 + 1]
        diff = cand - patches[er, ec]
        dists = np.einsum("rcij,rcij->rc", diff, diff).ravel()
        n_cols = c1 - c0 + 1
        rows_flat = np.repeat(np.arange(r0, r1 + 1), n_cols)
        cols_flat = np.tile(np.arange(c0, c1 + 1), r1 - r0 + 1)
        # the exemplar is pinned to slot 0, so drop it from the sorted pool
        self_idx = (er - r0) * n_cols + (ec - c0)
        keep = np.ones(dists.size, dtype=bool)
        keep[self_idx] = False
        dists = dists[keep]
        rows_flat = rows_flat[keep]
        cols_flat = cols_flat[keep]
        # last lexsort key is primary: distance, then row, then col
        order = np.lexsort((cols_flat, rows_flat, dists))
        ord_r = np.concatenate(([er], rows_flat[order]))
        ord_c = np.concatenate(([ec], cols_flat[order]))
        take = np.arange(k) % ord_r.size
        out_r[i] = ord_r[take]
        out_c[i] = ord_c[take]
    return out_r, out_c


def gather_groups(source, rows, cols, b_side):
    """Extract patch groups from an image.

    Column j of group i is the column-major vectorization of the
    b_side x b_side patch whose top-left corner is (rows[i, j], cols[i, j]).

    Returns:
        float64 array of shape (n_groups, b_side * b_side, k).
    """
    n, k = rows.shape
    sw = sliding_window_view(source, (b_side, b_side))
    g = sw[rows, cols]  # (n, k, b_side, b_side)
    # column-major vectorization: index s = bc * b_side + br
    return np.ascontiguousarray(
        g.transpose(0, 3, 2, 1).reshape(n, b_side * b_side, k)
    )


def scatter_groups(vals, cnts, rows, cols, b_side, patches):
    """Scatter-add processed group columns back onto accumulator images.

    ``vals`` collects intensity contributions and ``cnts`` the per-pixel
    contribution counts; both are modified in place. ``patches`` uses the
    same (n, b, k) column-major layout produced by :func:`gather_groups`.
    Contributions are accumulated in (member, pixel-offset) order so the
    result is deterministic for fixed inputs.
    """
    h, w = vals.shape
    n, k = rows.shape
    b = b_side * b_side
    s = np.arange(b)
    off_r = s % b_side
    off_c = s // b_side
    base_r = rows.reshape(n * k)
    base_c = cols.reshape(n * k)
    idx = (base_r[:, None] + off_r[None, :]) * w + (base_c[:, None] + off_c[None, :])
    contrib = patches.transpose(0, 2, 1).reshape(n * k, b)
    vals += np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=h * w).reshape(h, w)
    cnts += np.bincount(idx.ravel(), minlength=h * w).reshape(h, w)
