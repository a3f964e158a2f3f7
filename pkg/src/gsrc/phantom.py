"""Deterministic synthetic test image.

Used by the test suite and the benchmark script when no photographic test
material is available. The layout mimics what makes natural images easy to
denoise with nonlocal methods: smooth shading, sharp edges, periodic
stripes, and a textured motif repeated at several locations so distant
patches have genuine matches.
"""

import numpy as np


def _disk(canvas, cy, cx, radius, value):
    h, w = canvas.shape
    yy, xx = np.ogrid[:h, :w]
    canvas[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2] = value


def synthetic_test_image(size=256, seed=7):
    """Structured grayscale image with values in [0, 255]."""
    rng = np.random.Generator(np.random.Philox(seed))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = 60.0 + 90.0 * yy / size + 30.0 * np.sin(2.0 * np.pi * xx / size)

    # periodic stripe band (strong self-similarity)
    band = slice(int(0.08 * size), int(0.26 * size))
    img[band, :] = 110.0 + 70.0 * np.sin(2.0 * np.pi * xx[band, :] / 12.0)

    # repeated smooth texture motif at three locations
    tile = rng.uniform(-1.0, 1.0, (3 * (size // 8), 3 * (size // 8)))
    for _ in range(3):  # crude separable smoothing
        tile = (tile + np.roll(tile, 1, 0) + np.roll(tile, -1, 0)) / 3.0
        tile = (tile + np.roll(tile, 1, 1) + np.roll(tile, -1, 1)) / 3.0
    tile = 140.0 + 160.0 * tile
    th = tile.shape[0]
    anchors = [
        (int(0.34 * size), int(0.06 * size)),
        (int(0.34 * size), int(0.55 * size)),
        (int(0.72 * size), int(0.30 * size)),
    ]
    for r, c in anchors:
        img[r : r + th, c : c + th] = tile[: size - r, : size - c]

    # constant-intensity disks with sharp boundaries
    _disk(img, int(0.62 * size), int(0.80 * size), size // 10, 210.0)
    _disk(img, int(0.86 * size), int(0.80 * size), size // 14, 35.0)
    _disk(img, int(0.88 * size), int(0.12 * size), size // 12, 200.0)

    # dark frame line (high-contrast straight edges)
    t = max(size // 64, 2)
    img[:t, :] = 20.0
    img[:, -t:] = 20.0

    return np.clip(img, 0.0, 255.0)
