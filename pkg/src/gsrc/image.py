"""Grayscale image representation, file I/O and seeded noise synthesis.

Images are 2-D float64 arrays holding intensities on the 0..255 scale.
Values stay real-valued (and possibly out of range) throughout processing;
rounding and clamping happen only on export. Supported file formats are
binary PGM (P5, maxval <= 255) and 8-bit PNG (grayscale or RGB, RGB reduced
with BT.601 luma).
"""

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

# BT.601 luma weights for RGB -> grayscale reduction
_LUMA = (0.299, 0.587, 0.114)

# unclamped float64 sidecar format: 8-byte magic + u32 width + u32 height (LE)
RAW_MAGIC = b"GSRCF64\x00"


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian noise parameters: standard deviation and RNG seed."""

    sigma: float
    seed: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def validate_image(img):
    """Check the processing-image contract: 2-D, finite, non-empty float data."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr.astype(np.float64, copy=False)


def _load_pgm(buf, path):
    pos = 2  # past the b"P5" magic
    fields = []
    while len(fields) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            eol = buf.find(b"\n", pos)
            pos = len(buf) if eol < 0 else eol + 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if pos == start:
            raise ValueError(f"{path}: corrupt PGM header")
        fields.append(buf[start:pos])
    pos += 1  # single whitespace byte separates the header from the raster
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise ValueError(f"{path}: corrupt PGM header (non-numeric field)") from None
    if width < 1 or height < 1:
        raise ValueError(f"{path}: corrupt PGM header (size {width}x{height})")
    if maxval > 255:
        raise ValueError(f"{path}: unsupported bit depth (maxval={maxval})")
    if maxval < 1:
        raise ValueError(f"{path}: corrupt PGM header (maxval={maxval})")
    raster = buf[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError(
            f"{path}: truncated PGM raster ({len(raster)} of {width * height} bytes)"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).astype(np.float64)


def _load_png(path):
    with PILImage.open(path) as im:
        mode = im.mode
        if mode == "1":
            im = im.convert("L")
            mode = "L"
        if mode == "P":
            im = im.convert("RGB")
            mode = "RGB"
        if mode == "L":
            return np.asarray(im, dtype=np.float64)
        if mode == "LA":
            return np.asarray(im.getchannel(0), dtype=np.float64)
        if mode in ("RGB", "RGBA"):
            arr = np.asarray(im, dtype=np.float64)
            r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
            return _LUMA[0] * r + _LUMA[1] * g + _LUMA[2] * b
        raise ValueError(f"{path}: unsupported bit depth (PNG mode {mode!r})")


def load_image(path):
    """Load a PGM (P5) or 8-bit PNG file as a float64 image in [0, 255]."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
    except OSError as exc:
        raise ValueError(f"{path}: unreadable file ({exc})") from exc
    if head.startswith(b"P5"):
        with open(path, "rb") as fh:
            return _load_pgm(fh.read(), path)
    if head.startswith(b"\x89PNG"):
        try:
            return _load_png(path)
        except ValueError:
            raise
        except Exception as exc:
            raise ValueError(f"{path}: corrupt PNG ({exc})") from exc
    raise ValueError(f"{path}: unrecognized format (expected binary PGM or PNG)")


def quantize(img):
    """Round half-away-from-zero and clamp to [0, 255] as uint8."""
    arr = np.asarray(img, dtype=np.float64)
    rounded = np.where(arr >= 0, np.floor(arr + 0.5), np.ceil(arr - 0.5))
    return np.clip(rounded, 0, 255).astype(np.uint8)


def save_image(img, path):
    """Write an image as binary PGM or PNG depending on the file extension.

    Values are rounded half-away-from-zero and clamped to [0, 255], so
    ``load_image(save_image(img))`` reproduces ``quantize(img)`` exactly.
    """
    arr = validate_image(img)
    data = quantize(arr)
    name = str(path).lower()
    if name.endswith(".pgm"):
        height, width = data.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
            fh.write(data.tobytes())
    elif name.endswith(".png"):
        PILImage.fromarray(data, mode="L").save(path, format="PNG")
    else:
        raise ValueError(f"{path}: unsupported output extension (use .pgm or .png)")


def add_awgn(img, spec):
    """Add i.i.d. Gaussian noise N(0, sigma^2) per pixel, unclamped.

    Noise comes from the counter-based Philox generator keyed by the spec
    seed, so identical (image, spec) inputs produce bit-identical outputs.
    """
    arr = validate_image(img)
    rng = np.random.Generator(np.random.Philox(spec.seed))
    return arr + rng.normal(0.0, spec.sigma, arr.shape)


def write_raw(img, path):
    """Write the unclamped float64 sidecar format (lossless chaining)."""
    arr = validate_image(img)
    height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<II", width, height))
        fh.write(arr.astype("<f8").tobytes())


def read_raw(path):
    """Read the unclamped float64 sidecar format."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16 or buf[:8] != RAW_MAGIC:
        raise ValueError(f"{path}: not a raw float64 sidecar file")
    width, height = struct.unpack("<II", buf[8:16])
    expect = 16 + width * height * 8
    if len(buf) != expect:
        raise ValueError(f"{path}: truncated sidecar ({len(buf)} of {expect} bytes)")
    return np.frombuffer(buf, dtype="<f8", offset=16).reshape(height, width).copy()
