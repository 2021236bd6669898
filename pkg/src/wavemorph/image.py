"""Raster I/O and elementary pixel operations.

Images are plain ``numpy.ndarray`` objects of dtype float64 with shape
``(height, width, channels)`` (channel-interleaved, row-major), where
``channels`` is 1 or 3. Pixel values live in ``[0, 255]`` unless a function
says otherwise; quantization to 8 bits only happens in :func:`save_image`.
Functions that take an image also accept a 2-D array and treat it as a
single-channel image.
"""
from __future__ import annotations

import os

import numpy as np
from PIL import Image as PILImage

from .errors import ImageFormatError, PixelRangeError, ShapeError

VALUE_RANGE = (0.0, 255.0)

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def as_image(arr) -> np.ndarray:
    """Return ``arr`` as a float64 ``(H, W, C)`` array (no copy when possible)."""
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ShapeError(f"expected (H, W), (H, W, 1) or (H, W, 3) array, got shape {img.shape}")
    return img


def to_gray(img) -> np.ndarray:
    """Luma of an image as a 2-D array."""
    img = as_image(img)
    if img.shape[2] == 1:
        return img[:, :, 0]
    return img @ _LUMA


def load_image(path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB PNG file.

    Raises:
        FileNotFoundError: ``path`` does not exist.
        ImageFormatError: the file is not a PNG, is truncated, or uses a color
            type / bit depth other than 8-bit L or RGB.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with PILImage.open(path) as im:
            if im.format != "PNG":
                raise ImageFormatError(f"{path}: unsupported file format {im.format!r}; only PNG is read")
            mode = im.mode
            if mode not in ("L", "RGB"):
                raise ImageFormatError(f"{path}: unsupported PNG mode {mode!r} ({_describe_mode(mode)}); "
                                       "expected 8-bit grayscale or RGB")
            im.load()
            data = np.asarray(im, dtype=np.float64)
    except ImageFormatError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageFormatError(f"{path}: cannot decode PNG: {exc}") from exc
    return as_image(data).copy()


def _describe_mode(mode: str) -> str:
    return {
        "1": "bit depth 1",
        "I;16": "bit depth 16",
        "I;16B": "bit depth 16",
        "I": "bit depth 16/32",
        "F": "floating-point samples",
        "P": "palette color type",
        "LA": "gray with alpha",
        "RGBA": "RGB with alpha",
    }.get(mode, "unsupported color type")


def quantize(img) -> np.ndarray:
    """Round to the nearest integer (halves round up) and check the 8-bit range."""
    img = as_image(img)
    q = np.floor(img + 0.5)
    if not np.all(np.isfinite(q)) or q.min() < 0 or q.max() > 255:
        raise PixelRangeError(
            f"pixel values outside [0, 255] after rounding (min {img.min():g}, max {img.max():g})")
    return q.astype(np.uint8)


def save_image(img, path) -> None:
    """Write an image as an 8-bit PNG, rounding pixels to the nearest integer."""
    q = quantize(img)
    out = PILImage.fromarray(q[:, :, 0], mode="L") if q.shape[2] == 1 else PILImage.fromarray(q, mode="RGB")
    out.save(path, format="PNG")


def bilinear_sample_many(img, xs, ys) -> np.ndarray:
    """Bilinear samples at arrays of coordinates.

    Coordinates outside the image are clamped to the border. Returns an array
    of shape ``xs.shape + (channels,)``.
    """
    img = as_image(img)
    h, w, _ = img.shape
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def bilinear_sample(img, x: float, y: float, channel: int = 0) -> float:
    """Bilinear blend of the four pixels around ``(x, y)`` in one channel.

    ``x`` is the column coordinate and ``y`` the row coordinate.
    """
    return float(bilinear_sample_many(img, np.array(x), np.array(y))[channel])


def clip_pixels(img, lo: float = 0.0, hi: float = 255.0) -> np.ndarray:
    if lo > hi:
        raise ValueError(f"clip bounds reversed: lo={lo} > hi={hi}")
    return np.clip(np.asarray(img, dtype=np.float64), lo, hi)


def minmax_absdiff_map(a, b) -> np.ndarray:
    """Absolute difference rescaled to ``[0, 1]``; all zeros when the difference is flat."""
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = np.abs(a - b)
    lo, hi = d.min(), d.max()
    if hi == lo:
        return np.zeros_like(d)
    return (d - lo) / (hi - lo)
