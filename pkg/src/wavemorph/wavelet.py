"""Separable 2-D wavelet packets and sub-band fusion.

Analysis uses orthonormal filter pairs with periodic extension, so every
level halves both dimensions exactly and preserves energy. The low-pass
filter ``h`` and high-pass filter ``g[m] = (-1)**m * h[L-1-m]`` are applied
along rows first (the horizontal transform), then along columns. For Haar
this gives ``low = (x0 + x1) / sqrt(2)`` and ``high = (x0 - x1) / sqrt(2)``.

Band names read vertical-filter then horizontal-filter: ``LH`` is low-pass
down the columns and high-pass along the rows.

A packet of depth ``L`` is stored as an array of shape ``(n, n, H/n, W/n)``
with ``n = 2**L``. Splitting band ``(r, c)`` with vertical filter ``v`` and
horizontal filter ``u`` (0 = low, 1 = high) produces band
``(2r + v, 2c + u)``; the baseband is ``(0, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .image import as_image

_S3 = np.sqrt(3.0)
FILTERS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "db2": np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * np.sqrt(2.0)),
}


def _filters(filter_id: str):
    try:
        h = FILTERS[filter_id]
    except KeyError:
        raise ValueError(f"unknown wavelet {filter_id!r}; choose from {sorted(FILTERS)}") from None
    g = h[::-1] * (-1.0) ** np.arange(len(h))
    return h, g


def _analyze(x: np.ndarray, axis: int, h, g):
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    if n % 2:
        raise ShapeError(f"odd length {n} along axis {axis}; cannot split")
    k2 = 2 * np.arange(n // 2)
    low = np.zeros(x.shape[:-1] + (n // 2,))
    high = np.zeros_like(low)
    for m in range(len(h)):
        xm = x[..., (k2 + m) % n]
        low += h[m] * xm
        high += g[m] * xm
    return np.moveaxis(low, -1, axis), np.moveaxis(high, -1, axis)


def _synthesize(low: np.ndarray, high: np.ndarray, axis: int, h, g):
    low = np.moveaxis(low, axis, -1)
    high = np.moveaxis(high, axis, -1)
    half = low.shape[-1]
    n = 2 * half
    out = np.zeros(low.shape[:-1] + (n,))
    k2 = 2 * np.arange(half)
    for m in range(len(h)):
        # (k2 + m) % n has no repeated index, so fancy += is safe
        out[..., (k2 + m) % n] += h[m] * low + g[m] * high
    return np.moveaxis(out, -1, axis)


def dwt2_level(mat, filter_id: str = "haar"):
    """One separable analysis step; returns ``(LL, LH, HL, HH)``."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {mat.shape}")
    if mat.shape[0] % 2 or mat.shape[1] % 2:
        raise ShapeError(f"matrix dimensions must be even, got {mat.shape}")
    h, g = _filters(filter_id)
    lo, hi = _analyze(mat, 1, h, g)
    ll, hl_ = _analyze(lo, 0, h, g)
    lh, hh = _analyze(hi, 0, h, g)
    return ll, lh, hl_, hh


def idwt2_level(ll, lh, hl, hh, filter_id: str = "haar") -> np.ndarray:
    """Inverse of :func:`dwt2_level`."""
    h, g = _filters(filter_id)
    lo = _synthesize(np.asarray(ll, float), np.asarray(hl, float), 0, h, g)
    hi = _synthesize(np.asarray(lh, float), np.asarray(hh, float), 0, h, g)
    return _synthesize(lo, hi, 1, h, g)


@dataclass
class SubbandGrid:
    """Uniform wavelet-packet bands of one channel.

    ``bands[r, c]`` is the coefficient matrix of band ``(r, c)``; see the
    module docstring for the ordering.
    """

    bands: np.ndarray
    source_dims: tuple
    filter_id: str = "haar"
    levels: int = 3

    def __post_init__(self):
        n = 2 ** self.levels
        H, W = self.source_dims
        expected = (n, n, H // n, W // n)
        if self.bands.shape != expected or H % n or W % n:
            raise ShapeError(f"band array has shape {self.bands.shape}, expected {expected} "
                             f"for source {self.source_dims} at {self.levels} levels")

    @property
    def baseband(self) -> np.ndarray:
        return self.bands[0, 0]

    def band(self, r: int, c: int) -> np.ndarray:
        return self.bands[r, c]


def _split(packet: np.ndarray, h, g) -> np.ndarray:
    n = packet.shape[0]
    lo, hi = _analyze(packet, 3, h, g)
    parts = [_analyze(lo, 2, h, g), _analyze(hi, 2, h, g)]  # [u][v]
    bh, bw = parts[0][0].shape[2:]
    out = np.empty((n, 2, n, 2, bh, bw))
    for u in (0, 1):
        for v in (0, 1):
            out[:, v, :, u] = parts[u][v]
    return out.reshape(2 * n, 2 * n, bh, bw)


def _merge(packet: np.ndarray, h, g) -> np.ndarray:
    n2, _, bh, bw = packet.shape
    n = n2 // 2
    p = packet.reshape(n, 2, n, 2, bh, bw)
    lo = _synthesize(p[:, 0, :, 0], p[:, 1, :, 0], 2, h, g)
    hi = _synthesize(p[:, 0, :, 1], p[:, 1, :, 1], 2, h, g)
    return _synthesize(lo, hi, 3, h, g)


def packet_decompose(mat, levels: int = 3, filter_id: str = "haar") -> SubbandGrid:
    """Full wavelet-packet tree: every band is split again at each level."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {mat.shape}")
    n = 2 ** levels
    if mat.shape[0] % n or mat.shape[1] % n:
        raise ShapeError(f"dimensions {mat.shape} are not divisible by {n}; "
                         f"pad or crop to a multiple of {n} first (see crop_to_multiple)")
    h, g = _filters(filter_id)
    packet = mat[None, None]
    for _ in range(levels):
        packet = _split(packet, h, g)
    return SubbandGrid(packet, tuple(mat.shape), filter_id, levels)


def packet_reconstruct(grid: SubbandGrid) -> np.ndarray:
    h, g = _filters(grid.filter_id)
    bands = np.asarray(grid.bands, dtype=np.float64)
    n = 2 ** grid.levels
    if bands.ndim != 4 or bands.shape[:2] != (n, n):
        raise ShapeError(f"band array shape {bands.shape} does not match {grid.levels} levels")
    packet = bands
    for _ in range(grid.levels):
        packet = _merge(packet, h, g)
    out = packet[0, 0]
    if out.shape != tuple(grid.source_dims):
        raise ShapeError(f"reconstructed shape {out.shape} differs from source {grid.source_dims}")
    return out


def level_energies(mat, levels: int = 3, filter_id: str = "haar") -> list:
    """Total coefficient energy after each analysis level (index 0 = input)."""
    h, g = _filters(filter_id)
    packet = np.asarray(mat, dtype=np.float64)[None, None]
    energies = [float(np.sum(packet ** 2))]
    for _ in range(levels):
        packet = _split(packet, h, g)
        energies.append(float(np.sum(packet ** 2)))
    return energies


def fuse_subbands(a: SubbandGrid, b: SubbandGrid) -> SubbandGrid:
    """Average the basebands; elsewhere keep the larger-magnitude coefficient.

    Ties in magnitude keep ``a``'s coefficient, so every detail coefficient
    of the result is taken verbatim from one of the inputs.
    """
    if a.bands.shape != b.bands.shape or a.filter_id != b.filter_id or a.levels != b.levels:
        raise ShapeError("cannot fuse sub-band grids with different shapes, filters or depths")
    fused = np.where(np.abs(b.bands) > np.abs(a.bands), b.bands, a.bands)
    fused[0, 0] = (a.bands[0, 0] + b.bands[0, 0]) / 2
    return SubbandGrid(fused, a.source_dims, a.filter_id, a.levels)


def crop_to_multiple(img, multiple: int = 8):
    """Center-crop so height and width are multiples of ``multiple``.

    Returns ``(cropped, (top, left))``.
    """
    img = as_image(img)
    h, w = img.shape[:2]
    hc, wc = h - h % multiple, w - w % multiple
    if hc == 0 or wc == 0:
        raise ShapeError(f"image {h}x{w} is smaller than {multiple} pixels")
    top, left = (h - hc) // 2, (w - wc) // 2
    return img[top:top + hc, left:left + wc], (top, left)


def decompose_image(img, levels: int = 3, filter_id: str = "haar") -> list:
    """One :class:`SubbandGrid` per channel."""
    img = as_image(img)
    return [packet_decompose(img[:, :, ch], levels, filter_id) for ch in range(img.shape[2])]


def reconstruct_image(grids) -> np.ndarray:
    return np.stack([packet_reconstruct(gr) for gr in grids], axis=-1)


def grid_montage(grid: SubbandGrid) -> np.ndarray:
    """Tile the bands into one ``[0, 255]`` matrix, each band min-max normalized."""
    n = grid.bands.shape[0]
    tiles = grid.bands.astype(np.float64).copy()
    lo = tiles.min(axis=(2, 3), keepdims=True)
    hi = tiles.max(axis=(2, 3), keepdims=True)
    span = np.where(hi > lo, hi - lo, 1.0)
    tiles = np.where(hi > lo, (tiles - lo) / span, 0.0) * 255.0
    bh, bw = tiles.shape[2:]
    return tiles.transpose(0, 2, 1, 3).reshape(n * bh, n * bw)
