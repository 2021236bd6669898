"""End-to-end wavelet morph of two landmark-annotated face images."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import ShapeError
from .image import as_image, clip_pixels
from .wavelet import crop_to_multiple, decompose_image, fuse_subbands, reconstruct_image


@dataclass(frozen=True)
class MorphConfig:
    alpha: float = 0.5
    wavelet: str = "haar"
    levels: int = 3
    feather: float = 0.0


@dataclass
class MorphResult:
    raw_morph: np.ndarray
    on_source: np.ndarray
    on_destination: np.ndarray
    common_landmarks: geo.LandmarkSet
    hull: np.ndarray
    mask: np.ndarray
    crop_offset: tuple
    crop_shape: tuple


def generate_morph(img_i, img_j, lms_i: geo.LandmarkSet, lms_j: geo.LandmarkSet,
                   cfg: MorphConfig = MorphConfig()) -> MorphResult:
    """Warp both faces to their average landmarks, fuse in the packet domain, splice.

    The fused image covers the largest centered region whose sides are
    multiples of ``2**cfg.levels``; the few rows/columns outside that region
    are filled with the alpha blend of the two warped images. The
    reconstruction is clipped to ``[0, 255]`` and the hull of the common
    core landmarks is pasted onto each original frame.
    """
    img_i = as_image(img_i)
    img_j = as_image(img_j)
    if img_i.shape != img_j.shape:
        raise ShapeError(f"input images differ in shape: {img_i.shape} vs {img_j.shape}")
    h, w = img_i.shape[:2]
    lms_i.check_bounds(w, h)
    lms_j.check_bounds(w, h)

    common = geo.average_landmarks(lms_i, lms_j, cfg.alpha)
    src_i = geo.augment_boundary(lms_i, w, h)
    src_j = geo.augment_boundary(lms_j, w, h)
    target = geo.augment_boundary(common, w, h)
    mesh = geo.delaunay(target)
    warped_i = geo.warp_image(img_i, src_i, target, mesh)
    warped_j = geo.warp_image(img_j, src_j, target, mesh)

    crop_i, (top, left) = crop_to_multiple(warped_i, 2 ** cfg.levels)
    crop_j, _ = crop_to_multiple(warped_j, 2 ** cfg.levels)
    grids_i = decompose_image(crop_i, cfg.levels, cfg.wavelet)
    grids_j = decompose_image(crop_j, cfg.levels, cfg.wavelet)
    fused = reconstruct_image([fuse_subbands(a, b) for a, b in zip(grids_i, grids_j)])

    raw = clip_pixels((1.0 - cfg.alpha) * warped_i + cfg.alpha * warped_j)
    ch, cw = fused.shape[:2]
    raw[top:top + ch, left:left + cw] = clip_pixels(fused)

    hull = geo.convex_hull(common)
    mask = geo.hull_mask(hull, w, h, cfg.feather)
    return MorphResult(
        raw_morph=raw,
        on_source=geo.splice(raw, img_i, mask),
        on_destination=geo.splice(raw, img_j, mask),
        common_landmarks=common,
        hull=hull,
        mask=mask,
        crop_offset=(top, left),
        crop_shape=(ch, cw),
    )
