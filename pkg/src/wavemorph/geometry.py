"""Landmarks, triangulation, piecewise-affine warping and hull splicing.

Points are ``(x, y)`` pixel coordinates with the origin at the top-left
pixel center, ``x`` growing to the right (columns) and ``y`` growing downward
(rows). "Counterclockwise" below refers to a positive signed area
``cross(b - a, c - a) > 0`` computed directly on ``(x, y)``; on screen, with
``y`` pointing down, such a polygon appears clockwise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay as _QhullDelaunay

from .errors import GeometryError, ShapeError, StateError
from .image import as_image, bilinear_sample_many

CORE_LANDMARKS = 68
BOUNDARY_POINTS = 8


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered landmark coordinates, optionally followed by 8 frame points."""

    points: np.ndarray
    augmented: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ShapeError(f"landmark points must have shape (N, 2), got {pts.shape}")
        expected = CORE_LANDMARKS + (BOUNDARY_POINTS if self.augmented else 0)
        if pts.shape[0] != expected:
            raise ShapeError(f"expected {expected} landmark points, got {pts.shape[0]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def core(self) -> np.ndarray:
        return self.points[:CORE_LANDMARKS]

    def check_bounds(self, width: int, height: int) -> None:
        c = self.core
        if c[:, 0].min() < 0 or c[:, 1].min() < 0 or c[:, 0].max() > width - 1 or c[:, 1].max() > height - 1:
            raise GeometryError(f"landmarks fall outside the {width}x{height} frame")


def load_landmarks(path):
    """Read a landmark JSON file; returns ``(LandmarkSet, width, height)``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        width, height, points = int(doc["width"]), int(doc["height"]), doc["points"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeError(f"{path}: landmark file needs integer 'width', 'height' and a 'points' list") from exc
    lms = LandmarkSet(np.asarray(points, dtype=np.float64))
    lms.check_bounds(width, height)
    return lms, width, height


def save_landmarks(lms: LandmarkSet, width: int, height: int, path) -> None:
    doc = {"width": int(width), "height": int(height), "points": lms.core.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _points(obj) -> np.ndarray:
    if isinstance(obj, LandmarkSet):
        return obj.points
    pts = np.asarray(obj, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError(f"points must have shape (N, 2), got {pts.shape}")
    return pts


def average_landmarks(a: LandmarkSet, b: LandmarkSet, alpha: float = 0.5) -> LandmarkSet:
    """Convex combination ``(1 - alpha) * a + alpha * b`` of two landmark sets."""
    if a.augmented != b.augmented or len(a) != len(b):
        raise ShapeError(f"landmark sets differ: {len(a)} vs {len(b)} points")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return LandmarkSet((1.0 - alpha) * a.points + alpha * b.points, a.augmented)


def frame_points(width: int, height: int) -> np.ndarray:
    """Four corners then the top, bottom, left and right edge midpoints."""
    xr, yb = width - 1.0, height - 1.0
    return np.array([
        [0.0, 0.0], [xr, 0.0], [0.0, yb], [xr, yb],
        [xr / 2, 0.0], [xr / 2, yb], [0.0, yb / 2], [xr, yb / 2],
    ])


def augment_boundary(lms: LandmarkSet, width: int, height: int) -> LandmarkSet:
    if lms.augmented:
        raise StateError("landmark set is already augmented with frame points")
    return LandmarkSet(np.vstack([lms.points, frame_points(width, height)]), augmented=True)


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])


def _incircle(a, b, c, d):
    """Positive when ``d`` is strictly inside the circumcircle of CCW triangle ``abc``."""
    m = np.array([
        [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
        [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
        [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
    ])
    return float(np.linalg.det(m))


def _canonical(tris: np.ndarray, pts: np.ndarray) -> np.ndarray:
    tris = np.array(tris, dtype=np.intp)
    area = _cross(pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]])
    tris[area < 0] = tris[area < 0][:, [0, 2, 1]]
    shift = np.argmin(tris, axis=1)
    rows = np.arange(len(tris))[:, None]
    tris = tris[rows, (shift[:, None] + np.arange(3)) % 3]
    order = np.lexsort(tris.T[::-1])
    return tris[order]


def _lex_rank(pts: np.ndarray) -> np.ndarray:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    rank = np.empty(len(pts), dtype=np.intp)
    rank[order] = np.arange(len(pts))
    return rank


def delaunay(points) -> np.ndarray:
    """Delaunay triangulation as an ``(T, 3)`` array of point indices.

    Triangles are counterclockwise, start at their smallest index, and are
    sorted lexicographically. Where four points are cocircular, the shared
    diagonal is the one incident to the lexicographically smallest ``(x, y)``
    of the four, so the output does not depend on the underlying
    triangulator's choice.
    """
    pts = _points(points)
    n = len(pts)
    if n < 3:
        raise GeometryError(f"need at least 3 points, got {n}")
    if len(np.unique(pts, axis=0)) != n:
        raise GeometryError("duplicate points in triangulation input")
    extent = float(np.ptp(pts, axis=0).max())
    centered = pts - pts.mean(axis=0)
    if extent == 0 or np.linalg.matrix_rank(centered, tol=1e-12 * extent) < 2:
        raise GeometryError("points are collinear")
    try:
        tris = _QhullDelaunay(pts).simplices
    except Exception as exc:  # qhull raises its own error type
        raise GeometryError(f"triangulation failed: {exc}") from exc
    tris = _legalize(_canonical(tris, pts), pts, extent)
    area = _cross(pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]])
    if np.any(area <= 1e-12 * extent * extent):
        raise GeometryError("triangulation produced a degenerate triangle")
    return tris


def _legalize(tris: np.ndarray, pts: np.ndarray, extent: float) -> np.ndarray:
    tol = 1e-10 * extent ** 4
    rank = _lex_rank(pts)
    tris = [list(t) for t in tris]
    for _ in range(10 * len(tris) + 10):
        edges = {}
        for ti, t in enumerate(tris):
            for k in range(3):
                e = tuple(sorted((t[k], t[(k + 1) % 3])))
                edges.setdefault(e, []).append(ti)
        flipped = False
        for (u, v), owners in sorted(edges.items()):
            if len(owners) != 2:
                continue
            t1, t2 = owners
            a = next(p for p in tris[t1] if p not in (u, v))
            b = next(p for p in tris[t2] if p not in (u, v))
            # triangle (u, v, a) made CCW for the incircle sign
            p, q = (u, v) if _cross(pts[u], pts[v], pts[a]) > 0 else (v, u)
            s = _incircle(pts[p], pts[q], pts[a], pts[b])
            if s > tol:
                flip = True
            elif s < -tol:
                flip = False
            else:
                # convex quad only; a flip across a reflex vertex would fold
                convex = _cross(pts[a], pts[b], pts[u]) * _cross(pts[a], pts[b], pts[v]) < 0
                lowest = min((u, v, a, b), key=lambda i: rank[i])
                flip = convex and lowest in (a, b)
            if flip:
                tris[t1] = [a, b, u]
                tris[t2] = [a, b, v]
                flipped = True
                break
        if not flipped:
            return _canonical(np.array(tris), pts)
    raise GeometryError("triangulation legalization did not converge")


def affine_from_triangles(src, dst) -> np.ndarray:
    """The 2x3 matrix ``M`` with ``M @ [x, y, 1] = dst_k`` for each source vertex."""
    src = np.asarray(src, dtype=np.float64).reshape(3, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(3, 2)
    scale = max(float(np.ptp(src, axis=0).max()), 1e-300)
    if abs(_cross(src[0], src[1], src[2])) <= 1e-12 * scale * scale:
        raise GeometryError("source triangle is degenerate; affine map is singular")
    a = np.hstack([src, np.ones((3, 1))])
    return np.linalg.solve(a, dst).T


def warp_image(img, src_lms, dst_lms, mesh) -> np.ndarray:
    """Piecewise-affine warp taking ``src_lms`` positions onto ``dst_lms``.

    Each output pixel is located in a triangle of ``mesh`` (indices into
    ``dst_lms``), mapped back into the source image through that
    triangle's inverse affine transform, and bilinearly sampled there.
    Pixels on an edge shared by two triangles take the first triangle in
    mesh order; both transforms agree along the edge.
    """
    img = as_image(img)
    h, w, _ = img.shape
    src = _points(src_lms)
    dst = _points(dst_lms)
    if src.shape != dst.shape:
        raise ShapeError(f"landmark sets differ: {src.shape} vs {dst.shape}")
    mesh = np.asarray(mesh, dtype=np.intp)
    owner = np.full((h, w), -1, dtype=np.intp)
    map_x = np.zeros((h, w))
    map_y = np.zeros((h, w))
    for ti, tri in enumerate(mesh):
        d = dst[tri]
        x_lo = max(int(np.floor(d[:, 0].min())), 0)
        x_hi = min(int(np.ceil(d[:, 0].max())), w - 1)
        y_lo = max(int(np.floor(d[:, 1].min())), 0)
        y_hi = min(int(np.ceil(d[:, 1].max())), h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        ys, xs = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
        free = owner[y_lo:y_hi + 1, x_lo:x_hi + 1] < 0
        if not free.any():
            continue
        xs = xs[free].astype(np.float64)
        ys = ys[free].astype(np.float64)
        bary = _barycentric(d, xs, ys)
        inside = np.all(bary >= -1e-9, axis=0)
        if not inside.any():
            continue
        bary = bary[:, inside]
        yi = ys[inside].astype(np.intp)
        xi = xs[inside].astype(np.intp)
        s = src[tri]
        owner[yi, xi] = ti
        map_x[yi, xi] = bary[0] * s[0, 0] + bary[1] * s[1, 0] + bary[2] * s[2, 0]
        map_y[yi, xi] = bary[0] * s[0, 1] + bary[1] * s[1, 1] + bary[2] * s[2, 1]
    if np.any(owner < 0):
        missing = int(np.count_nonzero(owner < 0))
        raise RuntimeError(f"warp invariant violated: {missing} pixels are not covered by the mesh")
    return bilinear_sample_many(img, map_x, map_y)


def _barycentric(tri, xs, ys):
    (x1, y1), (x2, y2), (x3, y3) = tri
    det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    l1 = ((y2 - y3) * (xs - x3) + (x3 - x2) * (ys - y3)) / det
    l2 = ((y3 - y1) * (xs - x3) + (x1 - x3) * (ys - y3)) / det
    return np.stack([l1, l2, 1.0 - l1 - l2])


def convex_hull(points) -> np.ndarray:
    """Counterclockwise hull vertices without collinear points (monotone chain).

    For a :class:`LandmarkSet` only the 68 core points are used.
    """
    pts = points.core if isinstance(points, LandmarkSet) else _points(points)
    if len(pts) < 3:
        raise GeometryError(f"need at least 3 points, got {len(pts)}")
    uniq = np.unique(pts, axis=0)  # sorted by x then y
    pts_list = [tuple(p) for p in uniq]

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2 and _cross2(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts_list)
    upper = half(reversed(pts_list))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise GeometryError("points are collinear; hull is degenerate")
    return np.array(hull)


def _cross2(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull_mask(poly, width: int, height: int, feather: float = 0.0) -> np.ndarray:
    """Rasterize a convex CCW polygon onto the pixel grid.

    Pixel centers inside or on the polygon get 1, others 0. With
    ``feather > 0`` the value ramps linearly from 0 at the boundary to 1 at
    distance ``feather`` inside it, so pixels outside stay exactly 0.
    """
    poly = np.asarray(poly, dtype=np.float64)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    a = poly
    b = np.roll(poly, -1, axis=0)
    edge = b - a
    length = np.hypot(edge[:, 0], edge[:, 1])
    keep = length > 0
    a, edge, length = a[keep], edge[keep], length[keep]
    if len(a) < 3:
        return np.zeros((height, width))
    # signed distance to each edge line, positive on the interior side
    dist = (edge[:, 0, None, None] * (ys - a[:, 1, None, None])
            - edge[:, 1, None, None] * (xs - a[:, 0, None, None])) / length[:, None, None]
    inner = dist.min(axis=0)
    if feather > 0:
        return np.clip(inner / feather, 0.0, 1.0)
    return (inner >= -1e-9).astype(np.float64)


def splice(morph, background, mask) -> np.ndarray:
    """Blend ``mask * morph + (1 - mask) * background`` per channel."""
    morph = as_image(morph)
    background = as_image(background)
    mask = np.asarray(mask, dtype=np.float64)
    if morph.shape != background.shape or mask.shape != morph.shape[:2]:
        raise ShapeError(f"shape mismatch: morph {morph.shape}, background {background.shape}, mask {mask.shape}")
    m = mask[:, :, None]
    return m * morph + (1.0 - m) * background
