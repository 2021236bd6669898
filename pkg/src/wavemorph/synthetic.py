"""Synthetic face-like images with exact 68-point landmarks.

Faces are drawn from a small parametric model (head ellipse, brows, eyes,
nose, mouth) whose landmarks follow the common 68-point layout: jaw 0-16,
brows 17-26, nose 27-35, eyes 36-47, mouth 48-67. Identities fix the
geometry, skin tone and a skin texture; each capture of an identity adds
pose jitter, lighting and sensor noise. Used to build desk-scale corpora
for detector training and attack experiments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage, ImageDraw
from scipy.ndimage import gaussian_filter, zoom

from .geometry import LandmarkSet
from .morph import MorphConfig, generate_morph

_SS = 4  # supersampling factor for anti-aliased shapes


@dataclass(frozen=True)
class Identity:
    seed: int
    face_w: float
    face_h: float
    eye_dx: float
    eye_y: float
    eye_w: float
    eye_h: float
    brow_gap: float
    nose_len: float
    nose_w: float
    mouth_y: float
    mouth_w: float
    lip_h: float
    skin: tuple
    hair: tuple
    background: tuple


def random_identity(rng: np.random.Generator) -> Identity:
    skin = rng.uniform([150, 105, 85], [235, 190, 165])
    return Identity(
        seed=int(rng.integers(2 ** 31)),
        face_w=rng.uniform(0.27, 0.33),
        face_h=rng.uniform(0.36, 0.42),
        eye_dx=rng.uniform(0.10, 0.13),
        eye_y=rng.uniform(-0.06, -0.02),
        eye_w=rng.uniform(0.055, 0.075),
        eye_h=rng.uniform(0.018, 0.028),
        brow_gap=rng.uniform(0.045, 0.065),
        nose_len=rng.uniform(0.11, 0.15),
        nose_w=rng.uniform(0.035, 0.05),
        mouth_y=rng.uniform(0.20, 0.24),
        mouth_w=rng.uniform(0.07, 0.10),
        lip_h=rng.uniform(0.015, 0.025),
        skin=tuple(skin),
        hair=tuple(rng.uniform(20, 110, size=3)),
        background=tuple(rng.uniform(120, 230, size=3)),
    )


def landmarks_for(ident: Identity, size: int, dx: float = 0.0, dy: float = 0.0, scale: float = 1.0) -> np.ndarray:
    """The 68 landmark coordinates of ``ident`` in a ``size`` x ``size`` frame."""
    s = size * scale
    cx, cy = size / 2 + dx, size / 2 + dy
    pts = []
    t = np.pi - np.arange(17) * np.pi / 16
    pts += list(zip(cx + ident.face_w * s * np.cos(t), cy + ident.face_h * s * 0.15 + ident.face_h * s * 0.85 * np.sin(t)))
    ey = cy + ident.eye_y * s
    by = ey - ident.brow_gap * s
    for side in (-1, 1):
        ex = cx + side * ident.eye_dx * s
        xs = ex + np.linspace(-1.1, 1.1, 5) * ident.eye_w * s
        arch = by - 0.35 * ident.brow_gap * s * (1 - np.linspace(-1, 1, 5) ** 2)
        pts += list(zip(xs, arch))
    nb = np.linspace(0, 1, 4)
    pts += [(cx, ey + f * ident.nose_len * s * 0.85) for f in nb]
    ny = ey + ident.nose_len * s
    pts += [(cx + f * ident.nose_w * s, ny - (1 - abs(f)) * 0.012 * s) for f in np.linspace(-1, 1, 5)]
    for side in (-1, 1):
        ex = cx + side * ident.eye_dx * s
        w2, h2 = ident.eye_w * s, ident.eye_h * s
        ang = np.array([np.pi, 2 * np.pi / 3, np.pi / 3, 0, -np.pi / 3, -2 * np.pi / 3])
        pts += list(zip(ex + w2 * np.cos(ang), ey - h2 * np.sin(ang)))
    my = cy + ident.mouth_y * s
    mw, lh = ident.mouth_w * s, ident.lip_h * s
    ang = np.pi - np.arange(12) * 2 * np.pi / 12
    pts += list(zip(cx + mw * np.cos(ang), my - lh * np.sin(ang) * np.where(np.sin(ang) > 0, 1.0, 1.3)))
    ang = np.pi - np.arange(8) * 2 * np.pi / 8
    pts += list(zip(cx + 0.8 * mw * np.cos(ang), my - 0.35 * lh * np.sin(ang)))
    return np.array(pts)


def _mask(size, draw_fn) -> np.ndarray:
    im = PILImage.new("L", (size * _SS, size * _SS), 0)
    draw_fn(ImageDraw.Draw(im), _SS)
    arr = np.asarray(im, dtype=np.float64) / 255.0
    return arr.reshape(size, _SS, size, _SS).mean(axis=(1, 3))


def _poly(pts, k):
    return [(float(x * k + k / 2), float(y * k + k / 2)) for x, y in pts]


def _texture(seed: int, size: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    coarse = gaussian_filter(rng.normal(size=(size, size)), 6.0)
    fine = gaussian_filter(rng.normal(size=(size, size)), 1.2)
    return 60 * coarse + 10 * fine


def render(ident: Identity, size: int = 128, rng: np.random.Generator | None = None, jitter: bool = True,
           noise_sigma: float | None = None):
    """Render one capture of ``ident``; returns ``(image, LandmarkSet)``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if jitter:
        dx, dy = rng.uniform(-0.02, 0.02, size=2) * size
        scale = rng.uniform(0.97, 1.03)
        light = rng.uniform(0.9, 1.1)
    else:
        dx = dy = 0.0
        scale = light = 1.0
    sigma = rng.uniform(1.5, 4.0) if noise_sigma is None else noise_sigma
    lm = landmarks_for(ident, size, dx, dy, scale)
    s = size * scale
    cx, cy = size / 2 + dx, size / 2 + dy

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    bg = np.array(ident.background)
    img = bg[None, None, :] * (0.85 + 0.15 * (1 - yy / size))[:, :, None]

    fw, fh = ident.face_w * s, ident.face_h * s
    top = cy - fh * 1.05
    bottom = cy + fh
    head = _mask(size, lambda d, k: d.ellipse(
        [(cx - fw * 1.02) * k, top * k, (cx + fw * 1.02) * k, bottom * k], fill=255))
    hair = _mask(size, lambda d, k: d.ellipse(
        [(cx - fw * 1.12) * k, (top - 0.06 * s) * k, (cx + fw * 1.12) * k, (cy + 0.05 * s) * k], fill=255))
    hair = np.clip(hair - head * (yy > cy - fh * 0.55), 0, 1)
    shade = np.clip(1.0 - 0.35 * (((xx - cx) / fw) ** 2 + ((yy - cy) / fh) ** 2), 0.55, 1.0)
    tex = _texture(ident.seed, size)
    skin = np.array(ident.skin)[None, None, :] * shade[:, :, None] * light + tex[:, :, None] * 0.4
    img = img * (1 - hair[:, :, None]) + np.array(ident.hair)[None, None, :] * hair[:, :, None]
    img = img * (1 - head[:, :, None]) + skin * head[:, :, None]

    def paint(mask, color, strength=1.0):
        nonlocal img
        m = (mask * strength)[:, :, None]
        img = img * (1 - m) + np.array(color)[None, None, :] * m

    skin_dark = tuple(0.55 * np.array(ident.skin))
    for a, b in ((17, 22), (22, 27)):
        brow = lm[a:b]
        paint(_mask(size, lambda d, k, p=brow: d.line(_poly(p, k), fill=255, width=max(1, int(0.018 * s * k)))),
              ident.hair, 0.9)
    for a in (36, 42):
        eye = lm[a:a + 6]
        paint(_mask(size, lambda d, k, p=eye: d.polygon(_poly(p, k), fill=255)), (245, 245, 240))
        c = eye.mean(axis=0)
        r = ident.eye_h * s * 0.95
        paint(_mask(size, lambda d, k, c=c, r=r: d.ellipse(
            [(c[0] - r) * k, (c[1] - r) * k, (c[0] + r) * k, (c[1] + r) * k], fill=255)) *
              _mask(size, lambda d, k, p=eye: d.polygon(_poly(p, k), fill=255)), (50, 35, 30))
        paint(_mask(size, lambda d, k, p=eye: d.line(_poly(list(p) + [p[0]], k), fill=255, width=k)), (40, 30, 30), 0.8)
    paint(_mask(size, lambda d, k: d.line(_poly(lm[27:31], k), fill=255, width=max(1, int(0.01 * s * k)))), skin_dark, 0.35)
    paint(_mask(size, lambda d, k: d.line(_poly(lm[31:36], k), fill=255, width=max(1, int(0.012 * s * k)))), skin_dark, 0.7)
    lip = (0.75 * ident.skin[0] + 30, 0.45 * ident.skin[1], 0.5 * ident.skin[2])
    paint(_mask(size, lambda d, k: d.polygon(_poly(lm[48:60], k), fill=255)), lip, 0.9)
    paint(_mask(size, lambda d, k: d.line(_poly(list(lm[60:68]) + [lm[60]], k), fill=255, width=k)), (70, 30, 30), 0.8)

    img = img + rng.normal(scale=sigma, size=img.shape)
    img = np.clip(np.floor(img + 0.5), 0, 255)
    return img, LandmarkSet(lm)


@dataclass
class DeskCorpus:
    bona_fide: list
    morphs: list
    morph_sources: list
    identities: list


def build_corpus(n_identities: int = 24, n_bona_fide: int = 600, n_morphs: int = 600, size: int = 64,
                 seed: int = 0, cfg: MorphConfig = MorphConfig()) -> DeskCorpus:
    """Bona fide captures plus wavelet morphs of random identity pairs.

    Each morph pair uses fresh captures of both identities; the spliced
    on-source and on-destination images alternate so both variants appear.
    """
    rng = np.random.default_rng(seed)
    idents = [random_identity(rng) for _ in range(n_identities)]
    bona = []
    for k in range(n_bona_fide):
        img, _ = render(idents[k % n_identities], size, rng)
        bona.append(img)
    morphs, sources = [], []
    while len(morphs) < n_morphs:
        i, j = rng.choice(n_identities, size=2, replace=False)
        img_i, lm_i = render(idents[i], size, rng)
        img_j, lm_j = render(idents[j], size, rng)
        res = generate_morph(img_i, img_j, lm_i, lm_j, cfg)
        out = res.on_source if len(morphs) % 2 == 0 else res.on_destination
        morphs.append(np.clip(np.floor(out + 0.5), 0, 255))
        sources.append((int(i), int(j)))
    return DeskCorpus(bona, morphs, sources, idents)


def upscale(img, factor: int) -> np.ndarray:
    """Bilinear upscaling helper for building large test frames."""
    return np.clip(zoom(np.asarray(img, float), (factor, factor, 1), order=1), 0, 255)
