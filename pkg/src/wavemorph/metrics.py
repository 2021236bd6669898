"""Image similarity, embedding distances and ROC analysis."""
from __future__ import annotations

import csv
import os
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DataError, GeometryError, ShapeError
from .geometry import hull_mask
from .image import as_image, save_image, to_gray
from .wavelet import packet_decompose

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-x ** 2 / (2 * sigma ** 2))
    return w / w.sum()


def _blur(x, w):
    return correlate1d(correlate1d(x, w, axis=0, mode="reflect"), w, axis=1, mode="reflect")


def ssim_map(a, b) -> np.ndarray:
    """Per-pixel SSIM of the luma of ``a`` and ``b``.

    Local statistics use an 11x11 Gaussian window (sigma 1.5) with
    reflected borders, so the map has the input's height and width.
    """
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    x, y = to_gray(a), to_gray(b)
    w = _gaussian_window()
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    mx, my = _blur(x, w), _blur(y, w)
    sxx = _blur(x * x, w) - mx * mx
    syy = _blur(y * y, w) - my * my
    sxy = _blur(x * y, w) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(a, b) -> float:
    """Mean of :func:`ssim_map`."""
    return float(np.mean(ssim_map(a, b)))


def hull_crop(img, hull) -> np.ndarray:
    """Bounding box of ``hull`` with out-of-hull pixels set to the in-hull mean (per channel)."""
    img = as_image(img)
    h, w = img.shape[:2]
    poly = np.asarray(hull, dtype=np.float64)
    x0 = max(int(np.floor(poly[:, 0].min())), 0)
    x1 = min(int(np.ceil(poly[:, 0].max())), w - 1)
    y0 = max(int(np.floor(poly[:, 1].min())), 0)
    y1 = min(int(np.ceil(poly[:, 1].max())), h - 1)
    if x0 > x1 or y0 > y1:
        raise GeometryError("hull lies outside the image")
    mask = hull_mask(poly - [x0, y0], x1 - x0 + 1, y1 - y0 + 1) > 0.5
    if not mask.any():
        raise GeometryError("hull contains no pixel centers")
    crop = img[y0:y1 + 1, x0:x1 + 1].copy()
    mean = crop[mask].mean(axis=0)
    crop[~mask] = mean
    return crop


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, img) -> np.ndarray:
        ...


class ToyEmbeddingProvider:
    """Unit-normalized 8x8 Haar baseband of the 64x64 luma thumbnail.

    An all-zero baseband (a black image) embeds as the zero vector.
    """

    dimension = 64

    def embed(self, img) -> np.ndarray:
        from .detector import _resize_matrix  # shared bilinear resampler

        gray = to_gray(img)
        thumb = _resize_matrix(gray.shape[0]) @ gray @ _resize_matrix(gray.shape[1]).T
        v = packet_decompose(thumb, 3, "haar").baseband.ravel()
        n = np.linalg.norm(v)
        return v / n if n > 0 else v


class SubprocessEmbeddingProvider:
    """Runs ``command + [image.png]`` and reads one line of space-separated reals."""

    def __init__(self, command, dimension: int | None = None, timeout: float = 120.0):
        self.command = list(command)
        self.dimension = dimension
        self.timeout = timeout

    def embed(self, img) -> np.ndarray:
        fd, path = tempfile.mkstemp(suffix=".png")
        os.close(fd)
        try:
            save_image(np.clip(as_image(img), 0, 255), path)
            proc = subprocess.run(self.command + [path], capture_output=True, text=True,
                                  timeout=self.timeout, check=False)
        finally:
            os.unlink(path)
        if proc.returncode != 0:
            raise RuntimeError(f"embedding command failed ({proc.returncode}): {proc.stderr.strip()}")
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != 1:
            raise RuntimeError(f"embedding command must print exactly one line, got {len(lines)}")
        vec = np.array([float(t) for t in lines[0].split()])
        if self.dimension is None:
            self.dimension = len(vec)
        elif len(vec) != self.dimension:
            raise RuntimeError(f"embedding has {len(vec)} values, expected {self.dimension}")
        return vec


def embedding_distance(provider: EmbeddingProvider, a, b) -> float:
    return float(np.linalg.norm(provider.embed(a) - provider.embed(b)))


@dataclass
class ScoreSet:
    """Scores with binary labels; ``1`` marks the positive class.

    ``positive`` names what the positive class means, e.g. ``"morph"``.
    """

    scores: np.ndarray
    labels: np.ndarray
    positive: str = "morph"

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(bool)
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise ShapeError("scores and labels must be 1-D arrays of equal length")
        if not np.all(np.isfinite(self.scores)):
            raise DataError("scores must be finite")

    def validate(self) -> None:
        if self.labels.all() or not self.labels.any():
            raise DataError("ROC analysis needs at least one positive and one negative entry")


def roc(scores: ScoreSet) -> np.ndarray:
    """``(FPR, TPR)`` points of the threshold sweep, from ``(0, 0)`` to ``(1, 1)``.

    A sample is called positive when its score is at least the threshold.
    Thresholds run over the distinct scores in decreasing order, so tied
    scores enter the curve together as one diagonal segment.
    """
    scores.validate()
    order = np.argsort(-scores.scores, kind="stable")
    s = scores.scores[order]
    lab = scores.labels[order]
    tp = np.cumsum(lab)
    fp = np.cumsum(~lab)
    last = np.r_[s[1:] != s[:-1], True]
    tpr = np.r_[0.0, tp[last] / tp[-1]]
    fpr = np.r_[0.0, fp[last] / fp[-1]]
    return np.column_stack([fpr, tpr])


def auc(curve) -> float:
    """Trapezoidal area under a ROC curve."""
    c = np.asarray(curve, dtype=np.float64)
    return float(np.sum(np.diff(c[:, 0]) * (c[1:, 1] + c[:-1, 1]) / 2))


def detector_scoreset(model, bona_fide, morphs) -> ScoreSet:
    """Morph-class probabilities; positives are morphs."""
    from .detector import MORPH, predict_batch

    probs = predict_batch(model, list(bona_fide) + list(morphs))[:, MORPH]
    labels = np.r_[np.zeros(len(bona_fide)), np.ones(len(morphs))]
    return ScoreSet(probs, labels, positive="morph")


def verifier_scoreset(provider: EmbeddingProvider, references, genuines, morphs) -> ScoreSet:
    """Embedding distances to a reference; positives are morphs.

    ``references[k]`` is compared with ``genuines[k]`` (negative pair) and
    with ``morphs[k]`` (positive pair). Larger distance means "morph".
    """
    if not len(references) == len(genuines) == len(morphs):
        raise ShapeError("references, genuines and morphs must have equal length")
    neg = [embedding_distance(provider, r, g) for r, g in zip(references, genuines)]
    pos = [embedding_distance(provider, r, m) for r, m in zip(references, morphs)]
    return ScoreSet(np.r_[neg, pos], np.r_[np.zeros(len(neg)), np.ones(len(pos))], positive="morph")


_TRUE = {"1", "pos", "positive", "true", "morph", "yes"}
_FALSE = {"0", "neg", "negative", "false", "bona_fide", "bonafide", "no"}


def read_scores_csv(path, positive: str = "morph") -> ScoreSet:
    """Read a ``score,label`` CSV; labels may be 1/0, pos/neg, true/false or morph/bona_fide."""
    scores, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"score", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected a header with 'score' and 'label' columns")
        for lineno, row in enumerate(reader, start=2):
            lab = row["label"].strip().lower()
            if lab in _TRUE:
                labels.append(1)
            elif lab in _FALSE:
                labels.append(0)
            else:
                raise DataError(f"{path}:{lineno}: unrecognized label {row['label']!r}")
            try:
                scores.append(float(row["score"]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad score {row['score']!r}") from exc
    return ScoreSet(np.array(scores), np.array(labels), positive=positive)


def write_scores_csv(scores: ScoreSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["score", "label"])
        for s, lab in zip(scores.scores, scores.labels):
            w.writerow([repr(float(s)), int(lab)])


def write_roc_csv(curve, area: float, path, positive: str = "morph") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# positive={positive} auc={area:.6f}\n")
        fh.write("fpr,tpr\n")
        for f, t in curve:
            fh.write(f"{f:.10g},{t:.10g}\n")


def roc_svg(curve, area: float, positive: str = "morph", size: int = 320) -> str:
    """A minimal SVG plot of the curve and the chance diagonal."""
    pad = 40
    span = size - 2 * pad

    def xy(f, t):
        return f"{pad + f * span:.2f},{size - pad - t * span:.2f}"

    pts = " ".join(xy(f, t) for f, t in curve)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n'
        f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="black"/>\n'
        f'<polyline points="{xy(0, 0)} {xy(1, 1)}" fill="none" stroke="gray" stroke-dasharray="4 4"/>\n'
        f'<polyline points="{pts}" fill="none" stroke="blue" stroke-width="2"/>\n'
        f'<text x="{pad}" y="{pad - 12}" font-size="12">ROC (positive={positive}) AUC={area:.4f}</text>\n'
        f'<text x="{size / 2 - 10}" y="{size - 10}" font-size="12">FPR</text>\n'
        f'<text x="6" y="{size / 2}" font-size="12">TPR</text>\n'
        "</svg>\n"
    )
