"""Basic iterative method with a total-variation penalty on the perturbation.

Each step moves the image by ``beta * sign(grad)`` where ``grad`` is the
gradient of ``J(x, morph) - lambda * TV(x - x_orig)``, then projects the
cumulative perturbation into the L-inf ball of radius ``epsilon`` and
clips to the pixel range. Ascending the morph-class cross-entropy ``J``
pushes the detector away from the morph label.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .detector import MORPH
from .errors import ShapeError
from .image import as_image

TV_DELTA = 1e-8


class GradientOracle(Protocol):
    """Anything that can score an image and differentiate its loss."""

    def loss_and_gradient(self, img, label: int):
        """Return ``(loss, d loss / d img, p_morph)``."""


@dataclass(frozen=True)
class PerturbConfig:
    beta: float = 6.0
    epsilon: float = 2.0
    lam: float = 0.1
    iterations: int = 10
    pixel_range: tuple = (0.0, 255.0)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")
        lo, hi = self.pixel_range
        if lo > hi:
            raise ValueError(f"pixel range reversed: {self.pixel_range}")


@dataclass
class IterationRecord:
    iteration: int
    ce: float
    tv: float
    l_adv: float
    p_morph: float


@dataclass
class PerturbTrace:
    """Per-iteration record; entry ``k`` describes the image after ``k + 1`` steps."""

    records: list = field(default_factory=list)
    adversarial: np.ndarray | None = None
    linf: float = 0.0
    initial_p_morph: float = float("nan")

    @property
    def p_morph(self) -> float:
        return self.records[-1].p_morph

    @property
    def p_bonafide(self) -> float:
        return 1.0 - self.records[-1].p_morph

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "J", "TV", "L_adv", "p_morph"])
            for r in self.records:
                w.writerow([r.iteration, f"{r.ce:.10g}", f"{r.tv:.10g}", f"{r.l_adv:.10g}", f"{r.p_morph:.10g}"])


def _differences(r):
    dv = np.zeros_like(r)
    dh = np.zeros_like(r)
    dv[:-1] = r[:-1] - r[1:]
    dh[:, :-1] = r[:, :-1] - r[:, 1:]
    return dv, dh


def tv(residual) -> float:
    """Isotropic total variation summed over channels.

    Differences that would reach past the last row or column count as 0.
    """
    r = as_image(residual)
    dv, dh = _differences(r)
    return float(np.sum(np.sqrt(dv ** 2 + dh ** 2)))


def tv_gradient(residual, delta: float = TV_DELTA) -> np.ndarray:
    """Gradient of ``sum sqrt(dv**2 + dh**2 + delta**2)``, same shape as ``residual``."""
    shape = np.shape(residual)
    r = as_image(residual)
    dv, dh = _differences(r)
    norm = np.sqrt(dv ** 2 + dh ** 2 + delta ** 2)
    gv = dv / norm
    gh = dh / norm
    g = gv + gh
    g[1:] -= gv[:-1]
    g[:, 1:] -= gh[:, :-1]
    return g.reshape(shape)


def bim_step(x_adv, x_orig, grad, cfg: PerturbConfig) -> np.ndarray:
    x_adv = np.asarray(x_adv, dtype=np.float64)
    x_orig = np.asarray(x_orig, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if not x_adv.shape == x_orig.shape == grad.shape:
        raise ShapeError(f"shape mismatch: {x_adv.shape}, {x_orig.shape}, {grad.shape}")
    step = x_adv + cfg.beta * np.sign(grad) - x_orig
    out = x_orig + np.clip(step, -cfg.epsilon, cfg.epsilon)
    return np.clip(out, *cfg.pixel_range)


def perturb(morph, model: GradientOracle, cfg: PerturbConfig = PerturbConfig(), label: int = MORPH) -> PerturbTrace:
    """Run ``cfg.iterations`` BIM steps against ``model``.

    The cross-entropy is taken w.r.t. ``label`` (the morph class) and
    ascended, with ``cfg.lam`` weighting the TV penalty on ``x - morph``.
    """
    x0 = np.asarray(morph, dtype=np.float64)
    x = x0.copy()
    ce, g_ce, p_morph = model.loss_and_gradient(x, label)
    trace = PerturbTrace(initial_p_morph=p_morph)
    for k in range(cfg.iterations):
        grad = g_ce - cfg.lam * tv_gradient(x - x0)
        x = bim_step(x, x0, grad, cfg)
        ce, g_ce, p_morph = model.loss_and_gradient(x, label)
        t = tv(x - x0)
        trace.records.append(IterationRecord(k + 1, ce, t, ce - cfg.lam * t, p_morph))
    trace.adversarial = x
    trace.linf = float(np.max(np.abs(x - x0))) if x.size else 0.0
    if trace.linf > cfg.epsilon + 1e-9:
        raise AssertionError(f"L-inf budget violated: {trace.linf} > {cfg.epsilon}")
    return trace
