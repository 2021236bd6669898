import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavemorph import detector as det
from wavemorph.errors import ShapeError
from wavemorph.perturb import PerturbConfig, bim_step, perturb, tv, tv_gradient


class LinearOracle:
    """J(x) = <w, x> with a frozen gradient field."""

    def __init__(self, w):
        self.w = w

    def loss_and_gradient(self, img, label):
        return float(np.sum(self.w * img)), self.w.copy(), 0.9


def test_tv_examples():
    assert tv(np.full((5, 5, 1), 3.0)) == 0.0
    assert tv(np.array([[0.0, 1.0], [0.0, 1.0]])) == 2.0
    r = np.random.default_rng(0).normal(size=(6, 7, 3))
    assert tv(2.5 * r) == pytest.approx(2.5 * tv(r))


def test_tv_hand_value_isotropic():
    # (0,0) has both a vertical and a horizontal difference; the others have one each
    r = np.array([[1.0, 2.0], [0.0, 5.0]])
    expected = np.sqrt((1 - 0) ** 2 + (1 - 2) ** 2) + abs(2 - 5) + abs(0 - 5)
    assert tv(r) == pytest.approx(expected)


def test_tv_gradient_constant_is_zero():
    assert np.max(np.abs(tv_gradient(np.full((8, 8, 1), 4.0)))) <= 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_tv_gradient_finite_differences(seed):
    r = np.random.default_rng(seed).normal(size=(8, 8, 1))
    g = tv_gradient(r)
    h = 1e-5
    for idx in np.ndindex(r.shape):
        rp, rm = r.copy(), r.copy()
        rp[idx] += h
        rm[idx] -= h
        num = (tv(rp) - tv(rm)) / (2 * h)
        assert abs(num - g[idx]) <= 1e-3 * max(abs(num), 1e-3)


def test_tv_gradient_locality():
    r = np.zeros((7, 7))
    r[3, 3] = 1.0
    g = tv_gradient(r)
    support = {tuple(i) for i in np.argwhere(np.abs(g) > 1e-6)}
    assert support <= {(3, 3), (2, 3), (4, 3), (3, 2), (3, 4)}
    assert (3, 3) in support and g.shape == r.shape


def test_bim_step_examples():
    cfg = PerturbConfig()
    x = np.full((3, 3, 1), 100.0)
    x[0, 0] = 254.0
    out = bim_step(x, x, np.ones_like(x), cfg)
    assert out[1, 1, 0] == 102.0 and out[0, 0, 0] == 255.0
    xa = x + np.random.default_rng(0).uniform(-5, 5, x.shape)
    np.testing.assert_array_equal(bim_step(xa, x, np.zeros_like(x), cfg), np.clip(x + np.clip(xa - x, -2, 2), 0, 255))
    zero = PerturbConfig(epsilon=0.0)
    assert bim_step(xa, x, np.ones_like(x), zero).tobytes() == x.tobytes()
    with pytest.raises(ShapeError):
        bim_step(x, x, np.ones((2, 2, 1)), cfg)


def test_config_validation():
    for bad in ({"beta": 0}, {"epsilon": -1}, {"lam": -0.1}, {"iterations": 0}, {"pixel_range": (5, 1)}):
        with pytest.raises(ValueError):
            PerturbConfig(**bad)


def small_model():
    m = det.DetectorModel.random(3)
    m.params["fc_b"] = np.array([-1.0, 1.0])
    return m


def test_one_iteration_no_tv_is_one_step():
    img = np.random.default_rng(1).uniform(10, 245, (20, 20, 3))
    m = small_model()
    cfg = PerturbConfig(iterations=1, lam=0.0)
    trace = perturb(img, m, cfg)
    _, g = det.loss_and_input_gradient(m, img, det.MORPH)
    np.testing.assert_array_equal(trace.adversarial, bim_step(img, img, g, cfg))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0, 1.0))
def test_budget_and_range_every_iteration(seed, lam):
    rng = np.random.default_rng(seed)
    img = np.round(rng.uniform(0, 255, (12, 12, 1)))
    oracle = LinearOracle(rng.normal(size=img.shape))
    x = img.copy()
    cfg = PerturbConfig(lam=lam, iterations=4)
    for _ in range(cfg.iterations):
        x = bim_step(x, img, oracle.w - lam * tv_gradient(x - img), cfg)
        assert np.max(np.abs(x - img)) <= cfg.epsilon + 1e-9
        assert x.min() >= 0 and x.max() <= 255
    trace = perturb(img, oracle, cfg)
    assert len(trace.records) == 4 and trace.linf <= 2 + 1e-9


def test_linear_loss_non_decreasing():
    rng = np.random.default_rng(2)
    img = rng.uniform(50, 200, (10, 10, 1))
    oracle = LinearOracle(rng.normal(size=img.shape))
    trace = perturb(img, oracle, PerturbConfig(beta=0.5, epsilon=2.0, lam=0.0, iterations=8))
    ce = [r.ce for r in trace.records]
    assert all(b >= a - 1e-9 for a, b in zip(ce, ce[1:]))
    assert ce[-1] == pytest.approx(float(np.sum(oracle.w * img) + 2 * np.abs(oracle.w).sum()))


def test_trace_and_csv(tmp_path):
    img = np.random.default_rng(3).uniform(0, 255, (16, 16, 3))
    m = small_model()
    a = perturb(img, m)
    b = perturb(img, m)
    assert a.adversarial.tobytes() == b.adversarial.tobytes()
    assert len(a.records) == 10
    r = a.records[-1]
    assert r.l_adv == pytest.approx(r.ce - 0.1 * r.tv)
    assert a.p_bonafide == pytest.approx(1 - a.p_morph)
    a.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["iteration", "J", "TV", "L_adv", "p_morph"] and len(rows) == 11


def test_zero_budget_returns_input():
    img = np.random.default_rng(4).uniform(0, 255, (16, 16, 1))
    trace = perturb(img, small_model(), PerturbConfig(epsilon=0.0))
    assert trace.adversarial.tobytes() == img.tobytes() and trace.linf == 0.0
