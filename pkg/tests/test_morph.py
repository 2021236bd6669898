import numpy as np
import pytest

from wavemorph.errors import ShapeError
from wavemorph.geometry import LandmarkSet
from wavemorph.morph import MorphConfig, generate_morph
from wavemorph.synthetic import random_identity, render


@pytest.fixture(scope="module")
def pair():
    rng = np.random.default_rng(11)
    a, b = random_identity(rng), random_identity(rng)
    ia, la = render(a, 100, rng)
    ib, lb = render(b, 100, rng)
    return ia, ib, la, lb


def test_self_morph_identity(pair):
    ia, _, la, _ = pair
    res = generate_morph(ia, ia, la, la)
    (top, left), (ch, cw) = res.crop_offset, res.crop_shape
    assert (ch, cw) == (96, 96)
    crop = np.s_[top:top + ch, left:left + cw]
    assert np.max(np.abs(res.raw_morph[crop] - ia[crop])) <= 1e-3


def test_constant_pair_averages(pair):
    _, _, la, _ = pair
    res = generate_morph(np.full((100, 100, 3), 100.0), np.full((100, 100, 3), 200.0), la, la)
    np.testing.assert_allclose(res.raw_morph, 150.0, atol=1e-9)


def test_outside_hull_untouched(pair):
    ia, ib, la, lb = pair
    res = generate_morph(ia, ib, la, lb)
    out = res.mask == 0
    assert out.any() and (~out).any()
    np.testing.assert_array_equal(res.on_source[out], ia[out])
    np.testing.assert_array_equal(res.on_destination[out], ib[out])
    inside = res.mask == 1
    np.testing.assert_array_equal(res.on_source[inside], res.raw_morph[inside])
    assert res.raw_morph.shape == res.on_source.shape == res.on_destination.shape == ia.shape
    assert res.raw_morph.min() >= 0 and res.raw_morph.max() <= 255


def test_deterministic(pair):
    ia, ib, la, lb = pair
    a = generate_morph(ia, ib, la, lb)
    b = generate_morph(ia, ib, la, lb)
    assert a.on_source.tobytes() == b.on_source.tobytes()


def test_db2_and_feather(pair):
    ia, ib, la, lb = pair
    res = generate_morph(ia, ib, la, lb, MorphConfig(wavelet="db2", feather=3.0))
    assert 0 < res.mask.mean() < 1
    assert np.any((res.mask > 0) & (res.mask < 1))


def test_shape_mismatch(pair):
    ia, _, la, lb = pair
    with pytest.raises(ShapeError):
        generate_morph(ia, ia[:90], la, lb)


def test_landmarks_out_of_frame(pair):
    ia, ib, la, lb = pair
    from wavemorph.errors import GeometryError
    with pytest.raises(GeometryError):
        generate_morph(ia, ib, LandmarkSet(la.points + 200), lb)
