import numpy as np

from wavemorph.synthetic import build_corpus, random_identity, render, upscale


def test_render_landmarks_in_frame():
    rng = np.random.default_rng(0)
    img, lm = render(random_identity(rng), 96, rng)
    assert img.shape == (96, 96, 3)
    lm.check_bounds(96, 96)
    assert np.all(img == np.round(img)) and img.min() >= 0 and img.max() <= 255


def test_render_deterministic():
    ident = random_identity(np.random.default_rng(1))
    a, _ = render(ident, 64, np.random.default_rng(2))
    b, _ = render(ident, 64, np.random.default_rng(2))
    assert a.tobytes() == b.tobytes()


def test_small_corpus():
    c = build_corpus(n_identities=4, n_bona_fide=3, n_morphs=4, size=64, seed=3)
    assert len(c.bona_fide) == 3 and len(c.morphs) == 4
    assert all(i != j for i, j in c.morph_sources)
    assert all(m.shape == (64, 64, 3) for m in c.morphs)


def test_upscale():
    x = np.random.default_rng(0).uniform(0, 255, (8, 8, 3))
    assert upscale(x, 4).shape == (32, 32, 3)
