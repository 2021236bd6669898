import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavemorph.errors import DataError, GeometryError, ShapeError
from wavemorph.metrics import (ScoreSet, SubprocessEmbeddingProvider, ToyEmbeddingProvider, auc, detector_scoreset,
                               embedding_distance, hull_crop, read_scores_csv, roc, roc_svg, ssim, ssim_map,
                               verifier_scoreset, write_roc_csv, write_scores_csv)


def pairwise_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def ssim_at(x, y, i, j):
    """Direct weighted sums over the 11x11 window around (i, j) with symmetric padding."""
    k = np.arange(11) - 5
    w1 = np.exp(-k ** 2 / (2 * 1.5 ** 2))
    w = np.outer(w1, w1)
    w /= w.sum()
    xp = np.pad(x, 5, mode="symmetric")[i:i + 11, j:j + 11]
    yp = np.pad(y, 5, mode="symmetric")[i:i + 11, j:j + 11]
    mx, my = (w * xp).sum(), (w * yp).sum()
    vx = (w * (xp - mx) ** 2).sum()
    vy = (w * (yp - my) ** 2).sum()
    cxy = (w * (xp - mx) * (yp - my)).sum()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    return (2 * mx * my + c1) * (2 * cxy + c2) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2))


def test_ssim_identical():
    x = np.random.default_rng(0).uniform(0, 255, (20, 20, 3))
    assert ssim(x, x) == pytest.approx(1.0)


def test_ssim_map_matches_direct_window():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 255, (24, 24, 1))
    y = np.clip(x + rng.normal(scale=20, size=x.shape), 0, 255)
    m = ssim_map(x, y)
    assert ssim(x, y) == pytest.approx(m.mean())
    for i, j in [(0, 0), (3, 17), (12, 12), (23, 5)]:
        assert m[i, j] == pytest.approx(ssim_at(x[:, :, 0], y[:, :, 0], i, j), rel=1e-9)


def test_ssim_shape_mismatch():
    with pytest.raises(ShapeError):
        ssim(np.zeros((8, 8, 1)), np.zeros((8, 9, 1)))


def test_hull_crop():
    img = np.zeros((20, 20, 1))
    img[5:15, 5:15] = 10.0
    img[0, 0] = 99.0
    poly = np.array([[5, 5], [14, 5], [14, 14], [5, 14]], float)
    crop = hull_crop(img, poly)
    assert crop.shape == (10, 10, 1)
    np.testing.assert_array_equal(crop, 10.0)
    with pytest.raises(GeometryError):
        hull_crop(img, poly + 100)


def test_toy_embedding():
    p = ToyEmbeddingProvider()
    x = np.random.default_rng(2).uniform(0, 255, (80, 80, 3))
    v = p.embed(x)
    assert v.shape == (64,) and np.linalg.norm(v) == pytest.approx(1.0)
    assert embedding_distance(p, x, x) == 0.0
    assert embedding_distance(p, np.zeros((64, 64, 1)), np.full((64, 64, 1), 255.0)) == pytest.approx(1.0)


def test_subprocess_embedding(tmp_path):
    script = tmp_path / "emb.py"
    script.write_text("import sys\nfrom PIL import Image\nim = Image.open(sys.argv[1])\nprint(im.size[0], im.size[1], 1.5)\n")
    p = SubprocessEmbeddingProvider([sys.executable, str(script)])
    np.testing.assert_array_equal(p.embed(np.zeros((6, 9, 1))), [9, 6, 1.5])
    assert p.dimension == 3
    bad = SubprocessEmbeddingProvider([sys.executable, "-c", "import sys; sys.exit(3)"])
    with pytest.raises(RuntimeError):
        bad.embed(np.zeros((4, 4, 1)))


def test_roc_examples():
    s = ScoreSet([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0])
    curve = roc(s)
    assert curve[0].tolist() == [0, 0] and curve[-1].tolist() == [1, 1]
    assert auc(curve) == 0.75
    assert auc(roc(ScoreSet([3, 2, 1, 0], [1, 1, 0, 0]))) == 1.0
    assert auc(roc(ScoreSet([0, 1, 2, 3], [1, 1, 0, 0]))) == 0.0


def test_roc_ties_form_one_segment():
    s = ScoreSet([1.0, 1.0, 0.0], [1, 0, 0])
    curve = roc(s)
    assert curve.tolist() == [[0, 0], [0.5, 1.0], [1, 1]]
    assert auc(curve) == pytest.approx(pairwise_auc(s.scores, s.labels.astype(int)))


def test_single_class_rejected():
    with pytest.raises(DataError):
        roc(ScoreSet([1, 2], [1, 1]))
    with pytest.raises(DataError):
        ScoreSet([np.nan], [1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 200))
def test_auc_pairwise_oracle(seed, n):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    scores = rng.integers(0, 10, n).astype(float)  # ties on purpose
    assert auc(roc(ScoreSet(scores, labels))) == pytest.approx(pairwise_auc(scores, labels), abs=1e-12)


def test_score_csv_round_trip(tmp_path):
    s = ScoreSet([0.25, 0.5, 0.75], [0, 1, 1])
    write_scores_csv(s, tmp_path / "s.csv")
    back = read_scores_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.scores, s.scores)
    np.testing.assert_array_equal(back.labels, s.labels)
    (tmp_path / "w.csv").write_text("score,label\n0.1,morph\n0.2,bona_fide\n0.3,pos\n0.4,FALSE\n")
    assert read_scores_csv(tmp_path / "w.csv").labels.tolist() == [True, False, True, False]
    (tmp_path / "bad.csv").write_text("score,label\n0.1,maybe\n")
    with pytest.raises(DataError, match=":2:"):
        read_scores_csv(tmp_path / "bad.csv")


def test_roc_outputs(tmp_path):
    curve = roc(ScoreSet([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0]))
    write_roc_csv(curve, auc(curve), tmp_path / "roc.csv")
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "# positive=morph auc=0.750000" and lines[1] == "fpr,tpr"
    svg = roc_svg(curve, 0.75)
    assert svg.startswith("<svg") and "polyline" in svg


def test_scoresets():
    from wavemorph.detector import DetectorModel
    rng = np.random.default_rng(3)
    imgs = [rng.uniform(0, 255, (16, 16, 1)) for _ in range(4)]
    s = detector_scoreset(DetectorModel.zeros(), imgs[:2], imgs[2:])
    assert s.labels.tolist() == [False, False, True, True] and np.all(s.scores == 0.5)
    v = verifier_scoreset(ToyEmbeddingProvider(), imgs[:1], imgs[:1], imgs[1:2])
    assert v.scores[0] == 0.0 and v.scores[1] > 0
    with pytest.raises(ShapeError):
        verifier_scoreset(ToyEmbeddingProvider(), imgs, imgs[:1], imgs)
