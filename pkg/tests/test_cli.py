import csv
import hashlib
from pathlib import Path

import numpy as np
import pytest

from wavemorph.cli import main
from wavemorph.geometry import save_landmarks
from wavemorph.image import save_image
from wavemorph.synthetic import random_identity, render


def digest(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(Path(d).iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def faces(tmp_path_factory):
    root = tmp_path_factory.mktemp("faces")
    rng = np.random.default_rng(0)
    for k in range(3):
        img, lm = render(random_identity(rng), 64, rng)
        save_image(img, root / f"f{k}.png")
        save_landmarks(lm, 64, 64, root / f"f{k}.json")
    return root


def write_pairs(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image_i", "landmarks_i", "image_j", "landmarks_j", "output_stem"])
        w.writerows(rows)


def test_morph_two_pairs(faces, tmp_path, capsys):
    pairs = faces / "pairs.csv"
    write_pairs(pairs, [["f0.png", "f0.json", "f1.png", "f1.json", "a"], ["f1.png", "f1.json", "f2.png", "f2.json", "b"]])
    assert main(["morph", str(pairs), str(tmp_path / "o1")]) == 0
    assert "config:" in capsys.readouterr().out
    pngs = sorted(p.name for p in (tmp_path / "o1").glob("*.png"))
    assert pngs == ["a_onI.png", "a_onJ.png", "a_raw.png", "b_onI.png", "b_onJ.png", "b_raw.png"]
    rows = list(csv.DictReader(open(tmp_path / "o1" / "manifest.csv")))
    assert [r["status"] for r in rows] == ["ok", "ok"]
    assert main(["morph", str(pairs), str(tmp_path / "o2")]) == 0
    assert digest(tmp_path / "o1") == digest(tmp_path / "o2")


def test_morph_partial_failure(faces, tmp_path):
    pairs = faces / "bad.csv"
    write_pairs(pairs, [["f0.png", "f0.json", "f1.png", "f1.json", "a"], ["f0.png", "missing.json", "f1.png", "f1.json", "b"]])
    assert main(["morph", str(pairs), str(tmp_path)]) == 1
    rows = list(csv.DictReader(open(tmp_path / "manifest.csv")))
    assert [r["status"] for r in rows] == ["ok", "error"]
    assert "missing.json" in rows[1]["message"]


def test_morph_empty_pairs(tmp_path):
    (tmp_path / "p.csv").write_text("image_i,landmarks_i,image_j,landmarks_j,output_stem\n")
    assert main(["morph", str(tmp_path / "p.csv"), str(tmp_path / "o")]) == 2


def test_morph_config_file(faces, tmp_path, capsys):
    pairs = faces / "one.csv"
    write_pairs(pairs, [["f0.png", "f0.json", "f1.png", "f1.json", "a"]])
    cfg = tmp_path / "c.toml"
    cfg.write_text('seed = 4\n[morph]\nwavelet = "db2"\n')
    assert main(["--config", str(cfg), "morph", str(pairs), str(tmp_path / "o"), "--alpha", "0.3"]) == 0
    out = capsys.readouterr().out
    assert '"wavelet": "db2"' in out and '"alpha": 0.3' in out and '"seed": 4' in out
    cfg.write_text("[morph]\nbogus = 1\n")
    assert main(["--config", str(cfg), "morph", str(pairs), str(tmp_path / "o")]) == 2


def dirs(root, n=6):
    rng = np.random.default_rng(1)
    for name, offset in (("bona", 0.0), ("morph", 60.0)):
        (root / name).mkdir()
        for k in range(n):
            save_image(np.clip(rng.normal(100 + offset, 10, (32, 32, 1)), 0, 255), root / name / f"{k}.png")
    return root / "bona", root / "morph"


def test_train_detector(tmp_path, capsys):
    bona, morph = dirs(tmp_path)
    args = ["--seed", "3", "train-detector", str(bona), str(morph), str(tmp_path / "m1.bin"), "--epochs", "3"]
    assert main(args) == 0
    assert "held-out accuracy" in capsys.readouterr().out
    args[-3] = str(tmp_path / "m2.bin")
    assert main(args) == 0
    assert (tmp_path / "m1.bin").read_bytes() == (tmp_path / "m2.bin").read_bytes()


def test_train_detector_errors(tmp_path):
    (tmp_path / "empty").mkdir()
    bona, _ = dirs(tmp_path, 2)
    assert main(["train-detector", str(tmp_path / "nope"), str(bona), str(tmp_path / "m.bin")]) == 2
    assert main(["train-detector", str(tmp_path / "empty"), str(bona), str(tmp_path / "m.bin")]) == 2


@pytest.fixture
def model(tmp_path):
    bona, morph = dirs(tmp_path)
    main(["train-detector", str(bona), str(morph), str(tmp_path / "m.bin"), "--epochs", "2"])
    return tmp_path / "m.bin", morph


def test_perturb(model, tmp_path, capsys):
    mpath, morph = model
    assert main(["perturb", str(morph / "*.png"), str(mpath), str(tmp_path / "p1")]) == 0
    out = capsys.readouterr().out
    assert "summary: images=6" in out and "max_linf=" in out
    assert len(list((tmp_path / "p1").glob("*_trace.csv"))) == 6
    assert main(["perturb", str(morph / "*.png"), str(mpath), str(tmp_path / "p2")]) == 0
    assert digest(tmp_path / "p1") == digest(tmp_path / "p2")


def test_perturb_zero_budget(model, tmp_path):
    mpath, morph = model
    assert main(["perturb", str(morph / "*.png"), str(mpath), str(tmp_path / "z"), "--epsilon", "0"]) == 0
    for src in morph.glob("*.png"):
        assert (tmp_path / "z" / src.name).read_bytes() == src.read_bytes()


def test_perturb_usage(tmp_path):
    assert main(["perturb", str(tmp_path / "*.png"), "m.bin", str(tmp_path)]) == 2


def test_metrics(faces, tmp_path, capsys):
    img = str(faces / "f0.png")
    assert main(["metrics", img, img, "--ssim-map", str(tmp_path / "s.png"), "--diff-map", str(tmp_path / "d.png")]) == 0
    out = capsys.readouterr().out
    assert "ssim=1.000000" in out
    assert (tmp_path / "s.png").exists() and (tmp_path / "d.png").exists()
    assert main(["metrics", img, str(faces / "f1.png"), "--embedding"]) == 2
    assert main(["metrics", img, str(faces / "f1.png"), "--embedding", "--embedding-command", "toy"]) == 0
    assert "embedding_distance=" in capsys.readouterr().out


def test_eval(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("score,label\n0.9,1\n0.4,1\n0.6,0\n0.1,0\n")
    assert main(["eval", str(tmp_path / "s.csv"), str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "roc.csv").read_text().splitlines()[0] == "# positive=morph auc=0.750000"
    assert (tmp_path / "o" / "roc.svg").read_text().startswith("<svg")
    (tmp_path / "one.csv").write_text("score,label\n0.9,1\n0.4,1\n")
    assert main(["eval", str(tmp_path / "one.csv"), str(tmp_path / "o")]) == 2


def test_bad_arguments():
    assert main(["frobnicate"]) == 2
    assert main(["--workers", "0", "eval", "a", "b"]) == 2


def test_worker_pool_matches_serial(faces, tmp_path):
    pairs = faces / "w.csv"
    write_pairs(pairs, [["f0.png", "f0.json", "f1.png", "f1.json", "a"], ["f1.png", "f1.json", "f2.png", "f2.json", "b"],
                        ["f2.png", "f2.json", "f0.png", "f0.json", "c"]])
    assert main(["morph", str(pairs), str(tmp_path / "serial")]) == 0
    assert main(["--workers", "2", "morph", str(pairs), str(tmp_path / "pool")]) == 0
    assert digest(tmp_path / "serial") == digest(tmp_path / "pool")
