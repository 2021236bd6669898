"""Command-line entry point: ``wavemorph <subcommand> ...``.

Subcommands::

    morph           pairs CSV -> raw / on-I / on-J PNGs plus manifest.csv
    train-detector  bona fide dir + morph dir -> model file
    perturb         morph images + model -> perturbed PNGs and trace CSVs
    metrics         SSIM (and optional maps / embedding distance) of two images
    eval            score,label CSV -> roc.csv and roc.svg

Settings come from built-in defaults, then an optional TOML file given with
``--config`` (one table per subcommand, e.g. ``[perturb]``, plus top-level
``seed`` and ``workers``), then command-line flags. The resolved settings are
printed before any work starts.

Exit status: 0 success, 1 some items failed, 2 usage, configuration or data error.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import shlex
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import detector as det
from .errors import ConfigError, DataError, WavemorphError
from .geometry import load_landmarks
from .image import load_image, minmax_absdiff_map, quantize, save_image
from .metrics import (SubprocessEmbeddingProvider, ToyEmbeddingProvider, auc, embedding_distance,
                      read_scores_csv, roc, roc_svg, ssim, ssim_map, write_roc_csv)
from .morph import MorphConfig, generate_morph
from .perturb import PerturbConfig, perturb

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2

DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "morph": {"alpha": 0.5, "wavelet": "haar", "levels": 3, "feather": 0.0},
    "train-detector": {"lr": 0.05, "epochs": 30, "batch_size": 16, "holdout": 0.2},
    "perturb": {"beta": 6.0, "epsilon": 2.0, "lam": 0.1, "iterations": 10},
    "metrics": {"embedding_command": None},
    "eval": {"positive": "morph"},
}


class UsageError(WavemorphError):
    """Bad arguments or missing inputs; maps to exit status 2."""


def _read_config(path):
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def resolve(args) -> dict:
    """Defaults < config file < flags, for the global keys and the chosen subcommand."""
    file_cfg = _read_config(args.config) if args.config else {}
    sub = args.command
    known = set(DEFAULTS[sub])
    section = file_cfg.get(sub, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config entry [{sub}] must be a table")
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{sub}]: {', '.join(sorted(unknown))}")
    cfg = {"seed": file_cfg.get("seed", DEFAULTS["seed"]), "workers": file_cfg.get("workers", DEFAULTS["workers"])}
    params = dict(DEFAULTS[sub])
    params.update(section)
    for key in known:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    if not isinstance(cfg["seed"], int) or not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        raise ConfigError("seed must be an integer and workers a positive integer")
    cfg[sub] = params
    return cfg


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# morph ---------------------------------------------------------------------

_PAIR_COLUMNS = ("image_i", "landmarks_i", "image_j", "landmarks_j")


def _morph_one(job):
    stem, row, base, out_dir, mcfg = job
    try:
        missing = [c for c in _PAIR_COLUMNS if not (row.get(c) or "").strip()]
        if missing:
            raise DataError(f"missing column(s): {', '.join(missing)}")
        path = {c: os.path.join(base, row[c].strip()) for c in _PAIR_COLUMNS}
        img_i, img_j = load_image(path["image_i"]), load_image(path["image_j"])
        lm_i, _, _ = load_landmarks(path["landmarks_i"])
        lm_j, _, _ = load_landmarks(path["landmarks_j"])
        res = generate_morph(img_i, img_j, lm_i, lm_j, MorphConfig(**mcfg))
        names = [f"{stem}_raw.png", f"{stem}_onI.png", f"{stem}_onJ.png"]
        for name, arr in zip(names, (res.raw_morph, res.on_source, res.on_destination)):
            save_image(arr, os.path.join(out_dir, name))
        return [stem, "ok", ""] + names
    except (WavemorphError, ValueError, OSError, RuntimeError) as exc:
        return [stem, "error", f"{type(exc).__name__}: {exc}", "", "", ""]


def cmd_morph(args, cfg) -> int:
    if not os.path.isfile(args.pairs):
        raise UsageError(f"pairs file not found: {args.pairs}")
    with open(args.pairs, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"pairs file has no rows: {args.pairs}")
    os.makedirs(args.out_dir, exist_ok=True)
    base = os.path.dirname(os.path.abspath(args.pairs))
    jobs = []
    for k, row in enumerate(rows):
        stem = (row.get("output_stem") or row.get("stem") or "").strip() or f"pair{k:04d}"
        jobs.append((stem, row, base, args.out_dir, cfg["morph"]))
    results = _map(_morph_one, jobs, cfg["workers"])
    with open(os.path.join(args.out_dir, "manifest.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stem", "status", "message", "raw", "on_i", "on_j"])
        w.writerows(results)
    failed = sum(r[1] != "ok" for r in results)
    print(f"morphs: {len(results) - failed} ok, {failed} failed")
    return EXIT_PARTIAL if failed else EXIT_OK


# train-detector ------------------------------------------------------------

def _png_files(d):
    if not os.path.isdir(d):
        raise UsageError(f"not a directory: {d}")
    files = sorted(glob.glob(os.path.join(d, "*.png")))
    if not files:
        raise DataError(f"no PNG images in {d}")
    return files


def _split(n, holdout, rng):
    idx = rng.permutation(n)
    k = n - int(round(holdout * n))
    return np.sort(idx[:k]), np.sort(idx[k:])


def cmd_train_detector(args, cfg) -> int:
    p = cfg["train-detector"]
    bona = [load_image(f) for f in _png_files(args.bonafide_dir)]
    morphs = [load_image(f) for f in _png_files(args.morph_dir)]
    rng = np.random.default_rng(cfg["seed"])
    b_tr, b_te = _split(len(bona), p["holdout"], rng)
    m_tr, m_te = _split(len(morphs), p["holdout"], rng)
    model = det.train([bona[i] for i in b_tr], [morphs[i] for i in m_tr], lr=p["lr"], epochs=p["epochs"],
                      batch_size=p["batch_size"], seed=cfg["seed"])
    det.save_model(model, args.out_model)
    train_acc = det.accuracy(model, [bona[i] for i in b_tr], [morphs[i] for i in m_tr])
    print(f"train accuracy: {train_acc:.4f} ({len(b_tr)} bona fide, {len(m_tr)} morphs)")
    if len(b_te) and len(m_te):
        test_acc = det.accuracy(model, [bona[i] for i in b_te], [morphs[i] for i in m_te])
        print(f"held-out accuracy: {test_acc:.4f} ({len(b_te)} bona fide, {len(m_te)} morphs)")
    print(f"model written to {args.out_model}")
    return EXIT_OK


# perturb -------------------------------------------------------------------

_PERTURB_MODEL = None


def _perturb_one(job):
    global _PERTURB_MODEL
    path, model_path, out_dir, pcfg = job
    if _PERTURB_MODEL is None or _PERTURB_MODEL[0] != model_path:
        _PERTURB_MODEL = (model_path, det.load_model(model_path))
    model = _PERTURB_MODEL[1]
    stem = os.path.splitext(os.path.basename(path))[0]
    try:
        x0 = load_image(path)
    except (WavemorphError, OSError) as exc:
        return [stem, "error", f"{type(exc).__name__}: {exc}", "", "", ""]
    # a budget violation raises AssertionError here and aborts the run on purpose
    trace = perturb(x0, model, PerturbConfig(**pcfg))
    out = quantize(trace.adversarial)
    out_png = os.path.join(out_dir, f"{stem}.png")
    if np.array_equal(out, x0):
        shutil.copyfile(path, out_png)  # unchanged image: keep the input bytes
    else:
        save_image(out, out_png)
    trace.to_csv(os.path.join(out_dir, f"{stem}_trace.csv"))
    p_after = det.forward(model, out)[det.MORPH]
    linf = float(np.max(np.abs(out - x0))) if out.size else 0.0
    return [stem, "ok", "", f"{trace.initial_p_morph:.6f}", f"{p_after:.6f}", f"{linf:g}"]


def cmd_perturb(args, cfg) -> int:
    paths = sorted(glob.glob(args.inputs))
    if not paths:
        raise UsageError(f"no files match {args.inputs!r}")
    if not os.path.isfile(args.model):
        raise UsageError(f"model file not found: {args.model}")
    det.load_model(args.model)  # fail fast on a bad model
    PerturbConfig(**cfg["perturb"])
    os.makedirs(args.out_dir, exist_ok=True)
    jobs = [(p, args.model, args.out_dir, cfg["perturb"]) for p in paths]
    results = _map(_perturb_one, jobs, cfg["workers"])
    with open(os.path.join(args.out_dir, "perturb_manifest.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stem", "status", "message", "p_morph_before", "p_morph_after", "linf"])
        w.writerows(results)
    ok = [r for r in results if r[1] == "ok"]
    flipped = sum(float(r[4]) < 0.5 for r in ok)
    max_linf = max((float(r[5]) for r in ok), default=0.0)
    rate = flipped / len(ok) if ok else 0.0
    print(f"summary: images={len(ok)} flipped={flipped} flip_rate={rate:.4f} max_linf={max_linf:g}")
    failed = len(results) - len(ok)
    return EXIT_PARTIAL if failed else EXIT_OK


# metrics / eval ------------------------------------------------------------

def _provider(cmd):
    if not cmd:
        raise ConfigError("--embedding needs an embedding provider: pass --embedding-command "
                          "or set embedding_command in [metrics]")
    if cmd == "toy":
        return ToyEmbeddingProvider()
    return SubprocessEmbeddingProvider(shlex.split(cmd) if isinstance(cmd, str) else list(cmd))


def cmd_metrics(args, cfg) -> int:
    if args.embedding:
        provider = _provider(cfg["metrics"]["embedding_command"])
    a, b = load_image(args.a), load_image(args.b)
    print(f"ssim={ssim(a, b):.6f}")
    if args.ssim_map:
        save_image(np.clip(ssim_map(a, b), 0, 1) * 255, args.ssim_map)
        print(f"ssim map written to {args.ssim_map}")
    if args.diff_map:
        save_image(minmax_absdiff_map(a, b), args.diff_map)
        print(f"difference map written to {args.diff_map}")
    if args.embedding:
        print(f"embedding_distance={embedding_distance(provider, a, b):.6f}")
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    positive = cfg["eval"]["positive"]
    scores = read_scores_csv(args.scores, positive=positive)
    curve = roc(scores)
    area = auc(curve)
    os.makedirs(args.out_dir, exist_ok=True)
    write_roc_csv(curve, area, os.path.join(args.out_dir, "roc.csv"), positive=positive)
    with open(os.path.join(args.out_dir, "roc.svg"), "w", encoding="utf-8") as fh:
        fh.write(roc_svg(curve, area, positive=positive))
    print(f"positive={positive} auc={area:.6f}")
    return EXIT_OK


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavemorph", description="Wavelet face morphs, detector and attack toolkit.")
    p.add_argument("--config", help="TOML file with default settings")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--workers", type=int, help="worker processes for batch commands (default 1)")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("morph", help="generate wavelet morphs from a pairs CSV")
    m.add_argument("pairs", help="CSV with columns image_i,landmarks_i,image_j,landmarks_j,output_stem")
    m.add_argument("out_dir")
    m.add_argument("--alpha", type=float)
    m.add_argument("--wavelet", choices=["haar", "db2"])
    m.add_argument("--levels", type=int)
    m.add_argument("--feather", type=float)

    t = sub.add_parser("train-detector", help="train the morph detector")
    t.add_argument("bonafide_dir")
    t.add_argument("morph_dir")
    t.add_argument("out_model")
    t.add_argument("--lr", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", dest="batch_size", type=int)

    a = sub.add_parser("perturb", help="run the TV-regularized iterative attack")
    a.add_argument("inputs", help="glob of morph PNGs")
    a.add_argument("model")
    a.add_argument("out_dir")
    a.add_argument("--beta", type=float)
    a.add_argument("--epsilon", type=float)
    a.add_argument("--lam", "--lambda", dest="lam", type=float)
    a.add_argument("--iterations", type=int)

    q = sub.add_parser("metrics", help="compare two images")
    q.add_argument("a")
    q.add_argument("b")
    q.add_argument("--ssim-map", help="write the SSIM map as a PNG")
    q.add_argument("--diff-map", help="write the min-max scaled absolute difference as a PNG")
    q.add_argument("--embedding", action="store_true", help="also print the embedding distance")
    q.add_argument("--embedding-command", help="provider command ('toy' for the built-in provider)")

    e = sub.add_parser("eval", help="ROC curve and AUC of a score,label CSV")
    e.add_argument("scores")
    e.add_argument("out_dir")
    e.add_argument("--positive", help="name of the positive class (default morph)")
    return p


COMMANDS = {"morph": cmd_morph, "train-detector": cmd_train_detector, "perturb": cmd_perturb,
            "metrics": cmd_metrics, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve(args)
        print("config: " + json.dumps(cfg, sort_keys=True))
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WavemorphError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
