"""Command-line interface.

Verbs:
    generate   write a dataset of rendered triplets
    predict    run the prediction pipeline on one triplet directory
    evaluate   segmentation/depth/localization metrics over a dataset
    losses     the full training-loss suite over a dataset
    selftest   run the built-in brute-force oracle suites

Exit codes: 0 success, 1 selftest failure, 2 config/usage error, 3 I/O error,
4 provider output violating a data-contract invariant. Worker-thread count is
controlled only by the SCENEWARP_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import Config, load_config, thread_count
from .dataset import (
    iter_triplet_dirs,
    read_triplet,
    triplet_dir,
    write_json,
    write_prediction,
    write_triplet,
)
from .losses import image_loss
from .metrics import pearson
from .pipeline import (
    assemble_loss_report,
    camera_for,
    evaluate_triplet,
    predict_triplet,
    triplet_loss_parts,
)
from .providers import BaselineImagination, InvariantViolation, provider_from_spec
from .scenesim import SceneGenerationError, generate_scene, make_triplets, render_sequence

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INVARIANT = 4

_CONFIG_FLAGS = {
    "seed": int,
    "resolution": int,
    "fov": float,
    "num_objects": int,
    "pose_bins": int,
    "sequence_length": int,
    "beta": float,
    "sigma_rbf": float,
    "kappa_prior": float,
    "kappa_interp": float,
    "delta_collapse": float,
    "loss_lambda": float,
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file (JSON object or key=value lines)")
    for name, typ in _CONFIG_FLAGS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", type=typ, default=None)


def _build_config(args: argparse.Namespace) -> Config:
    base = load_config(args.config) if args.config else Config()
    overrides = {}
    for name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        base = dataclasses.replace(base, **overrides)
    return base


def _pool_map(fn, items):
    workers = thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_generate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    os.makedirs(args.out, exist_ok=True)

    def one_scene(scene_index: int):
        scene_seed = int(np.random.SeedSequence((config.seed, scene_index)).generate_state(1)[0])
        spec = generate_scene(config, scene_seed)
        frames = render_sequence(spec, camera_for(config))
        triplets = make_triplets(spec, frames, config)
        for t_index, triplet in enumerate(triplets):
            out_dir = triplet_dir(args.out, scene_index, t_index)
            write_triplet(out_dir, triplet, config, scene_index, t_index)
        return len(triplets)

    counts = _pool_map(one_scene, list(range(args.scenes)))
    total = int(sum(counts))
    print(f"wrote {total} triplets from {args.scenes} scenes to {args.out}")
    if total == 0:
        print("warning: every candidate triplet was filtered out", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    triplet, config = read_triplet(args.triplet)
    provider = provider_from_spec(args.provider, triplet, config)
    bundle, _ = predict_triplet(triplet, provider, BaselineImagination(), config)
    truth = triplet.frames[2].image
    mask = bundle.warp_weight > 0.99
    summary = {
        "provider": args.provider,
        "merged_mse": image_loss(bundle.merged_image, truth),
        "warp_coverage": float(np.mean(mask)),
        "masked_mse": (
            float(np.mean((bundle.merged_image[mask] - truth[mask]) ** 2))
            if np.any(mask) else 0.0
        ),
    }
    write_prediction(args.out, bundle, summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _load_dataset(root: str):
    dirs = iter_triplet_dirs(root)
    if not dirs:
        raise FileNotFoundError(f"no triplets found under {root}")
    return dirs


def cmd_evaluate(args: argparse.Namespace) -> int:
    dirs = _load_dataset(args.dataset)

    def one(path: str):
        triplet, config = read_triplet(path)
        provider = provider_from_spec(args.provider, triplet, config)
        return path, evaluate_triplet(triplet, provider, config)

    results = _pool_map(one, dirs)
    per_triplet = {}
    pools = {"depth": ([], []), "angle": ([], []), "distance": ([], [])}
    for path, res in results:
        per_triplet[os.path.relpath(path, args.dataset)] = {
            k: v for k, v in res.items() if k != "pairs"
        }
        for key, (true_vals, pred_vals) in res["pairs"].items():
            pools[key][0].append(true_vals)
            pools[key][1].append(pred_vals)
    aggregate = {
        "triplets": len(results),
        "ari_fg": float(np.mean([r["ari_fg"] for _, r in results])),
        "mean_iou": float(np.mean([r["mean_iou"] for _, r in results])),
    }
    for key, label in (("depth", "depth_pearson"), ("angle", "angle_pearson"),
                       ("distance", "distance_pearson")):
        true_vals = np.concatenate(pools[key][0])
        pred_vals = np.concatenate(pools[key][1])
        if true_vals.size >= 2 and np.var(true_vals) > 0 and np.var(pred_vals) > 0:
            aggregate[label] = pearson(true_vals, pred_vals)
    report = {"aggregate": aggregate, "per_triplet": per_triplet}
    payload = json.dumps(report, sort_keys=True, indent=1)
    if args.out:
        write_json(args.out, report)
    print(payload)
    return EXIT_OK


def cmd_losses(args: argparse.Namespace) -> int:
    dirs = _load_dataset(args.dataset)
    if args.collapse and len(dirs) < 2:
        raise ValueError(
            "collapse loss needs at least 2 triplets in the batch (or pass --no-collapse)")

    def one(path: str):
        triplet, config = read_triplet(path)
        if args.loss_lambda is not None:
            config = dataclasses.replace(config, loss_lambda=args.loss_lambda)
        provider = provider_from_spec(args.provider, triplet, config)
        return path, config, triplet_loss_parts(triplet, provider, BaselineImagination(), config)

    results = _pool_map(one, dirs)
    # Batch-shuffle pairing for the collapse term: a seeded cyclic shift, so no
    # triplet is ever paired with itself.
    paired = [None] * len(results)
    if args.collapse:
        seed = results[0][1].seed
        rng = np.random.default_rng(np.random.SeedSequence((seed, len(results))))
        shift = int(rng.integers(1, len(results)))
        for i in range(len(results)):
            paired[i] = results[(i + shift) % len(results)][2]["next_locations"]
    per_triplet = {}
    for i, (path, config, parts) in enumerate(results):
        report = assemble_loss_report(parts, paired[i], config)
        per_triplet[os.path.relpath(path, args.dataset)] = report.to_dict()
    keys = ["image", "location", "pose", "center", "collapse", "total"]
    aggregate = {k: float(np.mean([v[k] for v in per_triplet.values()])) for k in keys}
    aggregate["lambda"] = results[0][1].loss_lambda
    aggregate["triplets"] = len(results)
    report = {"aggregate": aggregate, "per_triplet": per_triplet}
    payload = json.dumps(report, sort_keys=True, indent=1)
    if args.out:
        write_json(args.out, report)
    print(payload)
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    from . import selftest

    failures = selftest.run(verbose=True)
    return EXIT_OK if failures == 0 else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenewarp",
        description="Geometric next-frame prediction with a built-in ground-truth simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a dataset of rendered triplets")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("predict", help="predict frame t+1 for one triplet directory")
    p.add_argument("--triplet", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--provider", default="oracle",
                   help="oracle | noisy:depth=...,location=...,pose=...,seg=...,seed=... | files:DIR")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="metrics over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--provider", default="oracle")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("losses", help="training-loss suite over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--provider", default="oracle")
    p.add_argument("--out", default=None)
    p.add_argument("--loss-lambda", type=float, default=None)
    collapse = p.add_mutually_exclusive_group()
    collapse.add_argument("--collapse", dest="collapse", action="store_true", default=True)
    collapse.add_argument("--no-collapse", dest="collapse", action="store_false")
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("selftest", help="run the brute-force oracle suites")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"error: provider output invalid: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, SceneGenerationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
