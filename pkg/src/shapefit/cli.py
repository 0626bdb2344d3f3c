"""Batch command-line interface.

Commands mirror the pipeline stages: synth, train-shape, train-classifier,
probmap, fit, evaluate. Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric/training failure; messages go to standard error.
"""

import argparse
import logging
import sys
from pathlib import Path

from .de_optimizer import DEConfig
from .errors import ConfigError, DataError, ShapeFitError, TrainingError
from .pipeline import (compute_split_maps, evaluate_fit_dir, file_sha256, fit_split,
                       load_dataset, stage_seed, train_boundary_classifier,
                       train_shape_model)
from .random_forest import load_forest, save_forest
from .shape_model import load_model, save_model
from .synth import generate_synthetic_dataset

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through ConfigError so
    # usage problems map to exit code 1 instead.
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shapefit",
                     description="Localize landmarked object boundaries in grayscale images.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic dataset")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--width", type=int, default=300)
    p.add_argument("--height", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train-shape", help="align training shapes and fit the deformation model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--components", type=int, help="fixed number of deformation components")
    group.add_argument("--variance", type=float, default=None,
                       help="variance fraction to retain (default 0.95)")

    p = sub.add_parser("train-classifier", help="train the boundary-pixel forest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trees", type=int, default=32)
    p.add_argument("--neg-ratio", type=int, default=4)
    p.add_argument("--min-node", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("probmap", help="compute boundary-probability maps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--forest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")

    p = sub.add_parser("fit", help="fit the shape model to probability maps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--map", help="directory of .pfm maps from the probmap command")
    src.add_argument("--forest", help="forest file; maps are computed on the fly")
    p.add_argument("--strategy", choices=("rand/1/bin", "rand/1/exp", "best/1/bin"),
                   default="rand/1/bin")
    p.add_argument("--F", type=float, default=0.5)
    p.add_argument("--CR", type=float, default=0.75)
    p.add_argument("--np", dest="pop_size", type=int, default=None)
    p.add_argument("--max-gen", type=int, default=1500)
    p.add_argument("--target-prob", type=float, default=0.95,
                   help="stop once the shape likelihood reaches this value")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")

    p = sub.add_parser("evaluate", help="score fitted shapes against annotations")
    p.add_argument("--fitted", required=True, help="directory with <stem>_fit.txt files")
    p.add_argument("--truth", required=True, help="dataset manifest with the annotations")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--no-overlays", action="store_true")

    return parser


def cmd_synth(args) -> int:
    manifest = generate_synthetic_dataset(args.count, args.width, args.height,
                                          rng_seed=stage_seed(args.seed, "synth"),
                                          out_dir=args.out_dir)
    print(manifest)
    return 0


def cmd_train_shape(args) -> int:
    dataset = load_dataset(args.manifest)
    model = train_shape_model(dataset, components=args.components,
                              variance_cutoff=0.95 if args.variance is None else args.variance)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "shape_model.json"
    save_model(path, model)
    print(f"{path}: k={model.k} variance_retained={model.variance_retained:.6f}")
    return 0


def cmd_train_classifier(args) -> int:
    dataset = load_dataset(args.manifest)
    forest = train_boundary_classifier(dataset, n_trees=args.trees, neg_ratio=args.neg_ratio,
                                       min_node_size=args.min_node, max_depth=args.max_depth,
                                       master_seed=args.seed, n_jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "forest.json"
    save_forest(path, forest)
    print(f"{path}: {len(forest.trees)} trees on {forest.n_features} features")
    return 0


def cmd_probmap(args) -> int:
    dataset = load_dataset(args.manifest)
    forest = load_forest(args.forest)
    paths = compute_split_maps(dataset, forest, file_sha256(args.forest),
                               args.out_dir, split=args.split)
    print(f"{len(paths)} maps under {args.out_dir}")
    return 0


def cmd_fit(args) -> int:
    dataset = load_dataset(args.manifest)
    model = load_model(args.model)
    if not (0.0 < args.target_prob <= 1.0):
        raise ConfigError(f"--target-prob must be in (0, 1], got {args.target_prob}")
    config = DEConfig(strategy=args.strategy, F=args.F, CR=args.CR, pop_size=args.pop_size,
                      max_generations=args.max_gen, target_cost=1.0 - args.target_prob)
    config.validate()
    forest = load_forest(args.forest) if args.forest else None
    forest_hash = file_sha256(args.forest) if args.forest else None
    fitted = fit_split(dataset, model, args.out_dir, map_dir=args.map, forest=forest,
                       forest_hash=forest_hash, config=config, master_seed=args.seed,
                       split=args.split)
    print(f"fitted {len(fitted)} images into {args.out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    dataset = load_dataset(args.truth)
    report = evaluate_fit_dir(dataset, args.fitted, args.out_dir, split=args.split,
                              overlays=not args.no_overlays)
    for key, value in report.summary().items():
        print(f"{key}: {value}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "train-shape": cmd_train_shape,
    "train-classifier": cmd_train_classifier,
    "probmap": cmd_probmap,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except TrainingError as e:
        print(f"training error: {e}", file=sys.stderr)
        return 3
    except ShapeFitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
