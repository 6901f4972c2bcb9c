"""Command-line entry point: generate data, run benchmarks, plot, inspect."""

from __future__ import annotations

import argparse
import json
import sys

from fedopt import generator, harness
from fedopt.data import load_libsvm
from fedopt.partitioning import compute_stats, load_partition


def _cmd_generate(args) -> int:
    cfg = harness.ExperimentConfig.from_toml(args.config)
    if cfg.generate is None:
        print("config has no [data.generate] section", file=sys.stderr)
        return 2
    seed = cfg.seed if args.seed is None else args.seed
    gen_cfg = generator.GenConfig(seed=seed, **cfg.generate)
    data = generator.generate(gen_cfg)
    generator.save_generated(data, args.out, gen_cfg)
    print(json.dumps(generator.summarize(data), indent=2, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    cfg = harness.ExperimentConfig.from_toml(args.config)
    if args.out is not None:
        cfg.output_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    metadata = harness.run_experiment(cfg, no_timing=args.no_timing)
    print(json.dumps({"output_dir": cfg.output_dir, "f_star": metadata["f_star"],
                      "chosen_grid_points": metadata["chosen_grid_points"]},
                     indent=2, sort_keys=True))
    return 0


def _cmd_plot(args) -> int:
    harness.emit_plot(args.metrics, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_stats(args) -> int:
    train = load_libsvm(args.train)
    report = {
        "num_examples": train.n,
        "num_features": train.d,
        "nnz": int(train.indices.shape[0]),
        "sparsity": float(train.indices.shape[0] / (train.n * train.d)),
    }
    if args.partition is not None:
        part = load_partition(args.partition)
        stats = compute_stats(train, part)
        sizes = part.node_sizes
        report.update({
            "num_nodes": part.num_nodes,
            "node_size_min": int(sizes.min()),
            "node_size_mean": float(sizes.mean()),
            "node_size_max": int(sizes.max()),
            "features_present": int((stats.feature_counts > 0).sum()),
            "feature_skew_ratio": generator.feature_skew_ratio(train, part),
        })
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedopt",
        description="Benchmark round-based federated optimization on sparse "
                    "logistic regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic corpus to a directory")
    p_gen.add_argument("--config", required=True, help="TOML file with a [data.generate] section")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_gen.set_defaults(func=_cmd_generate)

    p_run = sub.add_parser("run", help="run the configured benchmark")
    p_run.add_argument("--config", required=True, help="experiment TOML file")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--no-timing", action="store_true",
                       help="write wall_ms as 0.0 for reproducible CSV bytes")
    p_run.set_defaults(func=_cmd_run)

    p_plot = sub.add_parser("plot", help="render metrics CSVs to a two-panel SVG")
    p_plot.add_argument("metrics", nargs="+", help="metrics CSV files")
    p_plot.add_argument("--out", required=True, help="output SVG path")
    p_plot.set_defaults(func=_cmd_plot)

    p_stats = sub.add_parser("stats", help="summarize a dataset (and partition)")
    p_stats.add_argument("train", help="libsvm file")
    p_stats.add_argument("--partition", default=None, help="partition file")
    p_stats.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        # Bad paths, malformed TOML/data files, and invalid config values are
        # user input, not bugs: report them cleanly instead of tracebacking.
        print(f"fedopt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
