"""Experiment harness: config parsing, benchmark execution, CSV metrics.

An experiment solves the offline optimum first, then runs every configured
algorithm over its hyperparameter grid for a fixed budget of communication
rounds, recording objective value, suboptimality, and test error per round.
Per algorithm, the grid point with the best final suboptimality is kept.
"""

from __future__ import annotations

import itertools
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import fedopt
from fedopt import baselines, generator, svrg
from fedopt.data import SparseDataset, load_libsvm
from fedopt.objective import LogisticObjective
from fedopt.partitioning import Partition, compute_stats, load_partition, reshuffle

CSV_HEADER = "algorithm,round,objective,suboptimality,test_error,wall_ms,diverged"

_ALGORITHM_PARAMS = {
    "svrg": {"variant", "stepsize_rule", "h", "m"},
    "gd": {"stepsize_mode", "eta", "c", "rho"},
    "cocoa": {"local_iters", "aggregation", "sigma_prime"},
}


@dataclass
class RoundMetrics:
    """One CSV row: per-round outcome of one algorithm."""

    algorithm: str
    round_index: int
    objective: float
    suboptimality: float
    test_error: float
    wall_ms: float
    diverged: bool

    def to_csv_row(self) -> str:
        return ",".join([
            self.algorithm,
            str(self.round_index),
            repr(float(self.objective)),
            repr(float(self.suboptimality)),
            repr(float(self.test_error)),
            repr(float(self.wall_ms)),
            "true" if self.diverged else "false",
        ])


@dataclass
class AlgorithmSpec:
    """One benchmark entry: a kind, a name, and a parameter grid.

    Any list-valued parameter is a grid axis; scalars are fixed. reshuffled
    runs the algorithm on a size-preserving random repartition of the data.
    """

    name: str
    kind: str
    params: dict = field(default_factory=dict)
    reshuffled: bool = False

    def __post_init__(self):
        if self.kind not in _ALGORITHM_PARAMS:
            raise ValueError(f"unknown algorithm kind {self.kind!r}")
        unknown = set(self.params) - _ALGORITHM_PARAMS[self.kind]
        if unknown:
            raise ValueError(f"unknown parameters for kind {self.kind!r}: {sorted(unknown)}")

    def grid_points(self) -> list[dict]:
        keys = sorted(self.params)
        axes = [self.params[k] if isinstance(self.params[k], list) else [self.params[k]]
                for k in keys]
        return [dict(zip(keys, combo)) for combo in itertools.product(*axes)]


def _reject_unknown_keys(where: str, table: dict, allowed: set) -> None:
    """A misspelled config key silently falling back to a default is worse
    than an error, so unknown keys are rejected rather than ignored."""
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ValueError(f"unknown {where} config key(s): {', '.join(unknown)} "
                         f"(expected only: {', '.join(sorted(allowed))})")


@dataclass
class ExperimentConfig:
    rounds: int = 30
    seed: int = 0
    output_dir: str = "out"
    lam: float | None = None
    use_bias: bool = False
    eval_every: int = 1
    opt_tol: float = 1e-10
    opt_max_evals: float = 3e6
    generate: dict | None = None
    load: dict | None = None
    algorithms: list[AlgorithmSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        if (self.generate is None) == (self.load is None):
            raise ValueError("config must give exactly one of data.generate / data.load")
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise ValueError("algorithm names must be unique")

    @classmethod
    def from_dict(cls, tree: dict) -> "ExperimentConfig":
        _reject_unknown_keys("top-level", tree, {"experiment", "data", "opt", "algorithm"})
        exp = dict(tree.get("experiment", {}))
        _reject_unknown_keys("[experiment]", exp,
                             {"rounds", "seed", "output_dir", "lam", "use_bias", "eval_every"})
        data = tree.get("data", {})
        _reject_unknown_keys("[data]", data, {"generate", "load"})
        opt = tree.get("opt", {})
        _reject_unknown_keys("[opt]", opt, {"tol", "max_evals"})
        algos = []
        for entry in [dict(e) for e in tree.get("algorithm", [])]:
            if "name" not in entry or "kind" not in entry:
                raise ValueError("each [[algorithm]] entry needs 'name' and 'kind'")
            algos.append(AlgorithmSpec(
                name=entry.pop("name"),
                kind=entry.pop("kind"),
                reshuffled=bool(entry.pop("reshuffled", False)),
                params=entry,
            ))
        return cls(
            rounds=int(exp.get("rounds", 30)),
            seed=int(exp.get("seed", 0)),
            output_dir=str(exp.get("output_dir", "out")),
            lam=float(exp["lam"]) if "lam" in exp else None,
            use_bias=bool(exp.get("use_bias", False)),
            eval_every=int(exp.get("eval_every", 1)),
            opt_tol=float(opt.get("tol", 1e-10)),
            opt_max_evals=float(opt.get("max_evals", 3e6)),
            generate=data.get("generate"),
            load=data.get("load"),
            algorithms=algos,
        )

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))


def _load_data(cfg: ExperimentConfig):
    """Returns (train, test or None, partition)."""
    if cfg.generate is not None:
        gen_cfg = generator.GenConfig(seed=cfg.seed, **cfg.generate)
        data = generator.generate(gen_cfg)
        return data.train, data.test, data.partition
    section = cfg.load
    train = load_libsvm(section["train"])
    test = load_libsvm(section["test"], expected_d=train.d) if "test" in section else None
    part = load_partition(section["partition"])
    return train, test, part


class _RoundClock:
    """Per-round wall time; frozen at zero when timing is disabled."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.last = time.perf_counter()

    def restart(self) -> None:
        self.last = time.perf_counter()

    def lap_ms(self) -> float:
        if not self.enabled:
            return 0.0
        now = time.perf_counter()
        ms = (now - self.last) * 1000.0
        self.last = now
        return round(ms, 3)


def _curve_runner(name, obj, test, f_star, rounds, eval_every, clock):
    """Shared row bookkeeping for all algorithm kinds."""
    rows: list[RoundMetrics] = []

    def record(round_index: int, w, objective: float, diverged: bool) -> None:
        wall = clock.lap_ms() if round_index > 0 else 0.0
        if diverged or round_index == 0 or round_index == rounds or round_index % eval_every == 0:
            err = obj.test_error(w, test) if test is not None else 0.0
            obj_val = float(objective)
            rows.append(RoundMetrics(name, round_index, obj_val, obj_val - f_star,
                                     err, wall, diverged))

    return rows, record


def _run_svrg_point(name, obj, part, stats, point, cfg, f_star, test, clock):
    algo_cfg = svrg.FedSvrgConfig(
        m=int(point["m"]) if point.get("m") is not None else None,
        h=float(point.get("h", 0.1)),
        variant=str(point.get("variant", "modified")),
        stepsize_rule=str(point.get("stepsize_rule", "fixed_h")),
        rounds=cfg.rounds,
        seed=cfg.seed,
    )
    rows, record = _curve_runner(name, obj, test, f_star, cfg.rounds, cfg.eval_every, clock)
    record(0, np.zeros(obj.dim), obj.loss_value(np.zeros(obj.dim)), False)
    clock.restart()

    def sink(rec: svrg.RoundRecord) -> None:
        record(rec.round_index, rec.w, rec.objective, rec.diverged)

    w_final, _ = svrg.run(obj, part, algo_cfg, sink=sink, stats=stats)
    return rows, w_final


def _run_gd_point(name, obj, part, stats, point, cfg, f_star, test, clock):
    algo_cfg = baselines.GdConfig(
        stepsize_mode=str(point.get("stepsize_mode", "backtracking")),
        eta=float(point.get("eta", 1.0)),
        c=float(point.get("c", 0.25)),
        rho=float(point.get("rho", 0.5)),
        rounds=cfg.rounds,
    )
    rows, record = _curve_runner(name, obj, test, f_star, cfg.rounds, cfg.eval_every, clock)
    w = np.zeros(obj.dim)
    f0 = obj.loss_value(w)
    record(0, w, f0, False)
    clock.restart()
    for s in range(1, cfg.rounds + 1):
        try:
            w = baselines.gd_round(obj, w, algo_cfg)
        except baselines.LineSearchError:
            record(s, w, float("nan"), True)
            break
        f_new = obj.loss_value(w)
        diverged = not np.isfinite(f_new) or f_new > svrg.DIVERGENCE_FACTOR * f0
        record(s, w, f_new, diverged)
        if diverged:
            break
    return rows, w


def _run_cocoa_point(name, obj, part, stats, point, cfg, f_star, test, clock):
    algo_cfg = baselines.CocoaConfig(
        local_iters=int(point.get("local_iters", 200)),
        aggregation=str(point.get("aggregation", "average")),
        sigma_prime=float(point["sigma_prime"]) if point.get("sigma_prime") is not None else None,
        rounds=cfg.rounds,
        seed=cfg.seed,
    )
    rows, record = _curve_runner(name, obj, test, f_star, cfg.rounds, cfg.eval_every, clock)
    state = baselines.init_dual(obj)
    f0 = obj.loss_value(state.v)
    record(0, state.v, f0, False)
    gap_first = baselines.duality_gap(obj, state)
    clock.restart()
    for s in range(1, cfg.rounds + 1):
        try:
            state = baselines.cocoa_round(obj, part, state, algo_cfg, s)
        except ValueError:
            record(s, state.v, float("nan"), True)
            break
        f_new = obj.loss_value(state.v)
        diverged = not np.isfinite(f_new) or f_new > svrg.DIVERGENCE_FACTOR * f0
        record(s, state.v, f_new, diverged)
        if diverged:
            break
    gap_last = baselines.duality_gap(obj, state)
    return rows, state.v, {"gap_first": gap_first, "gap_last": gap_last}


def _point_label(point: dict) -> str:
    return ",".join(f"{k}={point[k]}" for k in sorted(point))


def run_experiment(cfg: ExperimentConfig, no_timing: bool = False) -> dict:
    """Execute the full benchmark; returns a summary of what was written.

    The offline optimum is solved first and its failure is fatal, since every
    suboptimality column depends on it.
    """
    train, test, part = _load_data(cfg)
    obj = LogisticObjective(train, lam=cfg.lam, use_bias=cfg.use_bias)
    os.makedirs(cfg.output_dir, exist_ok=True)

    w_star, f_star = baselines.solve_optimum(obj, tol=cfg.opt_tol, seed=cfg.seed,
                                             max_evals=cfg.opt_max_evals)
    opt_row = RoundMetrics(
        "opt", 0, f_star, 0.0,
        obj.test_error(w_star, test) if test is not None else 0.0,
        0.0, False)
    _write_csv(os.path.join(cfg.output_dir, "opt.csv"), [opt_row])

    stats_natural = compute_stats(train, part)
    runners = {"svrg": _run_svrg_point, "gd": _run_gd_point, "cocoa": _run_cocoa_point}
    summary_rows = [opt_row]
    chosen: dict[str, dict] = {}
    extras: dict[str, dict] = {}

    for algo_index, spec in enumerate(cfg.algorithms):
        if spec.reshuffled:
            algo_part = reshuffle(part, (cfg.seed, 2, algo_index))
            algo_stats = compute_stats(train, algo_part)
        else:
            algo_part, algo_stats = part, stats_natural
        best = None
        for point in spec.grid_points():
            clock = _RoundClock(enabled=not no_timing)
            out = runners[spec.kind](spec.name, obj, algo_part, algo_stats,
                                     point, cfg, f_star, test, clock)
            rows, w_final = out[0], out[1]
            extra = out[2] if len(out) > 2 else {}
            final = rows[-1]
            final_sub = final.suboptimality if np.isfinite(final.suboptimality) else float("inf")
            rank = (final.diverged, final_sub)
            if best is None or rank < best[0]:
                best = (rank, rows, w_final, point, extra)
        _, rows, w_final, point, extra = best
        _write_csv(os.path.join(cfg.output_dir, f"{spec.name}.csv"), rows)
        svrg.save_checkpoint(
            os.path.join(cfg.output_dir, f"{spec.name}.ckpt"), w_final,
            rows[-1].round_index, svrg.config_hash({"name": spec.name, **point}))
        summary_rows.extend(rows)
        chosen[spec.name] = point
        if extra:
            extras[spec.name] = extra

    _write_csv(os.path.join(cfg.output_dir, "summary.csv"), summary_rows)
    metadata = {
        "version": fedopt.__version__,
        "backend": fedopt.BACKEND,
        "f_star": f_star,
        "opt_tol": cfg.opt_tol,
        "rounds": cfg.rounds,
        "seed": cfg.seed,
        "lam": obj.lam,
        "use_bias": cfg.use_bias,
        "train_n": train.n,
        "train_d": train.d,
        "num_nodes": part.num_nodes,
        "chosen_grid_points": chosen,
        "algorithm_extras": extras,
    }
    with open(os.path.join(cfg.output_dir, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return metadata


def _write_csv(path, rows: list[RoundMetrics]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv_row() + "\n")


def read_metrics_csv(path) -> list[RoundMetrics]:
    rows: list[RoundMetrics] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 7:
                raise ValueError(f"malformed row {line!r}")
            rows.append(RoundMetrics(parts[0], int(parts[1]), float(parts[2]),
                                     float(parts[3]), float(parts[4]),
                                     float(parts[5]), parts[6] == "true"))
    return rows


LOG_FLOOR = 1e-16


def emit_plot(metrics_paths, out_path) -> None:
    """Two-panel SVG: log suboptimality and test error per round.

    Suboptimality below LOG_FLOOR (including the optimum's own row) is
    clamped so it stays drawable on the log axis; single-row series render as
    horizontal reference lines.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows: list[RoundMetrics] = []
    for path in metrics_paths:
        rows.extend(read_metrics_csv(path))
    if not rows:
        raise ValueError("no metrics rows to plot")
    by_algo: dict[str, list[RoundMetrics]] = {}
    for row in rows:
        by_algo.setdefault(row.algorithm, []).append(row)

    plt.rcParams["svg.fonttype"] = "none"
    fig, (ax_sub, ax_err) = plt.subplots(1, 2, figsize=(11, 4.2))
    for name, series in by_algo.items():
        series.sort(key=lambda r: r.round_index)
        rounds = [r.round_index for r in series]
        subopt = [max(r.suboptimality, LOG_FLOOR) for r in series]
        err = [r.test_error for r in series]
        if len(series) == 1:
            ax_sub.axhline(subopt[0], linestyle="--", color="gray", label=name)
            ax_err.axhline(err[0], linestyle="--", color="gray", label=name)
        else:
            ax_sub.plot(rounds, subopt, marker=".", label=name)
            ax_err.plot(rounds, err, marker=".", label=name)
    ax_sub.set_yscale("log")
    ax_sub.set_xlabel("rounds of communication")
    ax_sub.set_ylabel("suboptimality")
    ax_err.set_xlabel("rounds of communication")
    ax_err.set_ylabel("test error")
    ax_sub.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
