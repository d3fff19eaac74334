"""Experiment drivers: dataset generation, method dispatch, Monte-Carlo studies.

These functions are the computational backend shared by the HTTP service and
the command-line client.  They deal in in-memory objects; file emission is
factored into small ``write_*`` helpers so both frontends produce identical
artifacts (edge-list TSV, label CSVs, per-iteration trace CSVs, NMSE-curve
CSV, and a JSON summary).

Monte-Carlo comparisons re-draw the graph, the per-cluster values, and the
sampling set for every run (seeded as config seed + run index) and average
the per-run error ratios.  Runs are independent; setting the ``TVSS_THREADS``
environment variable above 1 executes them in a process pool, with results
aggregated in run order so the output does not depend on scheduling.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baseline import label_propagation
from .graph import (TwoClusterConfig, diameter, generate_two_cluster, max_degree,
                    save_edge_list, save_labels_csv, save_signal_csv)
from .mpsim import SimConfig, init_sim, snapshots_to_csv_text
from .solver import SolverConfig, nmse, solve

METHODS = ("nesterov", "accel", "lp", "sim")


def thread_count():
    """Worker cap for Monte-Carlo runs, from TVSS_THREADS (default 1)."""
    raw = os.environ.get("TVSS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"TVSS_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol of a Monte-Carlo comparison study.

    ``relative_epsilon`` scales the error level per instance as
    relative_epsilon * ||ground truth||_2 (set None to use the absolute
    solver epsilon).  All compared methods run exactly ``solver.max_iters``
    outer iterations; ``lp_iters`` may restate that count but must agree.
    """

    generator: TwoClusterConfig
    solver: SolverConfig
    sim: SimConfig | None = None
    lp_iters: int | None = None
    monte_carlo_runs: int = 100
    seed: int = 0
    relative_epsilon: float | None = 1e-5
    output_dir: str | None = None

    def __post_init__(self):
        if self.monte_carlo_runs < 1:
            raise ValueError("monte_carlo_runs must be >= 1")
        if self.lp_iters is not None and self.lp_iters != self.solver.max_iters:
            raise ValueError("compared methods must run the same number of "
                             f"iterations: lp_iters={self.lp_iters} vs "
                             f"solver.max_iters={self.solver.max_iters}")
        if self.relative_epsilon is not None and not (self.relative_epsilon > 0):
            raise ValueError("relative_epsilon must be positive when set")

    def to_json_dict(self):
        return {
            "generator": self.generator.to_json_dict(),
            "solver": self.solver.to_json_dict(),
            "sim": self.sim.to_json_dict() if self.sim is not None else None,
            "lp_iters": self.lp_iters,
            "monte_carlo_runs": self.monte_carlo_runs,
            "seed": self.seed,
            "relative_epsilon": self.relative_epsilon,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_json_dict(cls, d):
        d = dict(d)
        d["generator"] = TwoClusterConfig.from_json_dict(d["generator"])
        d["solver"] = SolverConfig.from_json_dict(d["solver"])
        if d.get("sim") is not None:
            d["sim"] = SimConfig.from_json_dict(d["sim"])
        return cls(**d)


# -- generation ---------------------------------------------------------------

@dataclass
class GenerateResult:
    graph: "EmpiricalGraph"
    ground_truth: np.ndarray
    labels: "LabelSet"
    stats: dict


def run_generate(cfg):
    g, ground_truth, labels = generate_two_cluster(cfg)
    stats = {
        "nodes": g.node_count,
        "edges": g.edge_count,
        "max_degree": max_degree(g),
        "diameter": diameter(g),
        "labeled": labels.size,
    }
    return GenerateResult(graph=g, ground_truth=ground_truth, labels=labels,
                          stats=stats)


def write_generate_outputs(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "edges": os.path.join(out_dir, "edges.tsv"),
        "ground_truth": os.path.join(out_dir, "ground_truth.csv"),
        "labels": os.path.join(out_dir, "labels.csv"),
        "stats": os.path.join(out_dir, "stats.json"),
    }
    save_edge_list(paths["edges"], result.graph)
    save_signal_csv(paths["ground_truth"], result.ground_truth)
    save_labels_csv(paths["labels"], result.labels.nodes, result.labels.values)
    with open(paths["stats"], "w", encoding="utf-8") as f:
        json.dump(result.stats, f, indent=2, sort_keys=True)
        f.write("\n")
    return paths


# -- single-method dispatch -----------------------------------------------------

@dataclass
class SolveResult:
    method: str
    labeling: np.ndarray
    trace_csv: str
    summary: dict


def run_solve(method, g, labels, solver_cfg=None, sim_cfg=None, lp_iters=None,
              x0=None, ground_truth=None):
    """Run one method on one instance; returns labeling, trace CSV, summary.

    "nesterov" runs the solver with the smoothing fixed at mu0 (kappa forced
    to 1), "accel" uses the configured kappa schedule, "lp" is the clamped
    label-propagation baseline, and "sim" is the message-passing simulator.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    t0 = time.perf_counter()

    if method in ("nesterov", "accel"):
        if solver_cfg is None:
            raise ValueError(f"method {method!r} needs a solver config")
        cfg = replace(solver_cfg, kappa=1.0) if method == "nesterov" else solver_cfg
        labeling, trace = solve(g, labels, cfg, x0=x0, ground_truth=ground_truth)
        final = trace[-1]
        summary = {"iterations": len(trace), "emp_err": final.emp_err,
                   "tv": final.tv, "f_mu": final.f_mu, "nmse": final.nmse}
        trace_csv = trace.to_csv_text()
    elif method == "lp":
        iters = lp_iters if lp_iters is not None else (
            solver_cfg.max_iters if solver_cfg is not None else None)
        if iters is None:
            raise ValueError("method 'lp' needs lp_iters or a solver config")
        labeling, trace = label_propagation(g, labels, iters, x0=x0,
                                            ground_truth=ground_truth)
        final = trace[-1]
        summary = {"iterations": len(trace), "emp_err": final.emp_err,
                   "tv": final.tv, "nmse": final.nmse}
        trace_csv = trace.to_csv_text()
    else:
        if sim_cfg is None:
            raise ValueError("method 'sim' needs a sim config")
        simulator = init_sim(g, labels, sim_cfg, x0=x0, ground_truth=ground_truth)
        labeling, snaps = simulator.run()
        last = snaps[-1]
        summary = {"iterations": len(snaps), "emp_err": last.emp_err_true,
                   "nmse": last.nmse,
                   "message_stats": {
                       "total": simulator.stats.total_messages,
                       "inter_partition": simulator.stats.inter_partition_messages,
                       "rounds": simulator.stats.rounds}}
        trace_csv = snapshots_to_csv_text(snaps)

    summary["wall_time_s"] = time.perf_counter() - t0
    return SolveResult(method=method, labeling=labeling, trace_csv=trace_csv,
                       summary=summary)


def write_solve_outputs(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "trace": os.path.join(out_dir, f"trace_{result.method}.csv"),
        "labeling": os.path.join(out_dir, f"labeling_{result.method}.csv"),
        "summary": os.path.join(out_dir, f"summary_{result.method}.json"),
    }
    with open(paths["trace"], "w", encoding="utf-8") as f:
        f.write(result.trace_csv)
    save_signal_csv(paths["labeling"], result.labeling)
    with open(paths["summary"], "w", encoding="utf-8") as f:
        json.dump(result.summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return paths


# -- Monte-Carlo comparison ------------------------------------------------------

@dataclass
class RunSummary:
    """Averaged and per-run errors of a comparison study."""

    nmse_nest: float
    nmse_lp: float
    nmse_sim: float | None
    per_run_nest: list
    per_run_lp: list
    per_run_sim: list | None
    wall_time_s: dict

    def __post_init__(self):
        for v in (self.nmse_nest, self.nmse_lp, self.nmse_sim):
            if v is not None and not (v >= 0.0 and np.isfinite(v)):
                raise ValueError(f"NMSE must be finite and non-negative, got {v}")

    def to_json_dict(self):
        return {
            "nmse_nest": self.nmse_nest,
            "nmse_lp": self.nmse_lp,
            "nmse_sim": self.nmse_sim,
            "per_run": {"nest": self.per_run_nest, "lp": self.per_run_lp,
                        "sim": self.per_run_sim},
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class CompareResult:
    summary: RunSummary
    curves: dict
    iterations: int
    runs: int
    seed: int

    def curves_csv_text(self):
        methods = [m for m in ("nest", "lp", "sim") if m in self.curves]
        lines = ["k," + ",".join(f"nmse_{m}" for m in methods)]
        for k in range(self.iterations):
            vals = ",".join(f"{self.curves[m][k]:.17g}" for m in methods)
            lines.append(f"{k},{vals}")
        return "\n".join(lines) + "\n"

    def to_summary_json_dict(self):
        d = self.summary.to_json_dict()
        d.update({"iterations": self.iterations, "runs": self.runs, "seed": self.seed})
        return d


def _compare_single_run(cfg, run_idx):
    """One Monte-Carlo run: fresh instance, all methods, per-iteration NMSE."""
    gen_cfg = replace(cfg.generator, seed=cfg.seed + run_idx)
    g, ground_truth, labels = generate_two_cluster(gen_cfg)

    if cfg.relative_epsilon is not None:
        eps = cfg.relative_epsilon * float(np.linalg.norm(ground_truth))
    else:
        eps = cfg.solver.epsilon
    solver_cfg = replace(cfg.solver, epsilon=eps)
    iters = solver_cfg.max_iters
    out = {}

    t0 = time.perf_counter()
    _, trace = solve(g, labels, solver_cfg, ground_truth=ground_truth)
    out["t_nest"] = time.perf_counter() - t0
    out["nest"] = trace.column("nmse")

    t0 = time.perf_counter()
    _, lp_trace = label_propagation(g, labels, iters, ground_truth=ground_truth)
    out["t_lp"] = time.perf_counter() - t0
    out["lp"] = lp_trace.column("nmse")

    if cfg.sim is not None:
        sim_cfg = replace(cfg.sim, epsilon=eps, max_iters=iters)
        t0 = time.perf_counter()
        simulator = init_sim(g, labels, sim_cfg, ground_truth=ground_truth)
        _, snaps = simulator.run()
        out["t_sim"] = time.perf_counter() - t0
        out["sim"] = np.array([s.nmse for s in snaps])
    return out


def run_compare(cfg):
    """Monte-Carlo comparison across methods; returns a :class:`CompareResult`.

    Per-iteration NMSE curves are the mean over runs of each run's error
    ratio.  Nothing is asserted here; downstream consumers judge the output.
    """
    runs = cfg.monte_carlo_runs
    workers = min(thread_count(), runs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_compare_single_run, [cfg] * runs, range(runs)))
    else:
        results = [_compare_single_run(cfg, idx) for idx in range(runs)]

    iters = cfg.solver.max_iters
    curves = {"nest": np.zeros(iters), "lp": np.zeros(iters)}
    if cfg.sim is not None:
        curves["sim"] = np.zeros(iters)
    times = {"nest": 0.0, "lp": 0.0}
    if cfg.sim is not None:
        times["sim"] = 0.0
    per_run = {m: [] for m in curves}

    for res in results:  # fixed run order keeps aggregation deterministic
        curves["nest"] += res["nest"]
        curves["lp"] += res["lp"]
        per_run["nest"].append(float(res["nest"][-1]))
        per_run["lp"].append(float(res["lp"][-1]))
        times["nest"] += res["t_nest"]
        times["lp"] += res["t_lp"]
        if cfg.sim is not None:
            curves["sim"] += res["sim"]
            per_run["sim"].append(float(res["sim"][-1]))
            times["sim"] += res["t_sim"]
    for m in curves:
        curves[m] /= runs

    summary = RunSummary(
        nmse_nest=float(np.mean(per_run["nest"])),
        nmse_lp=float(np.mean(per_run["lp"])),
        nmse_sim=float(np.mean(per_run["sim"])) if cfg.sim is not None else None,
        per_run_nest=per_run["nest"],
        per_run_lp=per_run["lp"],
        per_run_sim=per_run["sim"] if cfg.sim is not None else None,
        wall_time_s=times)
    return CompareResult(summary=summary, curves=curves, iterations=iters,
                         runs=runs, seed=cfg.seed)


def write_compare_outputs(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "curves": os.path.join(out_dir, "nmse_curves.csv"),
        "summary": os.path.join(out_dir, "summary.json"),
    }
    with open(paths["curves"], "w", encoding="utf-8") as f:
        f.write(result.curves_csv_text())
    with open(paths["summary"], "w", encoding="utf-8") as f:
        json.dump(result.to_summary_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    return paths
