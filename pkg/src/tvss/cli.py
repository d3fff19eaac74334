"""Command-line client: generate | solve | compare | serve.

The CLI is a thin frontend over the service layer.  By default it calls the
request handlers in-process; with ``--server URL`` it sends the same request
bodies to a running instance over HTTP.  File handling (reading inputs,
writing traces, labelings, curves, and summaries) always happens locally.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import write_compare_outputs, write_generate_outputs, write_solve_outputs
from .graph import GraphFormatError, load_edge_list, load_labels_csv
from .service import (CompareRequest, GenerateRequest, SimParams, SolveRequest,
                      SolverParams, handle_compare, handle_generate, handle_solve)


class ServiceClient:
    """Dispatches request models in-process or to a remote server."""

    def __init__(self, server=None, transport=None):
        self.server = server
        self._transport = transport  # test hook: httpx transport for a fake server

    def _post(self, path, request, response_cls):
        import httpx
        with httpx.Client(base_url=self.server, transport=self._transport,
                          timeout=600.0) as client:
            resp = client.post(path, json=request.model_dump())
            if resp.status_code != 200:
                raise RuntimeError(f"server returned {resp.status_code}: {resp.text}")
            return response_cls(**resp.json())

    def generate(self, req):
        from .service import GenerateResponse
        if self.server is None:
            return handle_generate(req)
        return self._post("/generate", req, GenerateResponse)

    def solve(self, req):
        from .service import SolveResponse
        if self.server is None:
            return handle_solve(req)
        return self._post("/solve", req, SolveResponse)

    def compare(self, req):
        from .service import CompareResponse
        if self.server is None:
            return handle_compare(req)
        return self._post("/compare", req, CompareResponse)


def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _solver_params(args, cfg):
    base = dict(cfg.get("solver", {}))
    if args.eps is not None:
        base["epsilon"] = args.eps
    if args.mu0 is not None:
        base["mu0"] = args.mu0
    if args.kappa is not None:
        base["kappa"] = args.kappa
    if args.iters is not None:
        base["max_iters"] = args.iters
    if args.lipschitz_mode is not None:
        base["lipschitz_mode"] = args.lipschitz_mode
    return SolverParams(**base)


def _sim_params(args, cfg, epsilon, max_iters):
    base = dict(cfg.get("sim", {}))
    base.setdefault("epsilon", epsilon)
    base.setdefault("max_iters", max_iters)
    if args.mu0 is not None:
        base.setdefault("mu", args.mu0)
    if args.partitions is not None:
        base["partitions"] = args.partitions
    if args.consensus_k is not None:
        base["consensus_rounds"] = args.consensus_k
    if args.residual_mode is not None:
        base["residual_mode"] = args.residual_mode
    if args.lipschitz_mode is not None:
        base["lipschitz_mode"] = args.lipschitz_mode
    return SimParams(**base)


def cmd_generate(args):
    cfg = _load_config(args.config)
    cfg.setdefault("seed", 0)
    if args.seed is not None:
        cfg["seed"] = args.seed
    req = GenerateRequest(**cfg)
    resp = ServiceClient(args.server).generate(req)

    from .graph import LabelSet, parse_edge_list
    import numpy as np
    result_graph = parse_edge_list(resp.edge_list)
    from .experiments import GenerateResult
    result = GenerateResult(
        graph=result_graph,
        ground_truth=np.asarray(resp.ground_truth),
        labels=LabelSet(nodes=np.array([e.node for e in resp.labels]),
                        values=np.array([e.value for e in resp.labels])),
        stats=resp.stats.model_dump())
    paths = write_generate_outputs(result, args.out)
    s = resp.stats
    print(f"nodes={s.nodes} edges={s.edges} max_degree={s.max_degree:g} "
          f"diameter={s.diameter} labeled={s.labeled}")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_solve(args):
    cfg = _load_config(args.config)
    with open(args.graph, "r", encoding="utf-8") as f:
        edge_text = f.read()
    nodes, values = load_labels_csv(args.labels)
    labels = [{"node": int(i), "value": float(v)} for i, v in zip(nodes, values)]
    ground_truth = None
    if args.ground_truth is not None:
        g = load_edge_list(args.graph)
        from .graph import load_signal_csv
        ground_truth = [float(v) for v in load_signal_csv(args.ground_truth, g.node_count)]

    solver = _solver_params(args, cfg)
    sim = None
    if args.method == "sim":
        sim = _sim_params(args, cfg, solver.epsilon, solver.max_iters)
    req = SolveRequest(edge_list=edge_text, labels=labels, method=args.method,
                       solver=solver, sim=sim, lp_iters=args.iters,
                       ground_truth=ground_truth)
    resp = ServiceClient(args.server).solve(req)

    from .experiments import SolveResult
    import numpy as np
    summary = resp.summary.model_dump(exclude_none=True)
    result = SolveResult(method=resp.method, labeling=np.asarray(resp.labeling),
                         trace_csv=resp.trace_csv, summary=summary)
    paths = write_solve_outputs(result, args.out)
    brief = f"method={resp.method} iterations={resp.summary.iterations} " \
            f"emp_err={resp.summary.emp_err:.6g}"
    if resp.summary.nmse is not None:
        brief += f" nmse={resp.summary.nmse:.6g}"
    print(brief)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_compare(args):
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.runs is not None:
        cfg["monte_carlo_runs"] = args.runs
    generator = GenerateRequest(**cfg.get("generator", {}))
    solver = _solver_params(args, cfg)
    sim = None
    if cfg.get("sim") is not None:
        sim = _sim_params(args, cfg, solver.epsilon, solver.max_iters)
    req = CompareRequest(generator=generator, solver=solver, sim=sim,
                         lp_iters=cfg.get("lp_iters"),
                         monte_carlo_runs=cfg.get("monte_carlo_runs", 100),
                         seed=cfg.get("seed", 0),
                         relative_epsilon=cfg.get("relative_epsilon", 1e-5))
    resp = ServiceClient(args.server).compare(req)

    from .experiments import CompareResult, RunSummary
    summary = RunSummary(nmse_nest=resp.nmse_nest, nmse_lp=resp.nmse_lp,
                         nmse_sim=resp.nmse_sim,
                         per_run_nest=resp.per_run["nest"],
                         per_run_lp=resp.per_run["lp"],
                         per_run_sim=resp.per_run.get("sim"),
                         wall_time_s=resp.wall_time_s)
    curves = _curves_from_csv(resp.curves_csv)
    result = CompareResult(summary=summary, curves=curves,
                           iterations=resp.iterations, runs=resp.runs,
                           seed=resp.seed)
    paths = write_compare_outputs(result, args.out)
    line = f"runs={resp.runs} nmse_nest={resp.nmse_nest:.6g} nmse_lp={resp.nmse_lp:.6g}"
    if resp.nmse_sim is not None:
        line += f" nmse_sim={resp.nmse_sim:.6g}"
    print(line)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _curves_from_csv(text):
    import numpy as np
    lines = text.strip().splitlines()
    header = lines[0].split(",")[1:]
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return {name.removeprefix("nmse_"): data[:, idx + 1]
            for idx, name in enumerate(header)}


def cmd_serve(args):
    import uvicorn
    uvicorn.run("tvss.service:app", host=args.host, port=args.port)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tvss",
        description="Semi-supervised graph-signal learning by smoothed "
                    "total-variation minimization")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a clustered benchmark instance")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("solve", help="run one method on one instance")
    p.add_argument("--method", required=True,
                   choices=["nesterov", "accel", "lp", "sim"])
    p.add_argument("--graph", required=True, help="edge-list TSV")
    p.add_argument("--labels", required=True, help="sampled labels CSV")
    p.add_argument("--ground-truth", default=None, help="full labeling CSV for NMSE")
    p.add_argument("--config", help="config JSON with solver/sim sections")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--mu0", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--partitions", type=int, default=None)
    p.add_argument("--consensus-k", type=int, default=None)
    p.add_argument("--lipschitz-mode", choices=["paper", "corrected"], default=None)
    p.add_argument("--residual-mode", choices=["paper", "calibrated"], default=None)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("compare", help="Monte-Carlo comparison across methods")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--mu0", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--partitions", type=int, default=None)
    p.add_argument("--consensus-k", type=int, default=None)
    p.add_argument("--lipschitz-mode", choices=["paper", "corrected"], default=None)
    p.add_argument("--residual-mode", choices=["paper", "calibrated"], default=None)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (GraphFormatError, ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
