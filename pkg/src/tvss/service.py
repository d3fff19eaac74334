"""HTTP service exposing the toolkit: generate, solve, and compare endpoints.

Request and response bodies are pydantic models; graphs travel as edge-list
text (the same format the files use) and labelings as node/value pairs.  The
``handle_*`` functions implement the endpoints and are also called directly
by the command-line client when no server is involved.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .experiments import (ExperimentConfig, run_compare, run_generate, run_solve)
from .graph import (GraphFormatError, LabelSet, TwoClusterConfig, edge_list_to_text,
                    parse_edge_list)
from .mpsim import SimConfig
from .solver import SolverConfig


class LabelEntry(BaseModel):
    node: int
    value: float


class GenerateRequest(BaseModel):
    cluster_size: int = 100
    clusters: int = 2
    degree_cap: int = 8
    gate_edges: int = 2
    label_fraction: float = 0.1
    weight: float = 1.0
    seed: int = 0

    def to_config(self):
        return TwoClusterConfig(**self.model_dump())


class GraphStats(BaseModel):
    nodes: int
    edges: int
    max_degree: float
    diameter: int
    labeled: int


class GenerateResponse(BaseModel):
    edge_list: str
    ground_truth: list[float]
    labels: list[LabelEntry]
    stats: GraphStats


class SolverParams(BaseModel):
    epsilon: float = 0.0
    mu0: float = 1.0
    kappa: float = 1.0
    max_iters: int = 1000
    lipschitz_mode: Literal["paper", "corrected"] = "corrected"
    stop: Literal["fixed_iters", "rel_objective"] = "fixed_iters"
    stop_threshold: float = 0.0

    def to_config(self):
        return SolverConfig(**self.model_dump())


class SimParams(BaseModel):
    mu: float = 1.0
    epsilon: float = 0.0
    max_iters: int = 100
    consensus_rounds: int = 100
    partitions: int = 8
    residual_mode: Literal["paper", "calibrated"] = "calibrated"
    lipschitz_mode: Literal["paper", "corrected"] = "corrected"
    seed: int = 0

    def to_config(self):
        return SimConfig(**self.model_dump())


class SolveRequest(BaseModel):
    edge_list: str
    labels: list[LabelEntry] = Field(min_length=1)
    method: Literal["nesterov", "accel", "lp", "sim"]
    solver: Optional[SolverParams] = None
    sim: Optional[SimParams] = None
    lp_iters: Optional[int] = None
    x0: Optional[list[float]] = None
    ground_truth: Optional[list[float]] = None


class MessageStatsModel(BaseModel):
    total: int
    inter_partition: int
    rounds: int


class SolveSummary(BaseModel):
    iterations: int
    emp_err: float
    tv: Optional[float] = None
    f_mu: Optional[float] = None
    nmse: Optional[float] = None
    wall_time_s: float
    message_stats: Optional[MessageStatsModel] = None


class SolveResponse(BaseModel):
    method: str
    labeling: list[float]
    trace_csv: str
    summary: SolveSummary


class CompareRequest(BaseModel):
    generator: GenerateRequest = GenerateRequest()
    solver: SolverParams
    sim: Optional[SimParams] = None
    lp_iters: Optional[int] = None
    monte_carlo_runs: int = 100
    seed: int = 0
    relative_epsilon: Optional[float] = 1e-5

    def to_config(self):
        return ExperimentConfig(
            generator=self.generator.to_config(),
            solver=self.solver.to_config(),
            sim=self.sim.to_config() if self.sim is not None else None,
            lp_iters=self.lp_iters,
            monte_carlo_runs=self.monte_carlo_runs,
            seed=self.seed,
            relative_epsilon=self.relative_epsilon)


class CompareResponse(BaseModel):
    nmse_nest: float
    nmse_lp: float
    nmse_sim: Optional[float] = None
    per_run: dict
    wall_time_s: dict
    iterations: int
    runs: int
    seed: int
    curves_csv: str


# -- handlers (shared by HTTP routes and the in-process CLI path) ----------------

def handle_generate(req: GenerateRequest) -> GenerateResponse:
    result = run_generate(req.to_config())
    return GenerateResponse(
        edge_list=edge_list_to_text(result.graph),
        ground_truth=[float(v) for v in result.ground_truth],
        labels=[LabelEntry(node=int(i), value=float(v))
                for i, v in zip(result.labels.nodes, result.labels.values)],
        stats=GraphStats(**result.stats))


def handle_solve(req: SolveRequest) -> SolveResponse:
    g = parse_edge_list(req.edge_list, source="<request edge_list>")
    labels = LabelSet(nodes=np.array([e.node for e in req.labels]),
                      values=np.array([e.value for e in req.labels]))
    result = run_solve(
        req.method, g, labels,
        solver_cfg=req.solver.to_config() if req.solver is not None else None,
        sim_cfg=req.sim.to_config() if req.sim is not None else None,
        lp_iters=req.lp_iters,
        x0=np.asarray(req.x0, dtype=np.float64) if req.x0 is not None else None,
        ground_truth=(np.asarray(req.ground_truth, dtype=np.float64)
                      if req.ground_truth is not None else None))
    s = dict(result.summary)
    stats = s.pop("message_stats", None)
    return SolveResponse(
        method=result.method,
        labeling=[float(v) for v in result.labeling],
        trace_csv=result.trace_csv,
        summary=SolveSummary(
            **s, message_stats=MessageStatsModel(**stats) if stats else None))


def handle_compare(req: CompareRequest) -> CompareResponse:
    result = run_compare(req.to_config())
    summary = result.summary
    return CompareResponse(
        nmse_nest=summary.nmse_nest,
        nmse_lp=summary.nmse_lp,
        nmse_sim=summary.nmse_sim,
        per_run={"nest": summary.per_run_nest, "lp": summary.per_run_lp,
                 "sim": summary.per_run_sim},
        wall_time_s=summary.wall_time_s,
        iterations=result.iterations,
        runs=result.runs,
        seed=result.seed,
        curves_csv=result.curves_csv_text())


# -- FastAPI wiring --------------------------------------------------------------

app = FastAPI(title="tvss", version=__version__,
              description="Total-variation semi-supervised learning on graphs")


def _wrap(fn, req):
    try:
        return fn(req)
    except (ValueError, GraphFormatError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/generate", response_model=GenerateResponse)
def generate(req: GenerateRequest):
    return _wrap(handle_generate, req)


@app.post("/solve", response_model=SolveResponse)
def solve_endpoint(req: SolveRequest):
    return _wrap(handle_solve, req)


@app.post("/compare", response_model=CompareResponse)
def compare(req: CompareRequest):
    return _wrap(handle_compare, req)
