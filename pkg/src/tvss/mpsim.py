"""Round-synchronous simulator of the distributed smoothed-TV learner.

Every node holds only its own scalars and exchanges values with its graph
neighbors in barrier-separated rounds.  One outer iteration consists of

  1. an x-broadcast, after which each node forms its local variation and the
     clipped dual entries P_ij toward each neighbor;
  2. a P-broadcast, after which each node applies the scaled gradient
     correction g_i = (1/L) * (sum_j sqrt(W_ji) P_ji - sum_j sqrt(W_ij) P_ij)
     and updates its running descent accumulator;
  3. two sweeps of Metropolis-Hastings average consensus (weights
     u_ij = 1/(max(deg_i, deg_j)+1), combinatorial degrees) that spread the
     squared label residuals, giving every node an estimate r_i of the
     network-wide empirical error;
  4. node-local feasibility projections driven by r_i and the tau-weighted
     mixing of the two projected points.

The mixing matrix is symmetric doubly stochastic, so each consensus round
preserves the exact mean and never expands the value range.  With the
calibrated residual scaling sqrt(N * b_i / (2M)) an exact-consensus run
reproduces the centralized solver trajectory; the literal sqrt(N * b_i)
scaling is kept selectable.

The engine advances all nodes with vectorized array operations; every value a
node consumes still arrives through a directed edge slot of the graph, and
message counters account for each neighbor-to-neighbor delivery, split into
intra- and inter-partition traffic under the static assignment
partition(i) = ((i - 1) mod partitions) + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import as_signal, combinatorial_degrees, is_connected
from .solver import empirical_error, lipschitz_constant, nmse

RESIDUAL_MODES = ("paper", "calibrated")

SIM_TRACE_COLUMNS = ("k", "nmse", "emp_err_est_mean", "emp_err_true",
                     "total_msgs", "inter_partition_msgs")


@dataclass(frozen=True)
class SimConfig:
    """Simulator parameters: smoothing is fixed at ``mu`` for the whole run."""

    mu: float
    epsilon: float
    max_iters: int = 100
    consensus_rounds: int = 1
    partitions: int = 1
    residual_mode: str = "calibrated"
    lipschitz_mode: str = "corrected"
    seed: int = 0

    def __post_init__(self):
        if not (self.mu > 0.0):
            raise ValueError("mu must be positive")
        if not (self.epsilon >= 0.0):
            raise ValueError("epsilon must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.consensus_rounds < 1:
            raise ValueError("consensus_rounds must be >= 1")
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")
        if self.residual_mode not in RESIDUAL_MODES:
            raise ValueError(f"residual_mode must be one of {RESIDUAL_MODES}")
        if self.lipschitz_mode not in ("paper", "corrected"):
            raise ValueError("lipschitz_mode must be 'paper' or 'corrected'")

    def to_json_dict(self):
        return {k: getattr(self, k) for k in
                ("mu", "epsilon", "max_iters", "consensus_rounds", "partitions",
                 "residual_mode", "lipschitz_mode", "seed")}

    @classmethod
    def from_json_dict(cls, d):
        return cls(**d)


@dataclass
class MessageStats:
    """Cumulative neighbor-message accounting."""

    total_messages: int = 0
    inter_partition_messages: int = 0
    rounds: int = 0


@dataclass
class NodeState:
    """Snapshot of one node's local scalars and per-neighbor values."""

    index: int
    x: float
    x0: float
    q: float
    q_tilde: float
    g_bar: float
    b: float
    b_tilde: float
    r: float
    r_tilde: float
    alpha: float
    tau: float
    y: float | None
    neighbors: tuple
    p_out: tuple
    u: tuple


@dataclass
class SimSnapshot:
    k: int
    nmse: float | None
    emp_err_est_mean: float
    emp_err_true: float
    total_msgs: int
    inter_partition_msgs: int


def node_partition(i, partitions):
    """Static 1-based assignment: node i goes to partition ((i-1) mod P) + 1."""
    if not (i >= 1):
        raise ValueError("node indices are 1-based")
    return (i - 1) % partitions + 1


def metropolis_hastings_weights(g):
    """Per-slot consensus weights u_ij = 1/(max(deg_i, deg_j) + 1).

    Combinatorial (neighbor-count) degrees make the mixing matrix symmetric
    and doubly stochastic regardless of the edge weights.  Returns
    (slot_weights, per_node_sums); each per-node sum is strictly below 1.
    """
    deg = combinatorial_degrees(g)
    u = 1.0 / (np.maximum(deg[g.slot_row], deg[g.slot_col]) + 1.0)
    return u, np.bincount(g.slot_row, weights=u, minlength=g.node_count)


def consensus_average(g, values, rounds):
    """Apply ``rounds`` synchronized Metropolis-Hastings mixing steps.

    Each round replaces b_i by (1 - sum_j u_ij) b_i + sum_j u_ij b_j.  The
    vector mean is preserved exactly each round and the entries contract
    toward it on connected graphs.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    b = as_signal(g, values).copy()
    u, usum = metropolis_hastings_weights(g)
    rows, cols = g.slot_row, g.slot_col
    keep = 1.0 - usum
    for _ in range(rounds):
        b = keep * b + np.bincount(rows, weights=u * b[cols], minlength=g.node_count)
    return b


def residual_from_consensus(b, node_count, labeled_count, mode="calibrated"):
    """Turn consensus values of the squared-residual vector into error estimates.

    "calibrated" returns sqrt(N * b / (2M)), which equals the empirical error
    exactly when the consensus is exact; "paper" returns the literal
    sqrt(N * b), which differs by the factor sqrt(2M).  Values in
    [-1e-12, 0) are clamped to 0; anything more negative is rejected.
    """
    if mode not in RESIDUAL_MODES:
        raise ValueError(f"residual mode must be one of {RESIDUAL_MODES}")
    b = np.asarray(b, dtype=np.float64)
    if (b < -1e-12).any():
        raise ValueError("consensus produced a negative squared residual")
    b = np.maximum(b, 0.0)
    scaled = node_count * b
    if mode == "calibrated":
        scaled = scaled / (2.0 * labeled_count)
    out = np.sqrt(scaled)
    return float(out) if out.ndim == 0 else out


class MessagePassingSimulator:
    """Deterministic bulk-synchronous execution of the distributed learner.

    Use :func:`init_sim` to construct.  ``exact_consensus=True`` replaces the
    finite consensus sweeps by an oracle that hands every node the exact mean
    (a diagnostic mode; oracle rounds exchange no messages).
    """

    def __init__(self, g, labels, cfg, x0=None, ground_truth=None,
                 exact_consensus=False):
        if not is_connected(g):
            raise ValueError("simulator requires a connected graph")
        labels.validate_for(g)
        self.graph = g
        self.labels = labels
        self.cfg = cfg
        self.exact_consensus = exact_consensus

        n = g.node_count
        self._x0 = np.zeros(n) if x0 is None else as_signal(g, x0).copy()
        self._gt = None if ground_truth is None else as_signal(g, ground_truth)
        self._mask = labels.mask(n)
        self._y = labels.full_vector(n)

        deg_w = np.bincount(g.slot_row, weights=g.slot_weight, minlength=n)
        self._lhat = lipschitz_constant(float(deg_w.max()), cfg.mu, cfg.lipschitz_mode)
        self._u, self._usum = metropolis_hastings_weights(g)

        part = (np.arange(n) % cfg.partitions) + 1
        self._partition = part
        self._cross_slots = int((part[g.slot_row] != part[g.slot_col]).sum())

        # node-local state, advanced in lockstep
        self.k = 0
        self._x = self._x0.copy()
        self._gbar = np.zeros(n)
        self._q = np.zeros(n)
        self._qt = self._x0.copy()
        self._b = np.zeros(n)
        self._bt = np.zeros(n)
        self._r = np.zeros(n)
        self._rt = np.zeros(n)
        self._p = np.zeros(g.slot_count)
        self._alpha = 0.5
        self._tau = 2.0 / 3.0
        self._xhat = self._x0.copy()
        self.stats = MessageStats()

    # -- message accounting ---------------------------------------------------

    def _broadcast_round(self):
        self.stats.total_messages += self.graph.slot_count
        self.stats.inter_partition_messages += self._cross_slots
        self.stats.rounds += 1

    def _consensus_sweep(self, b):
        if self.exact_consensus:
            return np.full(self.graph.node_count, b.mean())
        rows, cols = self.graph.slot_row, self.graph.slot_col
        keep = 1.0 - self._usum
        for _ in range(self.cfg.consensus_rounds):
            self._broadcast_round()
            b = keep * b + np.bincount(rows, weights=self._u * b[cols],
                                       minlength=self.graph.node_count)
        return b

    # -- the outer iteration ----------------------------------------------------

    def run_iteration(self):
        """Execute one full outer iteration and return its snapshot."""
        g, cfg = self.graph, self.cfg
        n = g.node_count
        rows, cols, sw = g.slot_row, g.slot_col, g.slot_sqrt_weight

        # x-broadcast; local variation and dual entries
        self._broadcast_round()
        dx = self._x[cols] - self._x[rows]
        gamma = np.sqrt(np.bincount(rows, weights=g.slot_weight * dx * dx, minlength=n))
        self._p = sw * dx / np.maximum(cfg.mu, gamma)[rows]

        # P-broadcast; scaled gradient correction and descent accumulators
        self._broadcast_round()
        grad_scaled = (np.bincount(rows, weights=sw * self._p, minlength=n)
                       - np.bincount(rows, weights=sw * self._p[self.graph.slot_rev],
                                     minlength=n))
        grad_scaled = -grad_scaled / self._lhat
        self._q = self._x - grad_scaled
        self._gbar = self._gbar + self._alpha * grad_scaled
        self._alpha += 0.5
        self._qt = self._x0 - self._gbar

        # consensus on the squared residuals of q and q-tilde
        self._b = np.where(self._mask, (self._y - self._q) ** 2, 0.0)
        self._b = self._consensus_sweep(self._b)
        self._r = residual_from_consensus(self._b, n, self.labels.size,
                                          cfg.residual_mode)
        self._bt = np.where(self._mask, (self._y - self._qt) ** 2, 0.0)
        self._bt = self._consensus_sweep(self._bt)
        self._rt = residual_from_consensus(self._bt, n, self.labels.size,
                                           cfg.residual_mode)

        # node-local projections and mixing
        self._xhat = self._project(self._q, self._r)
        z = self._project(self._qt, self._rt)
        self._x = self._tau * z + (1.0 - self._tau) * self._xhat
        self._tau = 1.0 / (1.0 / self._tau + 0.5)
        self.k += 1

        if not np.isfinite(self._x).all():
            raise RuntimeError(f"non-finite node state at iteration {self.k}")

        return SimSnapshot(
            k=self.k - 1,
            nmse=nmse(self._xhat, self._gt) if self._gt is not None else None,
            emp_err_est_mean=float(self._r.mean()),
            emp_err_true=empirical_error(self._xhat, self.labels),
            total_msgs=self.stats.total_messages,
            inter_partition_msgs=self.stats.inter_partition_messages)

    def _project(self, q, r):
        out = q.copy()
        eps = self.cfg.epsilon
        sel = self._mask & (r > eps)
        out[sel] = self._y[sel] + (eps / r[sel]) * (q[sel] - self._y[sel])
        return out

    def run(self, iters=None):
        """Run ``iters`` outer iterations (default cfg.max_iters)."""
        snaps = [self.run_iteration() for _ in range(iters or self.cfg.max_iters)]
        return self._xhat.copy(), snaps

    # -- inspection --------------------------------------------------------------

    @property
    def output(self):
        """Current learned labeling (the projected gradient point)."""
        return self._xhat.copy()

    def partition_of(self, i):
        self.graph._check_node(i)
        return int(self._partition[i - 1])

    def node_states(self):
        """Materialize per-node views of the current local state."""
        g = self.graph
        states = []
        for i in range(1, g.node_count + 1):
            lo, hi = g.indptr[i - 1], g.indptr[i]
            idx = i - 1
            states.append(NodeState(
                index=i,
                x=float(self._x[idx]), x0=float(self._x0[idx]),
                q=float(self._q[idx]), q_tilde=float(self._qt[idx]),
                g_bar=float(self._gbar[idx]),
                b=float(self._b[idx]), b_tilde=float(self._bt[idx]),
                r=float(self._r[idx]), r_tilde=float(self._rt[idx]),
                alpha=self._alpha, tau=self._tau,
                y=float(self._y[idx]) if self._mask[idx] else None,
                neighbors=tuple(int(c) + 1 for c in g.slot_col[lo:hi]),
                p_out=tuple(float(v) for v in self._p[lo:hi]),
                u=tuple(float(v) for v in self._u[lo:hi])))
        return states


def init_sim(g, labels, cfg, x0=None, ground_truth=None, exact_consensus=False):
    """Construct a simulator with freshly initialized node states."""
    return MessagePassingSimulator(g, labels, cfg, x0=x0, ground_truth=ground_truth,
                                   exact_consensus=exact_consensus)


def snapshots_to_csv_text(snapshots):
    lines = [",".join(SIM_TRACE_COLUMNS)]
    for s in snapshots:
        nm = "" if s.nmse is None else f"{s.nmse:.17g}"
        lines.append(f"{s.k},{nm},{s.emp_err_est_mean:.17g},{s.emp_err_true:.17g},"
                     f"{s.total_msgs},{s.inter_partition_msgs}")
    return "\n".join(lines) + "\n"
