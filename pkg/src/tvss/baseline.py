"""Label propagation baseline: clamped harmonic iteration.

Unlabeled nodes repeatedly take the weighted average of their neighbors while
labeled nodes stay clamped to their initial values,

    x_i <- sum_{j in N(i)} W_ij x_j / d_i     (i not in S),
    x_i <- y_i                                (i in S),

which descends the Laplacian quadratic form and converges to the harmonic
interpolation of the labels on connected graphs.
"""

from __future__ import annotations

import numpy as np

from .calculus import total_variation
from .graph import as_signal, is_connected, weighted_degrees
from .solver import SolverTrace, TraceRecord, empirical_error, nmse


def label_propagation(g, labels, iters, x0=None, ground_truth=None):
    """Run ``iters`` clamped propagation sweeps; returns (labeling, trace).

    Unlabeled entries of ``x0`` default to 0; labeled entries are clamped to
    y before the first sweep and after every sweep.  Raises if an unlabeled
    node is isolated (its neighbor average is undefined).  The trace reuses
    the solver schema with mu = 0 and f_mu = TV (the zero-smoothing
    objective); the projection dual variable is not applicable and recorded
    as 0.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    labels.validate_for(g)

    n = g.node_count
    mask = labels.mask(n)
    deg = weighted_degrees(g)
    isolated = np.flatnonzero((deg == 0.0) & ~mask)
    if len(isolated):
        raise ValueError(f"unlabeled node {isolated[0] + 1} is isolated; "
                         "its neighbor average is undefined")
    if not is_connected(g):
        raise ValueError("label propagation requires a connected graph")

    x = np.zeros(n) if x0 is None else as_signal(g, x0).copy()
    x[labels.indices0] = labels.values
    if ground_truth is not None:
        ground_truth = as_signal(g, ground_truth)

    unlabeled = ~mask
    rows, cols, w = g.slot_row, g.slot_col, g.slot_weight
    trace = SolverTrace()
    for k in range(iters):
        agg = np.bincount(rows, weights=w * x[cols], minlength=n)
        x[unlabeled] = agg[unlabeled] / deg[unlabeled]
        tv = total_variation(g, x)
        trace.append(TraceRecord(
            k=k, mu=0.0, f_mu=tv, tv=tv,
            emp_err=empirical_error(x, labels), lambda_eps=0.0,
            nmse=nmse(x, ground_truth) if ground_truth is not None else None))
    return x, trace
