import math
from fractions import Fraction

import numpy as np
import pytest

from tvss.calculus import EdgeField, graph_gradient, total_variation
from tvss.graph import EmpiricalGraph, LabelSet
from tvss.solver import (DivergenceError, SolverConfig, SolverTrace, TraceRecord,
                         dual_field, empirical_error, iteration_bound,
                         lipschitz_constant, nmse, project_feasible,
                         smoothed_gradient, smoothed_objective, solve)

from conftest import random_connected_graph, random_graph


# -- independent oracles -------------------------------------------------------

def projection_oracle(q, labels, eps, iters=200):
    """Bisection on the multiplier of the stationarity system.

    Solves (I + lam * D_S) v = q + lam * D_S y for increasing lam until the
    error constraint holds, then bisects on the active-constraint equation.
    Never uses the closed-form shrinkage factor.
    """
    idx = labels.indices0

    def v_of(lam):
        v = q.copy()
        v[idx] = (q[idx] + lam * labels.values) / (1.0 + lam)
        return v

    if empirical_error(q, labels) <= eps:
        return q.copy(), 0.0
    lo, hi = 0.0, 1.0
    while empirical_error(v_of(hi), labels) > eps:
        hi *= 2.0
        if hi > 1e18:
            raise RuntimeError("oracle bracket failed")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if empirical_error(v_of(mid), labels) > eps:
            lo = mid
        else:
            hi = mid
    return v_of(hi), hi


def ball_max_oracle(a, mu, xatol=1e-13):
    """Numeric maximization of t*a - mu*t^2/2 over t in [0, 1].

    The per-node dual maximization over the unit ball reduces to this radial
    profile because the inner product is maximized along the gradient row.
    Endpoints are evaluated explicitly since the bounded search stays strictly
    inside the interval.
    """
    from scipy.optimize import minimize_scalar

    def value(t):
        return t * a - 0.5 * mu * t * t

    res = minimize_scalar(lambda t: -value(t), bounds=(0.0, 1.0),
                          method="bounded", options={"xatol": xatol})
    return max(-res.fun, value(0.0), value(1.0))


def finite_difference_gradient(g, x, mu, h=1e-6):
    grad = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (smoothed_objective(g, x + e, mu)
                   - smoothed_objective(g, x - e, mu)) / (2.0 * h)
    return grad


def make_labels(rng, n, m=None):
    m = m or max(1, n // 3)
    nodes = rng.choice(n, size=m, replace=False) + 1
    return LabelSet(nodes=nodes, values=rng.standard_normal(m))


# -- empirical error ---------------------------------------------------------

def test_empirical_error_zero_on_exact_labels():
    labels = LabelSet(nodes=np.array([1, 3]), values=np.array([0.5, -2.0]))
    x = np.array([0.5, 9.9, -2.0])
    assert empirical_error(x, labels) == 0.0


def test_empirical_error_hand_value():
    labels = LabelSet(nodes=np.array([1]), values=np.array([0.0]))
    assert empirical_error(np.array([2.0, 123.0]), labels) == pytest.approx(
        math.sqrt(2.0), rel=1e-15)


def test_empirical_error_residual_homogeneity():
    rng = np.random.default_rng(0)
    labels = make_labels(rng, 10)
    x = rng.standard_normal(10)
    base = empirical_error(x, labels)
    doubled = labels.full_vector(10) + 2.0 * (x - labels.full_vector(10))
    assert empirical_error(doubled, labels) == pytest.approx(2.0 * base, rel=1e-12)


# -- dual field ----------------------------------------------------------------

def test_dual_field_constant_signal():
    g = EmpiricalGraph(3, [(1, 2, 1.0), (2, 3, 1.0)])
    f = dual_field(g, np.full(3, 4.2), mu=0.7)
    assert np.all(f.values == 0.0)


def test_dual_field_single_edge_branches():
    g = EmpiricalGraph(2, [(1, 2, 1.0)])
    x = np.array([0.0, 1.0])
    f = dual_field(g, x, mu=0.5)  # row norm 1 >= mu: normalized
    assert np.allclose(np.abs(f.values), 1.0)
    f2 = dual_field(g, x, mu=2.0)  # row norm 1 < mu: shrunk by 1/mu
    assert np.allclose(np.abs(f2.values), 0.5)


def test_dual_field_tie_at_mu():
    g = EmpiricalGraph(2, [(1, 2, 1.0)])
    mu = 0.8
    f = dual_field(g, np.array([0.0, mu]), mu=mu)
    assert np.allclose(np.abs(f.values), 1.0, rtol=1e-15)


def test_dual_field_row_norms_bounded():
    rng = np.random.default_rng(1)
    for _ in range(25):
        g = random_graph(rng)
        f = dual_field(g, 5.0 * rng.standard_normal(g.node_count),
                       mu=float(rng.uniform(0.05, 2.0)))
        assert (f.row_norms() <= 1.0 + 1e-12).all()


def test_dual_field_is_the_unique_maximizer():
    rng = np.random.default_rng(2)
    g = random_graph(rng, n_max=12)
    x = rng.standard_normal(g.node_count)
    mu = 0.4
    gx = graph_gradient(g, x)

    def objective(field):
        return field.inner(gx) - 0.5 * mu * field.frobenius_norm() ** 2

    best = dual_field(g, x, mu)
    val = objective(best)
    for _ in range(200):
        pert = best.values + 0.1 * rng.standard_normal(g.slot_count)
        f = EdgeField(graph=g, values=pert)
        norms = f.row_norms()
        f = EdgeField(graph=g, values=pert / np.maximum(norms, 1.0)[g.slot_row])
        assert objective(f) <= val + 1e-12


# -- smoothed objective and gradient ------------------------------------------------

def test_smoothed_objective_constant():
    g = EmpiricalGraph(3, [(1, 2, 1.0), (2, 3, 1.0)])
    assert smoothed_objective(g, np.full(3, -1.0), mu=0.3) == 0.0


def test_smoothed_objective_single_edge_hand_value():
    g = EmpiricalGraph(2, [(1, 2, 1.0)])
    assert smoothed_objective(g, np.array([0.0, 1.0]), mu=0.5) == pytest.approx(
        1.5, rel=1e-15)


def test_smoothed_objective_matches_ball_maximization():
    rng = np.random.default_rng(3)
    for _ in range(10):
        g = random_graph(rng, n_max=15)
        x = rng.standard_normal(g.node_count)
        mu = float(rng.uniform(0.1, 1.5))
        norms = graph_gradient(g, x).row_norms()
        numeric = sum(ball_max_oracle(float(a), mu) for a in norms)
        assert smoothed_objective(g, x, mu) == pytest.approx(numeric, abs=1e-8)


def test_smoothing_sandwich():
    rng = np.random.default_rng(4)
    for _ in range(30):
        g = random_graph(rng)
        x = 3.0 * rng.standard_normal(g.node_count)
        mu = float(rng.uniform(0.01, 2.0))
        gap = total_variation(g, x) - smoothed_objective(g, x, mu)
        assert -1e-12 <= gap <= mu * g.node_count / 2.0 + 1e-12


def test_smoothed_gradient_constant_is_zero():
    g = EmpiricalGraph(3, [(1, 2, 1.0), (2, 3, 1.0)])
    assert np.all(smoothed_gradient(g, np.full(3, 2.0), mu=0.5) == 0.0)


def test_smoothed_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(10):
        g = random_graph(rng, n_max=20)
        x = rng.standard_normal(g.node_count)
        mu = float(rng.uniform(0.1, 1.0))
        grad = smoothed_gradient(g, x, mu)
        fd = finite_difference_gradient(g, x, mu)
        assert np.linalg.norm(grad - fd) <= 1e-5 * (np.linalg.norm(grad) + 1e-3)


def test_smoothed_gradient_orthogonal_to_ones():
    rng = np.random.default_rng(6)
    for _ in range(20):
        g = random_graph(rng)
        grad = smoothed_gradient(g, rng.standard_normal(g.node_count), mu=0.3)
        assert abs(grad.sum()) <= 1e-10 * (np.abs(grad).sum() + 1.0)


# -- Lipschitz constant ----------------------------------------------------------

def test_lipschitz_constant_modes():
    assert lipschitz_constant(8.0, 1.0, "paper") == 16.0
    assert lipschitz_constant(8.0, 1.0, "corrected") == 32.0


def test_lipschitz_constant_mu_scaling():
    base = lipschitz_constant(3.0, 0.5)
    assert lipschitz_constant(3.0, 0.25) == pytest.approx(2.0 * base, rel=1e-15)


def test_lipschitz_constant_validation():
    with pytest.raises(ValueError):
        lipschitz_constant(0.0, 1.0)
    with pytest.raises(ValueError):
        lipschitz_constant(1.0, 1.0, "other")


# -- feasibility projection ---------------------------------------------------------

def test_projection_noop_inside_the_set():
    labels = LabelSet(nodes=np.array([1]), values=np.array([0.0]))
    q = np.array([0.5, 7.0])
    v, lam = project_feasible(q, labels, eps=1.0)
    assert np.array_equal(v, q)
    assert lam == 0.0


def test_projection_hand_example():
    labels = LabelSet(nodes=np.array([1]), values=np.array([0.0]))
    q = np.array([2.0, 5.0])
    v, lam = project_feasible(q, labels, eps=1.0)
    assert v[0] == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert v[1] == 5.0
    assert lam == pytest.approx(math.sqrt(2.0) - 1.0, rel=1e-15)


def test_projection_eps_zero_interpolates():
    labels = LabelSet(nodes=np.array([2]), values=np.array([1.5]))
    v, lam = project_feasible(np.array([3.0, 0.0]), labels, eps=0.0)
    assert v[1] == 1.5 and v[0] == 3.0
    assert lam == math.inf
    v2, lam2 = project_feasible(np.array([3.0, 1.5]), labels, eps=0.0)
    assert lam2 == 0.0 and np.array_equal(v2, [3.0, 1.5])


def test_projection_matches_bisection_oracle():
    rng = np.random.default_rng(7)
    hits = {"active": 0, "inactive": 0}
    for _ in range(100):
        n = int(rng.integers(2, 21))
        labels = make_labels(rng, n)
        q = 2.0 * rng.standard_normal(n)
        r = empirical_error(q, labels)
        eps = float(r * rng.uniform(0.3, 1.7)) + 1e-9
        v, lam = project_feasible(q, labels, eps)
        ref_v, ref_lam = projection_oracle(q, labels, eps)
        hits["active" if r > eps else "inactive"] += 1
        assert np.abs(v - ref_v).max() <= 1e-8
        assert abs(lam - ref_lam) <= 1e-6 * (1.0 + lam)
        assert empirical_error(v, labels) <= eps + 1e-12
    assert hits["active"] > 10 and hits["inactive"] > 10


def test_projection_is_closest_feasible_point():
    rng = np.random.default_rng(8)
    for _ in range(30):
        n = int(rng.integers(2, 15))
        labels = make_labels(rng, n)
        q = 2.0 * rng.standard_normal(n)
        eps = float(rng.uniform(0.01, 1.0))
        v, _ = project_feasible(q, labels, eps)
        dist = np.linalg.norm(v - q)
        for _ in range(30):
            w = v + 0.3 * rng.standard_normal(n)
            w, _ = project_feasible(w, labels, eps)  # any feasible candidate
            assert np.linalg.norm(w - q) >= dist - 1e-10


def test_projection_rejects_negative_eps():
    labels = LabelSet(nodes=np.array([1]), values=np.array([0.0]))
    with pytest.raises(ValueError):
        project_feasible(np.array([1.0]), labels, eps=-0.1)


# -- solver loop -------------------------------------------------------------------

def test_solve_fixed_point_on_consistent_constant_start():
    g = EmpiricalGraph(3, [(1, 2, 1.0), (2, 3, 1.0)])
    labels = LabelSet(nodes=np.array([1, 3]), values=np.array([2.0, 2.0]))
    cfg = SolverConfig(epsilon=0.1, mu0=0.5, max_iters=25)
    x0 = np.full(3, 2.0)
    v, trace = solve(g, labels, cfg, x0=x0)
    assert np.array_equal(v, x0)
    assert all(rec.tv == 0.0 and rec.emp_err == 0.0 for rec in trace.records)


def test_solve_deterministic():
    rng = np.random.default_rng(9)
    g = random_connected_graph(rng, n_min=10, n_max=10)
    labels = make_labels(rng, 10)
    cfg = SolverConfig(epsilon=0.05, mu0=1.0, kappa=0.99, max_iters=50)
    v1, t1 = solve(g, labels, cfg)
    v2, t2 = solve(g, labels, cfg)
    assert np.array_equal(v1, v2)
    assert t1.to_csv_text() == t2.to_csv_text()


def test_solve_iterates_stay_feasible():
    rng = np.random.default_rng(10)
    for _ in range(5):
        g = random_connected_graph(rng, n_min=8, n_max=25)
        labels = make_labels(rng, g.node_count)
        eps = float(rng.uniform(0.001, 0.5))
        cfg = SolverConfig(epsilon=eps, mu0=0.8, kappa=0.98, max_iters=60)
        _, trace = solve(g, labels, cfg)
        assert (trace.column("emp_err") <= eps + 1e-12).all()


def test_solve_reduces_objective_on_benchmark(benchmark_instance):
    g, ground_truth, labels = benchmark_instance
    eps = float(np.linalg.norm(ground_truth)) / 1e5
    cfg = SolverConfig(epsilon=eps, mu0=1.0, max_iters=150)
    _, trace = solve(g, labels, cfg, ground_truth=ground_truth)
    f = trace.column("f_mu")
    assert f[-1] < 0.05 * f[0]
    assert trace.column("nmse")[-1] < trace.column("nmse")[0]


def test_solve_rejects_disconnected_graph():
    g = EmpiricalGraph(4, [(1, 2, 1.0), (3, 4, 1.0)])
    labels = LabelSet(nodes=np.array([1]), values=np.array([0.0]))
    with pytest.raises(ValueError, match="connected"):
        solve(g, labels, SolverConfig(epsilon=0.1, max_iters=5))


@pytest.mark.filterwarnings("ignore:overflow")
def test_solve_divergence_aborts_with_trace():
    g = EmpiricalGraph(2, [(1, 2, 1.0)])
    labels = LabelSet(nodes=np.array([1]), values=np.array([0.0]))
    cfg = SolverConfig(epsilon=0.1, mu0=1.0, max_iters=10)
    with pytest.raises(DivergenceError) as err:
        solve(g, labels, cfg, x0=np.array([0.0, 1e200]))
    assert len(err.value.trace) >= 1


def test_solve_rel_objective_stopping():
    g = EmpiricalGraph(4, [(1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)])
    labels = LabelSet(nodes=np.array([1, 4]), values=np.array([0.0, 0.0]))
    cfg = SolverConfig(epsilon=0.01, mu0=0.5, max_iters=500,
                       stop="rel_objective", stop_threshold=1e-10)
    _, trace = solve(g, labels, cfg)
    assert len(trace) < 500


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(epsilon=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.1, mu0=0.0)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.1, kappa=0.0)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.1, kappa=1.5)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.1, lipschitz_mode="x")
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.1, stop="rel_objective")


def test_solver_config_json_round_trip():
    cfg = SolverConfig(epsilon=0.25, mu0=2.0, kappa=0.9, max_iters=77,
                       lipschitz_mode="paper")
    assert SolverConfig.from_json_dict(cfg.to_json_dict()) == cfg


# -- scalar recursions and the iteration bound ----------------------------------------

def test_mixing_weight_recursion_exact():
    tau = Fraction(2, 3)
    alpha = Fraction(1, 2)
    for k in range(2000):
        assert tau == Fraction(2, k + 3)
        assert alpha == Fraction(k + 1, 2)
        tau = 1 / (1 / tau + Fraction(1, 2))
        alpha = alpha + Fraction(1, 2)


def test_iteration_bound_hand_value():
    k_delta, mu = iteration_bound(0.1, 1.0, 8.0, 200, mode="paper")
    assert k_delta == pytest.approx(20.0 * math.sqrt(3200.0), rel=1e-12)
    assert mu == pytest.approx(0.1 / 200.0, rel=1e-15)


def test_iteration_bound_scaling_and_degenerate():
    k1, _ = iteration_bound(0.2, 1.0, 8.0, 100)
    k2, _ = iteration_bound(0.1, 1.0, 8.0, 100)
    assert k2 == pytest.approx(2.0 * k1, rel=1e-12)  # k scales as 1/delta
    assert iteration_bound(0.1, 0.0, 8.0, 100)[0] == 0.0
    with pytest.raises(ValueError):
        iteration_bound(0.0, 1.0, 8.0, 100)


# -- traces ------------------------------------------------------------------------

def test_trace_csv_round_trip():
    trace = SolverTrace()
    trace.append(TraceRecord(k=0, mu=1.0, f_mu=2.5, tv=3.0, emp_err=0.1,
                             lambda_eps=0.5, nmse=0.25))
    trace.append(TraceRecord(k=1, mu=0.9, f_mu=2.0, tv=2.5, emp_err=0.1,
                             lambda_eps=0.4, nmse=None))
    text = trace.to_csv_text()
    lines = text.strip().splitlines()
    assert lines[0] == "k,mu,f_mu,tv,emp_err,lambda_eps,nmse"
    assert lines[2].endswith(",")  # missing NMSE stays empty
    parsed = [line.split(",") for line in lines[1:]]
    assert float(parsed[0][1]) == 1.0
    assert float(parsed[0][6]) == 0.25


def test_nmse_zero_reference_rejected():
    with pytest.raises(ValueError):
        nmse(np.array([1.0]), np.array([0.0]))


def test_nmse_value():
    assert nmse(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(0.5)
