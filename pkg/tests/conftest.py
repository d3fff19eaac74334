import asyncio

import httpx
import numpy as np
import pytest

from tvss.calculus import EdgeField
from tvss.graph import EmpiricalGraph, TwoClusterConfig, generate_two_cluster


class SyncASGITransport(httpx.BaseTransport):
    """Synchronous httpx transport bridging to an ASGI app, for in-process tests."""

    def __init__(self, app):
        self._app = app

    def handle_request(self, request):
        inner = httpx.ASGITransport(app=self._app)

        async def call():
            response = await inner.handle_async_request(request)
            body = await response.aread()
            await inner.aclose()
            return response, body

        response, body = asyncio.run(call())
        return httpx.Response(status_code=response.status_code,
                              headers=response.headers, content=body,
                              request=request)


def random_graph(rng, n_min=2, n_max=50, edge_prob=None, weights=(0.2, 3.0)):
    """Random weighted graph with at least one edge (possibly disconnected)."""
    n = int(rng.integers(n_min, n_max + 1))
    p = edge_prob if edge_prob is not None else min(1.0, 2.5 / max(n - 1, 1))
    edges = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if rng.random() < p:
                edges.append((i, j, float(rng.uniform(*weights))))
    if not edges:
        edges.append((1, 2, float(rng.uniform(*weights))))
    return EmpiricalGraph(n, edges)


def random_connected_graph(rng, n_min=2, n_max=30, extra_frac=1.0, weights=(0.2, 3.0)):
    """Random weighted connected graph: a path plus random extra edges."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = {(i, i + 1): float(rng.uniform(*weights)) for i in range(1, n)}
    for _ in range(int(extra_frac * n)):
        i, j = rng.integers(1, n + 1, size=2)
        if i != j:
            a, b = (int(i), int(j)) if i < j else (int(j), int(i))
            edges.setdefault((a, b), float(rng.uniform(*weights)))
    return EmpiricalGraph(n, [(i, j, w) for (i, j), w in edges.items()])


def random_field(g, rng, scale=1.0):
    """Edge field with i.i.d. normal entries on every directed slot."""
    return EdgeField(graph=g, values=scale * rng.standard_normal(g.slot_count))


def random_feasible_field(g, rng):
    """Edge field whose row norms are all <= 1."""
    f = random_field(g, rng)
    norms = f.row_norms()
    shrink = rng.uniform(0.0, 1.0, size=g.node_count) / np.maximum(norms, 1.0)
    return EdgeField(graph=g, values=f.values * shrink[g.slot_row])


@pytest.fixture(scope="session")
def benchmark_instance():
    """Default clustered benchmark: N=200, degree cap 8, 10% labels."""
    cfg = TwoClusterConfig(seed=1)
    g, ground_truth, labels = generate_two_cluster(cfg)
    return g, ground_truth, labels


@pytest.fixture()
def single_edge_graph():
    return EmpiricalGraph(2, [(1, 2, 1.0)])
