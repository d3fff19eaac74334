import json

import numpy as np
import pytest

from tvss.cli import ServiceClient, main
from tvss.graph import load_edge_list, load_label_set, load_signal_csv
from tvss.service import GenerateRequest, app

from conftest import SyncASGITransport


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_generate_writes_files_and_stats(tmp_path, capsys):
    out = tmp_path / "data"
    assert run_cli("generate", "--seed", 7, "--out", out) == 0
    printed = capsys.readouterr().out
    assert "nodes=200" in printed and "diameter=" in printed
    g = load_edge_list(out / "edges.tsv")
    assert g.node_count == 200
    labels = load_label_set(out / "labels.csv")
    assert labels.size == 20
    gt = load_signal_csv(out / "ground_truth.csv", 200)
    assert np.isfinite(gt).all()


def test_generate_deterministic_files(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli("generate", "--seed", 11, "--out", a)
    run_cli("generate", "--seed", 11, "--out", b)
    for name in ("edges.tsv", "ground_truth.csv", "labels.csv", "stats.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_generate_with_config_full_labels(tmp_path):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps({"cluster_size": 10, "label_fraction": 1.0}))
    out = tmp_path / "data"
    assert run_cli("generate", "--config", cfg, "--seed", 0, "--out", out) == 0
    labels = load_label_set(out / "labels.csv")
    assert labels.size == 20  # every node labeled


@pytest.mark.parametrize("method", ["nesterov", "accel", "lp", "sim"])
def test_solve_methods_end_to_end(tmp_path, capsys, method):
    data = tmp_path / "data"
    run_cli("generate", "--seed", 3, "--config", _small_cfg(tmp_path), "--out", data)
    out = tmp_path / f"run_{method}"
    code = run_cli("solve", "--method", method,
                   "--graph", data / "edges.tsv",
                   "--labels", data / "labels.csv",
                   "--ground-truth", data / "ground_truth.csv",
                   "--out", out,
                   "--iters", 15, "--eps", 1e-4, "--mu0", 1.0,
                   "--kappa", 0.99, "--partitions", 2, "--consensus-k", 8)
    assert code == 0
    assert f"method={method}" in capsys.readouterr().out
    summary = json.loads((out / f"summary_{method}.json").read_text())
    assert summary["iterations"] == 15
    trace = (out / f"trace_{method}.csv").read_text().splitlines()
    assert len(trace) == 16
    labeling = load_signal_csv(out / f"labeling_{method}.csv", 16)
    assert np.isfinite(labeling).all()


def _small_cfg(tmp_path):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps({"cluster_size": 8, "label_fraction": 0.25}))
    return cfg


def test_solve_missing_file_is_an_error(tmp_path, capsys):
    code = run_cli("solve", "--method", "lp", "--graph", tmp_path / "nope.tsv",
                   "--labels", tmp_path / "nope.csv", "--iters", 3)
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_compare_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({
        "generator": {"cluster_size": 6, "label_fraction": 0.5},
        "monte_carlo_runs": 2,
    }))
    out = tmp_path / "cmp"
    code = run_cli("compare", "--config", cfg, "--seed", 1, "--iters", 8,
                   "--eps", 0.0, "--mu0", 1.0, "--kappa", 0.99, "--out", out)
    assert code == 0
    assert "nmse_nest=" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["runs"] == 2 and summary["iterations"] == 8
    curves = (out / "nmse_curves.csv").read_text().splitlines()
    assert curves[0] == "k,nmse_nest,nmse_lp"
    assert len(curves) == 9


def test_unknown_method_rejected_by_parser(tmp_path):
    with pytest.raises(SystemExit):
        run_cli("solve", "--method", "magic", "--graph", "g", "--labels", "l")


def test_service_client_roundtrip_over_http_transport():
    transport = SyncASGITransport(app)
    client = ServiceClient(server="http://svc", transport=transport)
    resp = client.generate(GenerateRequest(cluster_size=6, seed=2, label_fraction=0.5))
    assert resp.stats.nodes == 12
    local = ServiceClient().generate(
        GenerateRequest(cluster_size=6, seed=2, label_fraction=0.5))
    assert resp == local


def test_service_client_surfaces_server_errors():
    transport = SyncASGITransport(app)
    client = ServiceClient(server="http://svc", transport=transport)
    from tvss.service import SolveRequest
    req = SolveRequest(edge_list="bad", labels=[{"node": 1, "value": 0.0}],
                       method="lp", lp_iters=2)
    with pytest.raises(RuntimeError, match="400"):
        client.solve(req)
