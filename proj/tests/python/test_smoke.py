import json
import math

import numpy as np
import pytest

import starlat

TINY = {"scenario": {"num_reflect": 1, "num_transmit": 1, "num_elements": 2}}


def test_local_cpu_examples():
    assert starlat.optimal_local_cpu(2.0, 0.5, 5e7, 1e-27, 1e9) == pytest.approx(1e9)
    assert starlat.optimal_local_cpu(2.0, 2.0 - 5e-3, 5e7, 1e-27, 1e9) == pytest.approx(3.16227766e8)
    with pytest.raises(starlat.StarlatError):
        starlat.optimal_local_cpu(2.0, 2.1, 5e7, 1e-27, 1e9)


def test_edge_allocation_two_users():
    res = starlat.solve_edge_allocation(np.array([0.05, 0.05]), np.array([5.625e8, 5.625e8]), 2e10)
    assert res["t"] == pytest.approx(0.10625, rel=1e-9)
    assert np.allclose(res["f_edge"], [1e10, 1e10])


def test_solve_matches_oracle_on_tiny_instance():
    rep = starlat.solve(TINY, "proposed-fdma", seed=7)
    ref = starlat.brute_force(TINY, "fdma", seed=7)
    assert rep["status"] == "Converged"
    assert rep["t"] <= 1.05 * ref["t"]
    assert sum(rep["b"]) == pytest.approx(1.0)
    trace = rep["trace"]
    assert all(b <= a + 1e-8 for a, b in zip(trace, trace[1:]) if math.isfinite(a))


def test_random_phase_amplitudes():
    rep = starlat.solve(TINY, "random-phase", seed=2)
    assert np.all(np.asarray(rep["gamma_r"]) == 0.5)


def test_unknown_key_rejected():
    with pytest.raises(starlat.StarlatError, match="unknown key"):
        starlat.solve({"scenario": {"antennas": 4}})


def test_sweep_writes_outputs(tmp_path):
    cfg = dict(TINY)
    cfg["sweep"] = {"param": "F", "values": [1e10, 3e10], "seeds": [0], "schemes": ["proposed-sdma"]}
    summary = starlat.run_sweep(cfg, tmp_path)
    means = [row["mean_t"] for row in summary["schemes"]["proposed-sdma"]]
    assert means[1] < means[0]
    assert (tmp_path / "results.csv").exists()
    assert len(list((tmp_path / "traces").glob("*.jsonl"))) == 2
    json.loads((tmp_path / "summary.json").read_text())
