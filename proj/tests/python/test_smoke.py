import os

import pytest

import cpsl_sim

SCENARIOS = os.path.join(os.environ.get("CPSL_SOURCE_DIR", "."), "scenarios")


def test_default_round_latency_ordering():
    r = cpsl_sim.round_latency()
    assert r["CPSL"] < r["SL"] < r["FL"]
    assert r["CPSL"] == pytest.approx(4.566, abs=0.01)


def test_profiles():
    rows = cpsl_sim.profiles(source="computed")
    assert len(rows) == 12
    assert rows[2]["layer"] == "POOL1"
    assert rows[-1]["xi_s"] == 0.0
    over = cpsl_sim.profiles()
    assert over[0] == rows[0]
    assert over[2] != rows[2]


def test_hash_ignores_out():
    assert cpsl_sim.scenario_hash({}) == cpsl_sim.scenario_hash({"out": "x"})
    assert cpsl_sim.scenario_hash({}) != cpsl_sim.scenario_hash({"seed": 1})


def test_optimize_toy_is_reproducible():
    s = cpsl_sim.load_scenario(os.path.join(SCENARIOS, "toy_n4.json"))
    a = cpsl_sim.optimize(s, base_dir=SCENARIOS)
    b = cpsl_sim.optimize(s, base_dir=SCENARIOS)
    assert a == b
    assert a["theta_s"] > 0
    assert sorted(d for c in a["clusters"] for d in c["devices"]) == [0, 1, 2, 3]


def test_sweep_small():
    res = cpsl_sim.sweep({"saa": {"j_samples": 2, "candidates": [3, 12]}, "gibbs": {"iterations": 10}})
    assert [row["cut"] for row in res["table"]] == [3, 12]
    assert res["v_star"] in (3, 12)


def test_train_two_rounds():
    res = cpsl_sim.train({"trainer": {"rounds": 2}}, scheme="SL")
    assert len(res["rounds"]) == 2
    assert all(r["loss"] == r["loss"] for r in res["rounds"])


def test_acceptance_probability():
    assert cpsl_sim.acceptance_probability(2.0, 2.0, 1e-4) == 0.5
    assert cpsl_sim.acceptance_probability(1.0, float("inf"), 1e-4) == 0.0


def test_errors_map_to_exceptions():
    with pytest.raises(cpsl_sim.ConfigError):
        cpsl_sim.round_latency({"profile_source": "guess"})
    with pytest.raises(cpsl_sim.InfeasibleError):
        cpsl_sim.round_latency({"env": {"n_devices": 40}})
    with pytest.raises(cpsl_sim.Error):
        cpsl_sim.profiles(source="nope")
