import csv
from dataclasses import replace

import numpy as np
import pytest

from cceq.equilibrium import solve_full_ccce
from cceq.game import JointDistribution, flat_index
from cceq.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    METHODS,
    STATUS_OK,
    format_summary,
    run_experiment,
    run_trial,
    simulate_deviation,
    summarize,
)
from cceq.uncertainty import UncertaintyModel, substream
from cceq.vq import build_game, generate_instance


def test_simulate_deviation_forced_eta(intersection_game, half_device):
    unc = UncertaintyModel.gaussian(1.0, 2)
    # recommended (G,S); margin of G->S is -2, so eta_0 = +2.5 flips it
    final, deviated = simulate_deviation(intersection_game, half_device, (0, 1), unc,
                                         etas=[2.5, 0.0])
    assert deviated and final == (1, 1)
    final, deviated = simulate_deviation(intersection_game, half_device, (0, 1), unc,
                                         etas=[1.0, 0.0])
    assert not deviated and final == (0, 1)


def test_simulate_deviation_zero_noise_on_ccce(intersection_game, half_device, intersection_sys_cost):
    unc0 = UncertaintyModel.zero(2)
    for seed in range(20):
        final, deviated = simulate_deviation(intersection_game, half_device, (0, 1), unc0,
                                             rng=substream(seed))
        assert not deviated and final == (0, 1)
    result = solve_full_ccce(intersection_game, unc0, 0.9, intersection_sys_cost)
    for rec_flat in result.distribution.support:
        rec = tuple(int(c) for c in np.unravel_index(rec_flat, (2, 2)))
        _, deviated = simulate_deviation(intersection_game, result.distribution, rec, unc0,
                                         etas=[0.0, 0.0])
        assert not deviated


def test_simulate_deviation_argmax_tie_rule(intersection_game):
    # point mass on (G,G): margins for agent 0 are J0(G,G)-J0(S,G)=4 for the
    # single alternative; a large eta keeps it positive
    z = JointDistribution.point_mass((0, 0), (2, 2))
    final, deviated = simulate_deviation(intersection_game, z, (0, 0), UncertaintyModel.zero(2),
                                         etas=[0.0, 0.0])
    assert deviated and final == (1, 1)  # both agents best-respond simultaneously


def test_simulate_deviation_validates_etas(intersection_game, half_device):
    with pytest.raises(ValueError):
        simulate_deviation(intersection_game, half_device, (0, 1), UncertaintyModel.zero(2),
                           etas=[0.0])
    with pytest.raises(ValueError):
        simulate_deviation(intersection_game, half_device, (0, 1), UncertaintyModel.zero(2))


def base_config(**overrides):
    defaults = dict(num_trials=2, flight_counts=(6,), alpha=0.9, sigma=0.0,
                    num_airlines=3, master_seed=12, out_path="unused.csv")
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def test_run_trial_statuses_and_replay(tmp_path):
    config = base_config(sigma=1.0)
    for method in METHODS:
        record = run_trial(config, 0, method, 6)
        assert record.status == STATUS_OK
        assert record.method == method
        # replay: realized cost equals the system cost at the final action
        inst = generate_instance(
            6, 3, seed=np.random.SeedSequence((12, 0, 0, 6)))
        game, sys_cost = build_game(inst)
        assert record.delay_cost == pytest.approx(
            float(sys_cost[flat_index(record.final_action, game.action_counts)]))
        if method in ("rr-nominal", "rr-ccce"):
            assert record.rr_size_d >= 1
        else:
            assert record.rr_size_d is None


def test_fcfs_executes_its_own_profile():
    config = base_config(sigma=3.0)
    record = run_trial(config, 1, "fcfs", 6)
    assert record.status == STATUS_OK
    assert record.final_action == record.recommendation
    inst = generate_instance(6, 3, seed=np.random.SeedSequence((12, 0, 1, 6)))
    assert record.final_action == tuple(2 ** len(owned) - 1 for owned in inst.airlines)


def test_rr_nominal_equals_rr_ccce_at_alpha_half():
    config = base_config(sigma=0.0, alpha=0.5, num_trials=1)
    a = run_trial(config, 0, "rr-nominal", 6)
    b = run_trial(config, 0, "rr-ccce", 6)
    assert replace(a, method="x", solve_seconds=0.0) == replace(b, method="x", solve_seconds=0.0)


def test_single_airline_single_flight_is_bruteforce_optimal():
    config = ExperimentConfig(num_trials=1, flight_counts=(1,), num_airlines=1,
                              master_seed=3, sigma=0.0)
    inst = generate_instance(1, 1, seed=np.random.SeedSequence((3, 0, 0, 1)))
    game, sys_cost = build_game(inst)
    best = float(sys_cost.min())
    for method in ("full-ccce", "rr-nominal", "rr-ccce"):
        record = run_trial(config, 0, method, 1)
        assert record.status == STATUS_OK
        assert record.delay_cost == pytest.approx(best)


def test_timeout_status():
    config = base_config(time_budget_per_solve=1e-9)
    record = run_trial(config, 0, "full-ccce", 6)
    assert record.status == "timeout"
    assert record.delay_cost is None and record.deviated is None


def test_run_experiment_csv_and_summary(tmp_path):
    out = tmp_path / "results.csv"
    config = base_config(num_trials=3, flight_counts=(6,), out_path=str(out),
                         methods=METHODS)
    result = run_experiment(config)
    assert result.csv_path == out
    rows = list(csv.reader(out.open()))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 1 + 3 * len(METHODS)
    summaries = result.summaries
    assert {s.method for s in summaries} == set(METHODS)
    for s in summaries:
        if s.deviation_rate is not None:
            assert 0.0 <= s.deviation_rate <= 1.0
        if s.method != "fcfs":
            assert s.deviation_rate == 0.0  # sigma = 0
    table = format_summary(summaries)
    assert "fcfs" in table and "mean delay" in table


def test_csv_determinism_modulo_solve_seconds(tmp_path):
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out_a, out_b):
        config = base_config(num_trials=4, flight_counts=(6, 7), sigma=2.0,
                             out_path=str(out))
        run_experiment(config)
    rows_a = list(csv.reader(out_a.open()))
    rows_b = list(csv.reader(out_b.open()))
    solve_col = CSV_COLUMNS.index("solve_seconds")
    assert len(rows_a) == len(rows_b)
    for ra, rb in zip(rows_a, rows_b):
        ra[solve_col] = rb[solve_col] = ""
        assert ra == rb


def test_instances_are_method_independent():
    config = base_config(sigma=1.0)
    records = {m: run_trial(config, 0, m, 6) for m in ("fcfs", "rr-nominal")}
    # identical instance implies identical fcfs release profile sizes and
    # identical game: compare through the deterministic instance seed
    a = generate_instance(6, 3, seed=np.random.SeedSequence((12, 0, 0, 6)))
    b = generate_instance(6, 3, seed=np.random.SeedSequence((12, 0, 0, 6)))
    assert a == b
    assert records["fcfs"].num_flights == records["rr-nominal"].num_flights


def test_config_from_dict_nested_sigma_and_validation():
    config = ExperimentConfig.from_dict({
        "methods": ["fcfs"], "num_trials": 5, "flight_counts": [6, 7],
        "uncertainty": {"sigma": [1.0, 2.0, 1.0, 1.0, 1.0]},
        "alpha": 0.8, "out": "x.csv",
    })
    assert config.sigma == (1.0, 2.0, 1.0, 1.0, 1.0)
    assert config.out_path == "x.csv"
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"methods": ["nope"]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"alpha": 1.5})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"unknown_key": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(scenario={"bad": 1})


def test_config_scenario_kwargs():
    config = ExperimentConfig(scenario={
        "runways": {"mu": [2.0, 3.0], "q0": [1, 0]},
        "thresholds": {"congestion": 5, "lateness": 12.0},
        "epoch_minutes": 5.0,
    })
    kwargs = config.scenario_kwargs()
    assert kwargs["service_rates"] == (2.0, 3.0)
    assert kwargs["initial_queues"] == (1, 0)
    assert kwargs["congestion_threshold"] == 5
    assert kwargs["lateness_threshold"] == 12.0
    assert kwargs["epoch_minutes"] == 5.0


def test_summarize_counts_infeasible():
    config = base_config(sigma=40.0, alpha=0.99, num_trials=4)
    records = [run_trial(config, t, "rr-ccce", 6) for t in range(4)]
    summary = summarize(records)[0]
    assert summary.n_ok + summary.n_infeasible + summary.n_timeout + summary.n_failed == 4
    if summary.n_ok == 0:
        assert summary.mean_delay is None and summary.deviation_rate is None


def test_thread_env_var_preserves_csv(tmp_path, monkeypatch):
    import cceq.harness as hmod
    serial, threaded = tmp_path / "serial.csv", tmp_path / "threaded.csv"
    for out, threads in ((serial, "1"), (threaded, "3")):
        monkeypatch.setenv(hmod.THREADS_ENV_VAR, threads)
        config = base_config(num_trials=6, sigma=1.0, out_path=str(out))
        run_experiment(config)
    assert_same_modulo_timing(serial, threaded)


def assert_same_modulo_timing(path_a, path_b):
    rows_a = list(csv.reader(path_a.open()))
    rows_b = list(csv.reader(path_b.open()))
    col = CSV_COLUMNS.index("solve_seconds")
    assert len(rows_a) == len(rows_b)
    for ra, rb in zip(rows_a, rows_b):
        if ra != list(CSV_COLUMNS):
            ra = list(ra)
            rb = list(rb)
            ra[col] = rb[col] = ""
        assert ra == rb


def test_oversized_joint_space_becomes_solver_failure():
    # 26 flights across 2 airlines exceeds the 2^24 joint-space cap
    config = ExperimentConfig(num_trials=1, flight_counts=(26,), num_airlines=2,
                              master_seed=0, sigma=0.0)
    record = run_trial(config, 0, "fcfs", 26)
    assert record.status == "solver-failure"
    assert record.delay_cost is None


def test_rr_methods_identical_at_alpha_half_with_noise():
    # gaussian tightening vanishes at alpha = 0.5, so both RR methods pick the
    # same profile and face the same perturbations
    config = base_config(sigma=2.0, alpha=0.5, num_trials=1)
    a = run_trial(config, 0, "rr-nominal", 6)
    b = run_trial(config, 0, "rr-ccce", 6)
    assert replace(a, method="x", solve_seconds=0.0) == replace(b, method="x", solve_seconds=0.0)
