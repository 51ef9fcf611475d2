import json
import math

import numpy as np
import pytest

from conftest import make_device, make_scenario, random_small_scenario
from fedaug import (
    CEConfig,
    NOT_REACHED,
    error_budget,
    gradient_similarity,
    metrics_at_target,
    oracle_p3,
    oracle_p4,
    run_policy,
    solve_p3,
    solve_p4,
)
from fedaug.errors import DegenerateGradient, PolicyInfeasible
from fedaug.harness import (
    Trajectory,
    comparison_summary,
    read_gradient_file,
    trajectory_csv_string,
)
from fedaug.solver_comm import build_comm_subproblem
from fedaug.system_model import RoundMetrics


def _toy_trajectory(delta_bar=0.5, zeta=100.0, n=400, cost=2.0):
    rounds = np.arange(n + 1, dtype=float)
    return Trajectory(
        delta=np.exp(rounds * (delta_bar - 1.0) / zeta),
        cum_energy_j=rounds * cost,
        cum_latency_s=rounds * 60.0,
        cum_uplink_bits=rounds * 1e6,
        avg_local_error=delta_bar,
        per_round=RoundMetrics(cost, 60.0, 1e6, ()),
    )


def test_metrics_at_target_trivials():
    traj = _toy_trajectory()
    energy, latency, uplink, rounds = metrics_at_target(traj, 1.0)
    assert rounds == 0 and energy == 0.0 and latency == 0.0 and uplink == 0.0
    assert metrics_at_target(traj, float(traj.delta[-1]) / 2) is NOT_REACHED


def test_metrics_at_target_round_count():
    traj = _toy_trajectory(delta_bar=0.5, zeta=100.0)
    energy, _, _, rounds = metrics_at_target(traj, 0.2)
    assert rounds == math.ceil(100 * math.log(5.0) / 0.5)  # 322
    assert energy == pytest.approx(rounds * 2.0)


def test_metrics_at_target_exact_sampled_rounds():
    traj = _toy_trajectory()
    for n_star in (1, 17, 100):
        *_, rounds = metrics_at_target(traj, float(traj.delta[n_star]))
        assert rounds == n_star


def test_trajectory_monotone(fast_ce):
    rng = np.random.default_rng(0)
    sc = random_small_scenario(rng, 2)
    _, traj = run_policy("FIMI", sc, fast_ce)
    assert np.all(np.diff(traj.delta) < 0)
    assert np.all(np.diff(traj.cum_energy_j) >= 0)
    assert np.all(np.diff(traj.cum_latency_s) >= 0)


def test_run_policy_tfl_and_uniform(fast_ce):
    rng = np.random.default_rng(1)
    sc = random_small_scenario(rng, 3)
    alloc, _ = run_policy("TFL", sc, fast_ce)
    assert all(a.d_gen == 0.0 for a in alloc.devices)
    alloc_u, _ = run_policy("UNIFORM_BW", sc, fast_ce)
    assert all(
        a.bandwidth == pytest.approx(sc.bandwidth_total / 3)
        for a in alloc_u.devices
    )


def test_run_policy_fimi_beats_uniform_per_round(default_scenario):
    ce = CEConfig(seed=0, max_iters=20)
    _, fimi = run_policy("FIMI", default_scenario, ce)
    _, uni = run_policy("UNIFORM_BW", default_scenario, ce)
    assert fimi.per_round.energy_j <= uni.per_round.energy_j


def test_run_policy_infeasible():
    devs = [make_device(i=i) for i in range(2)]
    sc = make_scenario(devs, delta_max=1e-9)
    with pytest.raises(PolicyInfeasible):
        run_policy("FIMI", sc, CEConfig(seed=0))


def test_gradient_similarity_endpoints():
    g = [np.array([1.0, 2.0]), np.array([0.5, -1.0, 3.0])]
    neg = [-layer for layer in g]
    assert gradient_similarity(g, g) == pytest.approx(1.0)
    assert gradient_similarity(g, neg) == pytest.approx(0.0)
    ortho = [np.array([-2.0, 1.0]), np.array([1.0, 0.5, 0.0])]
    ortho[1] = np.array([-1.0, 0.5, (0.5 - 0.5 * -1.0) / 3.0])
    a = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    b = [np.array([0.0, 1.0]), np.array([1.0, 0.0])]
    assert gradient_similarity(a, b) == pytest.approx(0.5)


def test_gradient_similarity_scale_invariant():
    rng = np.random.default_rng(2)
    g1 = [rng.normal(size=5), rng.normal(size=3)]
    g2 = [rng.normal(size=5), rng.normal(size=3)]
    base = gradient_similarity(g1, g2)
    scaled = gradient_similarity([3.0 * g1[0], 0.1 * g1[1]], g2)
    assert scaled == pytest.approx(base, rel=1e-12)


def test_gradient_similarity_guards():
    g = [np.array([1.0, 0.0])]
    with pytest.raises(DegenerateGradient):
        gradient_similarity(g, [np.zeros(2)])
    with pytest.raises(DegenerateGradient):
        gradient_similarity(g, [np.ones(3)])
    with pytest.raises(DegenerateGradient):
        gradient_similarity(g, g + [np.ones(2)])


def test_read_gradient_file(tmp_path):
    p = tmp_path / "grad.json"
    p.write_text(json.dumps([[1.0, 2.0], [3.0]]))
    layers = read_gradient_file(p)
    assert len(layers) == 2
    assert gradient_similarity(layers, layers) == 1.0


def test_oracle_p3_symmetry_and_dominance():
    devs = [make_device(i=i) for i in range(2)]
    sc = make_scenario(devs)
    t_cmp = np.full(2, 30.0)
    budget = error_budget(2, sc.curve, sc.delta_max)
    val, arg = oracle_p3(devs, t_cmp, budget, sc, step=1e-3)
    assert arg[0] == pytest.approx(arg[1], abs=2e-3)
    sol = solve_p3(devs, t_cmp, budget, sc)
    assert sol.objective <= val + 1e-9

    # refinement: halving the step moves the oracle by less than the bound
    val2, _ = oracle_p3(devs, t_cmp, budget, sc, step=5e-4)
    assert val2 <= val + 1e-12


def test_oracle_p4_symmetry_and_dominance():
    dev = make_device()
    sc = make_scenario([dev, make_device(i=1)])
    t_com = np.full(2, 30.0)
    gain = np.array([dev.channel_gain] * 2)
    p_max = np.array([dev.max_power] * 2)
    val, arg = oracle_p4(t_com, gain, p_max, sc, step=sc.bandwidth_total * 0.002)
    assert arg[0] == pytest.approx(arg[1], abs=sc.bandwidth_total * 0.004)
    sub = build_comm_subproblem(
        t_com, gain, p_max, sc.bandwidth_total, sc.update_size, sc.noise_psd
    )
    assert solve_p4(sub).objective <= val + 1e-12


def test_trajectory_csv_and_summary(fast_ce):
    rng = np.random.default_rng(3)
    sc = random_small_scenario(rng, 2)
    _, traj = run_policy("FIMI", sc, fast_ce)
    text = trajectory_csv_string(traj)
    lines = text.strip().splitlines()
    assert lines[0] == "round,delta,cum_energy_j,cum_latency_s,cum_uplink_bits"
    assert len(lines) == sc.curve.global_rounds + 2

    summary = comparison_summary(sc, {"FIMI": traj}, sc.delta_max)
    assert "FIMI" in summary
    assert summary["_meta"]["target_error"] == sc.delta_max
    json.dumps(summary)  # must be serializable
