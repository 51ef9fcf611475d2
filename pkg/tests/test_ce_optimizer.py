import numpy as np
import pytest

from conftest import make_device, make_scenario, random_small_scenario
from fedaug import CEConfig, eta_bounds, evaluate_split, solve_p1
from fedaug.ce_optimizer import Infeasible, complexity_report, validate_allocation
from fedaug.errors import DeviceInfeasible, InfeasibleBudget, NoFeasibleRegion


def test_eta_bounds_example():
    dev = make_device(max_freq=2e9, local_count=1250)
    sc = make_scenario([dev])
    lo, hi = eta_bounds(dev, sc)
    assert lo == pytest.approx(6.25e9 / 1.2e11)
    assert lo == pytest.approx(0.05208, abs=1e-5)
    # vanishing update size pushes the upper bound to 1
    sc_small = make_scenario([dev], update_size=1.0)
    _, hi_small = eta_bounds(dev, sc_small)
    assert hi_small > 0.999999
    assert hi_small > hi


def test_eta_bounds_increasing_in_local_count():
    lows = []
    for d_loc in (500, 1000, 2000):
        dev = make_device(local_count=d_loc, categories=10)
        sc = make_scenario([dev])
        lows.append(eta_bounds(dev, sc)[0])
    assert lows[0] < lows[1] < lows[2]


def test_eta_bounds_infeasible_device():
    dev = make_device(max_freq=1.5e9, local_count=1250)
    sc = make_scenario([dev], t_max=0.01)
    with pytest.raises(DeviceInfeasible):
        eta_bounds(dev, sc)


def test_evaluate_split_symmetry():
    devs = [make_device(i=i) for i in range(2)]
    sc = make_scenario(devs)
    got = evaluate_split(np.array([0.5, 0.5]), sc)
    assert isinstance(got, float)
    # identical devices with identical split: swapping devices changes nothing
    assert evaluate_split(np.array([0.5, 0.5]), sc) == got


def test_evaluate_split_infeasible_marker():
    rng = np.random.default_rng(1)
    sc = random_small_scenario(rng, 2)
    # near-unit splits starve the uplink of time and bandwidth
    got = evaluate_split(np.array([0.99, 0.99]), sc)
    assert isinstance(got, Infeasible)
    assert got.reason == "bandwidth"


def test_solve_p1_deterministic(fast_ce):
    rng = np.random.default_rng(2)
    sc = random_small_scenario(rng, 2)
    a1, r1 = solve_p1(sc, fast_ce)
    a2, r2 = solve_p1(sc, fast_ce)
    assert a1 == a2
    assert r1.objective == r2.objective
    assert [t for t in r1.trace] == [t for t in r2.trace]


def test_solve_p1_best_objective_monotone(fast_ce):
    rng = np.random.default_rng(3)
    sc = random_small_scenario(rng, 3)
    _, rep = solve_p1(sc, fast_ce)
    best = [b for _, b, _ in rep.trace if np.isfinite(b)]
    assert all(b <= a + 1e-12 for a, b in zip(best, best[1:]))
    assert rep.termination in ("sigma_floor", "max_iters")


def test_solve_p1_validates_constraints(fast_ce):
    rng = np.random.default_rng(4)
    sc = random_small_scenario(rng, 3)
    alloc, rep = solve_p1(sc, fast_ce)
    checks = validate_allocation(sc, alloc)
    for name, (ok, value) in checks.items():
        assert ok, f"{name} failed with value {value}"


def test_solve_p1_infeasible_budget():
    devs = [make_device(i=i) for i in range(2)]
    sc = make_scenario(devs, delta_max=1e-9)
    with pytest.raises(InfeasibleBudget) as exc:
        solve_p1(sc, CEConfig(seed=0))
    assert exc.value.lower < exc.value.upper


def test_solve_p1_no_feasible_region():
    # bandwidth too small for any split: every sample is infeasible
    devs = [make_device(i=i) for i in range(2)]
    sc = make_scenario(devs, bandwidth_total=2e5)
    with pytest.raises((NoFeasibleRegion, DeviceInfeasible)):
        solve_p1(sc, CEConfig(seed=0))


def test_solve_p1_policy_shapes(fast_ce):
    rng = np.random.default_rng(5)
    sc = random_small_scenario(rng, 3)
    tfl, _ = solve_p1(sc, fast_ce, policy="TFL")
    assert all(a.d_gen == 0.0 for a in tfl.devices)
    uni, _ = solve_p1(sc, fast_ce, policy="UNIFORM_BW")
    assert all(
        a.bandwidth == pytest.approx(sc.bandwidth_total / 3) for a in uni.devices
    )
    hdc, _ = solve_p1(sc, fast_ce, policy="HDC")
    for dev, a in zip(sc.devices, hdc.devices):
        gen = np.array(a.category_gen)
        target = int(np.argmin(dev.category_counts))
        assert gen.sum() == int(round(a.d_gen))
        assert np.all(gen[np.arange(len(gen)) != target] == 0)


def test_solve_p1_category_split_entropy(fast_ce):
    rng = np.random.default_rng(6)
    sc = random_small_scenario(rng, 2)
    alloc, _ = solve_p1(sc, fast_ce)
    from fedaug import data_entropy, solve_p8

    for dev, a in zip(sc.devices, alloc.devices):
        budget = int(round(a.d_gen))
        want = solve_p8(dev.category_counts, budget)
        got_h = data_entropy(dev.category_counts, a.category_gen)
        assert got_h == pytest.approx(want.entropy_bits(), abs=1e-12)


def test_complexity_report(default_scenario):
    ce = CEConfig(seed=0)
    rep = complexity_report(ce, default_scenario)
    assert rep["samples_total"] == ce.max_iters * ce.samples_per_iter
    assert rep["chi"] > 0
    assert rep["measured_compute_iters"] <= int(
        np.ceil(np.log2(max(rep["nu_range"], 2.0) / 1e-13))
    ) + 1
    assert rep["measured_comm_outer_iters"] <= 200


def test_ce_config_validation():
    with pytest.raises(ValueError):
        CEConfig(samples_per_iter=5, elite_count=10)
    with pytest.raises(ValueError):
        CEConfig(smoothing=1.5)
    with pytest.raises(ValueError):
        CEConfig(sigma_floor=0.0)
