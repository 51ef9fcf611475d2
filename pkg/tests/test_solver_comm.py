import math

import numpy as np
import pytest
from scipy.special import lambertw as scipy_lambertw

from conftest import make_device, make_scenario, random_small_scenario
from fedaug.errors import InfeasibleBandwidth
from fedaug.solver_comm import (
    LN2,
    bandwidth_from_multiplier,
    build_comm_subproblem,
    lambert_w,
    min_bandwidth,
    min_bandwidth_lambert,
    power_from_bandwidth,
    q_function,
    solve_p4,
)

N0 = 10.0 ** (-20.4)
S = 111.7e6


def test_power_from_bandwidth_unit_exponent():
    # S/(b t) = 1 makes the exponential factor exactly 1
    b, t, g = 1e6, S / 1e6, 3e-12
    assert power_from_bandwidth(b, t, g, S, N0) == pytest.approx(N0 * b / g)


def test_power_shannon_limit():
    t, g = 30.0, 3e-12
    b = 1e9 * S / t
    limit = N0 * S * LN2 / (g * t)
    assert power_from_bandwidth(b, t, g, S, N0) == pytest.approx(limit, rel=0.01)


def test_power_decreasing_in_bandwidth():
    rng = np.random.default_rng(0)
    for _ in range(30):
        t = float(rng.uniform(10, 50))
        g = float(rng.uniform(1e-13, 1e-11))
        b = float(rng.uniform(2e5, 2e7))
        assert power_from_bandwidth(2 * b, t, g, S, N0) < power_from_bandwidth(
            b, t, g, S, N0
        )


def test_q_function_unit_case():
    g = 2.5e-12
    got = q_function(1e6, 1.0, g, 1e6, N0)
    assert got == pytest.approx(N0 / g * (1.0 - 2.0 * LN2), rel=1e-12)
    assert got == pytest.approx(-0.38629 * N0 / g, rel=1e-4)


def test_q_function_monotone_and_limit():
    g, t = 3e-12, 30.0
    bs = np.geomspace(1e5, 1e8, 50)
    qs = q_function(bs, t, g, S, N0)
    assert np.all(np.diff(qs) > 0)
    assert np.all(qs < 0)
    far = q_function(1e6 * S / t, t, g, S, N0)
    assert abs(far) <= 1e-6 * N0 / g


def test_lambert_w_against_scipy():
    rng = np.random.default_rng(4)
    args = rng.uniform(-1.0 / math.e + 1e-9, -1e-12, size=200)
    for branch in (0, -1):
        ours = lambert_w(args, branch=branch)
        ref = scipy_lambertw(args, k=branch).real
        assert np.allclose(ours, ref, rtol=1e-10, atol=1e-12)


def test_lambert_w_rejects_out_of_domain():
    with pytest.raises(ValueError):
        lambert_w(0.5)
    with pytest.raises(ValueError):
        lambert_w(-1.0)


def test_min_bandwidth_defining_equation():
    rng = np.random.default_rng(5)
    for _ in range(30):
        t = float(rng.uniform(10, 50))
        g = float(rng.uniform(1e-12, 1e-11))
        p_max = float(rng.uniform(0.1, 0.2))
        b = min_bandwidth_lambert(t, g, p_max, S, N0)
        if math.isinf(b):
            continue
        assert power_from_bandwidth(b, t, g, S, N0) == pytest.approx(
            p_max, rel=1e-9
        )


def test_min_bandwidth_lambert_vs_bisection():
    rng = np.random.default_rng(6)
    for _ in range(30):
        t = float(rng.uniform(5, 60))
        g = float(rng.uniform(5e-13, 1e-11))
        p_max = float(rng.uniform(0.05, 0.25))
        closed = min_bandwidth_lambert(t, g, p_max, S, N0)
        root = min_bandwidth(t, g, p_max, S, N0)
        if math.isinf(closed):
            assert math.isinf(root)
        else:
            assert closed == pytest.approx(root, rel=1e-8)


def test_min_bandwidth_monotone_in_power():
    t, g = 30.0, 3e-12
    bs = [min_bandwidth_lambert(t, g, p, S, N0) for p in (0.1, 0.15, 0.2)]
    assert bs[0] > bs[1] > bs[2]


def test_min_bandwidth_power_floor():
    # below the Shannon power floor no bandwidth suffices
    t, g = 30.0, 3e-12
    floor = N0 * S * LN2 / (g * t)
    assert math.isinf(min_bandwidth_lambert(t, g, 0.5 * floor, S, N0))
    assert math.isinf(min_bandwidth(t, g, 0.5 * floor, S, N0))


def _subproblem(rng, n, b_total=20e6):
    t_com = rng.uniform(20, 50, size=n)
    gain = rng.uniform(1e-12, 1e-11, size=n)
    p_max = rng.uniform(0.1, 0.2, size=n)
    return build_comm_subproblem(t_com, gain, p_max, b_total, S, N0)


def test_bandwidth_from_multiplier_constructed_root():
    rng = np.random.default_rng(7)
    sub = _subproblem(rng, 3)
    b0 = np.maximum(sub.b_min * 1.5, 2e6)
    for i in range(3):
        varpi = -float(
            q_function(b0[i], sub.t_com[i], sub.gain[i], S, N0)
        )
        b = bandwidth_from_multiplier(varpi, sub)
        assert b[i] == pytest.approx(b0[i], rel=1e-6)


def test_bandwidth_from_multiplier_monotone():
    rng = np.random.default_rng(8)
    sub = _subproblem(rng, 2)
    q_lo = -float(q_function(sub.bandwidth_total, sub.t_com[0], sub.gain[0], S, N0))
    q_hi = -float(q_function(sub.b_min[0], sub.t_com[0], sub.gain[0], S, N0))
    varpis = np.linspace(q_lo, q_hi, 20)
    totals = [bandwidth_from_multiplier(v, sub).sum() for v in varpis]
    assert all(b <= a + 1e-3 for a, b in zip(totals, totals[1:]))


def test_solve_p4_symmetry_and_single():
    dev = make_device()
    sub = build_comm_subproblem(
        np.full(4, 30.0),
        np.full(4, dev.channel_gain),
        np.full(4, dev.max_power),
        20e6,
        S,
        N0,
    )
    sol = solve_p4(sub)
    assert np.allclose(sol.bandwidth, 5e6, rtol=1e-6)

    single = build_comm_subproblem(
        np.array([30.0]), np.array([dev.channel_gain]),
        np.array([dev.max_power]), 20e6, S, N0,
    )
    sol1 = solve_p4(single)
    assert sol1.bandwidth[0] == pytest.approx(20e6, rel=1e-9)


def test_solve_p4_constraints_random():
    rng = np.random.default_rng(9)
    for _ in range(25):
        n = int(rng.integers(2, 4))
        sub = _subproblem(rng, n)
        if sub.b_min.sum() > sub.bandwidth_total:
            continue
        sol = solve_p4(sub)
        assert abs(sol.bandwidth.sum() - 20e6) <= 1e-6 * 20e6
        assert np.all(sol.power <= sub.max_power * (1 + 1e-9))
        assert np.all(sol.bandwidth >= sub.b_min * (1 - 1e-9))


def test_solve_p4_kkt_stationarity():
    rng = np.random.default_rng(10)
    sub = _subproblem(rng, 3)
    sol = solve_p4(sub)
    for i in range(3):
        if sol.at_min_bandwidth[i]:
            continue
        q = float(q_function(sol.bandwidth[i], sub.t_com[i], sub.gain[i], S, N0))
        assert q + sol.varpi == pytest.approx(0.0, abs=1e-6 * abs(sol.varpi))


def test_solve_p4_infeasible():
    rng = np.random.default_rng(11)
    sub = _subproblem(rng, 3, b_total=1e5)
    with pytest.raises(InfeasibleBandwidth) as exc:
        solve_p4(sub)
    assert exc.value.available == pytest.approx(1e5)


def test_solve_p4_energy_monotone_in_bandwidth():
    rng = np.random.default_rng(12)
    for _ in range(20):
        n = int(rng.integers(2, 4))
        t_com = rng.uniform(20, 50, size=n)
        gain = rng.uniform(1e-12, 1e-11, size=n)
        p_max = rng.uniform(0.1, 0.2, size=n)
        small = build_comm_subproblem(t_com, gain, p_max, 15e6, S, N0)
        large = build_comm_subproblem(t_com, gain, p_max, 25e6, S, N0)
        if small.b_min.sum() > small.bandwidth_total:
            continue
        assert solve_p4(large).objective <= solve_p4(small).objective + 1e-12


def test_evaluate_split_recomposition():
    # fixed split on a 2-device instance: top-layer objective equals the sum
    # of the two subproblem objectives computed independently
    rng = np.random.default_rng(13)
    sc = random_small_scenario(rng, 2)
    from fedaug import error_budget, evaluate_split, solve_p3
    from fedaug.ce_optimizer import eta_bounds

    bounds = [eta_bounds(d, sc) for d in sc.devices]
    eta = np.array([0.5 * (lo + hi) for lo, hi in bounds])
    got = evaluate_split(eta, sc)
    budget = error_budget(2, sc.curve, sc.delta_max)
    cmp_sol = solve_p3(sc.devices, eta * sc.t_max, budget, sc)
    sub = build_comm_subproblem(
        (1.0 - eta) * sc.t_max,
        np.array([d.channel_gain for d in sc.devices]),
        np.array([d.max_power for d in sc.devices]),
        sc.bandwidth_total,
        sc.update_size,
        sc.noise_psd,
    )
    com_sol = solve_p4(sub)
    assert got == pytest.approx(cmp_sol.objective + com_sol.objective, abs=1e-9)
