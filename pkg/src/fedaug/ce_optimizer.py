"""Top-layer search over per-device time-splitting factors.

Each device's round deadline is split into a compute share eta*T and an
uplink share (1-eta)*T.  For a candidate split the two inner solvers give
the energy-optimal data amounts/frequencies and bandwidth/power, so the
remaining problem is a box-constrained search over the split vector, done
with the cross-entropy method: sample Gaussian candidates, keep the elite
fraction, refit mean/stddev with smoothing, repeat until the distribution
collapses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import solver_comm, solver_compute
from .augmentation import solve_p8
from .errors import (
    DeviceInfeasible,
    InfeasibleBudget,
    NoFeasibleRegion,
)
from .learning_curve import error_budget, local_error
from .system_model import Allocation, DeviceAllocation, DeviceProfile, Scenario

__all__ = [
    "CEConfig",
    "CEState",
    "Infeasible",
    "SolveReport",
    "eta_bounds",
    "evaluate_split",
    "solve_p1",
    "complexity_report",
    "validate_allocation",
    "POLICIES",
]

POLICIES = ("FIMI", "TFL", "HDC", "UNIFORM_BW")

# ranking offset placing infeasible samples below every feasible objective
_PENALTY_BASE = 1e30

# candidate ranking tolerates far coarser roots than the final solve, and
# the nested bandwidth bisection dominates runtime
_EVAL_OUTER_ITERS = 60
_EVAL_INNER_ITERS = 40


@dataclass(frozen=True)
class CEConfig:
    samples_per_iter: int = 100
    elite_count: int = 10
    max_iters: int = 50
    smoothing: float = 0.7
    sigma_floor: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.elite_count <= self.samples_per_iter):
            raise ValueError("need 1 <= elite_count <= samples_per_iter")
        if not (0.0 < self.smoothing < 1.0):
            raise ValueError("smoothing must lie in (0, 1)")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")


@dataclass
class CEState:
    mean: np.ndarray
    stddev: np.ndarray
    iteration: int
    best_eta: np.ndarray | None
    best_objective: float


@dataclass(frozen=True)
class Infeasible:
    """Marker for an infeasible split, carrying the failing subproblem."""

    reason: str


@dataclass
class SolveReport:
    objective: float
    iterations: int
    termination: str
    trace: list = field(default_factory=list)  # (iter, best_objective, mean_sigma)
    budget: float | None = None
    delta_bar: float | None = None
    checks: dict = field(default_factory=dict)


def eta_bounds(dev: DeviceProfile, scenario: Scenario) -> tuple[float, float]:
    """Feasible range of a device's compute share of the round deadline."""
    tau_omega = scenario.local_epochs * scenario.workload_per_sample
    eta_min = tau_omega * dev.local_count / (scenario.t_max * dev.max_freq)
    snr = dev.channel_gain * dev.max_power / (
        scenario.noise_psd * scenario.bandwidth_total
    )
    eta_max = 1.0 - scenario.update_size / (
        scenario.t_max * scenario.bandwidth_total * math.log2(1.0 + snr)
    )
    if eta_min >= eta_max:
        raise DeviceInfeasible(
            f"device {dev.id}: compute share needs >= {eta_min:.4g} but uplink "
            f"leaves <= {eta_max:.4g} of the deadline"
        )
    return eta_min, eta_max


def _fleet_arrays(scenario: Scenario):
    devs = scenario.devices
    return {
        "eps": np.array([d.energy_coeff for d in devs]),
        "f_max": np.array([d.max_freq for d in devs]),
        "gain": np.array([d.channel_gain for d in devs]),
        "p_max": np.array([d.max_power for d in devs]),
        "d_loc": np.array([d.local_count for d in devs], dtype=float),
    }


def _evaluate_batch(etas: np.ndarray, scenario: Scenario, policy: str,
                    budget: float | None):
    """Round energy for a batch of split vectors; inf marks infeasibility.

    Returns (objective (M,), penalty (M,), reasons list of str or None).
    The penalty grades constraint violation (zero when feasible) so the
    search can rank infeasible samples and contract toward feasibility.
    """
    fleet = _fleet_arrays(scenario)
    curve = scenario.curve
    tau_omega = scenario.local_epochs * scenario.workload_per_sample
    t_cmp = etas * scenario.t_max
    t_com = (1.0 - etas) * scenario.t_max
    m = etas.shape[0]

    reasons = [None] * m
    feasible = np.ones(m, dtype=bool)
    penalty = np.zeros(m)

    # --- compute side ---
    if policy == "TFL":
        mixed = np.broadcast_to(fleet["d_loc"], etas.shape)
        freq = tau_omega * mixed / t_cmp
        cmp_ok = np.all(freq <= fleet["f_max"] * (1.0 + 1e-9), axis=-1)
        penalty += np.maximum(freq / fleet["f_max"] - 1.0, 0.0).sum(axis=-1)
        e_cmp = (
            scenario.local_epochs
            * fleet["eps"]
            * scenario.workload_per_sample
            * mixed
            * freq**2
        ).sum(axis=-1)
    else:
        cap = np.minimum(
            fleet["f_max"] * t_cmp / tau_omega,
            fleet["d_loc"] + scenario.d_gen_max,
        )
        d_min = curve.alpha * cap ** (-curve.beta) - curve.gamma
        d_max = curve.alpha * fleet["d_loc"] ** (-curve.beta) - curve.gamma
        rho = (
            fleet["eps"]
            * tau_omega**3
            * curve.alpha ** (3.0 / curve.beta)
            / t_cmp**2
        )
        delta, _, cmp_ok, _ = solver_compute._solve_delta_arrays(
            d_min, np.broadcast_to(d_max, d_min.shape), rho,
            curve.beta, curve.gamma, budget,
        )
        mixed = ((curve.gamma + delta) / curve.alpha) ** (-1.0 / curve.beta)
        e_cmp = (rho * (curve.gamma + delta) ** (-3.0 / curve.beta)).sum(axis=-1)
        sum_min = d_min.sum(axis=-1)
        penalty += np.maximum(sum_min - budget, 0.0) / abs(budget)
        penalty += np.maximum(budget - d_max.sum(), 0.0) / abs(budget)
    for i in np.nonzero(~cmp_ok)[0]:
        reasons[i] = "budget"
    feasible &= cmp_ok

    # --- communication side ---
    if policy == "UNIFORM_BW":
        b = scenario.bandwidth_total / len(scenario.devices)
        power = solver_comm.power_from_bandwidth(
            np.full_like(t_com, b), t_com, fleet["gain"],
            scenario.update_size, scenario.noise_psd,
        )
        com_ok = np.all(power <= fleet["p_max"] * (1.0 + 1e-9), axis=-1)
        penalty += np.maximum(power / fleet["p_max"] - 1.0, 0.0).sum(axis=-1)
        e_com = (power * t_com).sum(axis=-1)
    else:
        b_min = solver_comm.min_bandwidth_lambert(
            t_com, fleet["gain"], fleet["p_max"],
            scenario.update_size, scenario.noise_psd,
        )
        # grade bandwidth shortfall; unreachable devices count as 10x budget
        b_total = scenario.bandwidth_total
        b_graded = np.minimum(b_min, 10.0 * b_total)
        penalty += np.maximum(b_graded.sum(axis=-1) / b_total - 1.0, 0.0)
        b, power, _, com_ok, _ = solver_comm._solve_comm_arrays(
            t_com,
            np.broadcast_to(fleet["gain"], t_com.shape),
            np.broadcast_to(fleet["p_max"], t_com.shape),
            b_min,
            scenario.bandwidth_total,
            scenario.update_size,
            scenario.noise_psd,
            outer_iters=_EVAL_OUTER_ITERS,
            inner_iters=_EVAL_INNER_ITERS,
        )
        e_com = np.where(com_ok, np.nansum(power * t_com, axis=-1), np.inf)
    for i in np.nonzero(~com_ok)[0]:
        if reasons[i] is None:
            reasons[i] = "bandwidth"
    feasible &= com_ok

    objective = np.where(feasible, e_cmp + e_com, np.inf)
    return objective, np.where(feasible, 0.0, penalty), reasons


def evaluate_split(eta, scenario: Scenario, policy: str = "FIMI"):
    """Round energy for one split vector, or an Infeasible marker."""
    eta = np.asarray(eta, dtype=float)
    budget = None
    if policy != "TFL":
        budget = error_budget(
            scenario.device_count, scenario.curve, scenario.delta_max
        )
    obj, _, reasons = _evaluate_batch(eta[None, :], scenario, policy, budget)
    if not np.isfinite(obj[0]):
        return Infeasible(reasons[0] or "unknown")
    return float(obj[0])


def _assemble_allocation(
    eta: np.ndarray, scenario: Scenario, policy: str, budget: float | None
) -> Allocation:
    """Full per-device allocation (including category split) for one eta."""
    devs = scenario.devices
    tau_omega = scenario.local_epochs * scenario.workload_per_sample
    t_cmp = eta * scenario.t_max
    t_com = (1.0 - eta) * scenario.t_max

    if policy == "TFL":
        d_gen = np.zeros(len(devs))
        freq = np.array(
            [tau_omega * d.local_count / t for d, t in zip(devs, t_cmp)]
        )
    else:
        sol = solver_compute.solve_p3(devs, t_cmp, budget, scenario)
        d_gen, freq = sol.d_gen, sol.freq

    gain = np.array([d.channel_gain for d in devs])
    p_max = np.array([d.max_power for d in devs])
    if policy == "UNIFORM_BW":
        b = np.full(len(devs), scenario.bandwidth_total / len(devs))
        power = solver_comm.power_from_bandwidth(
            b, t_com, gain, scenario.update_size, scenario.noise_psd
        )
        power = np.minimum(power, p_max)
    else:
        comm = solver_comm.build_comm_subproblem(
            t_com, gain, p_max,
            scenario.bandwidth_total, scenario.update_size, scenario.noise_psd,
        )
        sol_comm = solver_comm.solve_p4(comm)
        b, power = sol_comm.bandwidth, sol_comm.power

    out = []
    for i, dev in enumerate(devs):
        gen_budget = int(round(d_gen[i]))
        if policy == "HDC":
            # whole budget to the least-populated category, lowest index on ties
            gen = [0] * scenario.categories
            gen[int(np.argmin(dev.category_counts))] = gen_budget
            category_gen = tuple(gen)
        else:
            category_gen = solve_p8(dev.category_counts, gen_budget).gen_counts
        out.append(
            DeviceAllocation(
                device_id=dev.id,
                d_gen=float(d_gen[i]),
                freq=float(freq[i]),
                bandwidth=float(b[i]),
                power=float(power[i]),
                eta=float(eta[i]),
                category_gen=category_gen,
            )
        )
    return Allocation(devices=tuple(out))


def solve_p1(
    scenario: Scenario, ce: CEConfig, policy: str = "FIMI"
) -> tuple[Allocation, SolveReport]:
    """Cross-entropy search for the energy-optimal split and full allocation."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    bounds = [eta_bounds(dev, scenario) for dev in scenario.devices]
    eta_min = np.array([b[0] for b in bounds])
    eta_max = np.array([b[1] for b in bounds])
    n_dev = scenario.device_count

    budget = None
    if policy != "TFL":
        budget = error_budget(n_dev, scenario.curve, scenario.delta_max)
        # budget feasibility at the loosest split: largest compute share
        # everywhere gives the widest reachable error interval
        sub = solver_compute.build_compute_subproblem(
            scenario.devices, eta_max * scenario.t_max, budget, scenario
        )
        lo_sum = float(sub.delta_min.sum())
        hi_sum = float(sub.delta_max.sum())
        if not (lo_sum <= budget <= hi_sum):
            raise InfeasibleBudget(budget, lo_sum, hi_sum)

    state = CEState(
        mean=np.full(n_dev, 0.5),
        stddev=np.ones(n_dev),
        iteration=0,
        best_eta=None,
        best_objective=np.inf,
    )
    trace = []
    infeasible_streak = 0
    best_penalty = np.inf
    rho_s = ce.smoothing
    termination = "max_iters"

    for j in range(ce.max_iters):
        if np.max(state.stddev) <= ce.sigma_floor:
            termination = "sigma_floor"
            break
        etas = np.empty((ce.samples_per_iter, n_dev))
        for m in range(ce.samples_per_iter):
            # independent stream per (seed, iter, sample): reproducible
            # regardless of evaluation order or worker count
            rng = np.random.default_rng((ce.seed, j, m))
            etas[m] = state.mean + state.stddev * rng.standard_normal(n_dev)
        np.clip(etas, eta_min, eta_max, out=etas)

        objective, penalty, _ = _evaluate_batch(etas, scenario, policy, budget)
        finite = np.isfinite(objective)
        # infeasible samples rank below every feasible one, ordered by how
        # badly they violate constraints, so the distribution can still
        # contract toward the feasible region
        key = np.where(finite, objective, _PENALTY_BASE * (1.0 + penalty))
        if not finite.any():
            min_pen = float(penalty.min())
            if min_pen < best_penalty * (1.0 - 1e-6):
                best_penalty = min_pen
                infeasible_streak = 0
            else:
                infeasible_streak += 1
            if infeasible_streak >= 3:
                raise NoFeasibleRegion(
                    f"all {ce.samples_per_iter} samples infeasible for "
                    f"3 consecutive iterations without progress "
                    f"(policy {policy})"
                )
        else:
            infeasible_streak = 0

        order = np.argsort(key, kind="stable")
        n_elite = ce.elite_count
        if finite.any():
            # feasible samples sort first; never let an infeasible sample
            # into the elite set when a feasible one exists
            n_elite = min(n_elite, int(finite.sum()))
        elite_idx = order[:n_elite]
        elites = etas[elite_idx]
        state.mean = rho_s * state.mean + (1.0 - rho_s) * elites.mean(axis=0)
        state.stddev = rho_s * state.stddev + (1.0 - rho_s) * elites.std(axis=0)

        if finite[order[0]] and objective[order[0]] < state.best_objective:
            state.best_objective = float(objective[order[0]])
            state.best_eta = etas[order[0]].copy()
        trace.append((j, state.best_objective, float(state.stddev.mean())))
        state.iteration = j + 1
    else:
        if np.max(state.stddev) <= ce.sigma_floor:
            termination = "sigma_floor"

    if state.best_eta is None:
        raise NoFeasibleRegion("no feasible sample found before termination")

    alloc = _assemble_allocation(state.best_eta, scenario, policy, budget)
    delta_bar = None
    if policy == "TFL":
        delta_bar = float(
            np.mean(
                [local_error(d.local_count, 0.0, scenario.curve)
                 for d in scenario.devices]
            )
        )
    else:
        delta_bar = budget / n_dev
    report = SolveReport(
        objective=state.best_objective,
        iterations=state.iteration,
        termination=termination,
        trace=trace,
        budget=budget,
        delta_bar=delta_bar,
        checks=validate_allocation(scenario, alloc, policy=policy),
    )
    return alloc, report


def validate_allocation(
    scenario: Scenario, alloc: Allocation, policy: str = "FIMI"
) -> dict:
    """Independent constraint checker; returns {check: (ok, value)}."""
    from .learning_curve import global_error  # local import keeps deps flat

    devs = scenario.devices
    tau_omega = scenario.local_epochs * scenario.workload_per_sample
    checks = {}

    b_sum = sum(a.bandwidth for a in alloc.devices)
    checks["bandwidth_sum"] = (
        abs(b_sum - scenario.bandwidth_total) <= 1e-6 * scenario.bandwidth_total,
        b_sum,
    )
    checks["power_cap"] = (
        all(
            a.power <= d.max_power * (1.0 + 1e-9)
            for a, d in zip(alloc.devices, devs)
        ),
        max(a.power for a in alloc.devices),
    )
    checks["freq_cap"] = (
        all(
            0.0 < a.freq <= d.max_freq * (1.0 + 1e-9)
            for a, d in zip(alloc.devices, devs)
        ),
        max(a.freq for a in alloc.devices),
    )
    checks["d_gen_range"] = (
        all(
            -1e-9 <= a.d_gen <= scenario.d_gen_max * (1.0 + 1e-9)
            for a in alloc.devices
        ),
        max(a.d_gen for a in alloc.devices),
    )
    checks["eta_range"] = (
        all(0.0 < a.eta < 1.0 for a in alloc.devices),
        None,
    )
    checks["category_sum"] = (
        all(
            sum(a.category_gen) == int(round(a.d_gen))
            for a in alloc.devices
            if a.category_gen
        ),
        None,
    )

    latencies = []
    for a, d in zip(alloc.devices, devs):
        t_cmp = tau_omega * (d.local_count + a.d_gen) / a.freq
        rate = a.bandwidth * math.log2(
            1.0 + d.channel_gain * a.power / (scenario.noise_psd * a.bandwidth)
        )
        latencies.append(t_cmp + scenario.update_size / rate)
    checks["round_latency"] = (
        abs(max(latencies) - scenario.t_max) <= 1e-6 * scenario.t_max,
        max(latencies),
    )

    if policy != "TFL":
        delta_bar = float(
            np.mean(
                [
                    local_error(d.local_count, a.d_gen, scenario.curve)
                    for a, d in zip(alloc.devices, devs)
                ]
            )
        )
        achieved = global_error(delta_bar, scenario.curve)
        checks["global_error"] = (
            abs(achieved - scenario.delta_max) <= 1e-6 * scenario.delta_max,
            achieved,
        )
    return checks


def complexity_report(ce: CEConfig, scenario: Scenario) -> dict:
    """Predicted search effort vs measured bisection counts at a mid split."""
    bounds = [eta_bounds(dev, scenario) for dev in scenario.devices]
    eta = np.array([0.5 * (lo + hi) for lo, hi in bounds])
    budget = error_budget(
        scenario.device_count, scenario.curve, scenario.delta_max
    )
    t_cmp = eta * scenario.t_max
    t_com = (1.0 - eta) * scenario.t_max

    sub_cmp = solver_compute.build_compute_subproblem(
        scenario.devices, t_cmp, budget, scenario
    )
    curve = scenario.curve
    nu_vals_max = solver_compute._nu_of_delta(
        sub_cmp.delta_min, sub_cmp.rho, curve.beta, curve.gamma
    )
    nu_vals_min = solver_compute._nu_of_delta(
        sub_cmp.delta_max, sub_cmp.rho, curve.beta, curve.gamma
    )
    nu_range = float(nu_vals_max.max() - nu_vals_min.min())

    gain = np.array([d.channel_gain for d in scenario.devices])
    p_max = np.array([d.max_power for d in scenario.devices])
    sub_com = solver_comm.build_comm_subproblem(
        t_com, gain, p_max,
        scenario.bandwidth_total, scenario.update_size, scenario.noise_psd,
    )
    q_min = solver_comm.q_function(
        sub_com.b_min, t_com, gain, scenario.update_size, scenario.noise_psd
    )
    q_tot = solver_comm.q_function(
        np.full_like(t_com, scenario.bandwidth_total),
        t_com, gain, scenario.update_size, scenario.noise_psd,
    )
    varpi_range = float((-q_min).max() - (-q_tot).min())
    band_range = float((scenario.bandwidth_total - sub_com.b_min).max())
    chi = max(nu_range, varpi_range, band_range)

    sol_cmp = solver_compute.solve_p3(scenario.devices, t_cmp, budget, scenario)
    sol_com = solver_comm.solve_p4(sub_com)
    return {
        "samples_total": ce.max_iters * ce.samples_per_iter,
        "nu_range": nu_range,
        "varpi_range": varpi_range,
        "bandwidth_range": band_range,
        "chi": chi,
        "log2_chi": math.log2(chi) if chi > 1 else 0.0,
        "measured_compute_iters": sol_cmp.iterations,
        "measured_comm_outer_iters": sol_com.outer_iterations,
    }
