"""Synthesized-data amount and CPU frequency via KKT bisection.

Minimizes total compute energy subject to the error-budget equality by
bisecting the dual multiplier of the budget constraint: each device's local
error is a clamped power function of the multiplier, and their sum is
monotone, so one outer bisection recovers the exact optimum.  The array core
accepts arbitrary leading batch dimensions so the cross-entropy layer can
evaluate many candidate time splits at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BisectionStalled, InfeasibleBudget
from .learning_curve import CurveParams
from .system_model import DeviceProfile, Scenario

__all__ = [
    "ComputeSubproblem",
    "ComputeSolution",
    "delta_bounds",
    "rho",
    "delta_from_nu",
    "build_compute_subproblem",
    "solve_p3",
]

MAX_BISECT_ITERS = 200
NU_REL_TOL = 1e-13
BUDGET_TOL_PER_DEVICE = 1e-9


@dataclass(frozen=True)
class ComputeSubproblem:
    """Per-device constants of the reduced compute subproblem."""

    rho: np.ndarray
    delta_min: np.ndarray
    delta_max: np.ndarray
    t_cmp: np.ndarray
    budget: float
    curve: CurveParams

    def __post_init__(self):
        if np.any(self.rho <= 0):
            raise ValueError("rho must be positive")
        if np.any(self.t_cmp <= 0):
            raise ValueError("t_cmp must be positive")
        if np.any(self.delta_min > self.delta_max):
            raise ValueError("delta_min must not exceed delta_max")


@dataclass(frozen=True)
class ComputeSolution:
    delta: np.ndarray
    d_gen: np.ndarray
    freq: np.ndarray
    nu: float
    objective: float
    iterations: int
    interior: np.ndarray


def delta_bounds(
    dev: DeviceProfile, t_cmp: float, scenario: Scenario
) -> tuple[float, float]:
    """Reachable local-error interval for a device given its compute time."""
    if t_cmp <= 0:
        raise ValueError(f"t_cmp must be positive, got {t_cmp}")
    curve = scenario.curve
    tau_omega = scenario.local_epochs * scenario.workload_per_sample
    cap = min(
        dev.max_freq * t_cmp / tau_omega,
        dev.local_count + scenario.d_gen_max,
    )
    d_min = curve.alpha * cap ** (-curve.beta) - curve.gamma
    d_max = curve.alpha * dev.local_count ** (-curve.beta) - curve.gamma
    return d_min, d_max


def rho(dev: DeviceProfile, t_cmp: float, scenario: Scenario) -> float:
    """Energy prefactor of the reduced objective rho * (gamma + delta)^(-3/beta)."""
    if t_cmp <= 0:
        raise ValueError(f"t_cmp must be positive, got {t_cmp}")
    curve = scenario.curve
    tau_omega = scenario.local_epochs * scenario.workload_per_sample
    return (
        dev.energy_coeff
        * tau_omega**3
        * curve.alpha ** (3.0 / curve.beta)
        / t_cmp**2
    )


def build_compute_subproblem(
    devices, t_cmp, budget: float, scenario: Scenario
) -> ComputeSubproblem:
    """Assemble the reduced subproblem constants for a device fleet."""
    t_cmp = np.asarray(t_cmp, dtype=float)
    d_min = np.empty(len(devices))
    d_max = np.empty(len(devices))
    rho_arr = np.empty(len(devices))
    for i, dev in enumerate(devices):
        d_min[i], d_max[i] = delta_bounds(dev, float(t_cmp[i]), scenario)
        rho_arr[i] = rho(dev, float(t_cmp[i]), scenario)
    return ComputeSubproblem(
        rho=rho_arr,
        delta_min=d_min,
        delta_max=d_max,
        t_cmp=t_cmp,
        budget=budget,
        curve=scenario.curve,
    )


def _nu_of_delta(delta, rho_arr, beta, gamma):
    return 3.0 * rho_arr / (beta * (delta + gamma) ** ((beta + 3.0) / beta))


def _delta_of_nu(nu, rho_arr, beta, gamma):
    return (3.0 * rho_arr / (beta * nu)) ** (beta / (beta + 3.0)) - gamma


def delta_from_nu(nu: float, sub: ComputeSubproblem, device_index: int) -> float:
    """Device's optimal local error at a given multiplier (clamped to bounds)."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    curve = sub.curve
    raw = _delta_of_nu(nu, sub.rho[device_index], curve.beta, curve.gamma)
    return float(
        np.clip(raw, sub.delta_min[device_index], sub.delta_max[device_index])
    )


def _solve_delta_arrays(
    delta_min,
    delta_max,
    rho_arr,
    beta,
    gamma,
    budget,
    max_iters=MAX_BISECT_ITERS,
):
    """Batched bisection on the budget multiplier.

    All inputs broadcast to shape (..., I); the budget equality is enforced
    per batch row.  Returns (delta, nu, feasible, iterations).
    """
    delta_min, delta_max, rho_arr = np.broadcast_arrays(
        delta_min, delta_max, rho_arr
    )
    n_dev = delta_min.shape[-1]
    sum_min = delta_min.sum(axis=-1)
    sum_max = delta_max.sum(axis=-1)
    feasible = (
        (sum_min <= budget + BUDGET_TOL_PER_DEVICE * n_dev)
        & (sum_max >= budget - BUDGET_TOL_PER_DEVICE * n_dev)
        & np.all(delta_min <= delta_max + 1e-15, axis=-1)
    )

    nu_lo = _nu_of_delta(delta_max, rho_arr, beta, gamma).min(axis=-1)
    nu_hi = _nu_of_delta(delta_min, rho_arr, beta, gamma).max(axis=-1)
    # keep infeasible rows numerically harmless
    nu_lo = np.where(feasible, nu_lo, 1.0)
    nu_hi = np.where(feasible, nu_hi, 2.0)

    iterations = 0
    for iterations in range(1, max_iters + 1):
        nu = 0.5 * (nu_lo + nu_hi)
        delta = np.clip(
            _delta_of_nu(nu[..., None], rho_arr, beta, gamma),
            delta_min,
            delta_max,
        )
        total = delta.sum(axis=-1)
        # sum(delta) is non-increasing in nu
        too_high = total > budget
        nu_lo = np.where(too_high, nu, nu_lo)
        nu_hi = np.where(too_high, nu_hi, nu)
        # exit on bracket width only: the returned point is a fresh
        # midpoint, so a residual check at the probe would not bound it
        done = (nu_hi - nu_lo) <= NU_REL_TOL * np.abs(0.5 * (nu_lo + nu_hi))
        if np.all(done | ~feasible):
            break

    nu = 0.5 * (nu_lo + nu_hi)
    delta = np.clip(
        _delta_of_nu(nu[..., None], rho_arr, beta, gamma), delta_min, delta_max
    )
    return delta, nu, feasible, iterations


def solve_p3(
    devices,
    t_cmp,
    budget: float,
    scenario: Scenario,
) -> ComputeSolution:
    """Optimal (local error, synthesized amount, frequency) per device.

    `t_cmp` is the per-device compute-time allotment (seconds).
    """
    curve = scenario.curve
    t_cmp = np.asarray(t_cmp, dtype=float)
    d_min = np.empty(len(devices))
    d_max = np.empty(len(devices))
    rho_arr = np.empty(len(devices))
    for i, dev in enumerate(devices):
        d_min[i], d_max[i] = delta_bounds(dev, float(t_cmp[i]), scenario)
        rho_arr[i] = rho(dev, float(t_cmp[i]), scenario)

    sum_min, sum_max = d_min.sum(), d_max.sum()
    tol = BUDGET_TOL_PER_DEVICE * len(devices)
    if budget < sum_min - tol or budget > sum_max + tol:
        raise InfeasibleBudget(budget, sum_min, sum_max)

    delta, nu, feasible, iterations = _solve_delta_arrays(
        d_min, d_max, rho_arr, curve.beta, curve.gamma, budget
    )
    if not bool(feasible):
        raise InfeasibleBudget(budget, sum_min, sum_max)
    if abs(delta.sum() - budget) > tol:
        # degenerate fully-clamped case: every device pinned at a bound
        if np.all((delta <= d_min + 1e-15) | (delta >= d_max - 1e-15)):
            if abs(delta.sum() - budget) > 1e-6 * max(1.0, abs(budget)):
                raise InfeasibleBudget(budget, sum_min, sum_max)
        else:
            raise BisectionStalled(
                f"budget residual {delta.sum() - budget:.3g} after "
                f"{iterations} iterations"
            )

    tau_omega = scenario.local_epochs * scenario.workload_per_sample
    mixed = ((curve.gamma + delta) / curve.alpha) ** (-1.0 / curve.beta)
    local = np.array([dev.local_count for dev in devices], dtype=float)
    d_gen = np.clip(mixed - local, 0.0, scenario.d_gen_max)
    freq = np.minimum(
        tau_omega * mixed / t_cmp,
        np.array([dev.max_freq for dev in devices]),
    )
    objective = float(
        (rho_arr * (curve.gamma + delta) ** (-3.0 / curve.beta)).sum()
    )
    interior = (delta > d_min + 1e-12) & (delta < d_max - 1e-12)
    return ComputeSolution(
        delta=delta,
        d_gen=d_gen,
        freq=freq,
        nu=float(nu),
        objective=objective,
        iterations=iterations,
        interior=interior,
    )
