"""End-to-end experiment runner: policies, trajectories, and brute oracles.

Round costs come from the allocation cost model and the error trajectory from
the convergence surrogate, so policy comparisons are model-consistent rather
than empirical.  Also hosts the exhaustive grid searches used to cross-check
the two inner solvers on small instances.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import solver_comm
from .ce_optimizer import CEConfig, solve_p1
from .errors import DegenerateGradient, PolicyInfeasible
from .learning_curve import local_error
from .system_model import Allocation, RoundMetrics, Scenario, round_metrics

__all__ = [
    "Trajectory",
    "NotReached",
    "run_policy",
    "metrics_at_target",
    "gradient_similarity",
    "read_gradient_file",
    "oracle_p3",
    "oracle_p4",
    "write_trajectory_csv",
    "trajectory_csv_string",
    "comparison_summary",
]


class NotReached:
    """Sentinel: the target error is never reached within the round budget."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NotReached"


NOT_REACHED = NotReached()


@dataclass(frozen=True)
class Trajectory:
    """Per-round surrogate global error and cumulative costs."""

    delta: np.ndarray            # shape (N+1,), delta[0] = 1 before training
    cum_energy_j: np.ndarray
    cum_latency_s: np.ndarray
    cum_uplink_bits: np.ndarray
    avg_local_error: float
    per_round: RoundMetrics

    @property
    def rounds(self) -> int:
        return len(self.delta) - 1


def _average_local_error(scenario: Scenario, alloc: Allocation) -> float:
    return float(
        np.mean(
            [
                local_error(dev.local_count, a.d_gen, scenario.curve)
                for dev, a in zip(scenario.devices, alloc.devices)
            ]
        )
    )


def run_policy(
    policy: str, scenario: Scenario, ce: CEConfig, seed: int | None = None
) -> tuple[Allocation, Trajectory]:
    """Solve for a policy's allocation, then roll the surrogate trajectory.

    The optional seed overrides the one in the search config so sweeps can
    share a config object.
    """
    if seed is not None:
        ce = CEConfig(
            samples_per_iter=ce.samples_per_iter,
            elite_count=ce.elite_count,
            max_iters=ce.max_iters,
            smoothing=ce.smoothing,
            sigma_floor=ce.sigma_floor,
            seed=seed,
        )
    try:
        alloc, _report = solve_p1(scenario, ce, policy=policy)
    except Exception as exc:  # noqa: BLE001 - annotate with the policy
        raise PolicyInfeasible(f"policy {policy}: {exc}") from exc

    metrics = round_metrics(scenario, alloc)
    delta_bar = _average_local_error(scenario, alloc)
    n = scenario.curve.global_rounds
    rounds = np.arange(n + 1, dtype=float)
    delta = np.exp(rounds * (delta_bar - 1.0) / scenario.curve.zeta)
    traj = Trajectory(
        delta=delta,
        cum_energy_j=rounds * metrics.energy_j,
        cum_latency_s=rounds * metrics.latency_s,
        cum_uplink_bits=rounds * metrics.uplink_bits,
        avg_local_error=delta_bar,
        per_round=metrics,
    )
    return alloc, traj


def metrics_at_target(trajectory: Trajectory, target_error: float):
    """Cumulative (energy, latency, uplink, rounds) at first round hitting target.

    Returns the NotReached sentinel when the trajectory never gets there.
    A small relative slack absorbs floating-point noise when an optimized
    trajectory lands on the target exactly at its final round.
    """
    hit = np.nonzero(trajectory.delta <= target_error * (1.0 + 1e-9))[0]
    if hit.size == 0:
        return NOT_REACHED
    n = int(hit[0])
    return (
        float(trajectory.cum_energy_j[n]),
        float(trajectory.cum_latency_s[n]),
        float(trajectory.cum_uplink_bits[n]),
        n,
    )


def gradient_similarity(g_ref, g_dev) -> float:
    """Mean shifted per-layer cosine similarity, mapped to [0, 1]."""
    if len(g_ref) != len(g_dev):
        raise DegenerateGradient(
            f"layer count mismatch: {len(g_ref)} vs {len(g_dev)}"
        )
    if not g_ref:
        raise DegenerateGradient("empty gradient")
    total = 0.0
    for layer, (a, b) in enumerate(zip(g_ref, g_dev)):
        a = np.asarray(a, dtype=float).ravel()
        b = np.asarray(b, dtype=float).ravel()
        if a.shape != b.shape:
            raise DegenerateGradient(f"layer {layer}: dimension mismatch")
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            raise DegenerateGradient(f"layer {layer}: zero-norm gradient")
        total += float(a @ b) / (na * nb) + 1.0
    return total / (2.0 * len(g_ref))


def read_gradient_file(path) -> list:
    """JSON list of per-layer real arrays -> list of numpy arrays."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise DegenerateGradient("gradient file must hold a list of layers")
    return [np.asarray(layer, dtype=float) for layer in raw]


def oracle_p3(devices, t_cmp, budget, scenario, step):
    """Exhaustive scan of the error-budget simplex for <= 3 devices.

    Returns (objective, delta argmin).  Grid points place all but the last
    device on a lattice; the last coordinate closes the budget equality.
    """
    from .solver_compute import build_compute_subproblem

    if len(devices) > 3:
        raise ValueError("oracle limited to 3 devices")
    sub = build_compute_subproblem(devices, t_cmp, budget, scenario)
    curve = scenario.curve
    lo, hi, rho_arr = sub.delta_min, sub.delta_max, sub.rho

    def objective(delta):
        return float(
            (rho_arr * (curve.gamma + np.asarray(delta)) ** (-3.0 / curve.beta)).sum()
        )

    best_val, best_arg = math.inf, None
    if len(devices) == 1:
        if lo[0] - 1e-12 <= budget <= hi[0] + 1e-12:
            best_arg = np.array([budget])
            best_val = objective(best_arg)
        return best_val, best_arg

    axes = [
        np.arange(lo[i], hi[i] + step * 0.5, step) for i in range(len(devices) - 1)
    ]
    for point in itertools.product(*axes):
        last = budget - sum(point)
        if not (lo[-1] - 1e-12 <= last <= hi[-1] + 1e-12):
            continue
        delta = np.array(point + (last,))
        val = objective(delta)
        if val < best_val:
            best_val, best_arg = val, delta
    return best_val, best_arg


def oracle_p4(t_com, gain, max_power, scenario, step):
    """Exhaustive scan of the bandwidth simplex for <= 3 devices."""
    t_com = np.asarray(t_com, dtype=float)
    gain = np.asarray(gain, dtype=float)
    max_power = np.asarray(max_power, dtype=float)
    if len(t_com) > 3:
        raise ValueError("oracle limited to 3 devices")
    b_total = scenario.bandwidth_total
    b_min = np.atleast_1d(
        solver_comm.min_bandwidth_lambert(
            t_com, gain, max_power, scenario.update_size, scenario.noise_psd
        )
    )

    def objective(b):
        p = solver_comm.power_from_bandwidth(
            b, t_com, gain, scenario.update_size, scenario.noise_psd
        )
        return float((p * t_com).sum())

    best_val, best_arg = math.inf, None
    if len(t_com) == 1:
        if b_min[0] <= b_total:
            best_arg = np.array([b_total])
            best_val = objective(best_arg)
        return best_val, best_arg

    axes = [
        np.arange(b_min[i], b_total + step * 0.5, step)
        for i in range(len(t_com) - 1)
    ]
    for point in itertools.product(*axes):
        last = b_total - sum(point)
        if last < b_min[-1] - 1e-9:
            continue
        b = np.array(point + (last,))
        val = objective(b)
        if val < best_val:
            best_val, best_arg = val, b
    return best_val, best_arg


def write_trajectory_csv(path_or_buf, trajectory: Trajectory):
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(
        path_or_buf, "__fspath__"
    )
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        writer = csv.writer(fh)
        writer.writerow(
            ["round", "delta", "cum_energy_j", "cum_latency_s", "cum_uplink_bits"]
        )
        for n in range(len(trajectory.delta)):
            writer.writerow(
                [
                    n,
                    repr(float(trajectory.delta[n])),
                    repr(float(trajectory.cum_energy_j[n])),
                    repr(float(trajectory.cum_latency_s[n])),
                    repr(float(trajectory.cum_uplink_bits[n])),
                ]
            )
    finally:
        if own:
            fh.close()


def trajectory_csv_string(trajectory: Trajectory) -> str:
    buf = io.StringIO()
    write_trajectory_csv(buf, trajectory)
    return buf.getvalue()


def comparison_summary(
    scenario: Scenario, results: dict, target_error: float
) -> dict:
    """Per-policy metrics dict, JSON-ready; results maps policy -> Trajectory."""
    out = {}
    for policy, traj in results.items():
        at_target = metrics_at_target(traj, target_error)
        entry = {
            "per_round_energy_j": traj.per_round.energy_j,
            "per_round_latency_s": traj.per_round.latency_s,
            "avg_local_error": traj.avg_local_error,
            "final_delta": float(traj.delta[-1]),
        }
        if at_target is NOT_REACHED:
            entry["target"] = "not_reached"
        else:
            energy, latency, uplink, rounds = at_target
            entry["target"] = {
                "energy_j": energy,
                "latency_s": latency,
                "uplink_bits": uplink,
                "rounds": rounds,
            }
        out[policy] = entry
    out["_meta"] = {
        "target_error": target_error,
        "device_count": scenario.device_count,
        "global_rounds": scenario.curve.global_rounds,
    }
    return out
