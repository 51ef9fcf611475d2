"""Bandwidth and transmit-power allocation via hierarchical bisection.

Uplink energy is minimized under a shared bandwidth budget.  Fixing each
device's transmission deadline makes power a decreasing function of its
sub-band, and the KKT conditions reduce to a water-filling form: an outer
bisection on the shared multiplier, an inner per-device root search on the
marginal-cost function Q, and a Lambert-W closed form for the minimum
bandwidth at which the power cap binds.

The array core runs all inner/outer bisections in lockstep over arbitrary
batch dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BisectionStalled, InfeasibleBandwidth

__all__ = [
    "CommSubproblem",
    "CommSolution",
    "lambert_w",
    "power_from_bandwidth",
    "min_bandwidth",
    "min_bandwidth_lambert",
    "q_function",
    "bandwidth_from_multiplier",
    "solve_p4",
    "build_comm_subproblem",
]

LN2 = math.log(2.0)
MAX_ITERS = 200
INNER_ITERS = 64
OUTER_ITERS = 110
_EXP2_CAP = 1000.0  # beyond this the required power is effectively infinite


@dataclass(frozen=True)
class CommSubproblem:
    """Per-device constants plus shared radio parameters."""

    t_com: np.ndarray        # s, per device
    gain: np.ndarray         # linear, per device
    max_power: np.ndarray    # W, per device
    b_min: np.ndarray        # Hz, per device
    bandwidth_total: float   # Hz
    update_size: float       # bits
    noise_psd: float         # W/Hz

    def __post_init__(self):
        if np.any(self.t_com <= 0):
            raise ValueError("t_com must be positive")
        if np.any(self.b_min <= 0):
            raise ValueError("b_min must be positive")

    @property
    def device_count(self) -> int:
        return len(self.t_com)


@dataclass(frozen=True)
class CommSolution:
    bandwidth: np.ndarray
    power: np.ndarray
    varpi: float
    objective: float
    outer_iterations: int
    at_min_bandwidth: np.ndarray


def _exp2_guarded(exponent):
    """2**exponent with the exponent capped to keep arithmetic finite.

    The cap only engages for bandwidths far below any feasible value, where
    the (astronomically large) result is used solely for sign decisions.
    """
    exponent = np.asarray(exponent, dtype=float)
    return np.exp2(np.minimum(exponent, _EXP2_CAP))


def power_from_bandwidth(b, t_com, gain, update_size, noise_psd):
    """Transmit power needed to deliver the update in t_com seconds on band b."""
    b = np.asarray(b, dtype=float)
    pow2 = _exp2_guarded(update_size / (b * t_com))
    return noise_psd * b / gain * (pow2 - 1.0)


def q_function(b, t_com, gain, update_size, noise_psd):
    """Marginal uplink-energy change per Hz of bandwidth (negative, increasing)."""
    b = np.asarray(b, dtype=float)
    pow2 = _exp2_guarded(update_size / (b * t_com))
    return (
        noise_psd * t_com / gain * (pow2 - 1.0)
        - LN2 * noise_psd * update_size * pow2 / (gain * b)
    )


def lambert_w(a, branch=0, max_iters=50, tol=1e-12):
    """Real Lambert W on (-1/e, 0) for branches 0 and -1, by Halley iteration."""
    a = np.asarray(a, dtype=float)
    if np.any((a <= -1.0 / math.e) | (a >= 0.0)):
        raise ValueError("argument must lie in (-1/e, 0)")
    p2 = 2.0 * (1.0 + math.e * a)
    p = np.sqrt(np.maximum(p2, 0.0))
    if branch == 0:
        # series near the branch point, small-argument expansion elsewhere
        w = np.where(p2 < 0.5, -1.0 + p - p2 / 6.0, a * (1.0 - a))
    elif branch == -1:
        loga = np.log(-a)
        safe = np.where(p2 < 0.5, -2.0, loga)
        w = np.where(
            p2 < 0.5,
            -1.0 - p - p2 / 6.0,
            safe - np.log(np.maximum(-safe, 1e-300)),
        )
    else:
        raise ValueError(f"unsupported branch {branch}")
    for _ in range(max_iters):
        ew = np.exp(w)
        f = w * ew - a
        denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0)
        step = f / denom
        w = w - step
        if np.all(np.abs(step) <= tol * (1.0 + np.abs(w))):
            break
    return w


def min_bandwidth_lambert(t_com, gain, max_power, update_size, noise_psd):
    """Closed-form minimum bandwidth at which the power cap binds.

    Returns inf where even unlimited bandwidth needs more than max_power
    (the Shannon power floor exceeds the cap).
    """
    t_com = np.asarray(t_com, dtype=float)
    kappa = noise_psd * update_size * LN2 / (np.asarray(gain) * np.asarray(max_power))
    x = kappa / t_com
    out = np.full(np.broadcast(x, t_com).shape, np.inf)
    ok = x < 1.0
    if np.any(ok):
        xs = np.where(ok, x, 0.5)
        # the principal branch returns the trivial root -x, which zeroes
        # the denominator; the secondary branch carries the real solution
        w = lambert_w(-xs * np.exp(-xs), branch=-1)
        denom = np.broadcast_to(t_com, xs.shape) * w + np.broadcast_to(
            kappa, xs.shape
        )
        val = -update_size * LN2 / denom
        out = np.where(ok, val, out)
    return out if out.ndim else float(out)


def min_bandwidth(
    t_com: float,
    gain: float,
    max_power: float,
    update_size: float,
    noise_psd: float,
    max_iters=MAX_ITERS,
) -> float:
    """Minimum feasible bandwidth by monotone bisection on the power curve."""
    if max_power <= 0:
        raise ValueError("max_power must be positive")
    shannon_floor = noise_psd * update_size * LN2 / (gain * t_com)
    if shannon_floor >= max_power:
        return math.inf

    def excess(b):
        return float(
            power_from_bandwidth(b, t_com, gain, update_size, noise_psd)
        ) - max_power

    hi = update_size / t_com  # exponent 1; power is finite here
    while excess(hi) > 0:
        hi *= 2.0
    lo = hi / 2.0
    while excess(lo) <= 0:
        lo /= 2.0
        if lo < 1e-300:
            break
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if (hi - lo) <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def build_comm_subproblem(
    t_com, gain, max_power, bandwidth_total, update_size, noise_psd
) -> CommSubproblem:
    t_com = np.asarray(t_com, dtype=float)
    gain = np.asarray(gain, dtype=float)
    max_power = np.asarray(max_power, dtype=float)
    b_min = np.asarray(
        min_bandwidth_lambert(t_com, gain, max_power, update_size, noise_psd)
    )
    return CommSubproblem(
        t_com=t_com,
        gain=gain,
        max_power=max_power,
        b_min=b_min,
        bandwidth_total=bandwidth_total,
        update_size=update_size,
        noise_psd=noise_psd,
    )


def _inner_roots(varpi, b_min, b_total, t_com, gain, update_size, noise_psd,
                 iters=INNER_ITERS):
    """Per-element root of Q(b) + varpi = 0 on [b_min, b_total], clamped.

    varpi has shape (...,); device arrays broadcast against (..., I).
    """
    lo = np.broadcast_to(b_min, np.broadcast(b_min, t_com).shape).copy()
    hi = np.full_like(lo, b_total)
    v = varpi[..., None]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        q = q_function(mid, t_com, gain, update_size, noise_psd)
        high = q + v > 0.0
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    return 0.5 * (lo + hi)


def _solve_comm_arrays(
    t_com,
    gain,
    max_power,
    b_min,
    bandwidth_total,
    update_size,
    noise_psd,
    outer_iters=OUTER_ITERS,
    inner_iters=INNER_ITERS,
):
    """Batched hierarchical bisection.

    Inputs broadcast to (..., I).  Returns (b, power, varpi, feasible,
    iterations).  Infeasible rows (sum of minimum bandwidths above the
    budget) come back with NaN bandwidths.
    """
    t_com, gain, max_power, b_min = np.broadcast_arrays(
        t_com, gain, max_power, b_min
    )
    feasible = np.isfinite(b_min).all(axis=-1) & (
        b_min.sum(axis=-1) <= bandwidth_total * (1.0 + 1e-12)
    )
    b_min_safe = np.where(
        feasible[..., None], b_min, bandwidth_total / b_min.shape[-1]
    )

    q_at_total = q_function(
        np.full_like(b_min_safe, bandwidth_total),
        t_com, gain, update_size, noise_psd,
    )
    q_at_min = q_function(b_min_safe, t_com, gain, update_size, noise_psd)
    # multiplier bracket: all bands at the budget vs all bands at their floors
    lo = (-q_at_total).min(axis=-1)
    hi = (-q_at_min).max(axis=-1)
    hi = np.maximum(hi, lo)

    iterations = 0
    for iterations in range(1, outer_iters + 1):
        varpi = 0.5 * (lo + hi)
        b = _inner_roots(
            varpi, b_min_safe, bandwidth_total, t_com, gain,
            update_size, noise_psd, iters=inner_iters,
        )
        over = b.sum(axis=-1) > bandwidth_total
        lo = np.where(over, varpi, lo)
        hi = np.where(over, hi, varpi)

    varpi = 0.5 * (lo + hi)
    b = _inner_roots(
        varpi, b_min_safe, bandwidth_total, t_com, gain, update_size,
        noise_psd, iters=inner_iters,
    )
    power = power_from_bandwidth(b, t_com, gain, update_size, noise_psd)
    power = np.minimum(power, max_power)  # shave fp noise at the cap
    b = np.where(feasible[..., None], b, np.nan)
    power = np.where(feasible[..., None], power, np.nan)
    return b, power, varpi, feasible, iterations


def bandwidth_from_multiplier(varpi: float, sub: CommSubproblem) -> np.ndarray:
    """Per-device bandwidth at a given multiplier (clamped at each b_min)."""
    return _inner_roots(
        np.asarray(varpi, dtype=float),
        sub.b_min,
        sub.bandwidth_total,
        sub.t_com,
        sub.gain,
        sub.update_size,
        sub.noise_psd,
    )


def solve_p4(sub: CommSubproblem) -> CommSolution:
    """Optimal (bandwidth, power) per device under the shared budget."""
    required = float(np.sum(sub.b_min))
    if not np.all(np.isfinite(sub.b_min)) or required > sub.bandwidth_total * (
        1.0 + 1e-12
    ):
        raise InfeasibleBandwidth(
            required if np.all(np.isfinite(sub.b_min)) else math.inf,
            sub.bandwidth_total,
        )
    b, power, varpi, feasible, iterations = _solve_comm_arrays(
        sub.t_com,
        sub.gain,
        sub.max_power,
        sub.b_min,
        sub.bandwidth_total,
        sub.update_size,
        sub.noise_psd,
    )
    if not bool(feasible):
        raise InfeasibleBandwidth(required, sub.bandwidth_total)
    if abs(b.sum() - sub.bandwidth_total) > 1e-6 * sub.bandwidth_total:
        raise BisectionStalled(
            f"bandwidth residual {b.sum() - sub.bandwidth_total:.3g} Hz"
        )
    objective = float((power * sub.t_com).sum())
    return CommSolution(
        bandwidth=b,
        power=power,
        varpi=float(varpi),
        objective=objective,
        outer_iterations=iterations,
        at_min_bandwidth=b <= sub.b_min * (1.0 + 1e-9),
    )
