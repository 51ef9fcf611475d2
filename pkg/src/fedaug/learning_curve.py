"""Power-law learning curves and the global convergence model.

Local learning error follows ``alpha * D^(-beta) - gamma`` in the total
(local + synthesized) sample count D.  The global error after N rounds at
average local error ``d`` is ``exp(N * (d - 1) / zeta)``.  Both directions
(error from data, data from error) are provided, together with least-squares
fitting of the power-law triple from measured (amount, error) pairs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DegenerateFit,
    DivergentTraining,
    InsufficientData,
    InvalidCurveRange,
)

__all__ = [
    "CurveParams",
    "FitSample",
    "FitResult",
    "local_error",
    "required_mixed_size",
    "fit_power_law",
    "global_error",
    "error_budget",
    "rounds_to_error",
    "read_fit_samples",
]


@dataclass(frozen=True)
class CurveParams:
    """Fitted power-law triple plus global-convergence constants."""

    alpha: float
    beta: float
    gamma: float
    zeta: float = 100.0
    global_rounds: int = 200

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.gamma >= 0):
            raise InvalidCurveRange(
                f"need alpha > 0, beta > 0, gamma >= 0, got "
                f"({self.alpha}, {self.beta}, {self.gamma})"
            )
        if not self.zeta > 0:
            raise InvalidCurveRange(f"zeta must be positive, got {self.zeta}")
        if self.global_rounds < 1:
            raise InvalidCurveRange(
                f"global_rounds must be >= 1, got {self.global_rounds}"
            )

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "zeta": self.zeta,
            "global_rounds": self.global_rounds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CurveParams":
        return cls(
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            gamma=float(d["gamma"]),
            zeta=float(d["zeta"]),
            global_rounds=int(d["global_rounds"]),
        )


@dataclass(frozen=True)
class FitSample:
    """One measured (training amount, observed error) point."""

    data_amount: int
    observed_error: float

    def __post_init__(self):
        if self.data_amount < 1:
            raise InvalidCurveRange(
                f"data_amount must be >= 1, got {self.data_amount}"
            )
        if not (0.0 < self.observed_error < 1.0):
            raise InvalidCurveRange(
                f"observed_error must lie in (0, 1), got {self.observed_error}"
            )


@dataclass(frozen=True)
class FitResult:
    alpha: float
    beta: float
    gamma: float
    residual_norm: float

    def __iter__(self):
        return iter((self.alpha, self.beta, self.gamma))


def local_error(d_loc: float, d_gen: float, params: CurveParams) -> float:
    """Local learning error for a device training on d_loc + d_gen samples."""
    total = d_loc + d_gen
    if total < 1:
        raise InvalidCurveRange(f"total data amount must be >= 1, got {total}")
    err = params.alpha * total ** (-params.beta) - params.gamma
    if err <= 0:
        raise InvalidCurveRange(
            f"curve yields nonpositive error {err:.6g} at D={total:.6g}; "
            "parameters incompatible with this data scale"
        )
    return err


def required_mixed_size(target_error: float, params: CurveParams) -> float:
    """Total data amount whose local error equals target_error (inverse curve)."""
    lvl = params.gamma + target_error
    if lvl <= 0:
        raise InvalidCurveRange(
            f"target_error must exceed -gamma={-params.gamma:.6g}, "
            f"got {target_error:.6g}"
        )
    return (lvl / params.alpha) ** (-1.0 / params.beta)


def global_error(avg_local_error: float, params: CurveParams) -> float:
    """Global error after the configured number of rounds at a given avg local error."""
    if not (0.0 < avg_local_error <= 1.0):
        raise InvalidCurveRange(
            f"avg_local_error must lie in (0, 1], got {avg_local_error}"
        )
    return math.exp(params.global_rounds * (avg_local_error - 1.0) / params.zeta)


def error_budget(scenario_size: int, params: CurveParams, delta_max: float) -> float:
    """Required sum of per-device local errors to end at global error delta_max."""
    if not (0.0 < delta_max < 1.0):
        raise InvalidCurveRange(f"delta_max must lie in (0, 1), got {delta_max}")
    return scenario_size + (
        params.zeta * scenario_size / params.global_rounds
    ) * math.log(delta_max)


def rounds_to_error(
    target_delta: float, avg_local_error: float, params: CurveParams
) -> float:
    """Number of global rounds needed to reach target_delta."""
    if not (0.0 < target_delta <= 1.0):
        raise InvalidCurveRange(
            f"target_delta must lie in (0, 1], got {target_delta}"
        )
    if not avg_local_error > 0:
        raise InvalidCurveRange(
            f"avg_local_error must be positive, got {avg_local_error}"
        )
    if avg_local_error >= 1.0:
        raise DivergentTraining(
            f"avg_local_error={avg_local_error} >= 1: training never converges"
        )
    return params.zeta * math.log(1.0 / target_delta) / (1.0 - avg_local_error)


def _coerce_samples(samples: Iterable) -> tuple[np.ndarray, np.ndarray]:
    amounts, errs = [], []
    for s in samples:
        if isinstance(s, FitSample):
            amounts.append(s.data_amount)
            errs.append(s.observed_error)
        else:
            d, e = s
            amounts.append(d)
            errs.append(e)
    d = np.asarray(amounts, dtype=float)
    e = np.asarray(errs, dtype=float)
    if np.any(d < 1):
        raise InvalidCurveRange("data amounts must be >= 1")
    return d, e


# Multi-start grid over the decay exponent; the model is nonconvex in beta
# and restarting from a few scales is cheap at 3 parameters.
_BETA_STARTS = (0.1, 0.3, 0.5, 0.8)


def fit_power_law(samples: Sequence) -> FitResult:
    """Least-squares fit of (alpha, beta, gamma) to (amount, error) samples.

    Accepts FitSample instances or plain (data_amount, observed_error) pairs.
    """
    d, e = _coerce_samples(samples)
    if len(d) < 4 or len(np.unique(d)) < 3:
        raise InsufficientData(
            f"need >= 4 samples with >= 3 distinct data amounts, "
            f"got {len(d)} samples / {len(np.unique(d))} distinct"
        )
    if np.ptp(e) == 0.0:
        raise DegenerateFit("all observed errors equal; beta unidentifiable")

    def residual(theta):
        a, b, g = theta
        return a * d ** (-b) - g - e

    lo = np.array([1e-12, 1e-6, 0.0])
    hi = np.array([np.inf, 10.0, np.inf])
    best = None
    for beta0 in _BETA_STARTS:
        # Linear least squares for (alpha, gamma) at fixed beta seeds the start.
        x = d ** (-beta0)
        design = np.column_stack([x, -np.ones_like(x)])
        (a0, g0), *_ = np.linalg.lstsq(design, e, rcond=None)
        theta0 = np.clip([a0 if a0 > 0 else 1.0, beta0, max(g0, 0.0)], lo, hi)
        sol = least_squares(residual, theta0, bounds=(lo, hi), method="trf")
        if best is None or sol.cost < best.cost:
            best = sol
    a, b, g = best.x
    return FitResult(
        alpha=float(a),
        beta=float(b),
        gamma=float(g),
        residual_norm=float(np.linalg.norm(best.fun)),
    )


def read_fit_samples(path) -> list[tuple[float, float]]:
    """Read (data_amount, observed_error) pairs from a CSV with that header."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or (
            "data_amount" not in reader.fieldnames
            or "observed_error" not in reader.fieldnames
        ):
            raise InvalidCurveRange(
                "fit-sample CSV needs header data_amount,observed_error"
            )
        return [
            (float(row["data_amount"]), float(row["observed_error"]))
            for row in reader
        ]
