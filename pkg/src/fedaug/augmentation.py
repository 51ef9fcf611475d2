"""Category-wise split of a device's synthesized-data budget.

The budget is spread over categories by entropy maximization, which reduces
to water-filling: raise the lowest category counts to a common level until
the budget is spent.  The continuous solution is then rounded to integers by
the largest-remainder rule (ties broken by lowest category index).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidAllocation

__all__ = [
    "CategoryAllocation",
    "data_entropy",
    "optimal_augmentation",
    "integerize",
    "solve_p8",
    "write_augmentation_csv",
]


@dataclass(frozen=True)
class CategoryAllocation:
    local_counts: tuple
    gen_counts: tuple
    budget: int
    water_level: float

    def entropy_bits(self) -> float:
        return data_entropy(self.local_counts, self.gen_counts)


def data_entropy(local_counts, gen_counts) -> float:
    """Shannon entropy (bits) of the mixed per-category distribution.

    Zero-count categories contribute 0 by the usual limit convention.
    """
    totals = np.asarray(local_counts, dtype=float) + np.asarray(
        gen_counts, dtype=float
    )
    mass = totals.sum()
    if mass < 1:
        raise InvalidAllocation(f"total count must be >= 1, got {mass}")
    if np.any(totals < 0):
        raise InvalidAllocation("negative category count")
    p = totals / mass
    nz = p > 0
    return float(-(p[nz] * np.log2(p[nz])).sum())


def optimal_augmentation(local_counts, budget: float):
    """Continuous entropy-maximizing split of `budget` over categories.

    Returns (gen_counts, water_level): gen_c = max(level - local_c, 0) with
    the level chosen so the generated amounts sum to the budget exactly.
    """
    d = np.asarray(local_counts, dtype=float)
    if np.any(d < 0):
        raise InvalidAllocation("negative local count")
    if budget < 0:
        raise InvalidAllocation(f"budget must be >= 0, got {budget}")
    if budget == 0:
        return np.zeros_like(d), (float(d.min()) if d.size else 0.0)

    # Sum of clamped fills is piecewise linear and nondecreasing in the
    # level, so the exact level falls out of one sort pass.
    order = np.sort(d)
    prefix = np.concatenate([[0.0], np.cumsum(order)])
    level = None
    for k in range(1, len(order) + 1):
        # fill when the level sits at order[k-1] < level <= next knot
        upper = order[k] if k < len(order) else np.inf
        need_at_upper = k * upper - prefix[k]
        if need_at_upper >= budget:
            level = (budget + prefix[k]) / k
            break
    gen = np.maximum(level - d, 0.0)
    return gen, float(level)


def integerize(gen_counts, budget: int) -> np.ndarray:
    """Round a continuous split to integers summing exactly to the budget.

    Largest-remainder rule; remainder ties go to the lowest category index.
    """
    g = np.asarray(gen_counts, dtype=float)
    if np.any(g < -1e-9):
        raise InvalidAllocation("negative generated amount")
    g = np.maximum(g, 0.0)
    if abs(g.sum() - budget) > 1e-6 * max(1.0, budget):
        raise InvalidAllocation(
            f"continuous amounts sum to {g.sum():.9g}, expected {budget}"
        )
    floors = np.floor(g).astype(int)
    deficit = int(round(budget - floors.sum()))
    if deficit > 0:
        remainders = g - floors
        # stable sort on -remainder keeps lowest index first among ties
        take = np.argsort(-remainders, kind="stable")[:deficit]
        floors[take] += 1
    return floors


def solve_p8(local_counts, budget: int) -> CategoryAllocation:
    """Integer entropy-maximizing augmentation for one device."""
    budget = int(budget)
    cont, level = optimal_augmentation(local_counts, budget)
    gen = integerize(cont, budget)
    return CategoryAllocation(
        local_counts=tuple(int(c) for c in local_counts),
        gen_counts=tuple(int(c) for c in gen),
        budget=budget,
        water_level=level,
    )


def write_augmentation_csv(path, allocations):
    """Emit per-device augmentation tables; allocations is {device_id: CategoryAllocation}."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["device_id", "category", "d_loc", "d_gen"])
        for device_id, alloc in allocations.items():
            for c, (loc, gen) in enumerate(
                zip(alloc.local_counts, alloc.gen_counts)
            ):
                writer.writerow([device_id, c, loc, gen])
