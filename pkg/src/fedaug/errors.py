"""Exception hierarchy shared by all planner modules."""


class PlannerError(Exception):
    """Base class for all errors raised by fedaug."""


class ConfigError(PlannerError):
    """A configuration field is missing, unknown, or out of range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


# --- learning-curve model ---

class InvalidCurveRange(PlannerError):
    """Curve parameters incompatible with the requested data/error range."""


class InsufficientData(PlannerError):
    """Too few fit samples (need >= 4 samples with >= 3 distinct amounts)."""


class DegenerateFit(PlannerError):
    """All observed errors equal; decay exponent is unidentifiable."""


class DivergentTraining(PlannerError):
    """Average local error >= 1; the convergence model does not converge."""


# --- system model ---

class FrequencyExceeded(PlannerError):
    """Requested CPU frequency above the device maximum."""


class InvalidFrequency(PlannerError):
    """CPU frequency must be strictly positive."""


class UnreachableServer(PlannerError):
    """Uplink rate is zero; the update can never be delivered."""


# --- solvers ---

class InfeasibleBudget(PlannerError):
    """Error-budget equality cannot be met within the per-device bounds."""

    def __init__(self, budget, lower, upper):
        self.budget = budget
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"error budget {budget:.6g} outside feasible range "
            f"[{lower:.6g}, {upper:.6g}]"
        )


class InfeasibleBandwidth(PlannerError):
    """Sum of minimum bandwidths exceeds the total bandwidth."""

    def __init__(self, required, available):
        self.required = required
        self.available = available
        super().__init__(
            f"minimum bandwidths need {required:.6g} Hz, "
            f"only {available:.6g} Hz available "
            f"(shortfall {required - available:.6g} Hz)"
        )


class BisectionStalled(PlannerError):
    """Bisection failed to converge within the iteration cap."""


class DeviceInfeasible(PlannerError):
    """A device cannot finish even minimal work within the round deadline."""


class NoFeasibleRegion(PlannerError):
    """The cross-entropy search found no feasible sample."""


class PolicyInfeasible(PlannerError):
    """The scenario is infeasible under the requested baseline policy."""


# --- augmentation / harness ---

class InvalidAllocation(PlannerError):
    """Allocation vector violates its invariants (e.g. negative counts)."""


class DegenerateGradient(PlannerError):
    """A gradient layer has zero norm; cosine similarity is undefined."""
