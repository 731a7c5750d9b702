"""Custom exceptions for gaplab."""

from typing import Optional, Sequence


class GapLabError(Exception):
    """Base exception for all gaplab errors."""
    pass


class DomainError(GapLabError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""
    def __init__(self, name: str, value: object, reason: str = "outside the valid domain"):
        self.name = name
        self.value = value
        self.reason = reason
        super().__init__(f"Invalid {name}={value!r}: {reason}")


class ConvergenceError(GapLabError):
    """Raised when an iterative routine exhausts its budget or cannot start."""
    def __init__(self, operation: str, message: str, best_estimate: Optional[float] = None):
        self.operation = operation
        self.best_estimate = best_estimate
        msg = f"{operation} did not converge: {message}"
        if best_estimate is not None:
            msg += f" (best estimate {best_estimate!r})"
        super().__init__(msg)


class BracketError(GapLabError, ValueError):
    """Raised when a root-finding bracket has no sign change."""
    def __init__(self, lo: float, hi: float, f_lo: float, f_hi: float):
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi
        super().__init__(
            f"No sign change on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}"
        )


class UnboundedBelowError(GapLabError):
    """Raised when a minimiser keeps running into an open boundary."""
    def __init__(self, last_window: tuple):
        self.last_window = last_window
        super().__init__(
            f"No interior minimum found; objective still decreasing toward the edge "
            f"of window {last_window!r}"
        )


class InstabilityError(GapLabError, ValueError):
    """Raised when an M/M/N evaluation is requested at or below the offered load."""
    def __init__(self, servers: float, offered_load: float):
        self.servers = servers
        self.offered_load = offered_load
        super().__init__(
            f"Unstable system: {servers!r} servers for offered load {offered_load!r} "
            f"(need servers > offered load)"
        )


class DegenerateObjectiveError(GapLabError):
    """Raised when an objective has no interior optimum by construction."""
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Degenerate objective: {reason}")


class WindowTooSmallError(GapLabError):
    """Raised when an exhaustive integer search finds its minimum on the window edge."""
    def __init__(self, window: tuple, edge: int):
        self.window = window
        self.edge = edge
        super().__init__(
            f"Minimum at window edge N={edge} of search window {window!r}; widen the window"
        )


class RegimeError(GapLabError, ValueError):
    """Raised when a formula is used outside the load regime it is valid in."""
    def __init__(self, x: float, mu: float, regime: str = "overloaded (0 < x*mu < 1)"):
        self.x = x
        self.mu = mu
        self.regime = regime
        super().__init__(f"x={x!r} with mu={mu!r} is outside the {regime} regime")


class OptimizationError(GapLabError):
    """Raised when a prescription cannot be selected."""
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Prescription selection failed: {reason}")


class ConditionViolationError(GapLabError):
    """Raised when a numerical probe finds evidence against one of conditions 1-6."""
    def __init__(self, condition: int, evidence: str):
        self.condition = condition
        self.evidence = evidence
        super().__init__(f"Condition {condition} violated: {evidence}")


class InsufficientDataError(GapLabError):
    """Raised when a rate fit has fewer than three usable points."""
    def __init__(self, usable: int, excluded: int = 0):
        self.usable = usable
        self.excluded = excluded
        msg = f"Rate fit needs at least 3 positive finite values, got {usable}"
        if excluded:
            msg += f" ({excluded} excluded)"
        super().__init__(msg)


class UnknownModelError(GapLabError, KeyError):
    """Raised when a model tag is not found in the registry."""
    def __init__(self, model: str, available: Optional[Sequence[str]] = None):
        self.model = model
        self.available = list(available or [])
        msg = f"Model '{model}' not found in registry"
        if self.available:
            msg += f". Available models: {', '.join(self.available)}"
        super().__init__(msg)

    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return self.args[0]


class ConfigError(GapLabError, ValueError):
    """Raised when an experiment configuration is invalid."""
    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"Invalid configuration for '{key}': {reason}")
