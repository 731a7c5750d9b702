"""Special functions, semi-infinite quadrature, root finding and scalar minimisation.

Everything here is a pure function of its arguments. The normal family is built
on the scaled complementary error function so that Mills ratios and hazard rates
stay accurate where both Phi and phi underflow.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple, Union

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    OptimizationError,
    UnboundedBelowError,
)

logger = logging.getLogger(__name__)

RealFunction = Callable[[float], float]

SQRT_2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
SQRT_HALF_PI = math.sqrt(0.5 * math.pi)

# Quadrature drops the integrand where it is below exp(-45) of its peak
LOG_TRUNCATION = 45.0
SCAN_POINTS = 512
CLUSTER_TOLERANCE = 1e-6
_WINDOW_LIMIT = 1e150
_QUAD_MIN_EPSREL = 1.2e-14


@dataclass(frozen=True)
class Tolerance:
    """Accuracy targets shared by the iterative routines.

    Attributes:
        relative: Relative accuracy (dimensionless), > 0.
        absolute: Absolute accuracy (dimensionless), >= 0.
        max_iterations: Iteration budget, >= 1.
    """
    relative: float = 1e-10
    absolute: float = 1e-12
    max_iterations: int = 200

    def __post_init__(self):
        if not self.relative > 0:
            raise DomainError("relative", self.relative, "must be > 0")
        if not self.absolute >= 0:
            raise DomainError("absolute", self.absolute, "must be >= 0")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise DomainError("max_iterations", self.max_iterations, "must be a positive integer")


DEFAULT_TOLERANCE = Tolerance()


@dataclass(frozen=True)
class Bracket:
    """A finite interval [lo, hi] with lo < hi."""
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError("bracket", (self.lo, self.hi), "endpoints must be finite")
        if not self.lo < self.hi:
            raise DomainError("bracket", (self.lo, self.hi), "need lo < hi")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Domain:
    """An interval of the real line whose ends may be infinite or open."""
    lo: float = -math.inf
    hi: float = math.inf
    closed_lo: bool = True
    closed_hi: bool = True

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or not self.lo < self.hi:
            raise DomainError("domain", (self.lo, self.hi), "need lo < hi")

    @classmethod
    def from_bracket(cls, bracket: Bracket) -> "Domain":
        return cls(bracket.lo, bracket.hi, True, True)

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def inner_lo(self) -> float:
        """Smallest point at which the objective may be evaluated."""
        if math.isfinite(self.lo) and not self.closed_lo:
            return self.lo + 1e-9 * (1.0 + abs(self.lo))
        return self.lo

    @property
    def inner_hi(self) -> float:
        """Largest point at which the objective may be evaluated."""
        if math.isfinite(self.hi) and not self.closed_hi:
            return self.hi - 1e-9 * (1.0 + abs(self.hi))
        return self.hi

    def contains(self, x: float) -> bool:
        above = x >= self.lo if self.closed_lo else x > self.lo
        below = x <= self.hi if self.closed_hi else x < self.hi
        return bool(above and below)


def _require_finite(x: float, name: str = "x") -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(name, x, "must be finite")
    return x


def _as_domain(domain: Union[Bracket, Domain]) -> Domain:
    if isinstance(domain, Domain):
        return domain
    if isinstance(domain, Bracket):
        return Domain.from_bracket(domain)
    raise DomainError("domain", domain, "expected a Bracket or Domain")


# --- normal family ---------------------------------------------------------

def normal_pdf_cdf(x: float) -> Tuple[float, float]:
    """Standard normal density and distribution function.

    Args:
        x: Finite evaluation point.

    Returns:
        Tuple ``(phi(x), Phi(x))``.

    Raises:
        DomainError: If x is not finite.
    """
    x = _require_finite(x)
    gauss = math.exp(-0.5 * x * x)
    pdf = gauss / SQRT_2PI
    tail = 0.5 * float(special.erfcx(abs(x) / SQRT_2)) * gauss
    cdf = tail if x < 0 else 1.0 - tail
    return pdf, cdf


def mills_ratio(x: float) -> float:
    """Phi(x) / phi(x), computed without forming a ratio of underflowed terms."""
    x = _require_finite(x)
    return SQRT_HALF_PI * float(special.erfcx(-x / SQRT_2))


def hazard(x: float) -> float:
    """Normal hazard rate phi(x) / Phi(-x); always exceeds max(0, x)."""
    x = _require_finite(x)
    return 1.0 / (SQRT_HALF_PI * float(special.erfcx(x / SQRT_2)))


# --- quadrature --------------------------------------------------------------

def log_integrate_semiinfinite(
    log_integrand: RealFunction, tol: Tolerance = DEFAULT_TOLERANCE
) -> float:
    """Logarithm of the integral of exp(log_integrand(t)) over (0, inf).

    The peak of the log-integrand is located on a log-t grid and refined, the
    integrand is scaled by its peak value, truncated where it falls LOG_TRUNCATION
    below the peak, and each side of the peak is integrated adaptively.

    Raises:
        ConvergenceError: If no finite peak exists or the quadrature budget runs out.
    """
    def logf(t: float) -> float:
        value = float(log_integrand(t))
        if math.isnan(value):
            raise ConvergenceError("integrate_semiinfinite", f"log-integrand is NaN at t={t!r}")
        return value

    u_grid = np.arange(-40.0, 40.5, 0.5)
    values = np.array([logf(math.exp(u)) for u in u_grid])
    k = int(np.argmax(values))
    if not math.isfinite(values[k]):
        raise ConvergenceError("integrate_semiinfinite", "no finite peak of the log-integrand")
    if k == len(u_grid) - 1:
        raise ConvergenceError("integrate_semiinfinite", "log-integrand still increasing at t = e^40")

    if k == 0:
        t_peak = 0.0
        log_peak = float(values[0])
    else:
        res = optimize.minimize_scalar(
            lambda u: -logf(math.exp(u)),
            bounds=(u_grid[k - 1], u_grid[k + 1]),
            method="bounded",
            options={"xatol": 1e-10, "maxiter": tol.max_iterations},
        )
        if -res.fun >= values[k]:
            t_peak, log_peak = math.exp(float(res.x)), float(-res.fun)
        else:
            t_peak, log_peak = math.exp(float(u_grid[k])), float(values[k])

    threshold = log_peak - LOG_TRUNCATION

    def excess(t: float) -> float:
        return max(logf(t) - threshold, -1e300)

    t_prev = t_peak if t_peak > 0 else math.exp(float(u_grid[0]))
    t_right = None
    for _ in range(tol.max_iterations):
        t = t_prev * math.e
        if excess(t) <= 0:
            t_right = optimize.brentq(excess, t_prev, t) if excess(t_prev) > 0 else t
            break
        t_prev = t
    if t_right is None:
        raise ConvergenceError("integrate_semiinfinite", "integrand does not decay on the right", t_prev)

    t_left = 0.0
    if t_peak > 0:
        t_prev = t_peak
        for _ in range(tol.max_iterations):
            t = t_prev / math.e
            if t < 1e-300:
                break
            if excess(t) <= 0:
                t_left = optimize.brentq(excess, t, t_prev)
                break
            t_prev = t

    def scaled(t: float) -> float:
        return math.exp(logf(t) - log_peak)

    pieces = [(t_left, t_peak)] if t_peak > t_left else []
    pieces.append((t_peak, t_right))
    total = 0.0
    for a, b in pieces:
        out = integrate.quad(
            scaled, a, b,
            epsabs=0.0,
            epsrel=max(tol.relative, _QUAD_MIN_EPSREL),
            limit=max(50, tol.max_iterations),
            full_output=1,
        )
        value, abserr = out[0], out[1]
        if len(out) > 3 and abserr > tol.relative * abs(value):
            raise ConvergenceError(
                "integrate_semiinfinite", str(out[3]).strip().splitlines()[0],
                best_estimate=math.exp(log_peak) * (total + value),
            )
        total += value
    if not total > 0:
        raise ConvergenceError("integrate_semiinfinite", "integral is not positive")
    return log_peak + math.log(total)


def integrate_semiinfinite(log_integrand: RealFunction, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Integral of exp(log_integrand(t)) over (0, inf), evaluated in peak-relative scale.

    Example:
        ``integrate_semiinfinite(lambda t: math.log(t) - t)`` is Gamma(2) = 1.
    """
    return math.exp(log_integrate_semiinfinite(log_integrand, tol))


# --- roots -----------------------------------------------------------------

def find_root(f: RealFunction, bracket: Bracket, tol: Tolerance = DEFAULT_TOLERANCE) -> float:
    """Root of a continuous function on a sign-changing bracket (Brent's method).

    Raises:
        BracketError: If f(lo) and f(hi) have the same sign.
        ConvergenceError: If the iteration budget is exhausted.
    """
    f_lo, f_hi = float(f(bracket.lo)), float(f(bracket.hi))
    if f_lo == 0.0:
        return bracket.lo
    if f_hi == 0.0:
        return bracket.hi
    if not (np.sign(f_lo) * np.sign(f_hi) < 0):
        raise BracketError(bracket.lo, bracket.hi, f_lo, f_hi)
    root, info = optimize.brentq(
        f, bracket.lo, bracket.hi,
        xtol=tol.relative,
        rtol=max(tol.relative, 4 * np.finfo(float).eps),
        maxiter=tol.max_iterations,
        full_output=True,
        disp=False,
    )
    if not info.converged:
        raise ConvergenceError("find_root", info.flag, best_estimate=float(root))
    return float(root)


# --- minimisation ----------------------------------------------------------

def _guarded(f: RealFunction) -> RealFunction:
    def g(x: float) -> float:
        value = float(f(x))
        return math.inf if math.isnan(value) else value
    return g


def _scan_grid(lo: float, hi: float, points: int = SCAN_POINTS) -> np.ndarray:
    """Uniform grid plus geometric clusters toward both ends."""
    width = hi - lo
    quarter = points // 4
    offsets = np.geomspace(1e-6, 0.5, quarter)
    grid = np.concatenate([
        np.linspace(lo, hi, points - 2 * quarter),
        lo + width * offsets,
        hi - width * offsets,
    ])
    return np.unique(grid)


def _refine(
    g: RealFunction, grid: np.ndarray, values: np.ndarray, i: int, tol: Tolerance
) -> Tuple[float, float]:
    """Bounded Brent/golden refinement between the neighbours of grid[i]."""
    x0, f0 = float(grid[i]), float(values[i])
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    if not b > a or not math.isfinite(f0):
        return x0, f0
    # local coordinates keep Brent's relative stopping rule from dominating at large x
    res = optimize.minimize_scalar(
        lambda s: g(x0 + s),
        bounds=(a - x0, b - x0),
        method="bounded",
        options={"xatol": tol.relative * (1.0 + abs(x0)), "maxiter": tol.max_iterations},
    )
    if float(res.fun) < f0:
        return x0 + float(res.x), float(res.fun)
    return x0, f0


def _initial_window(domain: Domain, scale: float) -> Tuple[float, float]:
    lo, hi = domain.inner_lo, domain.inner_hi
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi
    if math.isfinite(lo):
        return lo, lo + scale
    if math.isfinite(hi):
        return hi - scale, hi
    return -scale, scale


def minimize_scalar(
    f: RealFunction,
    domain: Union[Bracket, Domain],
    tol: Tolerance = DEFAULT_TOLERANCE,
    *,
    scale: float = 1.0,
) -> Tuple[float, float]:
    """Global scan followed by local refinement of a scalar function.

    A SCAN_POINTS hybrid grid covers the current window; while the grid minimum
    sits on a window edge that is not an edge of the domain, the window is
    tripled toward that side. The best grid point is then refined.

    Args:
        f: Objective. NaN values count as +inf.
        domain: A Bracket or a (half-)infinite Domain.
        tol: Accuracy and iteration budget.
        scale: Width of the first window on unbounded sides.

    Returns:
        ``(x_min, f_min)``.

    Raises:
        UnboundedBelowError: If no interior bracket is found.
    """
    dom = _as_domain(domain)
    g = _guarded(f)
    lo, hi = _initial_window(dom, scale)
    for _ in range(tol.max_iterations):
        grid = _scan_grid(lo, hi)
        values = np.array([g(x) for x in grid])
        i = int(np.argmin(values))
        if values[i] == -math.inf:
            raise UnboundedBelowError((lo, hi))
        at_lo = i == 0 and lo > dom.inner_lo
        at_hi = i == len(grid) - 1 and hi < dom.inner_hi
        if not math.isfinite(values[i]):
            at_lo, at_hi = lo > dom.inner_lo, hi < dom.inner_hi
            if not (at_lo or at_hi):
                raise OptimizationError("objective is not finite anywhere on the domain")
        if not (at_lo or at_hi):
            break
        width = hi - lo
        if at_lo:
            lo = max(dom.inner_lo, lo - 2.0 * width)
        if at_hi:
            hi = min(dom.inner_hi, hi + 2.0 * width)
        if max(abs(lo), abs(hi)) > _WINDOW_LIMIT:
            raise UnboundedBelowError((lo, hi))
        logger.debug("minimize_scalar: expanding window to [%r, %r]", lo, hi)
    else:
        raise UnboundedBelowError((lo, hi))

    if i == 0 and not dom.closed_lo:
        raise UnboundedBelowError((lo, hi))
    if i == len(grid) - 1 and not dom.closed_hi:
        raise UnboundedBelowError((lo, hi))
    return _refine(g, grid, values, i, tol)


def argmin_set(
    f: RealFunction, domain: Union[Bracket, Domain], tol: Tolerance = DEFAULT_TOLERANCE
) -> List[float]:
    """Representatives of every region where f is within tolerance of its minimum.

    Every local minimum of the scan grid is refined; refined points with
    ``f <= f_min + tol.absolute * (1 + |f_min|)`` are kept, and neighbours that are
    closer than CLUSTER_TOLERANCE or joined by a run of grid points inside the
    band collapse to their best member.

    Returns:
        Sorted, non-empty list of minimisers.

    Raises:
        DomainError: If the domain is not a bounded interval.
        OptimizationError: If f is not finite anywhere on the domain.
    """
    dom = _as_domain(domain)
    if not dom.is_bounded:
        raise DomainError("domain", (dom.lo, dom.hi), "argmin_set needs a bounded domain")
    g = _guarded(f)
    grid = _scan_grid(dom.inner_lo, dom.inner_hi)
    values = np.array([g(x) for x in grid])
    finite = np.isfinite(values)
    if not finite.any():
        raise OptimizationError("objective is not finite anywhere on the domain")

    left = np.concatenate([[np.inf], values[:-1]])
    right = np.concatenate([values[1:], [np.inf]])
    local = np.flatnonzero((values <= left) & (values <= right) & finite)
    candidates = sorted(_refine(g, grid, values, int(i), tol) for i in local)
    f_min = min(fx for _, fx in candidates)
    band = f_min + tol.absolute * (1.0 + abs(f_min))
    kept = [(x, fx) for x, fx in candidates if fx <= band]

    regions: List[Tuple[float, float]] = [kept[0]]
    for x, fx in kept[1:]:
        prev_x, prev_f = regions[-1]
        between = values[(grid > prev_x) & (grid < x)]
        joined = (
            x - prev_x <= CLUSTER_TOLERANCE * (1.0 + abs(x))
            or between.size == 0
            or bool(np.all(between <= band))
        )
        if joined:
            if fx < prev_f:
                regions[-1] = (x, fx)
        else:
            regions.append((x, fx))
    return [x for x, _ in regions]
