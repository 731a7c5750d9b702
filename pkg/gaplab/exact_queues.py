"""Exact steady-state evaluators for M/M/N and M/M/N+M queues.

M/M/N is evaluated for real-valued staffing through the integral extension of
the Erlang-C formula; M/M/N+M (Erlang-A) only for integer staffing, through its
birth-death chain.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (
    ConditionViolationError,
    DegenerateObjectiveError,
    DomainError,
    InstabilityError,
    WindowTooSmallError,
)
from .numerics import Domain, Tolerance, log_integrate_semiinfinite, minimize_scalar

logger = logging.getLogger(__name__)

# The Erlang-C integral feeds residuals of order n^(-1/2) against E[Q] of order n^(1/2)
ERLANG_C_TOLERANCE = Tolerance(relative=1e-11)
TRUNCATION_RATIO = 1e-16
MAX_WINDOW_DOUBLINGS = 4


@dataclass(frozen=True)
class QueueParams:
    """One system of the sequence.

    Attributes:
        n: Arrival rate (customers per unit time), > 0.
        mu: Service rate (1 / mean service time), > 0.
        gamma: Abandonment rate for exponential patience (1 / mean patience), or None.
    """
    n: float
    mu: float
    gamma: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.n) and self.n > 0):
            raise DomainError("n", self.n, "arrival rate must be finite and > 0")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise DomainError("mu", self.mu, "service rate must be finite and > 0")
        if self.gamma is not None and not (math.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError("gamma", self.gamma, "abandonment rate must be finite and > 0")

    @property
    def offered_load(self) -> float:
        """R = n / mu."""
        return self.n / self.mu


@dataclass(frozen=True)
class CostParams:
    """Linear waiting cost h per customer and capacity cost c per server, per unit time."""
    h: float
    c: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h >= 0):
            raise DomainError("h", self.h, "waiting cost must be finite and >= 0")
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError("c", self.c, "capacity cost must be finite and > 0")


@dataclass(frozen=True)
class ExactOptimum:
    """Optimal staffing and the optimal cost per unit time."""
    staffing: Union[float, int]
    cost: float
    integer: bool = False


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    """Truncated stationary law of the number in system.

    Attributes:
        servers: Staffing level N.
        probabilities: p_0, p_1, ... up to the truncation point; sums to 1.
        capped: True when the hard state cap was hit before the tail became negligible.
    """
    servers: int
    probabilities: np.ndarray
    capped: bool = False

    def expected_queue(self) -> float:
        states = np.arange(self.probabilities.size)
        return float(np.sum(np.maximum(states - self.servers, 0) * self.probabilities))


def _require_servers(N, minimum: int = 1) -> int:
    if isinstance(N, float) and N.is_integer():
        N = int(N)
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < minimum:
        raise DomainError("N", N, f"staffing must be an integer >= {minimum}")
    return int(N)


def _require_gamma(params: QueueParams) -> float:
    if params.gamma is None:
        raise DomainError("gamma", None, "the abandonment model needs gamma")
    return params.gamma


# --- Erlang-C --------------------------------------------------------------

def _inverse_erlang_b(N: int, R: float) -> float:
    """1 / B(N, R) by the recursion 1/B(k) = 1 + (k/R) / B(k-1)."""
    inv_b = 1.0
    for k in range(1, N + 1):
        inv_b = 1.0 + inv_b * k / R
    return inv_b


def _erlang_c_from_b(N: float, R: float, b: float) -> float:
    return N * b / (N - R * (1.0 - b))


def erlang_c_integer(N: int, R: float) -> float:
    """Erlang-C delay probability for N servers and offered load R.

    Raises:
        InstabilityError: If N <= R.
    """
    N = _require_servers(N)
    if not (math.isfinite(R) and R > 0):
        raise DomainError("R", R, "offered load must be finite and > 0")
    if N <= R:
        raise InstabilityError(N, R)
    return _erlang_c_from_b(N, R, 1.0 / _inverse_erlang_b(N, R))


def erlang_c_real(x: float, R: float, tol: Tolerance = ERLANG_C_TOLERANCE) -> float:
    """Erlang-C extended to real staffing x.

    C(x, R) = [R * integral_0^inf t exp(-R t) (1 + t)^(x - 1) dt]^(-1), agreeing with
    erlang_c_integer on the integers.

    Raises:
        InstabilityError: If x <= R.
        ConvergenceError: If the quadrature fails.
    """
    if not (math.isfinite(R) and R > 0):
        raise DomainError("R", R, "offered load must be finite and > 0")
    if not math.isfinite(x) or x <= R:
        raise InstabilityError(x, R)

    def log_integrand(t: float) -> float:
        return math.log(t) - R * t + (x - 1.0) * math.log1p(t)

    return math.exp(-math.log(R) - log_integrate_semiinfinite(log_integrand, tol))


def mmn_expected_queue(params: QueueParams, x: float) -> float:
    """E[Q_n(x)] = n C(x, n/mu) / (x mu - n) for real staffing x."""
    if not math.isfinite(x) or x * params.mu <= params.n:
        raise InstabilityError(x, params.offered_load)
    delay = erlang_c_real(x, params.offered_load)
    return params.n * delay / (x * params.mu - params.n)


def mmn_cost(params: QueueParams, cost: CostParams, x: float) -> float:
    """Pi_n(x) = h E[Q_n(x)] + c x."""
    return cost.h * mmn_expected_queue(params, x) + cost.c * x


def mmn_optimal(params: QueueParams, cost: CostParams) -> ExactOptimum:
    """Minimise Pi_n over real staffing in (n/mu, inf).

    Raises:
        DegenerateObjectiveError: If h = 0, where the infimum sits on the boundary.
    """
    if cost.h == 0:
        raise DegenerateObjectiveError("h = 0 makes Pi_n = c x, minimised at the stability boundary")
    R = params.offered_load
    offset = max(1e-6, 1e-3 * math.sqrt(R))
    x, value = minimize_scalar(
        lambda s: mmn_cost(params, cost, s),
        Domain(lo=R + offset, hi=math.inf),
        scale=max(1.0, 2.0 * math.sqrt(R)),
    )
    return ExactOptimum(staffing=x, cost=value)


def mmn_min_servers_wait_prob(params: QueueParams, alpha: float) -> int:
    """Smallest integer N > n/mu whose Erlang-C delay probability is at most alpha."""
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha", alpha, "must lie in (0, 1)")
    R = params.offered_load
    inv_b = 1.0
    k = 0
    # one pass of the Erlang-B recursion; C(k, R) decreases in k beyond R
    while True:
        k += 1
        inv_b = 1.0 + inv_b * k / R
        if k > R and _erlang_c_from_b(k, R, 1.0 / inv_b) <= alpha:
            return k


# --- Erlang-A --------------------------------------------------------------

def _state_bound(params: QueueParams, N: int) -> int:
    """Number of states covering the stationary mass to far beyond 40 standard deviations."""
    gamma = params.gamma
    excess = max(params.n - N * params.mu, 0.0) / gamma
    center = N + excess if excess > 0 else params.offered_load
    spread = math.sqrt(params.n / min(params.mu, gamma)) + 1.0
    return max(N + 1, int(center + 40.0 * spread + 50))


def _birth_death(params: QueueParams, N: int, length: int):
    states = np.arange(1, length + 1, dtype=float)
    death = np.minimum(states, N) * params.mu + np.maximum(states - N, 0.0) * params.gamma
    log_terms = np.concatenate([[0.0], np.cumsum(math.log(params.n) - np.log(death))])
    terms = np.exp(log_terms - log_terms.max())
    running = np.cumsum(terms)
    mode = int(np.argmax(terms))
    negligible = np.flatnonzero(terms[mode:] < TRUNCATION_RATIO * running[mode:])
    if negligible.size == 0:
        return terms / running[-1], False
    cut = mode + int(negligible[0]) + 1
    terms = terms[:cut]
    return terms / terms.sum(), True


def erlang_a_distribution(params: QueueParams, N: int) -> StationaryDistribution:
    """Stationary distribution of the M/M/N+M birth-death chain.

    Birth rate n, death rate min(j, N) mu + max(j - N, 0) gamma. The chain is
    truncated once a term past the mode falls below TRUNCATION_RATIO of the
    running sum, with a hard cap of N + 200 sqrt(n/mu) + 10^4 states.
    """
    _require_gamma(params)
    N = _require_servers(N)
    hard_cap = int(N + 200.0 * math.sqrt(params.offered_load) + 10_000)
    length = min(_state_bound(params, N), hard_cap)
    probabilities, complete = _birth_death(params, N, length)
    if not complete and length < hard_cap:
        probabilities, complete = _birth_death(params, N, hard_cap)
    if not complete:
        logger.warning(
            "Erlang-A chain for n=%r, N=%r truncated at the %d-state cap", params.n, N, hard_cap
        )
    return StationaryDistribution(servers=N, probabilities=probabilities, capped=not complete)


def erlang_a_expected_queue(params: QueueParams, N: int) -> float:
    """E[Q] = sum over j > N of (j - N) p_j."""
    return erlang_a_distribution(params, N).expected_queue()


def _erlang_a_cost(params: QueueParams, cost: CostParams, N: int) -> float:
    if N == 0:
        # nobody is served: the queue is an infinite-server system with rate gamma
        return cost.h * params.n / params.gamma
    return cost.h * erlang_a_expected_queue(params, N) + cost.c * N


def _diffusion_center(params: QueueParams, cost: CostParams) -> int:
    # imported here: expansions and prescription are built on this module
    from .expansions import erlang_a_diffusion_expansion
    from .prescription import select_prescription

    spec = erlang_a_diffusion_expansion(params.mu, params.gamma, cost)
    try:
        x_star = select_prescription(spec).x_star
    except ConditionViolationError:
        return 0
    return max(0, int(round(spec.g_of_n(params.n, x_star))))


def erlang_a_optimal_integer(
    params: QueueParams,
    cost: CostParams,
    search_window: Optional[int] = None,
    center: Optional[int] = None,
) -> ExactOptimum:
    """Exhaustive minimisation of h E[Q] + c N over an integer window.

    The window is [max(0, center - w), center + w], centred on the diffusion
    prescription unless ``center`` is given; w defaults to max(10, ceil(5 sqrt(n/mu))).

    Raises:
        WindowTooSmallError: If the minimum sits on a window edge other than N = 0.
    """
    _require_gamma(params)
    if cost.h == 0:
        return ExactOptimum(staffing=0, cost=0.0, integer=True)
    if search_window is None:
        search_window = max(10, math.ceil(5.0 * math.sqrt(params.offered_load)))
    if int(search_window) != search_window or search_window < 1:
        raise DomainError("search_window", search_window, "must be an integer >= 1")
    if center is None:
        center = _diffusion_center(params, cost)
    lo = max(0, int(center) - int(search_window))
    hi = int(center) + int(search_window)

    best_n, best_cost = lo, math.inf
    for N in range(lo, hi + 1):
        value = _erlang_a_cost(params, cost, N)
        if value < best_cost:
            best_n, best_cost = N, value
    if best_n == hi or (best_n == lo and lo > 0):
        raise WindowTooSmallError((lo, hi), best_n)
    return ExactOptimum(staffing=best_n, cost=best_cost, integer=True)


# --- exact models for the experiment drivers -------------------------------

class MMNModel:
    """Exact M/M/N cost as a function of the arrival scale n and real staffing."""

    integer_only = False

    def __init__(self, mu: float, cost: CostParams):
        self.mu = mu
        self.cost_params = cost

    def params(self, n: float) -> QueueParams:
        return QueueParams(n=n, mu=self.mu)

    def expected_queue(self, n: float, staffing: float) -> float:
        return mmn_expected_queue(self.params(n), staffing)

    def cost(self, n: float, staffing: float) -> float:
        return mmn_cost(self.params(n), self.cost_params, staffing)

    def optimal(self, n: float, center: Optional[float] = None) -> ExactOptimum:
        return mmn_optimal(self.params(n), self.cost_params)


class ErlangAModel:
    """Exact M/M/N+M cost for integer staffing; widens its search window on demand."""

    integer_only = True

    def __init__(self, mu: float, gamma: float, cost: CostParams, window: Optional[int] = None):
        self.mu = mu
        self.gamma = gamma
        self.cost_params = cost
        self.window = window

    def params(self, n: float) -> QueueParams:
        return QueueParams(n=n, mu=self.mu, gamma=self.gamma)

    def expected_queue(self, n: float, staffing: float) -> float:
        N = _require_servers(staffing, minimum=0)
        if N == 0:
            return n / self.gamma
        return erlang_a_expected_queue(self.params(n), N)

    def cost(self, n: float, staffing: float) -> float:
        N = _require_servers(staffing, minimum=0)
        return _erlang_a_cost(self.params(n), self.cost_params, N)

    def optimal(self, n: float, center: Optional[int] = None) -> ExactOptimum:
        params = self.params(n)
        window = self.window
        if window is None:
            window = max(10, math.ceil(5.0 * math.sqrt(params.offered_load)))
        for _ in range(MAX_WINDOW_DOUBLINGS):
            try:
                return erlang_a_optimal_integer(params, self.cost_params, window, center)
            except WindowTooSmallError as e:
                logger.info("n=%r: %s; doubling the window", n, e)
                window *= 2
        return erlang_a_optimal_integer(params, self.cost_params, window, center)
