"""Asymptotic expansions of the staffing cost, packaged as ExpansionSpec objects.

Each family decomposes the exact cost at staffing g_n(x) as

    Pi_n(g_n(x)) = a_n + b_n * pi_bar(x) + c_n * pi_hat(x) + eps_n(x)

and carries the staffing map g_n together with the scaled domains X_n.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple

from scipy import integrate

from .errors import DomainError, RegimeError
from .exact_queues import CostParams, QueueParams, mmn_min_servers_wait_prob
from .numerics import (
    Bracket,
    Domain,
    Tolerance,
    argmin_set,
    find_root,
    hazard,
    mills_ratio,
)

logger = logging.getLogger(__name__)

ScaleFunction = Callable[[float], float]
StaffingMap = Callable[[float, float], float]

# w_bar(0) is infinite for unbounded patience; it is capped where the survival drops below this
SURVIVAL_FLOOR = 1e-12
ARGMIN_BAND = Tolerance(absolute=1e-9)


def _unit_scale(n: float) -> float:
    return 1.0


def _zero(x: float) -> float:
    return 0.0


@dataclass(frozen=True)
class ExpansionSpec:
    """One asymptotic expansion family evaluated at fixed parameters.

    Attributes:
        a_of_n: Cost offset a_n.
        b_of_n: Leading scale b_n, growing without bound.
        pi_bar: Leading-order cost pi_bar(x).
        pi_hat: Correction pi_hat(x).
        g_of_n: Staffing map (n, x) -> servers.
        g_inverse: Inverse staffing map (n, servers) -> x.
        domain_lo: Lower end of X_n as a function of n.
        domain_hi: Upper end of X_n as a function of n.
        union_domain: The limit domain X (union of all X_n), with closedness of its ends.
        probe: Bounded window on which argmin sets of pi_bar are searched.
        model_tag: Registry name of the family.
        c_of_n: Correction scale c_n, o(b_n).
        regime_flags: Labels such as ``critical`` or ``degenerate``.
    """
    a_of_n: ScaleFunction
    b_of_n: ScaleFunction
    pi_bar: Callable[[float], float]
    pi_hat: Callable[[float], float]
    g_of_n: StaffingMap
    g_inverse: StaffingMap
    domain_lo: ScaleFunction
    domain_hi: ScaleFunction
    union_domain: Domain
    probe: Bracket
    model_tag: str
    c_of_n: ScaleFunction = _unit_scale
    regime_flags: Tuple[str, ...] = field(default_factory=tuple)

    def domain(self, n: float) -> Domain:
        """X_n as a Domain; ends inherit the closedness of the limit domain."""
        return Domain(
            self.domain_lo(n),
            self.domain_hi(n),
            self.union_domain.closed_lo,
            self.union_domain.closed_hi,
        )

    def expansion(self, n: float, x: float) -> float:
        """a_n + b_n pi_bar(x) + c_n pi_hat(x)."""
        return self.a_of_n(n) + self.b_of_n(n) * self.pi_bar(x) + self.c_of_n(n) * self.pi_hat(x)


class RhoConvention(str, Enum):
    """Meaning of rho in the fluid correction term."""
    UTILIZATION = "utilization"  # rho = 1 / (x mu)
    UNIT = "unit"  # rho = 1

    def rho(self, x: float, mu: float) -> float:
        if self is RhoConvention.UNIT:
            return 1.0
        return 1.0 / (x * mu)


# --- patience distributions ------------------------------------------------

class PatienceDist:
    """Patience-time distribution with a strictly positive, smooth density."""

    name = "patience"

    def survival(self, w: float) -> float:
        raise NotImplementedError

    def density(self, w: float) -> float:
        raise NotImplementedError

    def density_derivative(self, w: float) -> float:
        raise NotImplementedError

    def inverse_survival(self, u: float) -> float:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def survival_integral_to_level(self, u: float) -> float:
        """Integral of the survival function from 0 to its inverse at level u."""
        if u >= 1.0:
            return 0.0
        upper = self.inverse_survival(max(u, SURVIVAL_FLOOR))
        value, _ = integrate.quad(self.survival, 0.0, upper, epsabs=0.0, epsrel=1e-12, limit=200)
        return value


class ExponentialPatience(PatienceDist):
    """Exponential patience with abandonment rate gamma."""

    name = "exp"

    def __init__(self, gamma: float):
        if not (math.isfinite(gamma) and gamma > 0):
            raise DomainError("gamma", gamma, "abandonment rate must be finite and > 0")
        self.gamma = gamma

    def __repr__(self) -> str:
        return f"ExponentialPatience(gamma={self.gamma!r})"

    def survival(self, w: float) -> float:
        return math.exp(-self.gamma * w)

    def density(self, w: float) -> float:
        return self.gamma * math.exp(-self.gamma * w)

    def density_derivative(self, w: float) -> float:
        return -self.gamma * self.gamma * math.exp(-self.gamma * w)

    def inverse_survival(self, u: float) -> float:
        if u >= 1.0:
            return 0.0
        if u <= 0.0:
            return math.inf
        return -math.log(u) / self.gamma

    @property
    def mean(self) -> float:
        return 1.0 / self.gamma

    def survival_integral_to_level(self, u: float) -> float:
        return max(0.0, 1.0 - u) / self.gamma


class HyperexponentialPatience(PatienceDist):
    """Mixture p Exp(a) + (1 - p) Exp(b)."""

    name = "hyperexp"

    def __init__(self, p: float, a: float, b: float):
        if not (0.0 < p < 1.0):
            raise DomainError("p", p, "mixing probability must lie in (0, 1)")
        for label, rate in (("a", a), ("b", b)):
            if not (math.isfinite(rate) and rate > 0):
                raise DomainError(label, rate, "rate must be finite and > 0")
        self.p, self.a, self.b = p, a, b

    def __repr__(self) -> str:
        return f"HyperexponentialPatience(p={self.p!r}, a={self.a!r}, b={self.b!r})"

    def survival(self, w: float) -> float:
        return self.p * math.exp(-self.a * w) + (1.0 - self.p) * math.exp(-self.b * w)

    def density(self, w: float) -> float:
        return self.p * self.a * math.exp(-self.a * w) + (1.0 - self.p) * self.b * math.exp(-self.b * w)

    def density_derivative(self, w: float) -> float:
        return -(
            self.p * self.a ** 2 * math.exp(-self.a * w)
            + (1.0 - self.p) * self.b ** 2 * math.exp(-self.b * w)
        )

    def inverse_survival(self, u: float) -> float:
        if u >= 1.0:
            return 0.0
        if u <= 0.0:
            return math.inf
        # the survival lies between the two component survivals
        upper = -math.log(u) / min(self.a, self.b)
        return find_root(lambda w: self.survival(w) - u, Bracket(0.0, upper))

    @property
    def mean(self) -> float:
        return self.p / self.a + (1.0 - self.p) / self.b


# --- Halfin-Whitt (M/M/N, square-root staffing) ------------------------------

def _require_positive(x: float, name: str = "x") -> float:
    x = float(x)
    if not (math.isfinite(x) and x > 0):
        raise DomainError(name, x, "must be finite and > 0")
    return x


def hw_qbar(x: float) -> float:
    """(1/x) (1 + x Phi(x)/phi(x))^(-1), the leading queue-length term."""
    x = _require_positive(x)
    r = 1.0 / mills_ratio(x)
    return r / (x * (r + x))


def hw_qhat(x: float) -> float:
    """x^2 qbar^2 (1/3 + x^2/6 + (Phi/phi)(x/2 + x^3/6)), the O(1) queue-length correction."""
    x = _require_positive(x)
    # with r = phi/Phi the expression is free of overflowing Mills ratios
    r = 1.0 / mills_ratio(x)
    constant = 1.0 / 3.0 + x * x / 6.0
    slope = x / 2.0 + x ** 3 / 6.0
    return r * (r * constant + slope) / (r + x) ** 2


def hw_delay_probability(x: float) -> float:
    """Halfin-Whitt limit of the delay probability, (1 + x Phi(x)/phi(x))^(-1)."""
    x = _require_positive(x)
    r = 1.0 / mills_ratio(x)
    return r / (r + x)


def hw_sqrt_staffing_for_delay(alpha: float) -> float:
    """x > 0 with hw_delay_probability(x) = alpha, i.e. x Phi(x)/phi(x) = 1/alpha - 1."""
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha", alpha, "must lie in (0, 1)")
    target = 1.0 / alpha - 1.0
    hi = 1.0
    while hi * mills_ratio(hi) < target:
        hi *= 2.0
    return find_root(lambda x: x * mills_ratio(x) - target, Bracket(0.0, hi))


def _sqrt_staffing(mu: float) -> Tuple[StaffingMap, StaffingMap]:
    def g_of_n(n: float, x: float) -> float:
        load = n / mu
        return load + math.sqrt(load) * x

    def g_inverse(n: float, servers: float) -> float:
        load = n / mu
        return (servers - load) / math.sqrt(load)

    return g_of_n, g_inverse


def hw_expansion(mu: float, cost: CostParams) -> ExpansionSpec:
    """Square-root staffing expansion of the M/M/N cost.

    a_n = c n/mu, b_n = sqrt(n/mu), pi_bar = c x + h qbar, pi_hat = h qhat,
    g_n(x) = n/mu + sqrt(n/mu) x on X_n = (0, inf).
    """
    mu = _require_positive(mu, "mu")
    g_of_n, g_inverse = _sqrt_staffing(mu)
    flags = ("degenerate",) if cost.h == 0 else ()
    return ExpansionSpec(
        a_of_n=lambda n: cost.c * n / mu,
        b_of_n=lambda n: math.sqrt(n / mu),
        pi_bar=lambda x: cost.c * x + cost.h * hw_qbar(x),
        pi_hat=lambda x: cost.h * hw_qhat(x),
        g_of_n=g_of_n,
        g_inverse=g_inverse,
        domain_lo=lambda n: 0.0,
        domain_hi=lambda n: math.inf,
        union_domain=Domain(0.0, math.inf, closed_lo=False),
        probe=Bracket(0.0, 20.0),
        model_tag="mmn-hw",
        regime_flags=flags,
    )


# --- fluid (M/M/N+G, overloaded) ---------------------------------------------

def fluid_wbar(
    x: float, mu: float, patience: PatienceDist, *, with_flag: bool = False
):
    """Fluid waiting time Gbar^(-1)(min(1, x mu)).

    For x mu below SURVIVAL_FLOOR the value is capped at Gbar^(-1)(SURVIVAL_FLOOR);
    ``with_flag=True`` returns ``(w, capped)``.
    """
    x = float(x)
    if not (math.isfinite(x) and x >= 0):
        raise DomainError("x", x, "must be finite and >= 0")
    level = min(1.0, x * mu)
    capped = level < SURVIVAL_FLOOR
    w = 0.0 if level >= 1.0 else patience.inverse_survival(max(level, SURVIVAL_FLOOR))
    return (w, capped) if with_flag else w


def fluid_qbar(x: float, mu: float, patience: PatienceDist) -> float:
    """Fluid queue length per unit arrival rate, the integral of Gbar over [0, w_bar(x)]."""
    x = float(x)
    if not (math.isfinite(x) and x >= 0):
        raise DomainError("x", x, "must be finite and >= 0")
    return patience.survival_integral_to_level(min(1.0, x * mu))


def fluid_qhat(
    x: float,
    mu: float,
    patience: PatienceDist,
    rho_convention: RhoConvention = RhoConvention.UTILIZATION,
) -> float:
    """-(1/2) (g'(w)/(rho g(w)^2) + 1) at w = w_bar(x), overloaded regime only.

    Raises:
        RegimeError: Unless 0 < x mu < 1.
    """
    if not (math.isfinite(x) and 0.0 < x * mu < 1.0):
        raise RegimeError(x, mu)
    w = fluid_wbar(x, mu, patience)
    g = patience.density(w)
    rho = RhoConvention(rho_convention).rho(x, mu)
    return -0.5 * (patience.density_derivative(w) / (rho * g * g) + 1.0)


def fluid_qhat_boundary(patience: PatienceDist) -> float:
    """Limit of fluid_qhat as x mu -> 1 (w_bar -> 0, rho -> 1)."""
    g0 = patience.density(0.0)
    return -0.5 * (patience.density_derivative(0.0) / (g0 * g0) + 1.0)


def fluid_expansion(
    mu: float,
    cost: CostParams,
    patience: PatienceDist,
    rho_convention: RhoConvention = RhoConvention.UTILIZATION,
) -> ExpansionSpec:
    """Fluid expansion of the M/M/N+G cost: b_n = n, g_n(x) = n x on [0, inf).

    pi_hat is continued past x = 1/mu by its boundary limit; the expansion is flagged
    ``critical`` when 1/mu belongs to the argmin set of pi_bar, where the fluid
    prescription is not o(1)-optimal.
    """
    mu = _require_positive(mu, "mu")
    rho_convention = RhoConvention(rho_convention)
    boundary = fluid_qhat_boundary(patience)
    floor_x = SURVIVAL_FLOOR / mu

    def pi_bar(x: float) -> float:
        return cost.c * x + cost.h * fluid_qbar(x, mu, patience)

    def pi_hat(x: float) -> float:
        if x * mu >= 1.0:
            return cost.h * boundary
        return cost.h * fluid_qhat(max(x, floor_x), mu, patience, rho_convention)

    probe = Bracket(0.0, 2.0 / mu)
    representatives = argmin_set(pi_bar, probe, ARGMIN_BAND)
    f_min = min(pi_bar(x) for x in representatives)
    band = f_min + ARGMIN_BAND.absolute * (1.0 + abs(f_min))
    flags = ["critical" if pi_bar(1.0 / mu) <= band else "overloaded"]
    if rho_convention is RhoConvention.UNIT:
        flags.append("rho-unit")
    logger.debug("fluid expansion: argmin %r, flags %r", representatives, flags)

    return ExpansionSpec(
        a_of_n=lambda n: 0.0,
        b_of_n=lambda n: float(n),
        pi_bar=pi_bar,
        pi_hat=pi_hat,
        g_of_n=lambda n, x: n * x,
        g_inverse=lambda n, servers: servers / n,
        domain_lo=lambda n: 0.0,
        domain_hi=lambda n: math.inf,
        union_domain=Domain(0.0, math.inf),
        probe=probe,
        model_tag="mmng-fluid",
        regime_flags=tuple(flags),
    )


# --- diffusion (M/M/N+M, square-root staffing) -------------------------------

def erlang_a_H(x: float, mu: float, gamma: float) -> float:
    """H_gamma(x) = phi(y)/Phi(-y) with y = x sqrt(mu/gamma)."""
    return hazard(x * math.sqrt(mu / gamma))


def erlang_a_Astar(x: float, mu: float, gamma: float) -> float:
    """A_*(x) = (1 + sqrt(gamma/mu) G(x) H_gamma(x))^(-1), G = Phi/phi."""
    return 1.0 / (1.0 + math.sqrt(gamma / mu) * mills_ratio(x) * erlang_a_H(x, mu, gamma))


def erlang_a_qbar1(x: float, mu: float, gamma: float) -> float:
    """(sqrt(gamma/mu) H_gamma(x) - x) (mu/gamma) A_*(x)."""
    gap = math.sqrt(gamma / mu) * erlang_a_H(x, mu, gamma) - x
    return gap * (mu / gamma) * erlang_a_Astar(x, mu, gamma)


def erlang_a_h(x: float, mu: float, gamma: float) -> float:
    """The auxiliary h_gamma(x) of the diffusion correction."""
    root_gm = math.sqrt(gamma / mu)
    root_mg = math.sqrt(mu / gamma)
    G = mills_ratio(x)
    H = erlang_a_H(x, mu, gamma)
    return -(1.0 / 6.0) * root_gm * x ** 2 * H * (
        G * H * root_mg - x * G * (mu / gamma) + 1.0 + x * G
    )


def erlang_a_qhat1(x: float, mu: float, gamma: float) -> float:
    """O(1) queue-length correction of the Erlang-A diffusion, composed term by term."""
    root_gm = math.sqrt(gamma / mu)
    root_mg = math.sqrt(mu / gamma)
    H = erlang_a_H(x, mu, gamma)
    bracket = (
        -erlang_a_h(x, mu, gamma) * erlang_a_Astar(x, mu, gamma)
        - (1.0 / 6.0) * x ** 2 * H * root_mg
        + (1.0 / 6.0) * root_gm * x * H / (root_gm * H - x)
    )
    return mu * erlang_a_qbar1(x, mu, gamma) * bracket


def erlang_a_diffusion_expansion(mu: float, gamma: float, cost: CostParams) -> ExpansionSpec:
    """Square-root staffing expansion of the M/M/N+M cost on X_n = [-sqrt(n/mu), inf)."""
    mu = _require_positive(mu, "mu")
    gamma = _require_positive(gamma, "gamma")
    g_of_n, g_inverse = _sqrt_staffing(mu)
    flags = ("degenerate",) if cost.h == 0 else ()
    # H_gamma varies on the scale x ~ sqrt(gamma/mu)
    reach = 10.0 * max(1.0, math.sqrt(gamma / mu))
    return ExpansionSpec(
        a_of_n=lambda n: cost.c * n / mu,
        b_of_n=lambda n: math.sqrt(n / mu),
        pi_bar=lambda x: cost.c * x + cost.h * erlang_a_qbar1(x, mu, gamma),
        pi_hat=lambda x: cost.h * erlang_a_qhat1(x, mu, gamma),
        g_of_n=g_of_n,
        g_inverse=g_inverse,
        domain_lo=lambda n: -math.sqrt(n / mu),
        domain_hi=lambda n: math.inf,
        union_domain=Domain(-math.inf, math.inf),
        probe=Bracket(-reach, reach),
        model_tag="mmna-diffusion",
        regime_flags=flags,
    )


# --- constrained staffing (negative control) ---------------------------------

def constrained_expansion(mu: float, alpha: float) -> ExpansionSpec:
    """Server-count objective under P(wait) <= alpha in square-root coordinates.

    a_n = n/mu, b_n = sqrt(n/mu), pi_bar(y) = y, pi_hat = 0, and
    X_n = [(N_alpha(n) - n/mu)/sqrt(n/mu), inf) with N_alpha the exact minimal
    staffing. These X_n are not nested, so the o(1) argument does not apply.
    """
    mu = _require_positive(mu, "mu")
    x_alpha = hw_sqrt_staffing_for_delay(alpha)
    g_of_n, g_inverse = _sqrt_staffing(mu)

    def domain_lo(n: float) -> float:
        servers = mmn_min_servers_wait_prob(QueueParams(n=n, mu=mu), alpha)
        return g_inverse(n, servers)

    return ExpansionSpec(
        a_of_n=lambda n: n / mu,
        b_of_n=lambda n: math.sqrt(n / mu),
        pi_bar=lambda y: y,
        pi_hat=_zero,
        g_of_n=g_of_n,
        g_inverse=g_inverse,
        domain_lo=domain_lo,
        domain_hi=lambda n: math.inf,
        union_domain=Domain(x_alpha, math.inf),
        probe=Bracket(x_alpha, x_alpha + 10.0),
        model_tag="constrained",
    )


def patience_for(gamma: Optional[float], patience: Optional[PatienceDist]) -> PatienceDist:
    """The explicit patience law, else exponential patience with rate gamma."""
    if patience is not None:
        return patience
    if gamma is None:
        raise DomainError("gamma", None, "the fluid model needs gamma or a patience law")
    return ExponentialPatience(gamma)
