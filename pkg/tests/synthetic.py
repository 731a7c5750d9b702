"""Synthetic expansion specs with known answers, for testing without queueing models."""

import math

from gaplab.exact_queues import ExactOptimum
from gaplab.expansions import ExpansionSpec
from gaplab.numerics import Bracket, Domain, minimize_scalar


def _sqrt_map(n, x):
    return n + math.sqrt(n) * x


def _sqrt_inverse(n, servers):
    return (servers - n) / math.sqrt(n)


def double_well_spec() -> ExpansionSpec:
    """pi_bar = (x^2 - 1)^2 with minimisers -1 and 1; pi_hat = x breaks the tie toward -1."""
    return ExpansionSpec(
        a_of_n=lambda n: 0.0,
        b_of_n=lambda n: math.sqrt(n),
        pi_bar=lambda x: (x * x - 1.0) ** 2,
        pi_hat=lambda x: x,
        g_of_n=_sqrt_map,
        g_inverse=_sqrt_inverse,
        domain_lo=lambda n: -math.inf,
        domain_hi=lambda n: math.inf,
        union_domain=Domain(),
        probe=Bracket(-3.0, 3.0),
        model_tag="double-well",
    )


def convex_spec() -> ExpansionSpec:
    """Strictly convex pi_bar with minimiser 0.3."""
    return ExpansionSpec(
        a_of_n=lambda n: 0.0,
        b_of_n=lambda n: math.sqrt(n),
        pi_bar=lambda x: (x - 0.3) ** 2,
        pi_hat=lambda x: math.sin(x),
        g_of_n=_sqrt_map,
        g_inverse=_sqrt_inverse,
        domain_lo=lambda n: -math.inf,
        domain_hi=lambda n: math.inf,
        union_domain=Domain(),
        probe=Bracket(-5.0, 5.0),
        model_tag="convex",
    )


def quarter_power_spec() -> ExpansionSpec:
    """b_n = n, c_n = n^(1/4); pi_bar = (x - 1)^2 + 1, pi_hat = x.

    With the exact cost equal to the expansion, the prescription x = 1 has gap
    c_n^2 / (4 b_n) = 1 / (4 sqrt(n)).
    """
    return ExpansionSpec(
        a_of_n=lambda n: 0.0,
        b_of_n=lambda n: float(n),
        c_of_n=lambda n: n ** 0.25,
        pi_bar=lambda x: (x - 1.0) ** 2 + 1.0,
        pi_hat=lambda x: x,
        g_of_n=lambda n, x: n * x,
        g_inverse=lambda n, servers: servers / n,
        domain_lo=lambda n: 0.0,
        domain_hi=lambda n: math.inf,
        union_domain=Domain(0.0, math.inf),
        probe=Bracket(0.0, 4.0),
        model_tag="quarter-power",
    )


def expansion_cost(spec: ExpansionSpec):
    """Exact cost equal to the expansion itself, so eps_n is identically zero."""
    def cost(n, servers):
        return spec.expansion(n, spec.g_inverse(n, servers))
    return cost


def expansion_optimizer(spec: ExpansionSpec):
    """Exact optimiser of expansion_cost over X_n."""
    def optimal(n, center=None):
        x, value = minimize_scalar(
            lambda x: spec.expansion(n, x), spec.domain(n), scale=spec.probe.width
        )
        return ExactOptimum(staffing=spec.g_of_n(n, x), cost=value)
    return optimal
