"""Prescriptions from asymptotic expansions and their measured optimality gaps.

The prescription x_star minimises pi_bar; among several minimisers the one with
the smallest pi_hat wins, and remaining ties go to the smallest x. The gap of a
prescription is the exact cost at g_n(x_star) minus the exact optimal cost.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConditionViolationError,
    DomainError,
    GapLabError,
    InsufficientDataError,
    OptimizationError,
)
from .exact_queues import ExactOptimum
from .expansions import ExpansionSpec
from .numerics import (
    CLUSTER_TOLERANCE,
    DEFAULT_TOLERANCE,
    Bracket,
    Domain,
    Tolerance,
    argmin_set,
    minimize_scalar,
)

logger = logging.getLogger(__name__)

ExactCost = Callable[[float, float], float]
ExactOptimizer = Callable[[float], ExactOptimum]

ARGMIN_TOLERANCE = Tolerance(absolute=1e-9)
# a prescribed cost further below the optimum than this is reported, not absorbed
GAP_TOLERANCE = Tolerance(absolute=1e-9)
DEFAULT_DELTA = 0.05
# slopes of log sup|eps_n| against log n beyond these count as decay or growth
DECAY_SLOPE = -0.1
GROWTH_SLOPE = 0.1
# sup|eps_n| within this of the exact cost scale counts as zero
RESIDUAL_TOLERANCE = Tolerance(absolute=1e-9)


@dataclass(frozen=True)
class Prescription:
    """The selected scale-free decision and the argmin set it came from."""
    x_star: float
    pi_bar_value: float
    pi_hat_value: float
    argmin_set: Tuple[float, ...]
    regime_flags: Tuple[str, ...] = ()


@dataclass(frozen=True)
class GapRecord:
    """One row of a gap experiment.

    Attributes:
        n: Arrival scale.
        x_star: Scale-free decision that was staffed.
        staffing_prescribed: Servers actually evaluated (rounded for integer models).
        cost_prescribed: Exact cost at the prescribed staffing, NaN when infeasible.
        staffing_optimal: Exact optimal staffing.
        cost_optimal: Exact optimal cost.
        gap: cost_prescribed - cost_optimal.
        normalized_gap: gap / c_n.
        variant: ``plain`` or ``refined``.
        flags: Notes such as ``infeasible`` or ``rounded:ceil``.
    """
    n: float
    x_star: float
    staffing_prescribed: float
    cost_prescribed: float
    staffing_optimal: float
    cost_optimal: float
    gap: float
    normalized_gap: float
    variant: str = "plain"
    flags: Tuple[str, ...] = ()

    @property
    def feasible(self) -> bool:
        return "infeasible" not in self.flags


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (log n, log value)."""
    slope: float
    intercept: float
    r_squared: float
    used: int
    excluded: int = 0


@dataclass(frozen=True)
class EpsilonRow:
    """Expansion residuals eps_n(y) around one probe point."""
    n: float
    points: Tuple[Tuple[float, float], ...]
    sup_abs: float
    scale: float = 0.0
    flags: Tuple[str, ...] = ()


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ConditionResult:
    condition: int
    verdict: Verdict
    evidence: str


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the numerical probes of conditions 1-6; evidence, never proof."""
    model_tag: str
    results: Tuple[ConditionResult, ...] = field(default_factory=tuple)

    def verdict(self, condition: int) -> Verdict:
        for result in self.results:
            if result.condition == condition:
                return result.verdict
        raise KeyError(condition)


# --- selection ---------------------------------------------------------------

def _probe_domain(spec: ExpansionSpec, probe: Bracket) -> Domain:
    union = spec.union_domain
    lo, hi = max(probe.lo, union.lo), min(probe.hi, union.hi)
    if not lo < hi:
        raise DomainError("domain_probe", (probe.lo, probe.hi), "does not meet the limit domain")
    closed_lo = union.closed_lo if lo == union.lo else True
    closed_hi = union.closed_hi if hi == union.hi else True
    return Domain(lo, hi, closed_lo, closed_hi)


def _finite_or_inf(value: float) -> float:
    return value if not math.isnan(value) else math.inf


def _edge_value(spec: ExpansionSpec, x: float) -> float:
    try:
        return _finite_or_inf(float(spec.pi_bar(x)))
    except GapLabError:
        return math.inf


def _check_edges(
    spec: ExpansionSpec, domain: Domain, representatives: Sequence[float], band: float
) -> None:
    """Reject minimisers, or a minimising plateau, reaching an edge where the infimum may not be attained."""
    union = spec.union_domain
    lo_unattained = domain.lo > union.lo or not union.closed_lo
    hi_unattained = domain.hi < union.hi or not union.closed_hi
    lo_in_band = lo_unattained and _edge_value(spec, domain.inner_lo) <= band
    hi_in_band = hi_unattained and _edge_value(spec, domain.inner_hi) <= band
    for x in representatives:
        near = CLUSTER_TOLERANCE * (1.0 + abs(x))
        lo_in_band = lo_in_band or (lo_unattained and abs(x - domain.inner_lo) <= near)
        hi_in_band = hi_in_band or (hi_unattained and abs(x - domain.inner_hi) <= near)
    if lo_in_band:
        if domain.lo > union.lo:
            raise ConditionViolationError(3, f"pi_bar at its minimum level at window edge x={domain.lo!r}")
        raise ConditionViolationError(3, f"infimum of pi_bar at the open end x={union.lo!r}")
    if hi_in_band:
        if domain.hi < union.hi:
            raise ConditionViolationError(3, f"pi_bar at its minimum level at window edge x={domain.hi!r}")
        raise ConditionViolationError(3, f"infimum of pi_bar at the open end x={union.hi!r}")


def select_prescription(
    spec: ExpansionSpec,
    domain_probe: Optional[Bracket] = None,
    tol: Tolerance = ARGMIN_TOLERANCE,
) -> Prescription:
    """Pick x_star from the argmin set of pi_bar by the pi_hat tie-break.

    Args:
        spec: Expansion family.
        domain_probe: Bounded window for the argmin search; defaults to ``spec.probe``.
        tol: ``tol.absolute`` sets the argmin band and the pi_hat tie band.

    Raises:
        OptimizationError: If the argmin set is empty.
        ConditionViolationError: If a minimiser, or pi_bar at a window edge, lies in the
            argmin band at an edge where the infimum may not be attained.
    """
    domain = _probe_domain(spec, domain_probe or spec.probe)
    representatives = argmin_set(spec.pi_bar, domain, tol)
    if not representatives:
        raise OptimizationError("empty argmin set")
    f_min = min(_edge_value(spec, x) for x in representatives)
    _check_edges(spec, domain, representatives, f_min + tol.absolute * (1.0 + abs(f_min)))

    hats = [(_finite_or_inf(float(spec.pi_hat(x))), x) for x in representatives]
    best_hat = min(hat for hat, _ in hats)
    band = best_hat + tol.absolute * (1.0 + abs(best_hat)) if math.isfinite(best_hat) else best_hat
    x_star = min(x for hat, x in hats if hat <= band)
    if len(representatives) > 1:
        logger.info(
            "%s: argmin set %r, tie broken by pi_hat at x=%r", spec.model_tag, representatives, x_star
        )
    return Prescription(
        x_star=x_star,
        pi_bar_value=float(spec.pi_bar(x_star)),
        pi_hat_value=float(spec.pi_hat(x_star)),
        argmin_set=tuple(representatives),
        regime_flags=spec.regime_flags,
    )


def refined_prescription(
    spec: ExpansionSpec, n: float, tol: Tolerance = DEFAULT_TOLERANCE
) -> float:
    """Minimiser over X_n of b_n pi_bar(x) + c_n pi_hat(x), the finite-n objective without eps_n."""
    select_prescription(spec)
    b, c = spec.b_of_n(n), spec.c_of_n(n)
    x, _ = minimize_scalar(
        lambda x: b * spec.pi_bar(x) + c * spec.pi_hat(x),
        spec.domain(n),
        tol,
        scale=spec.probe.width,
    )
    return x


def staffing(spec: ExpansionSpec, n: float, x: float) -> float:
    """g_n(x).

    Raises:
        DomainError: If x lies outside X_n.
    """
    if not spec.domain(n).contains(x):
        raise DomainError("x", x, f"outside X_n for n={n!r}")
    return spec.g_of_n(n, x)


def inverse_staffing(spec: ExpansionSpec, n: float, servers: float) -> float:
    """g_n^(-1)(servers)."""
    return spec.g_inverse(n, servers)


# --- gaps --------------------------------------------------------------------

def _prescribed_cost(
    spec: ExpansionSpec, exact_cost: ExactCost, n: float, x_star: float, integer: bool
) -> Tuple[float, float, List[str]]:
    target = spec.g_of_n(n, x_star)
    if not integer:
        try:
            return target, exact_cost(n, target), []
        except GapLabError as e:
            logger.warning("n=%r: prescribed staffing %r infeasible: %s", n, target, e)
            return target, math.nan, ["infeasible"]

    evaluated = []
    for label, servers in (("floor", math.floor(target)), ("ceil", math.ceil(target))):
        if servers < 0:
            continue
        try:
            evaluated.append((exact_cost(n, servers), servers, label))
        except GapLabError as e:
            logger.debug("n=%r: N=%r not evaluable: %s", n, servers, e)
    if not evaluated:
        return target, math.nan, ["infeasible"]
    cost, servers, label = min(evaluated, key=lambda item: (item[0], item[1]))
    logger.info("n=%r: g_n(x)=%.6g rounded to N=%d (%s)", n, target, servers, label)
    return servers, cost, [f"rounded:{label}"]


def optimality_gap(
    spec: ExpansionSpec,
    exact_cost: ExactCost,
    exact_optimizer: ExactOptimizer,
    n: float,
    x_star: float,
    *,
    integer: bool = False,
    variant: str = "plain",
    optimum: Optional[ExactOptimum] = None,
) -> GapRecord:
    """Exact cost of staffing g_n(x_star) against the exact optimum.

    Integer-only models are evaluated at both floor and ceil of g_n(x_star) and
    the cheaper one is recorded. An infeasible prescription yields a flagged
    record, not an exception. A prescribed cost below the exact optimum by more
    than GAP_TOLERANCE keeps its negative gap and is flagged ``below-optimum``.

    Args:
        spec: Expansion family providing g_n and c_n.
        exact_cost: ``(n, staffing) -> cost``.
        exact_optimizer: ``n -> ExactOptimum``; skipped when ``optimum`` is given.
        n: Arrival scale.
        x_star: Decision to staff.
        integer: Whether the exact model only accepts integer staffing.
        variant: Label stored on the record.
        optimum: Precomputed exact optimum for this n.
    """
    servers, cost, flags = _prescribed_cost(spec, exact_cost, n, x_star, integer)
    if optimum is None:
        optimum = exact_optimizer(n)
    if math.isfinite(cost) and cost < optimum.cost:
        shortfall = optimum.cost - cost
        if shortfall <= GAP_TOLERANCE.absolute * (1.0 + abs(cost)):
            # the optimiser's tolerance left it above an evaluated point
            optimum = ExactOptimum(staffing=servers, cost=cost, integer=integer)
            flags.append("optimum-from-prescription")
        else:
            logger.warning(
                "n=%r: prescribed cost %r below the exact optimum %r", n, cost, optimum.cost
            )
            flags.append("below-optimum")
    gap = cost - optimum.cost
    return GapRecord(
        n=n,
        x_star=x_star,
        staffing_prescribed=servers,
        cost_prescribed=cost,
        staffing_optimal=optimum.staffing,
        cost_optimal=optimum.cost,
        gap=gap,
        normalized_gap=gap / spec.c_of_n(n),
        variant=variant,
        flags=tuple(flags),
    )


def _evaluation_point(spec: ExpansionSpec, n: float, y: float, integer: bool) -> Tuple[float, float]:
    """(y, staffing), with y moved to the nearest staffing lattice point for integer models."""
    if not integer:
        return y, spec.g_of_n(n, y)
    servers = max(0, round(spec.g_of_n(n, y)))
    return spec.g_inverse(n, servers), servers


def epsilon_probe(
    spec: ExpansionSpec,
    exact_cost: ExactCost,
    x: float,
    n_grid: Iterable[float],
    *,
    delta: float = DEFAULT_DELTA,
    integer: bool = False,
) -> List[EpsilonRow]:
    """Residuals eps_n(y) = Pi_n(g_n(y)) - a_n - b_n pi_bar(y) - c_n pi_hat(y) at y in {x - delta, x, x + delta}.

    For integer-only models each y is first moved to the nearest staffing lattice point.
    """
    rows = []
    for n in n_grid:
        domain = spec.domain(n)
        points, flags, costs = [], [], []
        for y in (x - delta, x, x + delta):
            y, servers = _evaluation_point(spec, n, y, integer)
            if not domain.contains(y):
                flags.append("outside-domain")
                continue
            try:
                cost = exact_cost(n, servers)
                costs.append(abs(cost))
                eps = cost - spec.expansion(n, y)
            except GapLabError as e:
                logger.warning("n=%r, y=%r: %s", n, y, e)
                flags.append(f"error:{type(e).__name__}")
                eps = math.nan
            points.append((y, eps))
        finite = [abs(eps) for _, eps in points if math.isfinite(eps)]
        sup_abs = max(finite) if finite and len(finite) == len(points) else math.nan
        rows.append(EpsilonRow(
            n=n, points=tuple(points), sup_abs=sup_abs, scale=max(costs, default=0.0), flags=tuple(flags)
        ))
    return rows


def rate_fit(records: Iterable[Tuple[float, float]]) -> RateFit:
    """Fit log(value) = intercept + slope log(n) by least squares.

    Non-positive and non-finite values are excluded and counted.

    Raises:
        InsufficientDataError: With fewer than three usable points.
    """
    usable, excluded = [], 0
    for n, value in records:
        if n > 0 and math.isfinite(value) and value > 0:
            usable.append((n, value))
        else:
            excluded += 1
    if len(usable) < 3:
        raise InsufficientDataError(len(usable), excluded)
    log_n = np.log([n for n, _ in usable])
    log_v = np.log([v for _, v in usable])
    slope, intercept = np.polyfit(log_n, log_v, 1)
    fitted = intercept + slope * log_n
    ss_tot = float(np.sum((log_v - log_v.mean()) ** 2))
    ss_res = float(np.sum((log_v - fitted) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        used=len(usable),
        excluded=excluded,
    )


# --- condition probes --------------------------------------------------------

def _probe_nesting(spec: ExpansionSpec, n_grid: Sequence[float], samples: Sequence[float]) -> ConditionResult:
    for n_prev, n_next in zip(n_grid, n_grid[1:]):
        if spec.domain_lo(n_next) > spec.domain_lo(n_prev) or spec.domain_hi(n_next) < spec.domain_hi(n_prev):
            return ConditionResult(
                1, Verdict.FAIL,
                f"X_n not nested: X at n={n_prev!r} is [{spec.domain_lo(n_prev)!r}, "
                f"{spec.domain_hi(n_prev)!r}], at n={n_next!r} it is "
                f"[{spec.domain_lo(n_next)!r}, {spec.domain_hi(n_next)!r}]",
            )
    for n in n_grid:
        domain = spec.domain(n)
        inside = [y for y in samples if domain.contains(y)]
        staffed = [spec.g_of_n(n, y) for y in inside]
        if any(b <= a for a, b in zip(staffed, staffed[1:])):
            return ConditionResult(1, Verdict.FAIL, f"g_n not increasing at n={n!r}")
        for y, servers in zip(inside, staffed):
            if abs(spec.g_inverse(n, servers) - y) > 1e-9 * (1.0 + abs(y)):
                return ConditionResult(1, Verdict.FAIL, f"g_n^(-1)(g_n({y!r})) != {y!r} at n={n!r}")
    return ConditionResult(1, Verdict.PASS, f"nested and one-to-one on {len(n_grid)} grid points")


def _probe_scales(spec: ExpansionSpec, n_grid: Sequence[float]) -> ConditionResult:
    if len(n_grid) < 2:
        return ConditionResult(2, Verdict.INDETERMINATE, "need at least two n values")
    b = [spec.b_of_n(n) for n in n_grid]
    ratio = [spec.c_of_n(n) / bn for n, bn in zip(n_grid, b)]
    if any(later <= earlier for earlier, later in zip(b, b[1:])):
        return ConditionResult(2, Verdict.FAIL, f"b_n not increasing: {b!r}")
    if any(later >= earlier for earlier, later in zip(ratio, ratio[1:])):
        return ConditionResult(2, Verdict.FAIL, f"c_n/b_n not decreasing: {ratio!r}")
    return ConditionResult(2, Verdict.PASS, f"b_n from {b[0]:.6g} to {b[-1]:.6g}; c_n/b_n to {ratio[-1]:.6g}")


def _probe_attainment(spec: ExpansionSpec, samples: Sequence[float]):
    values = [float(spec.pi_bar(y)) for y in samples if spec.union_domain.contains(y)]
    if any(v == -math.inf or math.isnan(v) for v in values):
        return ConditionResult(3, Verdict.FAIL, "pi_bar not finite on the samples"), None
    try:
        prescription = select_prescription(spec)
    except ConditionViolationError as e:
        return ConditionResult(3, Verdict.FAIL, e.evidence), None
    except OptimizationError as e:
        return ConditionResult(3, Verdict.INDETERMINATE, str(e)), None
    return ConditionResult(3, Verdict.PASS, f"argmin set {list(prescription.argmin_set)!r}"), prescription


def _probe_correction(spec: ExpansionSpec, prescription: Optional[Prescription]) -> ConditionResult:
    if prescription is None:
        return ConditionResult(4, Verdict.INDETERMINATE, "no argmin set")
    for x in prescription.argmin_set:
        for y in (x - 1e-3, x, x + 1e-3):
            if spec.union_domain.contains(y) and not math.isfinite(spec.pi_hat(y)):
                return ConditionResult(4, Verdict.FAIL, f"pi_hat({y!r}) is not finite")
    return ConditionResult(4, Verdict.PASS, "pi_hat finite around every minimiser")


def _probe_lower_bound(
    spec: ExpansionSpec,
    exact_cost: ExactCost,
    n_grid: Sequence[float],
    samples: Sequence[float],
    integer: bool,
) -> ConditionResult:
    minima = []
    for n in n_grid:
        domain = spec.domain(n)
        values = []
        for y in samples:
            y, servers = _evaluation_point(spec, n, y, integer)
            if not domain.contains(y):
                continue
            try:
                remainder = exact_cost(n, servers) - spec.a_of_n(n) - spec.b_of_n(n) * spec.pi_bar(y)
            except GapLabError:
                continue
            values.append(remainder / spec.c_of_n(n))
        if values:
            minima.append(min(values))
    if not minima:
        return ConditionResult(5, Verdict.INDETERMINATE, "no sample could be evaluated")
    if not all(math.isfinite(m) for m in minima):
        return ConditionResult(5, Verdict.FAIL, f"pi_hat + eps_n not finite: {minima!r}")
    floor = minima[0] - max(1.0, abs(minima[0]))
    if min(minima) < floor:
        return ConditionResult(5, Verdict.FAIL, f"pi_hat + eps_n drifts down: {minima!r}")
    return ConditionResult(5, Verdict.PASS, f"inf of pi_hat + eps_n per n: {minima!r}")


def _probe_decay(
    spec: ExpansionSpec,
    exact_cost: ExactCost,
    n_grid: Sequence[float],
    prescription: Optional[Prescription],
    delta: float,
    integer: bool,
) -> ConditionResult:
    if prescription is None:
        return ConditionResult(6, Verdict.INDETERMINATE, "no argmin set")
    for x in prescription.argmin_set:
        rows = epsilon_probe(spec, exact_cost, x, n_grid, delta=delta, integer=integer)
        residual = [
            row for row in rows if not row.sup_abs <= RESIDUAL_TOLERANCE.absolute * (1.0 + row.scale)
        ]
        if not residual:
            continue
        try:
            fit = rate_fit((row.n, row.sup_abs) for row in residual)
        except InsufficientDataError as e:
            if residual[-1] is not rows[-1]:
                # the residual reaches rounding level at the largest n
                continue
            return ConditionResult(6, Verdict.INDETERMINATE, str(e))
        if fit.slope > GROWTH_SLOPE:
            return ConditionResult(6, Verdict.FAIL, f"sup|eps_n| grows near x={x!r}: slope {fit.slope:.3g}")
        if fit.slope > DECAY_SLOPE:
            return ConditionResult(
                6, Verdict.INDETERMINATE, f"sup|eps_n| not decaying near x={x!r}: slope {fit.slope:.3g}"
            )
    return ConditionResult(6, Verdict.PASS, "sup|eps_n| decays, or sits at rounding level, around every minimiser")


def probe_conditions(
    spec: ExpansionSpec,
    n_grid: Sequence[float],
    sample_grid: Optional[Sequence[float]] = None,
    *,
    exact_cost: Optional[ExactCost] = None,
    integer: bool = False,
    delta: float = DEFAULT_DELTA,
) -> ConditionReport:
    """Falsification probes of conditions 1-6 on finite grids.

    Conditions 5 and 6 need the exact evaluator; without one they are
    indeterminate. A pass only means no counter-evidence was found on the grids.
    """
    n_grid = list(n_grid)
    if not n_grid:
        raise DomainError("n_grid", n_grid, "must not be empty")
    if sample_grid is None:
        sample_grid = np.linspace(spec.probe.lo, spec.probe.hi, 21).tolist()
    samples = [y for y in sample_grid if spec.union_domain.contains(y)]
    if not samples:
        raise DomainError("sample_grid", sample_grid, "no sample lies in X")

    attainment, prescription = _probe_attainment(spec, samples)
    results = [
        _probe_nesting(spec, n_grid, samples),
        _probe_scales(spec, n_grid),
        attainment,
        _probe_correction(spec, prescription),
    ]
    if exact_cost is None:
        results.append(ConditionResult(5, Verdict.INDETERMINATE, "no exact evaluator"))
        results.append(ConditionResult(6, Verdict.INDETERMINATE, "no exact evaluator"))
    else:
        results.append(_probe_lower_bound(spec, exact_cost, n_grid, samples, integer))
        results.append(_probe_decay(spec, exact_cost, n_grid, prescription, delta, integer))
    for result in results:
        if result.verdict is not Verdict.PASS:
            logger.info(
                "%s condition %d: %s (%s)",
                spec.model_tag, result.condition, result.verdict.value, result.evidence,
            )
    return ConditionReport(model_tag=spec.model_tag, results=tuple(results))
