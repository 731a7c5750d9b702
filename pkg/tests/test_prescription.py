"""Tests for prescription selection, optimality gaps, residual probes and condition probes."""

import math

import pytest

from gaplab.errors import (
    ConditionViolationError,
    DomainError,
    InstabilityError,
    InsufficientDataError,
)
from gaplab.exact_queues import CostParams, ExactOptimum
from gaplab.expansions import constrained_expansion, hw_expansion
from gaplab.numerics import Bracket
from gaplab.prescription import (
    Verdict,
    epsilon_probe,
    inverse_staffing,
    optimality_gap,
    probe_conditions,
    rate_fit,
    refined_prescription,
    select_prescription,
    staffing,
)
from tests.synthetic import (
    convex_spec,
    double_well_spec,
    expansion_cost,
    expansion_optimizer,
    quarter_power_spec,
)


def test_select_double_well_tie_break():
    """Test that pi_hat breaks the tie between two minimisers of pi_bar."""
    prescription = select_prescription(double_well_spec())
    assert len(prescription.argmin_set) == 2
    assert prescription.x_star == pytest.approx(-1.0, abs=1e-6)
    assert prescription.pi_bar_value == pytest.approx(0.0, abs=1e-9)
    assert prescription.pi_hat_value == pytest.approx(-1.0, abs=1e-6)


def test_select_convex():
    """Test a single interior minimiser."""
    prescription = select_prescription(convex_spec())
    assert prescription.argmin_set == (pytest.approx(0.3, abs=1e-6),)
    assert prescription.pi_hat_value == pytest.approx(math.sin(0.3), abs=1e-6)


def test_select_on_closed_end():
    """Test a minimiser on the closed lower end of X."""
    spec = constrained_expansion(1.0, 0.2)
    assert select_prescription(spec).x_star == spec.union_domain.lo


def test_select_edge_inside_limit_domain():
    """Test that a minimiser on a probe edge interior to X raises ConditionViolationError."""
    with pytest.raises(ConditionViolationError) as exc_info:
        select_prescription(convex_spec(), Bracket(1.0, 2.0))
    assert exc_info.value.condition == 3


def test_select_open_end():
    """Test that an infimum at the open end of X raises ConditionViolationError."""
    with pytest.raises(ConditionViolationError) as exc_info:
        select_prescription(hw_expansion(1.0, CostParams(h=0.0, c=1.0)))
    assert exc_info.value.condition == 3


def test_select_probe_outside_domain():
    """Test that a probe window missing X raises DomainError."""
    with pytest.raises(DomainError):
        select_prescription(quarter_power_spec(), Bracket(-5.0, -1.0))


def test_select_halfin_whitt():
    """Test that the square-root family has one interior minimiser."""
    prescription = select_prescription(hw_expansion(1.0, CostParams(h=1.0, c=1.0)))
    assert len(prescription.argmin_set) == 1
    assert 0.0 < prescription.x_star < 2.0
    assert prescription.regime_flags == ()


def test_refined_prescription():
    """Test the minimiser of n pi_bar + n^(1/4) pi_hat, 1 - n^(-3/4)/2."""
    spec = quarter_power_spec()
    assert refined_prescription(spec, 16.0) == pytest.approx(0.9375, abs=1e-6)
    assert refined_prescription(spec, 1e4) == pytest.approx(1 - 0.5e-3, abs=1e-7)


def test_staffing_maps():
    """Test g_n, its inverse, and the X_n check."""
    spec = quarter_power_spec()
    assert staffing(spec, 100.0, 0.5) == 50.0
    assert inverse_staffing(spec, 100.0, 50.0) == 0.5
    with pytest.raises(DomainError):
        staffing(spec, 100.0, -1.0)


def test_gap_quarter_power():
    """Test gap = 1/(4 sqrt(n)) for the quarter-power family."""
    spec = quarter_power_spec()
    cost, optimizer = expansion_cost(spec), expansion_optimizer(spec)
    for n in (1e2, 1e3, 1e4):
        record = optimality_gap(spec, cost, optimizer, n, 1.0)
        assert record.gap == pytest.approx(1 / (4 * math.sqrt(n)), rel=1e-6)
        assert record.normalized_gap == pytest.approx(n ** -0.75 / 4, rel=1e-6)
        assert record.staffing_prescribed == n
        assert record.feasible
        assert record.variant == "plain"


def test_gap_rate_fit_quarter_power():
    """Test that the fitted gap slope is -1/2."""
    spec = quarter_power_spec()
    cost, optimizer = expansion_cost(spec), expansion_optimizer(spec)
    records = [optimality_gap(spec, cost, optimizer, n, 1.0) for n in (1e2, 1e3, 1e4, 1e5)]
    fit = rate_fit((r.n, r.gap) for r in records)
    assert fit.slope == pytest.approx(-0.5, abs=1e-4)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-8)


def test_gap_integer_rounding():
    """Test that integer models keep the cheaper of floor and ceil."""
    spec = quarter_power_spec()
    optimum = ExactOptimum(staffing=9, cost=11.0, integer=True)
    record = optimality_gap(spec, expansion_cost(spec), None, 10.0, 1.05, integer=True, optimum=optimum)
    assert record.staffing_prescribed == 10
    assert record.flags == ("rounded:floor",)
    assert record.cost_prescribed == pytest.approx(10.0 + 10.0 ** 0.25)
    assert record.gap == pytest.approx(10.0 ** 0.25 - 1.0)


def test_gap_infeasible_prescription():
    """Test that an exact evaluation failure gives a flagged NaN record."""
    spec = quarter_power_spec()

    def unstable(n, servers):
        raise InstabilityError(servers, n)

    record = optimality_gap(spec, unstable, None, 100.0, 1.0, optimum=ExactOptimum(staffing=100.0, cost=1.0))
    assert not record.feasible
    assert math.isnan(record.cost_prescribed)
    assert math.isnan(record.gap)


def test_gap_optimum_from_prescription():
    """Test that a prescription beating the optimiser within rounding replaces the optimum."""
    spec = quarter_power_spec()
    cost = 100.0 + 100.0 ** 0.25
    optimum = ExactOptimum(staffing=90.0, cost=cost * (1.0 + 1e-12))
    record = optimality_gap(spec, expansion_cost(spec), None, 100.0, 1.0, variant="refined", optimum=optimum)
    assert record.gap == 0.0
    assert "optimum-from-prescription" in record.flags
    assert record.staffing_optimal == record.staffing_prescribed
    assert record.variant == "refined"


def test_gap_below_optimum_is_flagged():
    """Test that a prescription far below the reported optimum keeps its negative gap."""
    spec = quarter_power_spec()
    optimum = ExactOptimum(staffing=90.0, cost=1e6)
    record = optimality_gap(spec, expansion_cost(spec), None, 100.0, 1.0, optimum=optimum)
    assert record.gap == pytest.approx(100.0 + 100.0 ** 0.25 - 1e6)
    assert record.gap < 0.0
    assert "below-optimum" in record.flags
    assert "optimum-from-prescription" not in record.flags
    assert record.staffing_optimal == 90.0


def test_epsilon_probe_zero_residual():
    """Test residuals of an exact cost equal to its expansion."""
    spec = quarter_power_spec()
    rows = epsilon_probe(spec, expansion_cost(spec), 1.0, [1e2, 1e3])
    assert [row.n for row in rows] == [1e2, 1e3]
    for row in rows:
        assert [y for y, _ in row.points] == pytest.approx([0.95, 1.0, 1.05])
        assert row.sup_abs == pytest.approx(0.0, abs=1e-9)
        assert row.flags == ()
    assert rows[0].scale == pytest.approx(100.0 * 1.0025 + 100.0 ** 0.25 * 1.05)


def test_epsilon_probe_outside_domain():
    """Test that probe points outside X_n are flagged and skipped."""
    spec = quarter_power_spec()
    (row,) = epsilon_probe(spec, expansion_cost(spec), 0.02, [100.0])
    assert row.flags == ("outside-domain",)
    assert len(row.points) == 2


def test_epsilon_probe_integer_lattice():
    """Test that integer models are probed on the staffing lattice."""
    spec = quarter_power_spec()
    seen = []

    def cost(n, servers):
        seen.append(servers)
        return spec.expansion(n, servers / n)

    (row,) = epsilon_probe(spec, cost, 1.04, [10.0], delta=0.02, integer=True)
    assert seen == [10, 10, 11]
    assert [y for y, _ in row.points] == pytest.approx([1.0, 1.0, 1.1])


def test_rate_fit_power_law():
    """Test slope, intercept and r^2 of an exact power law."""
    fit = rate_fit((n, 3.0 * n ** -0.5) for n in (10.0, 100.0, 1000.0, 1e4))
    assert fit.slope == pytest.approx(-0.5)
    assert fit.intercept == pytest.approx(math.log(3.0))
    assert fit.r_squared == pytest.approx(1.0)
    assert (fit.used, fit.excluded) == (4, 0)


def test_rate_fit_excludes_unusable():
    """Test that zero, negative and NaN values are excluded and counted."""
    fit = rate_fit([(1.0, 2.0), (2.0, 0.0), (3.0, math.nan), (4.0, -1.0), (5.0, 2.0), (6.0, 2.0)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == 1.0
    assert (fit.used, fit.excluded) == (3, 3)


def test_rate_fit_insufficient():
    """Test that fewer than three usable points raise InsufficientDataError."""
    with pytest.raises(InsufficientDataError) as exc_info:
        rate_fit([(1.0, 1.0), (2.0, 0.5), (3.0, 0.0)])
    assert exc_info.value.usable == 2
    assert exc_info.value.excluded == 1


def test_probe_conditions_without_exact_cost():
    """Test that conditions 5 and 6 stay indeterminate without an exact evaluator."""
    report = probe_conditions(double_well_spec(), [1e2, 1e3, 1e4])
    assert report.model_tag == "double-well"
    for condition in (1, 2, 3, 4):
        assert report.verdict(condition) is Verdict.PASS
    assert report.verdict(5) is Verdict.INDETERMINATE
    assert report.verdict(6) is Verdict.INDETERMINATE
    with pytest.raises(KeyError):
        report.verdict(7)


def test_probe_conditions_with_decaying_residual():
    """Test probes when the exact cost is the expansion plus n^(-1/2)."""
    spec = quarter_power_spec()
    base = expansion_cost(spec)

    def exact(n, servers):
        return base(n, servers) + n ** -0.5

    report = probe_conditions(spec, [1e2, 1e3, 1e4], exact_cost=exact)
    for condition in range(1, 7):
        assert report.verdict(condition) is Verdict.PASS


def test_probe_conditions_with_growing_residual():
    """Test that a residual growing in n fails the decay probe."""
    spec = quarter_power_spec()
    base = expansion_cost(spec)

    def exact(n, servers):
        return base(n, servers) + n ** 0.5

    report = probe_conditions(spec, [1e2, 1e3, 1e4], exact_cost=exact)
    assert report.verdict(6) is Verdict.FAIL


def test_conditions_rounding_level_residual():
    """Test that a growing residual at rounding level of the cost still passes the decay check."""
    spec = quarter_power_spec()
    base = expansion_cost(spec)

    def exact(n, servers):
        return base(n, servers) + 1e-14 * n ** 1.5

    report = probe_conditions(spec, [1e2, 1e3, 1e4], exact_cost=exact)
    assert report.verdict(6) is Verdict.PASS


def test_conditions_zero_residual():
    """Test that an exact cost equal to its expansion passes every condition check."""
    spec = quarter_power_spec()
    report = probe_conditions(spec, [1e2, 1e3, 1e4], exact_cost=expansion_cost(spec))
    for condition in range(1, 7):
        assert report.verdict(condition) is Verdict.PASS


def test_probe_conditions_single_n():
    """Test that one arrival scale leaves the scale probe indeterminate."""
    report = probe_conditions(convex_spec(), [100.0])
    assert report.verdict(2) is Verdict.INDETERMINATE


def test_probe_conditions_open_end():
    """Test that an unattained infimum fails condition 3."""
    report = probe_conditions(hw_expansion(1.0, CostParams(h=0.0, c=1.0)), [1e2, 1e3])
    assert report.verdict(3) is Verdict.FAIL
    assert report.verdict(4) is Verdict.INDETERMINATE


def test_probe_conditions_constrained_not_nested():
    """Test that the constrained family fails the nesting probe."""
    report = probe_conditions(constrained_expansion(1.0, 0.2), list(range(100, 161)))
    assert report.verdict(1) is Verdict.FAIL
    assert report.verdict(3) is Verdict.PASS


def test_probe_conditions_requires_grids():
    """Test argument validation of the condition probes."""
    with pytest.raises(DomainError):
        probe_conditions(convex_spec(), [])
    with pytest.raises(DomainError):
        probe_conditions(quarter_power_spec(), [100.0], sample_grid=[-2.0, -1.0])
