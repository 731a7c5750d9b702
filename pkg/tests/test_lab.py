"""Tests for the experiment engine."""

import math

import pytest

from gaplab.config import ExperimentConfig
from gaplab.csvio import SUMMARY, data_rows, dumps, parse_csv, summary_rows
from gaplab.errors import ConfigError
from gaplab.expansions import hw_sqrt_staffing_for_delay
from gaplab.lab import GapLab, MODELS, run_approx_check, run_constrained_report, run_gap_table
from gaplab.numerics import mills_ratio
from gaplab.prescription import Verdict, probe_conditions

DECADES = (1e2, 1e3, 1e4, 1e5, 1e6)


def _by_variant(rows, variant):
    return [row for row in data_rows(rows) if row["variant"] == variant]


def test_gap_table_mmn_hw():
    """Test gap rows and the rate-fit summary for square-root staffing."""
    result = run_gap_table(ExperimentConfig(n_grid=(1e2, 1e3, 1e4)))
    assert result.schema == "gap-table"
    rows = data_rows(result.rows)
    assert [row["n"] for row in rows] == [1e2, 1e3, 1e4]
    for row in rows:
        assert row["model"] == "mmn-hw"
        assert row["variant"] == "plain"
        assert row["gap"] >= -1e-9 * (1 + abs(row["cost_optimal"]))
        assert "below-optimum" not in row["flags"]
        assert row["staffing"] == pytest.approx(row["n"] + math.sqrt(row["n"]) * row["x_star"])
    (summary,) = summary_rows(result.rows)
    assert summary["n"] == SUMMARY
    assert summary["flags"].startswith("rate-fit;r2=")
    assert summary["gap"] < 0
    assert result.rows[-1] is summary
    assert result.warnings == 0


def test_gap_table_single_n():
    """Test that one arrival scale gives one data row and an insufficient-data summary."""
    result = run_gap_table(ExperimentConfig(n_grid=(100.0,)))
    assert len(data_rows(result.rows)) == 1
    (summary,) = summary_rows(result.rows)
    assert summary["flags"] == "insufficient-data;usable=1"
    assert math.isnan(summary["gap"])


def test_gap_table_refined_not_worse():
    """Test that the refined prescription is never worse than the plain one."""
    result = run_gap_table(ExperimentConfig(n_grid=(1e2, 1e3), refined=True))
    plain, refined = _by_variant(result.rows, "plain"), _by_variant(result.rows, "refined")
    assert len(plain) == len(refined) == 2
    for p, r in zip(plain, refined):
        assert p["n"] == r["n"]
        assert r["gap"] <= p["gap"] + 1e-9 * (1 + abs(p["cost_optimal"]))
    assert len(summary_rows(result.rows)) == 2


def test_gap_table_deterministic_and_concurrent(tmp_path):
    """Test that reruns and threaded runs give byte-identical CSV output."""
    out = tmp_path / "gaps.csv"
    first = run_gap_table(ExperimentConfig(n_grid=(1e2, 1e3), out=str(out)))
    assert first.path == out
    text = out.read_text(encoding="utf-8")
    assert text == dumps("gap-table", first.rows)
    second = run_gap_table(ExperimentConfig(n_grid=(1e2, 1e3), workers=2))
    assert dumps("gap-table", second.rows) == text
    schema, parsed = parse_csv(out)
    assert schema == "gap-table"
    assert len(parsed) == 3


def test_gap_table_without_prescription():
    """Test that a failed selection flags every row instead of raising."""
    result = run_gap_table(ExperimentConfig(n_grid=(1e2, 1e3), h=0.0))
    assert len(result.rows) == 2
    assert all(row["flags"] == "error:ConditionViolationError" for row in result.rows)
    assert result.warnings == 2


def test_gap_table_diffusion_integer_staffing():
    """Test integer rounding and nonnegative gaps for the Erlang-A diffusion family."""
    config = ExperimentConfig(model="mmna-diffusion", gamma=1.0, h=2.0, n_grid=(1e2, 1e3))
    result = run_gap_table(config)
    rows = data_rows(result.rows)
    assert [row["staffing"] for row in rows] == [100, 1000]
    for row in rows:
        assert row["x_star"] == pytest.approx(0.0, abs=1e-6)
        assert row["flags"].startswith("rounded:")
        assert row["gap"] >= 0
        assert float(row["staffing_optimal"]).is_integer()


def test_gap_table_needs_exact_evaluator():
    """Test that non-exponential fluid patience cannot produce a gap table."""
    config = ExperimentConfig(model="mmng-fluid", patience="hyperexp:0.5,1,3", c=0.5)
    with pytest.raises(ConfigError):
        run_gap_table(config)
    with pytest.raises(ConfigError):
        run_approx_check(config)


def test_approx_check_hw_residual_shrinks():
    """Test that the residual at x = 1 is smaller at n = 10^4 than at n = 10^2."""
    result = run_approx_check(ExperimentConfig(n_grid=(1e2, 1e4), x=(1.0,)))
    assert result.schema == "approx-check"
    first, last = data_rows(result.rows)
    assert abs(last["residual"]) < abs(first["residual"])
    assert first["residual"] == pytest.approx(first["exact_EQ"] - first["leading"] - first["correction"])
    (summary,) = summary_rows(result.rows)
    assert summary["x"] == 1.0
    assert summary["flags"] == "insufficient-data;usable=2"


def test_approx_check_diffusion_leading_order():
    """Test that |E[Q] - sqrt(n/mu) qbar1| stays bounded at lattice staffing."""
    config = ExperimentConfig(model="mmna-diffusion", gamma=1.0, n_grid=(1e2, 1e3, 1e4, 1e5))
    result = run_approx_check(config)
    rows = data_rows(result.rows)
    assert len(rows) == 12
    for row in rows:
        assert row["flags"].startswith("lattice:")
        assert abs(row["exact_EQ"] - row["leading"]) < 1.0
    assert len(summary_rows(result.rows)) == 3


def test_approx_check_fluid_exponential():
    """Test E[Q]/n against the fluid queue length 0.2 at x = 0.8."""
    config = ExperimentConfig(model="mmng-fluid", gamma=1.0, x=(0.8,), n_grid=(1e2, 1e3, 1e4))
    rows = data_rows(run_approx_check(config).rows)
    assert rows[-1]["n"] == 1e4
    assert rows[-1]["exact_EQ"] / 1e4 == pytest.approx(0.2, abs=1e-3)
    for row in rows:
        assert abs(row["exact_EQ"] - row["leading"]) < 5.0


def test_fluid_critical_decay_probe():
    """Test that the decay probe does not pass when the argmin sits at x = 1/mu."""
    bundle = MODELS.get("mmng-fluid").build(ExperimentConfig(model="mmng-fluid", gamma=1.0, h=2.0))
    assert "critical" in bundle.spec.regime_flags
    report = probe_conditions(
        bundle.spec, [1e2, 1e3, 1e4], exact_cost=bundle.exact.cost, integer=True
    )
    assert report.verdict(6) in (Verdict.FAIL, Verdict.INDETERMINATE)


def test_fluid_zero_staffing_residual_passes_decay_check():
    """Test that residuals at rounding level pass the decay check when staffing nobody is optimal."""
    bundle = MODELS.get("mmng-fluid").build(ExperimentConfig(model="mmng-fluid", gamma=1.0, h=0.5))
    report = probe_conditions(
        bundle.spec, [1e2, 1e3, 1e4], exact_cost=bundle.exact.cost, integer=True
    )
    assert report.verdict(6) is Verdict.PASS


def test_constrained_report():
    """Test square-root against exact minimal staffing at alpha = 1/2."""
    result = run_constrained_report(ExperimentConfig(alpha=0.5, n_grid=(100.0, 1000.0)))
    assert result.schema == "constrained"
    first = result.rows[0]
    x_star = hw_sqrt_staffing_for_delay(0.5)
    assert x_star * mills_ratio(x_star) == pytest.approx(1.0, rel=1e-9)
    assert first["x_star"] == x_star
    assert first["staffing_sqrt"] == max(math.ceil(100 + 10 * x_star), 101)
    for row in result.rows:
        assert isinstance(row["server_gap"], int)
        assert row["server_gap"] == row["staffing_sqrt"] - row["staffing_exact"]
    assert any("condition 1" in note and "fail" in note for note in result.notes)


def test_constrained_report_vacuous_constraint():
    """Test that alpha near 1 gives no server difference."""
    result = run_constrained_report(ExperimentConfig(alpha=0.999, n_grid=(1e2, 1e3, 1e4)))
    assert [row["server_gap"] for row in result.rows] == [0, 0, 0]


def test_constrained_report_needs_alpha():
    """Test that a missing alpha is a configuration error."""
    with pytest.raises(ConfigError):
        run_constrained_report(ExperimentConfig(n_grid=(100.0,)))


def test_prescribe_report():
    """Test the prescription report for square-root staffing."""
    lab = GapLab(ExperimentConfig(n_grid=(100.0, 400.0), refined=True))
    report = lab.prescribe()
    x_star = report["x_star"]
    assert report["model"] == "mmn-hw"
    assert report["argmin_set"] == [x_star]
    assert report["regime_flags"] == []
    assert report["staffing"] == {100.0: pytest.approx(100 + 10 * x_star), 400.0: pytest.approx(400 + 20 * x_star)}
    assert set(report["refined"]) == {100.0, 400.0}
    assert lab.prescription is lab.prescription


def test_evaluate_report():
    """Test gaps and condition verdicts in the evaluation report."""
    report = GapLab(ExperimentConfig(n_grid=(1e2, 1e3, 1e4))).evaluate()
    assert len(report["gaps"]) == 3
    verdicts = dict((condition, verdict) for condition, verdict, _ in report["conditions"])
    assert sorted(verdicts) == [1, 2, 3, 4, 5, 6]
    for condition in (1, 2, 3, 4):
        assert verdicts[condition] == "pass"
    assert report["all_pass"] == all(v == "pass" for v in verdicts.values())


@pytest.mark.slow
def test_halfin_whitt_gap_acceptance():
    """Test the o(1) gap claim and the refinement ordering over n = 10^2..10^6."""
    result = run_gap_table(ExperimentConfig(n_grid=DECADES, refined=True))
    plain, refined = _by_variant(result.rows, "plain"), _by_variant(result.rows, "refined")
    gaps = [row["gap"] for row in plain]
    for row in plain + refined:
        assert row["gap"] >= -1e-9 * (1 + abs(row["cost_optimal"]))
        assert "below-optimum" not in row["flags"]
    assert all(later <= earlier for earlier, later in zip(gaps[1:], gaps[2:]))
    assert gaps[-1] < 0.1 * gaps[0]
    (plain_summary,) = [row for row in summary_rows(result.rows) if row["variant"] == "plain"]
    assert plain_summary["gap"] <= -0.4
    for p, r in zip(plain, refined):
        assert r["gap"] <= p["gap"] + 1e-9 * (1 + abs(p["cost_optimal"]))


@pytest.mark.slow
def test_halfin_whitt_residual_acceptance():
    """Test that expansion residuals decay like n^(-1/2) at x = 0.5, 1, 2."""
    result = run_approx_check(ExperimentConfig(n_grid=DECADES))
    for summary in summary_rows(result.rows):
        assert summary["residual"] <= -0.4
    scaled = [math.sqrt(row["n"]) * abs(row["residual"]) for row in data_rows(result.rows)]
    assert max(scaled) < 10 * max(scaled[:3])


@pytest.mark.slow
def test_halfin_whitt_conditions_acceptance():
    """Test that all six condition checks pass for square-root staffing over n = 10^2..10^6."""
    report = GapLab(ExperimentConfig(n_grid=DECADES)).evaluate()
    verdicts = dict((condition, verdict) for condition, verdict, _ in report["conditions"])
    assert verdicts == {condition: "pass" for condition in range(1, 7)}
    assert report["all_pass"]
    assert not any("below-optimum" in record.flags for record in report["gaps"])
