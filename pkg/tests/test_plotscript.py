"""Tests for plot-script generation."""

import ast

import pytest

from gaplab.csvio import emit_csv
from gaplab.errors import ConfigError
from gaplab.plotscript import emit_plot_script, render_plot_script


def _gap_rows():
    return [
        {"n": n, "model": "mmn-hw", "x_star": 0.5, "variant": "plain", "staffing": n + 5,
         "cost_prescribed": 1.0, "staffing_optimal": n + 5, "cost_optimal": 1.0,
         "gap": 1.0 / n, "normalized_gap": 1.0 / n, "flags": ""}
        for n in (100.0, 1000.0, 10000.0)
    ]


@pytest.mark.parametrize("schema", ["gap-table", "approx-check", "constrained"])
def test_rendered_scripts_are_valid_python(schema):
    """Test that every template renders to parseable Python importing matplotlib."""
    text = render_plot_script(schema, "results.csv")
    ast.parse(text)
    assert "import matplotlib.pyplot as plt" in text
    assert "'results.csv'" in text
    assert "WARNING" not in text


def test_emit_plot_script_default_path(tmp_path):
    """Test the default <stem>_plot.py path next to the CSV."""
    csv_path = emit_csv(tmp_path / "gaps.csv", "gap-table", _gap_rows())
    script = emit_plot_script(csv_path)
    assert script == tmp_path / "gaps_plot.py"
    text = script.read_text(encoding="utf-8")
    ast.parse(text)
    assert "'gaps.csv'" in text
    assert "loglog" in text


def test_emit_plot_script_relative_path(tmp_path):
    """Test that a script in another directory refers to the CSV relatively."""
    csv_path = emit_csv(tmp_path / "data" / "gaps.csv", "gap-table", _gap_rows())
    (tmp_path / "plots").mkdir()
    script = emit_plot_script(csv_path, tmp_path / "plots" / "gaps.py")
    text = script.read_text(encoding="utf-8")
    assert "'../data/gaps.csv'" in text or "'..\\\\data\\\\gaps.csv'" in text


def test_emit_plot_script_empty_csv(tmp_path):
    """Test the warning comment for a CSV without data rows."""
    csv_path = emit_csv(tmp_path / "empty.csv", "constrained", [])
    text = emit_plot_script(csv_path).read_text(encoding="utf-8")
    assert "# WARNING: the CSV had no data rows" in text
    ast.parse(text)


def test_emit_plot_script_unknown_csv(tmp_path):
    """Test that a foreign CSV raises ConfigError."""
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        emit_plot_script(path)
