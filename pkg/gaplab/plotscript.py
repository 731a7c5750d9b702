"""Generation of standalone matplotlib scripts for experiment CSVs.

Scripts are produced by text templating only; gaplab never imports matplotlib.
"""

import logging
import os
from pathlib import Path
from typing import Optional, Union

from .csvio import data_rows, parse_csv

logger = logging.getLogger(__name__)

_PREAMBLE = '''"""Plot {title} from {csv_name}. Generated by gaplab."""
{warning}
import csv
import os

import matplotlib.pyplot as plt
import numpy as np

CSV_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), {csv_rel!r})


def load_rows():
    with open(CSV_PATH, encoding="utf-8", newline="") as f:
        return [row for row in csv.DictReader(f) if row["n"] != "summary"]


def as_float(text):
    try:
        return float(text)
    except ValueError:
        return float("nan")


def annotate_slope(ax, n, values, label):
    n, values = np.asarray(n), np.asarray(values)
    keep = np.isfinite(values) & (values > 0)
    if keep.sum() < 3:
        return
    slope, intercept = np.polyfit(np.log(n[keep]), np.log(values[keep]), 1)
    ax.plot(n[keep], np.exp(intercept) * n[keep] ** slope, "--", linewidth=0.8)
    ax.annotate(
        f"{{label}}: slope {{slope:.3f}}",
        xy=(n[keep][-1], values[keep][-1]),
        textcoords="offset points",
        xytext=(-80, 8),
    )

'''

_GAP_BODY = '''
def main():
    rows = load_rows()
    fig, ax = plt.subplots()
    for variant in sorted({row["variant"] for row in rows}):
        series = [row for row in rows if row["variant"] == variant]
        n = [as_float(row["n"]) for row in series]
        gap = [as_float(row["gap"]) for row in series]
        ax.loglog(n, gap, "o-", label=variant)
        annotate_slope(ax, n, gap, variant)
    ax.set_xlabel("n")
    ax.set_ylabel("optimality gap")
    ax.legend()
    fig.savefig(os.path.splitext(CSV_PATH)[0] + "_gap.png", dpi=150)


if __name__ == "__main__":
    main()
'''

_APPROX_BODY = '''
def main():
    rows = load_rows()
    fig, ax = plt.subplots()
    for x in sorted({as_float(row["x"]) for row in rows}):
        series = [row for row in rows if as_float(row["x"]) == x]
        n = [as_float(row["n"]) for row in series]
        residual = [abs(as_float(row["residual"])) for row in series]
        ax.loglog(n, residual, "o-", label=f"x = {x:g}")
        annotate_slope(ax, n, residual, f"x = {x:g}")
    ax.set_xlabel("n")
    ax.set_ylabel("|residual|")
    ax.legend()
    fig.savefig(os.path.splitext(CSV_PATH)[0] + "_residual.png", dpi=150)


if __name__ == "__main__":
    main()
'''

_CONSTRAINED_BODY = '''
def main():
    rows = load_rows()
    fig, ax = plt.subplots()
    n = [as_float(row["n"]) for row in rows]
    server_gap = [as_float(row["server_gap"]) for row in rows]
    ax.semilogx(n, server_gap, "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("square-root minus exact servers")
    fig.savefig(os.path.splitext(CSV_PATH)[0] + "_servers.png", dpi=150)


if __name__ == "__main__":
    main()
'''

TEMPLATES = {
    "gap-table": ("optimality gap against n", _GAP_BODY),
    "approx-check": ("expansion residuals against n", _APPROX_BODY),
    "constrained": ("constrained staffing server gap", _CONSTRAINED_BODY),
}


def render_plot_script(schema: str, csv_rel: str, empty: bool = False) -> str:
    """Script text for a CSV of ``schema`` located at ``csv_rel`` relative to the script."""
    title, body = TEMPLATES[schema]
    warning = "# WARNING: the CSV had no data rows when this script was generated\n" if empty else ""
    return _PREAMBLE.format(
        title=title, csv_name=os.path.basename(csv_rel), csv_rel=csv_rel, warning=warning
    ) + body


def emit_plot_script(
    csv_path: Union[str, Path], out_path: Optional[Union[str, Path]] = None
) -> Path:
    """
    Write a plotting script for an experiment CSV.

    Args:
        csv_path: CSV produced by one of the experiments.
        out_path: Script path; defaults to the CSV path with a ``_plot.py`` suffix.

    Returns:
        Path of the written script.

    Raises:
        ConfigError: If the CSV is unreadable or matches no known schema.
    """
    csv_path = Path(csv_path)
    schema, rows = parse_csv(csv_path)
    empty = not data_rows(rows)
    if empty:
        logger.warning("%s has no data rows; generating the script anyway", csv_path)
    out = Path(out_path) if out_path is not None else csv_path.with_name(csv_path.stem + "_plot.py")
    csv_rel = os.path.relpath(csv_path.resolve(), out.resolve().parent)
    out.write_text(render_plot_script(schema, csv_rel, empty), encoding="utf-8", newline="\n")
    return out
