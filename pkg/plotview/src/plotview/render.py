"""Render experiment result CSVs as error-vs-samples figures.

Input is the harness CSV contract: header
`run_idx,n,estimator,error,samples_total,branch`, one row per
(run, n, estimator).  Each estimator becomes one curve (mean over runs per
n) with a shaded +/- one standard deviation band.  The input file is never
modified.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CSV_HEADER = "run_idx,n,estimator,error,samples_total,branch"

# fixed estimator -> color map for cross-figure comparability; any other
# estimator name gets a deterministic fallback color by sorted order
CURVE_COLORS = {"TestAndOptimize": "g", "Empirical": "r"}
FALLBACK_COLORS = ("b", "m", "c", "y", "k")


@dataclass(frozen=True)
class PlotSpec:
    input_csv: str
    output_path: str
    title: str = ""
    y_label: str = "$\\ell_2$ error"
    dpi: int = 300


@dataclass(frozen=True)
class Row:
    run_idx: int
    n: int
    estimator: str
    error: float


@dataclass(frozen=True)
class Curve:
    estimator: str
    n_values: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def read_rows(path: str) -> list[Row]:
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: expected header {CSV_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 columns")
        rows.append(Row(int(parts[0]), int(parts[1]), parts[2], float(parts[3])))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def curve_stats(rows: list[Row]) -> list[Curve]:
    """Per-estimator mean and population std of the error over runs, by n."""
    grouped: dict = {}
    for row in rows:
        grouped.setdefault(row.estimator, {}).setdefault(row.n, []).append(row.error)
    curves = []
    for estimator in sorted(grouped):
        by_n = grouped[estimator]
        n_values = np.array(sorted(by_n))
        errors = [np.asarray(by_n[n]) for n in n_values]
        mean = np.array([e.mean() for e in errors])
        std = np.array([e.std() for e in errors])  # std of one sample is 0
        curves.append(Curve(estimator, n_values, mean, std))
    return curves


def _color_for(estimator: str, fallback_index: int) -> str:
    if estimator in CURVE_COLORS:
        return CURVE_COLORS[estimator]
    return FALLBACK_COLORS[fallback_index % len(FALLBACK_COLORS)]


def render(spec: PlotSpec) -> list[Curve]:
    """Write the figure for spec and return the plotted curves.

    Raises (and writes nothing) on malformed or empty input.
    """
    curves = curve_stats(read_rows(spec.input_csv))
    fig, ax = plt.subplots()
    fallback = 0
    for curve in curves:
        color = _color_for(curve.estimator, fallback)
        if curve.estimator not in CURVE_COLORS:
            fallback += 1
        ax.plot(curve.n_values, curve.mean, label=curve.estimator, color=color)
        ax.fill_between(
            curve.n_values,
            curve.mean - curve.std,
            curve.mean + curve.std,
            color=color,
            alpha=0.5,
        )
    ax.set_xlabel("Number of samples")
    ax.set_ylabel(spec.y_label)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.savefig(spec.output_path, dpi=spec.dpi, bbox_inches="tight")
    plt.close(fig)
    return curves
