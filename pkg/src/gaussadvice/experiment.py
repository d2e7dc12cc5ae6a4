"""Experiment harness: sample-complexity sweeps comparing the advice-aware
constrained estimators against the plain empirical ones, with deterministic
CSV output.

The mean experiment follows the desk-scale protocol: a sparse ground-truth
advice gap with exactly s nonzero entries of magnitude q/s, a grid of
sample counts, and per-(run, N) errors for both estimators computed on the
same sample prefix.  The oracle mode feeds the known l1 radius q to the
constrained estimator; the optional holdout mode picks the radius on an
80/20 split instead.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .estimators import test_and_optimize_mean
from .gauss import GaussianModel, SampleStream, substream
from .linalg import dykstra_project, project_l1_ball, symmetrize

MEAN_ESTIMATOR = "TestAndOptimize"
EMPIRICAL_ESTIMATOR = "Empirical"

CSV_HEADER = "run_idx,n,estimator,error,samples_total,branch"


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "mean-exp"  # mean-exp | cov-exp | pipeline
    d: int = 500
    s: int = 100
    q: float = 0.1
    n_min: int = 10
    n_max: int = 300
    n_step: int = 10
    repeats: int = 10
    seed: int = 314159
    eps: float = 0.25
    delta: float = 0.1
    eta: float = 0.25
    holdout: bool = False
    output_path: str = "results.csv"

    def __post_init__(self):
        if not 0 <= self.s <= self.d:
            raise ValueError(f"need 0 <= s <= d, got s={self.s}, d={self.d}")
        if self.q < 0:
            raise ValueError(f"need q >= 0, got {self.q}")
        if self.n_min > self.n_max or self.n_step < 1:
            raise ValueError("need n_min <= n_max and n_step >= 1")
        if self.repeats < 1:
            raise ValueError("need repeats >= 1")
        if self.mode not in ("mean-exp", "cov-exp", "pipeline"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1, self.n_step)


@dataclass(frozen=True)
class ResultRow:
    run_idx: int
    n: int
    estimator: str
    error: float
    samples_total: int
    branch: str


def build_ground_truth(d: int, s: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Advice-gap vector: exactly s nonzeros of magnitude q/s with uniform
    signs in the first s coordinates; l1 norm exactly q."""
    if not 0 <= s <= d:
        raise ValueError(f"need 0 <= s <= d, got s={s}, d={d}")
    if q < 0:
        raise ValueError(f"need q >= 0, got {q}")
    gap = np.zeros(d)
    if s > 0:
        gap[:s] = (q / s) * rng.choice([-1.0, 1.0], size=s)
    return gap


def _holdout_radius(samples: np.ndarray, rng: np.random.Generator) -> float:
    """Radius picked over a geometric grid by 80/20 split squared error."""
    n = samples.shape[0]
    split = max(1, int(0.8 * n))
    if split == n:
        split = n - 1
    train_mean = samples[:split].mean(axis=0)
    holdout_mean = samples[split:].mean(axis=0)
    top = float(np.abs(train_mean).sum())
    if top == 0.0:
        return 0.0
    radii = top * np.geomspace(1e-3, 1.0, 20)
    errors = [
        float(np.sum((project_l1_ball(train_mean, 0.0, r) - holdout_mean) ** 2))
        for r in radii
    ]
    return float(radii[int(np.argmin(errors))])


def run_mean_experiment(config: ExperimentConfig, progress=None) -> list[ResultRow]:
    """Constrained (oracle r = q, or holdout-selected) vs empirical mean
    estimation over the sample grid; one row per (run, N, estimator)."""
    truth = build_ground_truth(config.d, config.s, config.q, substream(config.seed, "truth"))
    model = GaussianModel(truth)
    rows = []
    for run_idx in range(config.repeats):
        if progress:
            progress(f"mean-exp run {run_idx + 1}/{config.repeats}")
        samples = SampleStream(model, (config.seed, "run", run_idx)).draw(config.n_max)
        holdout_rng = substream(config.seed, "holdout", run_idx)
        for n in config.grid:
            prefix = samples[:n]
            emp = prefix.mean(axis=0)
            radius = _holdout_radius(prefix, holdout_rng) if config.holdout else config.q
            opt = project_l1_ball(emp, 0.0, radius)
            rows.append(
                ResultRow(
                    run_idx,
                    int(n),
                    MEAN_ESTIMATOR,
                    float(np.linalg.norm(opt - truth)),
                    int(n),
                    "oracle" if not config.holdout else "holdout",
                )
            )
            rows.append(
                ResultRow(
                    run_idx,
                    int(n),
                    EMPIRICAL_ESTIMATOR,
                    float(np.linalg.norm(emp - truth)),
                    int(n),
                    "oracle",
                )
            )
    return _sorted_rows(rows)


def run_cov_experiment(config: ExperimentConfig, progress=None) -> list[ResultRow]:
    """Covariance analog in the whitened frame: the truth is I plus a
    nonnegative diagonal perturbation with l1 mass q on the first s cells
    (kept feasible for the spectral-floor constraint), the constrained
    estimator is the Frobenius-projection program with oracle r = q, and
    errors are Frobenius.  samples_total counts raw draws (2 per pair)."""
    d = config.d
    truth = np.eye(d)
    if config.s > 0:
        truth[np.arange(config.s), np.arange(config.s)] += config.q / config.s
    model = GaussianModel(np.zeros(d), truth)
    rows = []
    for run_idx in range(config.repeats):
        if progress:
            progress(f"cov-exp run {run_idx + 1}/{config.repeats}")
        pairs = SampleStream(model, (config.seed, "run", run_idx)).draw_paired(config.n_max)
        for n in config.grid:
            prefix = pairs[:n]
            second_moment = symmetrize(prefix.T @ prefix / int(n))
            if config.q == 0:
                opt = np.eye(d)
            else:
                opt = dykstra_project(second_moment, np.eye(d), r=config.q, floor=1.0)
            rows.append(
                ResultRow(
                    run_idx,
                    int(n),
                    MEAN_ESTIMATOR,
                    float(np.linalg.norm(opt - truth)),
                    2 * int(n),
                    "oracle",
                )
            )
            rows.append(
                ResultRow(
                    run_idx,
                    int(n),
                    EMPIRICAL_ESTIMATOR,
                    float(np.linalg.norm(second_moment - truth)),
                    2 * int(n),
                    "oracle",
                )
            )
    return _sorted_rows(rows)


def run_pipeline_experiment(config: ExperimentConfig, progress=None) -> list[ResultRow]:
    """Full test_and_optimize_mean runs (advice = 0 against the sparse
    ground-truth gap); one row per repeat with the pipeline's own budget."""
    truth = build_ground_truth(config.d, config.s, config.q, substream(config.seed, "truth"))
    model = GaussianModel(truth)
    rows = []
    for run_idx in range(config.repeats):
        if progress:
            progress(f"pipeline run {run_idx + 1}/{config.repeats}")
        stream = SampleStream(model, (config.seed, "run", run_idx))
        report = test_and_optimize_mean(
            config.eps, config.delta, config.eta, np.zeros(config.d), stream
        )
        rows.append(
            ResultRow(
                run_idx,
                report.samples_total,
                MEAN_ESTIMATOR,
                float(np.linalg.norm(report.mean_estimate - truth)),
                report.samples_total,
                report.branch.value,
            )
        )
    return _sorted_rows(rows)


def run_experiment(config: ExperimentConfig, progress=None) -> list[ResultRow]:
    runner = {
        "mean-exp": run_mean_experiment,
        "cov-exp": run_cov_experiment,
        "pipeline": run_pipeline_experiment,
    }[config.mode]
    return runner(config, progress=progress)


def _sorted_rows(rows: list[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.run_idx, r.n, r.estimator))


def format_row(row: ResultRow) -> str:
    return (
        f"{row.run_idx},{row.n},{row.estimator},{row.error:.17g},"
        f"{row.samples_total},{row.branch}"
    )


def write_csv(rows: list[ResultRow], path: str) -> None:
    """Deterministic CSV: fixed header, decimal dot, \\n newlines, UTF-8,
    17 significant digits (round-trip exact)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(CSV_HEADER + "\n")
        for row in rows:
            handle.write(format_row(row) + "\n")


def read_csv(path: str) -> list[ResultRow]:
    """Exact inverse of write_csv."""
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"malformed row at {path}:{lineno}")
        rows.append(
            ResultRow(
                run_idx=int(parts[0]),
                n=int(parts[1]),
                estimator=parts[2],
                error=float(parts[3]),
                samples_total=int(parts[4]),
                branch=parts[5],
            )
        )
    return rows


def sidecar_path(csv_path: str) -> str:
    return csv_path + ".meta.txt"


def write_sidecar(config: ExperimentConfig, path: str) -> None:
    """Config echo next to every CSV, flat key = value plus the version."""
    with open(sidecar_path(path), "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"version = {__version__}\n")
        for item in fields(config):
            handle.write(f"{item.name} = {getattr(config, item.name)}\n")


def aggregate(rows: list[ResultRow]) -> list[tuple[str, int, float, float]]:
    """Per-(estimator, n) mean and population std of the error column."""
    grouped: dict = {}
    for row in rows:
        grouped.setdefault((row.estimator, row.n), []).append(row.error)
    out = []
    for (estimator, n), errors in sorted(grouped.items()):
        arr = np.asarray(errors)
        out.append((estimator, n, float(arr.mean()), float(arr.std())))
    return out


_CONFIG_TYPES = {item.name: item.type for item in fields(ExperimentConfig)}


def parse_config_text(text: str) -> dict:
    """Flat `key = value` format; unknown keys are rejected."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected `key = value`")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _CONFIG_TYPES:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, value)
    return values


def _coerce(key: str, value: str):
    kind = _CONFIG_TYPES[key]
    if kind in ("int", int):
        return int(value)
    if kind in ("float", float):
        return float(value)
    if kind in ("bool", bool):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean for {key}: {value!r}")
    return value


def config_from_sources(file_values: dict, flag_values: dict) -> ExperimentConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return ExperimentConfig(**merged)


def stderr_progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)
