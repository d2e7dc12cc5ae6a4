"""Tolerant testers for "mean close to zero" (l2) and "covariance close to
identity" (Frobenius), with their test statistics, sample-count formulas,
and closed-form tail bounds used as test oracles.

Both testers run r majority rounds on disjoint prefixes of the supplied
batch, comparing a per-round statistic against a fixed threshold.  They are
deterministic functions of (config, batch).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray


class Verdict(Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"
    FAIL = "Fail"  # only when the batch is smaller than n * r


GUARANTEE_VOID = "dimension precondition not met: tolerance guarantee is void"


def _rounds(delta: float) -> int:
    """Odd majority-round count ceil(ln(12/delta)), bumped to odd."""
    m = math.ceil(math.log(12.0 / delta))
    return m if m % 2 == 1 else m + 1


def rounds_budget(delta: float) -> int:
    """r_delta = 1 + ceil(ln(12/delta)), the round count the sample-count
    formulas budget for (an upper bound on the odd round count used)."""
    return 1 + math.ceil(math.log(12.0 / delta))


def mean_sample_count(d: int, eps: float, delta: float) -> int:
    """m(d, eps, delta) = ceil(16 sqrt(d) / (3 eps^2)) * r_delta."""
    _validate_count_args(d, eps, delta)
    n = math.ceil(16.0 * math.sqrt(d) / (3.0 * eps * eps))
    return n * rounds_budget(delta)


def cov_sample_count(d: int, eps: float, delta: float) -> int:
    """m'(d, eps, delta) = ceil(3200 d max(1/eps^2, 1/eps, 1)) * r_delta."""
    _validate_count_args(d, eps, delta)
    n = math.ceil(3200.0 * d * max(1.0 / (eps * eps), 1.0 / eps, 1.0))
    return n * rounds_budget(delta)


def _validate_count_args(d, eps, delta):
    # the formulas stay meaningful for any delta with 12/delta > 1; the
    # testers themselves require delta in (0,1)
    if d < 1 or eps <= 0 or not 0 < delta < 12:
        raise ValueError("need d >= 1, eps > 0, delta in (0,12)")


@dataclass(frozen=True)
class TesterConfig:
    """Resolved tolerant-tester parameters: batch size n, odd round count r,
    and threshold tau, for a given dimension and (eps1, eps2, delta)."""

    __test__ = False  # keep pytest from collecting this as a test class

    kind: str  # "mean" or "cov"
    d: int
    eps1: float
    eps2: float
    delta: float
    n: int
    r: int
    tau: float
    warnings: tuple = field(default_factory=tuple)

    @classmethod
    def for_mean(cls, d: int, eps1: float, eps2: float, delta: float) -> "TesterConfig":
        cls._validate(d, eps1, eps2, delta)
        gap = eps2 * eps2 - eps1 * eps1
        n = math.ceil(16.0 * math.sqrt(d) / gap)
        tau = d + n * (eps1 * eps1 + eps2 * eps2) / 2.0
        warnings = ()
        if d < (16.0 * eps2 * eps2 / gap) ** 2:
            warnings = (GUARANTEE_VOID,)
        return cls("mean", d, eps1, eps2, delta, n, _rounds(delta), tau, warnings)

    @classmethod
    def for_cov(cls, d: int, eps1: float, eps2: float, delta: float) -> "TesterConfig":
        cls._validate(d, eps1, eps2, delta)
        gap = eps2 * eps2 - eps1 * eps1
        n = math.ceil(
            3200.0
            * d
            * max(
                1.0 / (eps1 * eps1),
                (eps1 * eps1 / gap) ** 2,
                2.0 * (eps2 / gap) ** 2,
            )
        )
        tau = (eps2 * eps2 + eps1 * eps1) / 2.0
        warnings = ()
        if d < eps2 * eps2:
            warnings = (GUARANTEE_VOID,)
        return cls("cov", d, eps1, eps2, delta, n, _rounds(delta), tau, warnings)

    @staticmethod
    def _validate(d, eps1, eps2, delta):
        if d < 1:
            raise ValueError(f"need d >= 1, got {d}")
        if not (eps2 > eps1 > 0):
            raise ValueError(f"need eps2 > eps1 > 0, got {eps1}, {eps2}")
        if not 0 < delta < 1:
            raise ValueError(f"need delta in (0,1), got {delta}")


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    verdict: Verdict
    round_stats: tuple
    warnings: tuple


def mean_stat(batch) -> float:
    """y_n = || (1/sqrt(n)) sum_i x_i ||_2^2.

    Under N(mu, I_d) this is non-central chi-squared with d degrees of
    freedom and noncentrality n ||mu||^2.
    """
    batch = np.asarray(batch, dtype=float)
    n = batch.shape[0]
    if n < 1:
        raise ValueError("empty batch")
    z = batch.sum(axis=0) / np.sqrt(n)
    return float(z @ z)


def cov_stat(batch) -> float:
    """T_n = 2/(n(n-1)) sum_{i<j} [(x_i.x_j)^2 - ||x_i||^2 - ||x_j||^2 + d],
    computed through the Gram identity
    sum_{i<j} (x_i.x_j)^2 = (||X^T X||_F^2 - sum_i ||x_i||^4) / 2
    in O(n d^2) instead of the O(n^2 d) pairwise sum.
    """
    batch = np.asarray(batch, dtype=float)
    n, d = batch.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    gram = batch.T @ batch
    sq_norms = np.einsum("ij,ij->i", batch, batch)
    cross = (float(np.linalg.norm(gram)) ** 2 - float(np.sum(sq_norms**2))) / 2.0
    norm_pairs = (n - 1) * float(sq_norms.sum())
    pairs = n * (n - 1) / 2.0
    return (2.0 / (n * (n - 1))) * (cross - norm_pairs + d * pairs)


def cov_stat_naive(batch) -> float:
    """O(n^2 d) pairwise evaluation of T_n, kept as the brute-force oracle."""
    batch = np.asarray(batch, dtype=float)
    n, d = batch.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dot = float(batch[i] @ batch[j])
            total += dot * dot - float(batch[i] @ batch[i]) - float(batch[j] @ batch[j]) + d
    return 2.0 * total / (n * (n - 1))


def _majority_rounds(cfg: TesterConfig, batch: NDArray, stat) -> TestResult:
    m = batch.shape[0]
    if batch.ndim != 2 or batch.shape[1] != cfg.d:
        raise ValueError(f"batch dimension {batch.shape} does not match d={cfg.d}")
    if m < cfg.n * cfg.r:
        return TestResult(Verdict.FAIL, (), cfg.warnings)
    accepts = 0
    stats = []
    for i in range(cfg.r):
        chunk = batch[i * cfg.n : (i + 1) * cfg.n]
        value = stat(chunk)
        stats.append(value)
        if value <= cfg.tau:
            accepts += 1
    verdict = Verdict.ACCEPT if accepts > cfg.r // 2 else Verdict.REJECT
    return TestResult(verdict, tuple(stats), cfg.warnings)


def tolerant_mean_test(cfg: TesterConfig, batch) -> TestResult:
    """Majority test of y_n against tau = d + n(eps1^2 + eps2^2)/2 over r
    disjoint prefix rounds.  Accepts when ||mu||_2 <= eps1 and rejects when
    ||mu||_2 >= eps2, each w.p. >= 1 - delta, provided
    d >= (16 eps2^2 / (eps2^2 - eps1^2))^2 (warned otherwise)."""
    if cfg.kind != "mean":
        raise ValueError("config is not a mean-tester config")
    return _majority_rounds(cfg, np.asarray(batch, dtype=float), mean_stat)


def tolerant_cov_test(cfg: TesterConfig, batch) -> TestResult:
    """Majority test of T_n against tau = (eps2^2 + eps1^2)/2 over r disjoint
    prefix rounds.  Accepts when ||Sigma - I||_F <= eps1, rejects when
    >= eps2, each w.p. >= 1 - delta, provided d >= eps2^2 (warned
    otherwise).  The batch must be zero-mean (pair-reduced upstream)."""
    if cfg.kind != "cov":
        raise ValueError("config is not a covariance-tester config")
    return _majority_rounds(cfg, np.asarray(batch, dtype=float), cov_stat)


@dataclass(frozen=True)
class TailBounds:
    upper: float
    lower: float | None


def chisq_tail_bounds(d: int, lam: float, t: float) -> TailBounds:
    """Closed-form tail bounds for the non-central chi-square y ~ chi'^2_d(lam):
    P(y > d + lam + t) <= exp(-d t^2 / (4 (d+2 lam)(d+2 lam+t)))     for t > 0
    P(y < d + lam - t) <= exp(-d t^2 / (4 (d+2 lam)^2))     for 0 < t < d+lam
    The lower bound is None when t >= d + lam (its precondition fails).
    """
    if d < 1 or lam < 0:
        raise ValueError("need d >= 1 and lam >= 0")
    if t <= 0:
        raise ValueError(f"need t > 0, got {t}")
    base = d + 2.0 * lam
    upper = math.exp(-d * t * t / (4.0 * base * (base + t)))
    lower = None
    if t < d + lam:
        lower = math.exp(-d * t * t / (4.0 * base * base))
    return TailBounds(upper=upper, lower=lower)
