"""End-to-end learners with advice: the test-then-optimize mean and
covariance pipelines, the constrained optimizers they dispatch to, the
preconditioner, and per-phase sample accounting.

Both pipelines spend a gap-test budget first (plus, for covariance, an
up-front mean-estimation budget), then branch: accept the advice outright,
run the l1-constrained optimizer with the certified radius, or fall back
to the plain empirical estimator.  Every sample drawn from the stream is
attributed to a phase in the returned report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .approxl1 import L1Outcome, L1Variant, approx_l1_mean, level_schedule, vectorized_approx_l1
from .gauss import SampleStream, empirical_cov_paired, empirical_mean, substream
from .linalg import dykstra_project, eigh_sym, project_l1_ball, symmetrize
from .partition import random_pair_scheme
from .testers import cov_sample_count, mean_sample_count


class Branch(Enum):
    ADVICE_EXACT = "AdviceExact"
    OPTIMIZED = "Optimized"
    EMPIRICAL_FALLBACK = "EmpiricalFallback"
    EARLY_TERMINATION = "EarlyTermination"


@dataclass(frozen=True)
class EstimatorReport:
    mean_estimate: NDArray
    branch: Branch
    samples_by_phase: dict
    cov_estimate: NDArray | None = None
    lambda_: float | None = None
    warnings: tuple = field(default_factory=tuple)

    @property
    def samples_total(self) -> int:
        return sum(self.samples_by_phase.values())


@dataclass(frozen=True)
class Preconditioner:
    """A = sqrt(k) P_small + P_big built from d zero-mean samples, scaling up
    the small-eigenvalue subspace of the empirical covariance so that
    lambda_min(A Sigma A) >= 1 with high probability."""

    matrix: NDArray
    k_scale: float
    small_indices: tuple

    def inverse(self) -> NDArray:
        return np.linalg.inv(self.matrix)


def constrained_mean_lasso(batch, r: float) -> NDArray:
    """argmin_{||beta||_1 <= r} sum_i ||y_i - beta||^2.

    The objective equals n ||beta - ybar||^2 + const, so the minimizer is
    the l1-ball projection of the batch mean.
    """
    return project_l1_ball(empirical_mean(batch), 0.0, r)


def covariance_program(batch, r: float, tol: float = 1e-8, max_iter: int = 10000) -> NDArray:
    """argmin over {A psd, ||vec(A - I)||_1 <= r, lambda_min(A) >= 1} of
    sum_i ||A - y_i y_i^T||_F^2, for zero-mean samples y_i.

    The objective equals n ||A - S||_F^2 + const with S the second-moment
    matrix, so the program is the Frobenius projection of S onto the
    constraint set, computed with Dykstra's alternating projections.
    """
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[0] < 1:
        raise ValueError("need a nonempty sample batch")
    d = batch.shape[1]
    second_moment = symmetrize(batch.T @ batch / batch.shape[0])
    return dykstra_project(
        second_moment, np.eye(d), r=r, floor=1.0, tol=tol, max_iter=max_iter
    )


def precondition(batch, delta: float, c0: float = 1.0) -> Preconditioner:
    """Preconditioner from exactly d zero-mean samples.

    Eigendecomposes the empirical covariance, collects the directions with
    eigenvalue below 1 and rescales them by sqrt(k) with
    k = (1 + c0 sqrt((d + ln(1/delta))/d)) / lambda_hat_1.
    """
    batch = np.asarray(batch, dtype=float)
    d = batch.shape[1]
    if batch.shape[0] != d:
        raise ValueError(f"preconditioning uses exactly d={d} samples, got {batch.shape[0]}")
    emp = symmetrize(batch.T @ batch / d)
    ep = eigh_sym(emp)
    lam1 = float(ep.values[0])
    if lam1 <= 1e-12 * max(float(ep.values[-1]), 1.0):
        raise np.linalg.LinAlgError("empirical covariance is rank deficient")
    small = tuple(int(i) for i in np.nonzero(ep.values < 1.0)[0])
    k_scale = (1.0 + c0 * math.sqrt((d + math.log(1.0 / delta)) / d)) / lam1
    scale = np.ones(d)
    scale[list(small)] = math.sqrt(k_scale)
    matrix = symmetrize((ep.vectors * scale) @ ep.vectors.T)
    return Preconditioner(matrix=matrix, k_scale=k_scale, small_indices=small)


def conjugation_invariance_gap(a, sigma, sigma_tilde) -> tuple[float, float]:
    """Both sides of the preconditioner's invariance identity
    ||(A St A)^-1/2 A S A (A St A)^-1/2 - I|| = ||St^-1/2 S St^-1/2 - I||
    (spectral norms), exposed for test use."""
    asa = symmetrize(a @ sigma @ a)
    asta = symmetrize(a @ sigma_tilde @ a)
    lhs = _spectral_norm(_whiten(asa, asta) - np.eye(a.shape[0]))
    rhs = _spectral_norm(_whiten(sigma, sigma_tilde) - np.eye(a.shape[0]))
    return lhs, rhs


def early_termination_check(outcome: L1Outcome, eps: float) -> bool:
    """True iff 4 b sum_j o_j^2 <= eps^2, certifying the identity (i.e. the
    advice) as an eps-good covariance without running the optimizer."""
    if outcome.variant is not L1Variant.LAMBDA:
        raise ValueError("early termination needs a Lambda outcome with block levels")
    level_sq = sum(level * level for level in outcome.block_levels)
    return 4.0 * outcome.scheme.b * level_sq <= eps * eps


def _spectral_norm(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(symmetrize(m)))))


def _sym_power(m, power: float) -> NDArray:
    """m^power for symmetric positive-definite m."""
    ep = eigh_sym(np.asarray(m, dtype=float))
    floor = 1e-12 * max(float(ep.values[-1]), 0.0)
    if float(ep.values[0]) <= floor:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return symmetrize((ep.vectors * ep.values**power) @ ep.vectors.T)


def _whiten(sigma, by) -> NDArray:
    inv_sqrt = _sym_power(by, -0.5)
    return symmetrize(inv_sqrt @ sigma @ inv_sqrt)


def empirical_mean_budget(d: int, eps: float, delta: float, c_emp: float) -> int:
    """Fresh-sample budget for the eps-good empirical mean,
    ceil(c_emp (d + sqrt(d ln(1/delta))) / eps^2)."""
    return math.ceil(c_emp * (d + math.sqrt(d * math.log(1.0 / delta))) / (eps * eps))


def empirical_cov_budget(d: int, eps: float, delta: float, c_emp: float) -> int:
    """Raw-sample budget for the eps-good paired empirical covariance,
    ceil(c_emp (d^2 + d ln(1/delta)) / eps^2), rounded up to even."""
    n = math.ceil(c_emp * (d * d + d * math.log(1.0 / delta)) / (eps * eps))
    return n + n % 2


def lasso_budget(lam: float, d: int, eps: float, delta: float) -> int:
    """Fresh-sample budget for the radius-lam constrained LASSO,
    ceil(2 lam^2 ln(2d/delta) / eps^4)."""
    return max(1, math.ceil(2.0 * lam * lam * math.log(2.0 * d / delta) / eps**4))


def covariance_program_budget(lam: float, d: int, eps: float, delta: float) -> int:
    """Paired-sample budget for the radius-lam covariance program,
    ceil(2 lam^2 ln(2d^2/delta) / eps^4)."""
    return max(1, math.ceil(2.0 * lam * lam * math.log(2.0 * d * d / delta) / eps**4))


def test_and_optimize_mean(
    eps: float,
    delta: float,
    eta: float,
    advice,
    stream: SampleStream,
    c_emp: float = 8.0,
    ok_scale: float | None = None,
) -> EstimatorReport:
    """Advice-aware mean estimation for N(mu, I_d).

    Draws m(k, alpha, delta') samples, shifts them by -advice, and runs the
    blockwise l1 gap estimate with k = ceil(d^(4 eta)),
    alpha = eps d^-((1-3 eta)/2), zeta = 4 eps sqrt(d).  Branches:

    * OK: the advice itself is returned (no estimation samples).
    * Lambda < eps sqrt(d): constrained LASSO around the advice with
      radius lambda on ceil(2 lambda^2 ln(2d/delta)/eps^4) fresh samples.
    * otherwise: plain empirical mean on the c_emp-scaled budget.

    ok_scale defaults to 2 sqrt(w), under which OK means every block
    accepted at the base level alpha; that certifies
    ||mu - advice||_2 <= 2 sqrt(w) alpha <= 2 eps d^(-eta/2) <= 2 eps.
    Pass 1.0 for the verbatim (never satisfiable) condition.
    """
    if not 0 <= eta <= 0.25:
        raise ValueError(f"need 0 <= eta <= 1/4, got {eta}")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("need eps, delta in (0,1)")
    advice = np.asarray(advice, dtype=float)
    d = stream.model.dim
    if advice.shape != (d,):
        raise ValueError("advice dimension mismatch")
    drawn_before = stream.drawn_count

    k = min(math.ceil(d ** (4.0 * eta)), d)
    alpha = eps * d ** (-(1.0 - 3.0 * eta) / 2.0)
    zeta = 4.0 * eps * math.sqrt(d)
    w = math.ceil(d / k)
    n_levels = len(level_schedule(alpha, zeta))
    delta_prime = delta / (w * n_levels)
    if ok_scale is None:
        ok_scale = 2.0 * math.sqrt(w)

    gap_budget = mean_sample_count(k, alpha, delta_prime)
    shifted = stream.draw(gap_budget) - advice
    phases = {"advice_test": gap_budget}
    outcome = approx_l1_mean(delta, k, alpha, zeta, shifted, ok_scale=ok_scale)

    if outcome.variant is L1Variant.OK:
        branch, estimate, lam = Branch.ADVICE_EXACT, advice.copy(), None
        phases["estimation"] = 0
    elif outcome.variant is L1Variant.LAMBDA and outcome.lambda_ < eps * math.sqrt(d):
        lam = outcome.lambda_
        n = lasso_budget(lam, d, eps, delta)
        fresh = stream.draw(n) - advice
        estimate = advice + constrained_mean_lasso(fresh, lam)
        branch = Branch.OPTIMIZED
        phases["estimation"] = n
    else:
        lam = outcome.lambda_ if outcome.variant is L1Variant.LAMBDA else None
        n = empirical_mean_budget(d, eps, delta, c_emp)
        estimate = empirical_mean(stream.draw(n))
        branch = Branch.EMPIRICAL_FALLBACK
        phases["estimation"] = n

    assert stream.drawn_count - drawn_before == sum(phases.values())
    return EstimatorReport(
        mean_estimate=estimate,
        branch=branch,
        samples_by_phase=phases,
        lambda_=lam,
        warnings=outcome.warnings,
    )


def test_and_optimize_covariance(
    eps: float,
    delta: float,
    eta: float,
    advice,
    stream: SampleStream,
    use_preconditioner: bool = False,
    c_emp: float = 8.0,
    scheme_seed=0,
) -> EstimatorReport:
    """Advice-aware covariance (and mean) estimation for N(mu, Sigma).

    Samples are whitened by advice^-1/2 and pair-reduced to zero mean, so
    the advice becomes the identity.  A random q=2 partitioning scheme
    drives the vectorized l1 gap estimate with k = ceil(d^eta),
    alpha = eps d^-((2-eta)/2), zeta = 4 eps d.  Branches:

    * early termination (4 b sum o_j^2 <= eps^2): the advice is returned.
    * Lambda < eps d: Frobenius-projection program with radius lambda on
      ceil(2 lambda^2 ln(2d^2/delta)/eps^4) fresh pairs.
    * otherwise: paired empirical covariance on the c_emp-scaled budget.

    The mean is always estimated from its own up-front budget.  Estimates
    are un-whitened before being returned.  With use_preconditioner the
    whitened pairs are additionally conjugated by the preconditioner built
    from d extra pairs (2d raw samples).
    """
    if not 0 <= eta <= 1:
        raise ValueError(f"need 0 <= eta <= 1, got {eta}")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("need eps, delta in (0,1)")
    advice = np.asarray(advice, dtype=float)
    d = stream.model.dim
    if advice.shape != (d, d) or not np.array_equal(advice, advice.T):
        raise ValueError("advice must be a symmetric d x d matrix")
    advice_sqrt = _sym_power(advice, 0.5)  # raises on non-PD advice
    advice_inv_sqrt = _sym_power(advice, -0.5)
    drawn_before = stream.drawn_count

    # the mean is always estimated from its own budget
    n_mean = empirical_mean_budget(d, eps, delta, c_emp)
    mean_estimate = empirical_mean(stream.draw(n_mean))
    phases = {"mean_estimation": n_mean}

    pre_matrix = np.eye(d)
    if use_preconditioner:
        pre_pairs = stream.draw_paired(d, transform=advice_inv_sqrt)
        pre_matrix = precondition(pre_pairs, delta).matrix
        phases["preconditioning"] = 2 * d

    k = min(math.ceil(d**eta), d)
    alpha = eps * d ** (-(2.0 - eta) / 2.0)
    zeta = 4.0 * eps * d
    scheme, _ = random_pair_scheme(d, max(k, 2), substream(stream.seed, "scheme", scheme_seed))
    n_levels = len(level_schedule(alpha, zeta))
    delta_prime = delta / (scheme.w * n_levels)

    gap_pairs = cov_sample_count(max(k, 2), alpha, delta_prime)
    whitener = pre_matrix @ advice_inv_sqrt
    gap_batch = stream.draw_paired(gap_pairs, transform=whitener)
    phases["advice_test"] = 2 * gap_pairs
    outcome = vectorized_approx_l1(delta, max(k, 2), alpha, zeta, gap_batch, scheme)

    def unwhiten(w_est):
        pre_inv = np.linalg.inv(pre_matrix) if use_preconditioner else np.eye(d)
        inner = symmetrize(pre_inv @ w_est @ pre_inv)
        return symmetrize(advice_sqrt @ inner @ advice_sqrt)

    warnings = outcome.warnings
    if outcome.variant is L1Variant.LAMBDA and early_termination_check(outcome, eps):
        branch = Branch.EARLY_TERMINATION
        cov_estimate = unwhiten(np.eye(d))
        lam = outcome.lambda_
        phases["estimation"] = 0
    elif outcome.variant is L1Variant.LAMBDA and outcome.lambda_ < eps * d:
        lam = outcome.lambda_
        n_pairs = covariance_program_budget(lam, d, eps, delta)
        fresh = stream.draw_paired(n_pairs, transform=whitener)
        cov_estimate = unwhiten(covariance_program(fresh, lam))
        branch = Branch.OPTIMIZED
        phases["estimation"] = 2 * n_pairs
    else:
        lam = outcome.lambda_ if outcome.variant is L1Variant.LAMBDA else None
        n_raw = empirical_cov_budget(d, eps, delta, c_emp)
        cov_estimate = empirical_cov_paired(stream.draw(n_raw))
        branch = Branch.EMPIRICAL_FALLBACK
        phases["estimation"] = n_raw

    assert stream.drawn_count - drawn_before == sum(phases.values())
    return EstimatorReport(
        mean_estimate=mean_estimate,
        cov_estimate=cov_estimate,
        branch=branch,
        samples_by_phase=phases,
        lambda_=lam,
        warnings=warnings,
    )
