import math

import numpy as np
import pytest

from gaussadvice.approxl1 import L1Outcome, L1Variant
from gaussadvice.estimators import (
    Branch,
    conjugation_invariance_gap,
    constrained_mean_lasso,
    covariance_program,
    early_termination_check,
    empirical_cov_budget,
    empirical_mean_budget,
    precondition,
    test_and_optimize_covariance as optimize_covariance,
    test_and_optimize_mean as optimize_mean,
)
from gaussadvice.gauss import (
    GaussianModel,
    SampleStream,
    kl_gaussians,
    substream,
    tv_upper_via_pinsker,
)
from gaussadvice.linalg import symmetrize
from gaussadvice.partition import PartitionScheme


class TestConstrainedMeanLasso:
    def test_feasible_mean_unchanged(self):
        batch = np.array([[0.2, 0.1], [0.4, 0.3]])
        np.testing.assert_allclose(constrained_mean_lasso(batch, 2.0), [0.3, 0.2])

    def test_projects_mean(self):
        batch = np.array([[3.0, 1.0], [3.0, 1.0]])
        np.testing.assert_allclose(constrained_mean_lasso(batch, 2.0), [2.0, 0.0], atol=1e-12)

    def test_radius_zero(self):
        batch = np.array([[5.0, -3.0]])
        np.testing.assert_array_equal(constrained_mean_lasso(batch, 0.0), [0.0, 0.0])


class TestCovarianceProgram:
    def test_feasible_second_moment_unchanged(self):
        # S = I + 0.1 e1 e1^T is inside both constraints for r = 1
        target = np.eye(2)
        target[0, 0] = 1.1
        batch = np.array(
            [[np.sqrt(2.2), 0.0], [0.0, np.sqrt(2.0)], [-np.sqrt(2.2), 0.0], [0.0, -np.sqrt(2.0)]]
        )
        out = covariance_program(batch, r=1.0)
        np.testing.assert_allclose(out, target, atol=1e-7)

    def test_clamp_then_shrink(self):
        # second moment diag(0.5, 3) projects to diag(1, 2)
        batch = np.array(
            [[1.0, 0.0], [0.0, np.sqrt(6.0)], [-1.0, 0.0], [0.0, -np.sqrt(6.0)]]
        )
        out = covariance_program(batch, r=1.0)
        np.testing.assert_allclose(out, np.diag([1.0, 2.0]), atol=1e-4)

    def test_objective_no_worse_than_feasible_truth(self):
        rng = substream(410)
        sigma = np.array([[1.3, 0.1], [0.1, 1.2]])  # feasible: l1 gap 0.7, eigs >= 1
        batch = rng.multivariate_normal(np.zeros(2), sigma, size=400)
        out = covariance_program(batch, r=0.7)

        def objective(a):
            return sum(np.linalg.norm(a - np.outer(y, y)) ** 2 for y in batch)

        assert objective(out) <= objective(sigma) + 1e-6 * batch.shape[0]


class TestPrecondition:
    def test_no_upscaling_when_eigenvalues_large(self):
        batch = np.array([[2.0, 0.0], [0.0, 3.0]])  # empirical cov diag(2, 4.5)
        pre = precondition(batch, delta=0.5)
        assert pre.small_indices == ()
        np.testing.assert_allclose(pre.matrix, np.eye(2), atol=1e-12)

    def test_formula_arithmetic(self):
        # empirical eigenvalues (0.25, 4): k = (1 + sqrt((2 + ln 2)/2)) * 4
        batch = np.array([[np.sqrt(0.5), 0.0], [0.0, np.sqrt(8.0)]])
        pre = precondition(batch, delta=0.5, c0=1.0)
        k_expected = (1.0 + math.sqrt((2 + math.log(2.0)) / 2.0)) * 4.0
        assert pre.k_scale == pytest.approx(k_expected)
        np.testing.assert_allclose(
            pre.matrix, np.diag([math.sqrt(k_expected), 1.0]), atol=1e-12
        )

    def test_requires_exactly_d_samples(self):
        with pytest.raises(ValueError):
            precondition(np.zeros((3, 2)), delta=0.5)

    def test_conjugation_invariance(self):
        rng = substream(411)
        for _ in range(20):
            d = 4
            base = rng.standard_normal((d, d))
            sigma = symmetrize(base @ base.T) / d + 0.5 * np.eye(d)
            base2 = rng.standard_normal((d, d))
            sigma_tilde = symmetrize(base2 @ base2.T) / d + 0.5 * np.eye(d)
            batch = rng.multivariate_normal(np.zeros(d), sigma, size=d)
            pre = precondition(batch, delta=0.1)
            lhs, rhs = conjugation_invariance_gap(pre.matrix, sigma, sigma_tilde)
            assert lhs == pytest.approx(rhs, abs=1e-8)


class TestEarlyTermination:
    def _outcome(self, levels, b):
        blocks = tuple((i,) for i in range(len(levels)))
        scheme = PartitionScheme(blocks=blocks, q=2, d=len(levels), k=1, a=1, b=b)
        lam = 2.0 * sum(math.sqrt(1) * level for level in levels)
        return L1Outcome(L1Variant.LAMBDA, lam, tuple(levels), scheme, ())

    def test_uniform_levels_pass(self):
        # 4 b w alpha^2 <= eps^2
        out = self._outcome([0.1] * 4, b=2)
        assert early_termination_check(out, eps=0.8)

    def test_single_huge_level_fails(self):
        out = self._outcome([0.1, 0.1, 5.0], b=1)
        assert not early_termination_check(out, eps=0.8)

    def test_b_doubling_flips_boundary(self):
        # 4 * b * 0.04: b=4 -> 0.64 <= 0.64; b=8 -> 1.28 > 0.64
        out_small = self._outcome([0.2], b=4)
        out_large = self._outcome([0.2], b=8)
        assert early_termination_check(out_small, eps=0.8)
        assert not early_termination_check(out_large, eps=0.8)

    def test_requires_lambda_outcome(self):
        scheme = PartitionScheme(blocks=((0,),), q=2, d=1, k=1, a=1, b=1)
        fail = L1Outcome(L1Variant.FAIL, None, (None,), scheme, ())
        with pytest.raises(ValueError):
            early_termination_check(fail, eps=0.5)


class TestMeanPipeline:
    D, EPS, DELTA, ETA = 256, 0.25, 0.1, 0.25

    def test_perfect_advice(self):
        # branch AdviceExact/Optimized, TV <= eps, and the run's total
        # budget beats what a fallback-branch run would consume
        trials, good = 20, 0
        rng = substream(420)
        mu = rng.standard_normal(self.D) * 0.3
        for trial in range(trials):
            stream = SampleStream(GaussianModel(mu), (421, trial))
            rep = optimize_mean(self.EPS, self.DELTA, self.ETA, mu, stream)
            tv = tv_upper_via_pinsker(
                kl_gaussians(GaussianModel(mu), GaussianModel(rep.mean_estimate))
            )
            fallback_total = rep.samples_by_phase["advice_test"] + empirical_mean_budget(
                self.D, self.EPS, self.DELTA, 8.0
            )
            if (
                rep.branch in (Branch.ADVICE_EXACT, Branch.OPTIMIZED)
                and tv <= self.EPS
                and rep.samples_total < fallback_total
            ):
                good += 1
        assert good >= 0.9 * trials

    def test_garbage_advice_falls_back(self):
        trials, hits = 20, 0
        rng = substream(422)
        mu = rng.standard_normal(self.D) * 0.3
        gap = np.zeros(self.D)
        gap[:64] = 10 * self.EPS * math.sqrt(self.D) / 64  # l1 gap = 10 eps sqrt(d)
        advice = mu - gap
        for trial in range(trials):
            stream = SampleStream(GaussianModel(mu), (423, trial))
            rep = optimize_mean(self.EPS, self.DELTA, self.ETA, advice, stream)
            hits += rep.branch is Branch.EMPIRICAL_FALLBACK
        assert hits >= 0.9 * trials

    def test_lambda_gate_skips_optimizer(self):
        # lambda >= eps sqrt(d) must never reach the optimizer
        rng = substream(424)
        mu = rng.standard_normal(self.D) * 0.3
        gap = np.zeros(self.D)
        gap[:64] = 10 * self.EPS * math.sqrt(self.D) / 64
        stream = SampleStream(GaussianModel(mu), (425, 0))
        rep = optimize_mean(self.EPS, self.DELTA, self.ETA, mu - gap, stream)
        assert rep.branch is Branch.EMPIRICAL_FALLBACK
        assert rep.lambda_ is not None and rep.lambda_ >= self.EPS * math.sqrt(self.D)
        assert rep.samples_by_phase["estimation"] == empirical_mean_budget(
            self.D, self.EPS, self.DELTA, 8.0
        )

    def test_optimized_branch_feasibility(self):
        # d=512, eta=1/4 with strict OK condition: perfect advice lands in
        # the LASSO branch with lambda < eps sqrt(d); the estimate stays
        # l1-feasible around the advice
        d = 512
        rng = substream(426)
        mu = rng.standard_normal(d) * 0.2
        stream = SampleStream(GaussianModel(mu), (427, 0))
        rep = optimize_mean(0.25, 0.1, 0.25, mu, stream, ok_scale=1.0)
        assert rep.branch is Branch.OPTIMIZED
        assert np.abs(rep.mean_estimate - mu).sum() <= rep.lambda_ + 1e-9
        assert rep.lambda_ < 0.25 * math.sqrt(d)

    def test_sample_accounting(self):
        rng = substream(428)
        mu = rng.standard_normal(self.D) * 0.3
        stream = SampleStream(GaussianModel(mu), (429, 0))
        rep = optimize_mean(self.EPS, self.DELTA, self.ETA, mu, stream)
        assert rep.samples_total == stream.drawn_count

    def test_shift_equivariance(self):
        # advice mu~ on N(mu, I) matches zero advice on N(mu - mu~, I)
        # under the same seed, up to fp association error
        rng = substream(430)
        mu = rng.standard_normal(32) * 0.5
        advice = rng.standard_normal(32) * 0.5
        shifted_model = GaussianModel(mu - advice)
        rep_a = optimize_mean(
            0.3, 0.1, 0.2, advice, SampleStream(GaussianModel(mu), (431, 0))
        )
        rep_b = optimize_mean(
            0.3, 0.1, 0.2, np.zeros(32), SampleStream(shifted_model, (431, 0))
        )
        assert rep_a.branch is rep_b.branch
        np.testing.assert_allclose(
            rep_a.mean_estimate - advice, rep_b.mean_estimate, atol=1e-12
        )

    def test_parameter_validation(self):
        stream = SampleStream(GaussianModel(np.zeros(4)), 1)
        with pytest.raises(ValueError):
            optimize_mean(0.25, 0.1, 0.3, np.zeros(4), stream)
        with pytest.raises(ValueError):
            optimize_mean(1.5, 0.1, 0.1, np.zeros(4), stream)


class TestCovariancePipeline:
    D, EPS, DELTA, ETA = 8, 0.5, 0.1, 1.0

    def _random_model(self, rng):
        base = rng.standard_normal((self.D, self.D))
        sigma = symmetrize(base @ base.T) / self.D + 0.5 * np.eye(self.D)
        return GaussianModel(rng.standard_normal(self.D), sigma)

    def test_perfect_advice(self):
        trials, good = 15, 0
        model = self._random_model(substream(440))
        for trial in range(trials):
            stream = SampleStream(model, (441, trial))
            rep = optimize_covariance(
                self.EPS, self.DELTA, self.ETA, model.covariance, stream
            )
            est = GaussianModel(rep.mean_estimate, rep.cov_estimate)
            tv = tv_upper_via_pinsker(kl_gaussians(model, est))
            if rep.branch in (Branch.EARLY_TERMINATION, Branch.OPTIMIZED) and tv <= self.EPS:
                good += 1
        assert good >= 0.9 * trials

    def test_garbage_advice_falls_back(self):
        trials, hits = 15, 0
        model = self._random_model(substream(442))
        advice = model.covariance / 5.0  # truth is 5x the advice
        for trial in range(trials):
            stream = SampleStream(model, (443, trial))
            rep = optimize_covariance(self.EPS, self.DELTA, self.ETA, advice, stream)
            hits += rep.branch is Branch.EMPIRICAL_FALLBACK
        assert hits >= 0.9 * trials

    def test_lambda_gate_matches_branch(self):
        model = self._random_model(substream(444))
        stream = SampleStream(model, (445, 0))
        rep = optimize_covariance(
            self.EPS, self.DELTA, self.ETA, model.covariance / 5.0, stream
        )
        assert rep.branch is Branch.EMPIRICAL_FALLBACK
        assert rep.lambda_ is None or rep.lambda_ >= self.EPS * self.D
        assert rep.samples_by_phase["estimation"] == empirical_cov_budget(
            self.D, self.EPS, self.DELTA, 8.0
        )

    def test_optimized_branch_feasibility(self):
        # a small covariance gap rejects the base level but stays under the
        # lambda gate, exercising the Frobenius-projection branch; the
        # whitened estimate must satisfy the program's constraints
        sigma = np.eye(self.D)
        sigma[0, 0] = 1.3
        advice = np.eye(self.D)
        seen_optimized = 0
        for trial in range(8):
            stream = SampleStream(GaussianModel(np.zeros(self.D), sigma), (446, trial))
            rep = optimize_covariance(self.EPS, self.DELTA, self.ETA, advice, stream)
            if rep.branch is Branch.OPTIMIZED:
                seen_optimized += 1
                whitened = rep.cov_estimate  # advice = I: whitened space is native
                assert np.abs(whitened - np.eye(self.D)).sum() <= rep.lambda_ + 1e-6
                assert np.linalg.eigvalsh(whitened)[0] >= 1.0 - 1e-6
        assert seen_optimized >= 1

    def test_whitening_round_trip(self):
        # advice^(1/2) (advice^(-1/2) Sigma advice^(-1/2)) advice^(1/2) == Sigma
        from gaussadvice.estimators import _sym_power

        rng = substream(447)
        for _ in range(20):
            base = rng.standard_normal((self.D, self.D))
            sigma = symmetrize(base @ base.T) / self.D + 0.2 * np.eye(self.D)
            base2 = rng.standard_normal((self.D, self.D))
            advice = symmetrize(base2 @ base2.T) / self.D + 0.2 * np.eye(self.D)
            half = _sym_power(advice, 0.5)
            inv_half = _sym_power(advice, -0.5)
            rebuilt = half @ (inv_half @ sigma @ inv_half) @ half
            assert np.linalg.norm(rebuilt - sigma) <= 1e-8

    def test_estimate_is_symmetric_psd(self):
        model = self._random_model(substream(451))
        stream = SampleStream(model, (448, 0))
        rep = optimize_covariance(
            self.EPS, self.DELTA, self.ETA, model.covariance, stream
        )
        assert np.array_equal(rep.cov_estimate, rep.cov_estimate.T)
        assert np.linalg.eigvalsh(rep.cov_estimate)[0] >= -1e-8

    def test_sample_accounting_with_preconditioner(self):
        model = self._random_model(substream(449))
        stream = SampleStream(model, (450, 0))
        rep = optimize_covariance(
            self.EPS, self.DELTA, self.ETA, model.covariance, stream, use_preconditioner=True
        )
        assert rep.samples_by_phase["preconditioning"] == 2 * self.D
        assert rep.samples_total == stream.drawn_count

    def test_rejects_non_pd_advice(self):
        stream = SampleStream(GaussianModel(np.zeros(2), np.eye(2)), 1)
        with pytest.raises(np.linalg.LinAlgError):
            optimize_covariance(0.5, 0.1, 1.0, np.zeros((2, 2)), stream)
