"""Seeded multivariate Gaussian sampling with draw accounting, the pairing
reduction to zero mean, empirical estimators, and closed-form distribution
distances.

Streams are single-owner: one consumer per stream, draws mutate only the
drawn counter and the generator state.  Parallel trials use independent
substreams keyed by (seed, trial, phase); see :func:`substream`.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .linalg import symmetrize

SQRT2 = np.sqrt(2.0)

# eigenvalues of a covariance below this fraction of its spectral norm are
# treated as zero and sampling proceeds in the reduced eigenspace
_RANK_TOL = 1e-12


def _seed_words(parts) -> list[int]:
    words = []
    for part in parts:
        if isinstance(part, (tuple, list)):
            words.extend(_seed_words(part))
        elif isinstance(part, str):
            words.append(zlib.crc32(part.encode("utf-8")))
        else:
            words.append(int(part))
    return words


def substream(seed, *ids) -> np.random.Generator:
    """Deterministic generator for substream (seed, *ids).

    Built on SeedSequence-keyed PCG64 so independent trials and phases get
    reproducible, statistically independent streams.  String ids (phase
    names) are hashed to stable words.
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(_seed_words((seed, *ids))))
    )


class GaussianModel:
    """N(mean, covariance); covariance=None selects the identity fast path.

    The covariance must be exactly symmetric and PSD up to round-off:
    eigenvalues below -1e-10 * ||cov||_2 raise, small negatives are clamped
    to zero for sampling.
    """

    def __init__(self, mean, covariance=None):
        self.mean = np.asarray(mean, dtype=float)
        if self.mean.ndim != 1 or self.mean.size < 1:
            raise ValueError("mean must be a nonempty vector")
        if not np.all(np.isfinite(self.mean)):
            raise ValueError("mean has non-finite entries")
        if covariance is None:
            self.covariance = None
        else:
            cov = np.asarray(covariance, dtype=float)
            if cov.shape != (self.mean.size, self.mean.size):
                raise ValueError("covariance shape mismatch")
            if not np.array_equal(cov, cov.T):
                raise ValueError("covariance is not exactly symmetric")
            if not np.all(np.isfinite(cov)):
                raise ValueError("covariance has non-finite entries")
            spectral = float(np.max(np.abs(np.linalg.eigvalsh(cov)))) if cov.size else 0.0
            if float(np.linalg.eigvalsh(cov)[0]) < -1e-10 * spectral:
                raise np.linalg.LinAlgError("covariance is not PSD")
            self.covariance = cov
        self._factor = None

    @property
    def dim(self) -> int:
        return self.mean.size

    def dense_covariance(self) -> NDArray:
        if self.covariance is None:
            return np.eye(self.dim)
        return self.covariance

    def _sampling_factor(self):
        """Matrix L with L L^T = clamped covariance, or None for identity."""
        if self.covariance is None:
            return None
        if self._factor is None:
            try:
                self._factor = np.linalg.cholesky(self.covariance)
            except np.linalg.LinAlgError:
                # semidefinite case: clamp tiny eigenvalues, sample in the
                # reduced eigenspace
                vals, vecs = np.linalg.eigh(self.covariance)
                vals = np.where(vals < _RANK_TOL * max(vals[-1], 0.0), 0.0, vals)
                self._factor = vecs * np.sqrt(vals)
        return self._factor

    def same_distribution(self, other: "GaussianModel") -> bool:
        if not np.array_equal(self.mean, other.mean):
            return False
        a, b = self.covariance, other.covariance
        if a is None and b is None:
            return True
        return np.array_equal(self.dense_covariance(), other.dense_covariance())


class SampleStream:
    """Budget-accounting source of i.i.d. draws from a Gaussian model.

    Identical (model, seed) yields identical draw sequences; drawn_count
    equals the total number of vectors handed out.  seed may be an int or
    a tuple of ints (substream id).
    """

    def __init__(self, model: GaussianModel, seed):
        self.model = model
        self.seed = seed
        ids = seed if isinstance(seed, tuple) else (seed,)
        self._rng = substream(*ids)
        self.drawn_count = 0

    def draw(self, n: int) -> NDArray:
        """n fresh i.i.d. draws, shape (n, d)."""
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        z = self._rng.standard_normal((n, self.model.dim))
        factor = self.model._sampling_factor()
        if factor is not None:
            z = z @ factor.T
        self.drawn_count += n
        if not self.model.mean.any():
            return z
        return z + self.model.mean

    def draw_paired(self, n_pairs: int, chunk: int = 1 << 19, transform=None) -> NDArray:
        """n_pairs zero-mean draws via the pairing reduction, optionally
        post-multiplied by transform^T.

        Consumes 2*n_pairs raw draws (all counted) in chunks.  The mean
        cancels exactly in the pairing, so the covariance factor and the
        caller's transform fuse into a single matrix applied to the paired
        standard normals.
        """
        if n_pairs < 1:
            raise ValueError(f"need n_pairs >= 1, got {n_pairs}")
        factor = self.model._sampling_factor()
        combined = factor
        if transform is not None:
            transform = np.asarray(transform, dtype=float)
            combined = transform if factor is None else transform @ factor
        out = np.empty((n_pairs, self.model.dim))
        done = 0
        while done < n_pairs:
            take = min(chunk, n_pairs - done)
            z = self._rng.standard_normal((2 * take, self.model.dim))
            self.drawn_count += 2 * take
            paired = (z[1::2] - z[0::2]) / SQRT2
            out[done : done + take] = paired if combined is None else paired @ combined.T
            done += take
        return out


def pair_to_zero_mean(batch) -> NDArray:
    """Difference pairing (x_2i - x_{2i-1}) / sqrt(2) of consecutive rows.

    Each output is N(0, Sigma) whatever the mean is.  Requires an even
    batch.
    """
    batch = np.asarray(batch, dtype=float)
    if batch.shape[0] % 2 != 0:
        raise ValueError("pairing needs an even number of samples")
    return (batch[1::2] - batch[0::2]) / SQRT2


def empirical_mean(batch) -> NDArray:
    batch = np.asarray(batch, dtype=float)
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    return batch.mean(axis=0)


def empirical_cov_paired(batch) -> NDArray:
    """Covariance from difference pairs: (1/2n) sum_i d_i d_i^T with
    d_i = x_2i - x_{2i-1}.  Unbiased for Sigma; always symmetric PSD."""
    batch = np.asarray(batch, dtype=float)
    if batch.shape[0] < 2 or batch.shape[0] % 2 != 0:
        raise ValueError("need an even batch of at least 2 samples")
    diffs = batch[1::2] - batch[0::2]
    return symmetrize(diffs.T @ diffs / batch.shape[0])


def kl_gaussians(p: GaussianModel, q: GaussianModel) -> float:
    """Exact KL divergence between Gaussians,
    (Tr(Sq^-1 Sp) - d + delta^T Sq^-1 delta + ln det Sq/det Sp) / 2.
    """
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    if p.same_distribution(q):
        return 0.0
    d = p.dim
    sp = p.dense_covariance()
    sq = q.dense_covariance()
    try:
        sq_inv_sp = np.linalg.solve(sq, sp)
        delta = q.mean - p.mean
        quad = float(delta @ np.linalg.solve(sq, delta))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("covariance of Q is singular") from exc
    sign_q, logdet_q = np.linalg.slogdet(sq)
    if sign_q <= 0:
        raise np.linalg.LinAlgError("covariance of Q is singular")
    sign_p, logdet_p = np.linalg.slogdet(sp)
    logdet_p = logdet_p if sign_p > 0 else -np.inf
    return 0.5 * (float(np.trace(sq_inv_sp)) - d + quad + logdet_q - logdet_p)


def tv_upper_via_pinsker(kl: float) -> float:
    """Pinsker: d_TV <= sqrt(d_KL / 2), clamped to 1."""
    if kl < 0:
        raise ValueError(f"KL must be nonnegative, got {kl}")
    return min(1.0, float(np.sqrt(kl / 2.0)))


@dataclass(frozen=True)
class DistanceReport:
    kl: float
    tv_upper: float


def distance_report(p: GaussianModel, q: GaussianModel) -> DistanceReport:
    kl = kl_gaussians(p, q)
    return DistanceReport(kl=kl, tv_upper=tv_upper_via_pinsker(kl))
