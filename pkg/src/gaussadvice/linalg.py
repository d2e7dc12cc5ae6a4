"""Dense symmetric linear algebra: norms, eigendecomposition, and the three
projection primitives the constrained estimators are built on.

Vectors and matrices are plain float64 numpy arrays.  Matrix arguments must
be exactly symmetric; anything assembled from asymmetric arithmetic should
go through :func:`symmetrize` first.  All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


class ConvergenceError(RuntimeError):
    """Alternating projections exhausted max_iter.

    Carries the last iterate and its feasibility residual so callers can
    decide whether the partial answer is still usable.
    """

    def __init__(self, message: str, last_iterate: NDArray, residual: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


def symmetrize(m: NDArray) -> NDArray:
    return 0.5 * (m + m.T)


def _as_square(m) -> NDArray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.array_equal(m, m.T):
        raise ValueError("matrix is not exactly symmetric")
    return m


@dataclass(frozen=True)
class Norms:
    l1_entrywise: float
    l2: float
    spectral: float
    linf: float


def norms(a) -> Norms:
    """All four norms of a vector or symmetric matrix.

    For matrices l1_entrywise is the entrywise l1 norm of vec(a), l2 the
    Frobenius norm, spectral the largest absolute eigenvalue, and linf the
    largest absolute entry.  For vectors spectral coincides with l2.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries")
    flat = np.abs(a.ravel())
    l1 = float(flat.sum())
    l2 = float(np.linalg.norm(a.ravel()))
    linf = float(flat.max())
    if a.ndim == 1:
        spectral = l2
    else:
        _as_square(a)
        spectral = float(np.max(np.abs(np.linalg.eigvalsh(a))))
    return Norms(l1_entrywise=l1, l2=l2, spectral=spectral, linf=linf)


@dataclass(frozen=True)
class EigenPair:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending,
    eigenvectors as orthonormal columns."""

    values: NDArray
    vectors: NDArray

    def reconstruct(self) -> NDArray:
        return symmetrize((self.vectors * self.values) @ self.vectors.T)


def eigh_sym(m) -> EigenPair:
    """Symmetric eigendecomposition (LAPACK), ascending eigenvalues."""
    m = _as_square(m)
    values, vectors = np.linalg.eigh(m)
    return EigenPair(values=values, vectors=vectors)


def project_l1_ball(v, center, r: float) -> NDArray:
    """Euclidean projection of v onto {x : ||x - center||_1 <= r}.

    Sort-based exact method, O(d log d).  If v is already feasible it is
    returned unchanged; r = 0 returns the center.
    """
    v = np.asarray(v, dtype=float)
    center = np.broadcast_to(np.asarray(center, dtype=float), v.shape)
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    u = v - center
    a = np.abs(u)
    if a.sum() <= r:
        return v.copy()
    if r == 0:
        return center.copy()
    s = np.sort(a)[::-1]
    css = np.cumsum(s)
    j = np.arange(1, s.size + 1)
    # >= keeps rho well-defined when r underflows against the entries; at an
    # exact tie the rho-th coordinate shrinks to zero either way
    rho = int(np.nonzero(s >= (css - r) / j)[0].max()) + 1
    theta = (css[rho - 1] - r) / rho
    return center + np.sign(u) * np.maximum(a - theta, 0.0)


def project_psd_floor(m, floor: float) -> NDArray:
    """Frobenius projection onto {A symmetric : A >= floor * I}.

    Eigendecomposes m and raises every eigenvalue below the floor to it.
    """
    ep = eigh_sym(m)
    clamped = np.maximum(ep.values, floor)
    return symmetrize((ep.vectors * clamped) @ ep.vectors.T)


def dykstra_project(
    s,
    center,
    r: float,
    floor: float,
    tol: float = 1e-8,
    max_iter: int = 100000,
    feasibility_tol: float = 1e-6,
) -> NDArray:
    """Frobenius projection of s onto the intersection
    {A >= floor*I} and {||vec(A - center)||_1 <= r}
    via Dykstra's alternating projections.

    The center must satisfy lambda_min(center) >= floor so the intersection
    is nonempty.  Iterates until the point moves less than tol in Frobenius
    norm between sweeps, then polishes with plain alternating projections
    until the spectral residual drops below feasibility_tol (the l1 side is
    exact after the final l1 step).  The polish moves the point by at most
    a few times the remaining residual, so optimality is preserved at the
    feasibility_tol scale.
    """
    s = _as_square(s)
    center = _as_square(center)
    if center.shape != s.shape:
        raise ValueError("center shape mismatch")
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    center_min = float(np.linalg.eigvalsh(center)[0])
    if center_min < floor - 1e-12 * max(1.0, abs(floor)):
        raise ValueError("center is not feasible: lambda_min(center) < floor")
    if r == 0:
        return center.copy()

    x = s.copy()
    p = np.zeros_like(s)
    q = np.zeros_like(s)
    converged = False
    for _ in range(max_iter):
        x_prev = x
        y = project_psd_floor(x + p, floor)
        p = x + p - y
        x = project_l1_ball((y + q).ravel(), center.ravel(), r).reshape(s.shape)
        q = y + q - x
        if float(np.linalg.norm(x - x_prev)) <= tol:
            converged = True
            break
    residual = max(0.0, floor - float(np.linalg.eigvalsh(symmetrize(x))[0]))
    if converged:
        # dual increments crawl when the solution sits on the spectral
        # boundary; a handful of plain alternating sweeps removes the
        # leftover infeasibility without leaving the tol-neighbourhood
        for _ in range(200):
            if residual <= 1e-3 * feasibility_tol:
                break
            x = project_l1_ball(
                project_psd_floor(x, floor).ravel(), center.ravel(), r
            ).reshape(s.shape)
            residual = max(0.0, floor - float(np.linalg.eigvalsh(symmetrize(x))[0]))
        if residual <= feasibility_tol:
            return symmetrize(x)
    raise ConvergenceError(
        f"Dykstra did not converge within {max_iter} iterations "
        f"(spectral residual {residual:.3e})",
        last_iterate=symmetrize(x),
        residual=residual,
    )
