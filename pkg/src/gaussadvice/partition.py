"""Construction and verification of (q, d, k, a, b)-partitioning schemes.

A scheme is a family of index blocks over [d].  For q = 1 every coordinate
must be covered between a and b times; for q = 2 every matrix cell (i, j),
diagonal included, must appear in between a and b of the induced principal
submatrices, where block B covers (i, j) iff {i, j} is a subset of B.
verify_scheme is the single source of truth: every constructor output
passes it before being returned.

Blocks use 0-based indices in memory; the text dump format is 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray


class SchemeConstructionError(RuntimeError):
    """Random construction failed verification retry_limit times."""


@dataclass(frozen=True)
class PartitionScheme:
    blocks: tuple  # tuple of sorted index tuples, 0-based
    q: int
    d: int
    k: int
    a: int
    b: int

    @property
    def w(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    min_cover: int
    max_cover: int


def verify_scheme(scheme: PartitionScheme) -> VerifyResult:
    """Exact per-cell (q=2) or per-index (q=1) coverage counts.

    ok iff every block has size <= k and every count lies in [a, b].
    """
    if scheme.q not in (1, 2):
        raise ValueError(f"unsupported order q={scheme.q}")
    sizes_ok = all(1 <= len(b) <= scheme.k for b in scheme.blocks)
    for block in scheme.blocks:
        if any(not 0 <= i < scheme.d for i in block):
            raise ValueError("block index out of range")
    if scheme.w == 0:
        return VerifyResult(ok=False, min_cover=0, max_cover=0)
    indicator = np.zeros((scheme.w, scheme.d), dtype=np.int64)
    for row, block in enumerate(scheme.blocks):
        indicator[row, list(block)] = 1
    if scheme.q == 1:
        cover = indicator.sum(axis=0)
    else:
        cover = indicator.T @ indicator  # cell (i,j) counted iff {i,j} in block
    lo, hi = int(cover.min()), int(cover.max())
    ok = sizes_ok and lo >= scheme.a and hi <= scheme.b
    return VerifyResult(ok=ok, min_cover=lo, max_cover=hi)


def contiguous_blocks(d: int, k: int) -> PartitionScheme:
    """The q=1 scheme {1..k}, {k+1..2k}, ...; the last block may be short."""
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    blocks = tuple(
        tuple(range(start, min(start + k, d))) for start in range(0, d, k)
    )
    scheme = PartitionScheme(blocks=blocks, q=1, d=d, k=k, a=1, b=1)
    assert verify_scheme(scheme).ok
    return scheme


def pair_scheme_block_count(d: int, k: int) -> int:
    """Number of random blocks to draw: ceil(10 d(d-1) ln d / (k(k-1))),
    floored at 3*ceil(d/k) so a = 1 stays achievable at tiny d."""
    formula = math.ceil(10.0 * d * (d - 1) * math.log(d) / (k * (k - 1)))
    return max(formula, 3 * math.ceil(d / k))


def declared_pair_bound(d: int, k: int) -> int:
    """The construction's declared coverage cap b = ceil(30 (d-1) ln d / (k-1))."""
    return math.ceil(30.0 * (d - 1) * math.log(d) / (k - 1))


def random_pair_scheme(
    d: int, k: int, rng: np.random.Generator, retry_limit: int = 50
) -> tuple[PartitionScheme, int]:
    """Random q=2 scheme: uniform k-subsets drawn with replacement, duplicates
    collapsed, redrawn until verification passes.

    Returns (scheme, retries).  The stored b is the verified empirical
    max_cover (never larger than the declared bound), since downstream
    early-termination uses b multiplicatively.
    """
    if d < 2 or not 2 <= k <= d:
        raise ValueError(f"need 2 <= k <= d and d >= 2, got k={k}, d={d}")
    n_blocks = pair_scheme_block_count(d, k)
    declared_b = declared_pair_bound(d, k)
    for attempt in range(retry_limit):
        seen = set()
        blocks = []
        for _ in range(n_blocks):
            block = tuple(sorted(rng.permutation(d)[:k].tolist()))
            if block not in seen:
                seen.add(block)
                blocks.append(block)
        candidate = PartitionScheme(
            blocks=tuple(blocks), q=2, d=d, k=k, a=1, b=declared_b
        )
        result = verify_scheme(candidate)
        if result.ok:
            scheme = replace(candidate, b=result.max_cover)
            assert verify_scheme(scheme).ok
            return scheme, attempt
    raise SchemeConstructionError(
        f"no verified scheme after {retry_limit} draws (d={d}, k={k})"
    )


def project_batch(batch, block) -> NDArray:
    """Coordinate subset of the samples, order preserved.

    The full block [d] is the identity and returns the batch itself;
    proper subsets come back as copies (fancy indexing).
    """
    batch = np.asarray(batch)
    idx = np.asarray(block, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= batch.shape[1]):
        raise IndexError(f"block index out of range for dimension {batch.shape[1]}")
    if idx.size == batch.shape[1] and np.array_equal(idx, np.arange(batch.shape[1])):
        return batch
    return batch[:, idx]


def dump_scheme(scheme: PartitionScheme) -> str:
    """One block per line, space-separated 1-based indices."""
    return "\n".join(" ".join(str(i + 1) for i in block) for block in scheme.blocks) + "\n"


def load_scheme(text: str, *, q: int, d: int, k: int, a: int, b: int) -> PartitionScheme:
    """Inverse of dump_scheme; the loaded scheme is re-verified."""
    blocks = tuple(
        tuple(sorted(int(tok) - 1 for tok in line.split()))
        for line in text.splitlines()
        if line.strip()
    )
    scheme = PartitionScheme(blocks=blocks, q=q, d=d, k=k, a=a, b=b)
    result = verify_scheme(scheme)
    if not result.ok:
        raise ValueError("loaded scheme fails verification")
    return scheme
