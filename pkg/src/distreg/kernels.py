"""RBF kernels, bag mean-embedding Gram matrices, and maximum mean discrepancy.

The kernel throughout is the Gaussian RBF

    k(x, x') = exp(-||x - x'||^2 / (2 sigma^2)),

so entries always lie in (0, 1]. A bag's distribution is represented by the
mean of its kernel feature maps; the dot product between two such mean
embeddings never needs the feature maps explicitly, because

    <mu_b, mu_b'> = (1 / (n_b n_b')) sum_i sum_j k(x_i^b, x_j^b').

Gram assembly is blocked: no kernel block larger than TILE x TILE is ever
materialized, so bags with thousands of instances stay within a fixed memory
budget. Entry sums rely on numpy's pairwise summation, which keeps the
double-sum accurate enough for 1e-12 comparisons against naive loops.
All functions are pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Bag, BagDataset, MultiSourceDataset, canonical_rows, pooled_instances

__all__ = [
    "BagGram",
    "MmdTestResult",
    "RbfParams",
    "bag_gram",
    "bag_mean_kernel_entry",
    "cross_bag_gram",
    "cross_gram",
    "median_heuristic",
    "median_heuristic_bags",
    "mmd_permutation_test",
    "mmd_squared",
    "multisource_bag_gram",
    "rbf_kernel",
]

# Max rows/cols of any materialized kernel block.
TILE = 1024


@dataclass(frozen=True)
class RbfParams:
    """Gaussian RBF length-scale; k(x, x') = exp(-||x - x'||^2 / (2 sigma^2))."""

    sigma: float

    def __post_init__(self) -> None:
        sigma = float(self.sigma)
        if not (np.isfinite(sigma) and sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma!r}")
        object.__setattr__(self, "sigma", sigma)

    @property
    def gamma(self) -> float:
        """Exponential coefficient: gamma = 1 / (2 sigma^2)."""
        return 1.0 / (2.0 * self.sigma * self.sigma)


@dataclass(frozen=True)
class BagGram:
    """Symmetric matrix of mean-embedding dot products between bags."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"bag Gram must be square, got shape {v.shape}")
        asym = float(np.max(np.abs(v - v.T))) if v.size else 0.0
        if asym > 1e-12:
            raise ValueError(f"bag Gram is not symmetric (max asymmetry {asym:g})")
        object.__setattr__(self, "values", v)

    @property
    def n_bags(self) -> int:
        return self.values.shape[0]


def _check_matrix(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {x.shape}")
    return x


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: {a.shape[1]} vs {b.shape[1]}"
        )


def rbf_kernel(x: np.ndarray, x_prime: np.ndarray, params: RbfParams) -> float:
    """Kernel value for a single pair of vectors."""
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != x_prime.shape:
        raise ValueError(f"vector length mismatch: {x.shape[0]} vs {x_prime.shape[0]}")
    diff = x - x_prime
    return float(np.exp(-params.gamma * np.dot(diff, diff)))


def _kernel_tile(
    a: np.ndarray, b: np.ndarray, a_sq: np.ndarray, b_sq: np.ndarray, gamma: float
) -> np.ndarray:
    """Kernel block for two row sets, via the expanded squared-distance form."""
    d2 = a_sq[:, None] + b_sq[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)  # guard tiny negatives from cancellation
    d2 *= -gamma
    return np.exp(d2, out=d2)


def cross_gram(a: np.ndarray, b: np.ndarray, params: RbfParams) -> np.ndarray:
    """Full kernel matrix between the rows of ``a`` (n x d) and ``b`` (m x d)."""
    a = _check_matrix(a, "a")
    b = _check_matrix(b, "b")
    _check_same_dim(a, b)
    gamma = params.gamma
    a_sq = np.einsum("ij,ij->i", a, a)
    b_sq = np.einsum("ij,ij->i", b, b)
    out = np.empty((a.shape[0], b.shape[0]))
    for i0 in range(0, a.shape[0], TILE):
        i1 = min(i0 + TILE, a.shape[0])
        for j0 in range(0, b.shape[0], TILE):
            j1 = min(j0 + TILE, b.shape[0])
            out[i0:i1, j0:j1] = _kernel_tile(
                a[i0:i1], b[j0:j1], a_sq[i0:i1], b_sq[j0:j1], gamma
            )
    return out


def _pair_sum(a: np.ndarray, b: np.ndarray, gamma: float) -> float:
    """Sum of k(a_i, b_j) over all row pairs, streamed one tile at a time."""
    a_sq = np.einsum("ij,ij->i", a, a)
    b_sq = np.einsum("ij,ij->i", b, b)
    parts = []
    for i0 in range(0, a.shape[0], TILE):
        i1 = min(i0 + TILE, a.shape[0])
        for j0 in range(0, b.shape[0], TILE):
            j1 = min(j0 + TILE, b.shape[0])
            tile = _kernel_tile(a[i0:i1], b[j0:j1], a_sq[i0:i1], b_sq[j0:j1], gamma)
            parts.append(tile.sum())
    return float(np.sum(parts))


def bag_mean_kernel_entry(bag_b: Bag, bag_bp: Bag, params: RbfParams) -> float:
    """Mean-embedding dot product between two bags.

    Returns (1 / (n_b n_b')) sum_i sum_j k(x_i, x_j').
    """
    if bag_b.dim != bag_bp.dim:
        raise ValueError(
            f"feature dimension mismatch: {bag_b.dim} vs {bag_bp.dim}"
        )
    total = _pair_sum(
        canonical_rows(bag_b.instances), canonical_rows(bag_bp.instances), params.gamma
    )
    return total / (bag_b.n_instances * bag_bp.n_instances)


def _sorted_instances(data: BagDataset) -> list[np.ndarray]:
    # Canonical row order makes bag sums exactly permutation-invariant.
    return [canonical_rows(b.instances) for b in data.bags]


def _chunk_arrays(arrays: Sequence[np.ndarray]) -> list[tuple[int, int, bool]]:
    """Group consecutive bags into chunks of pooled rows <= TILE.

    Returns (first bag index, one-past-last bag index, oversized) triples.
    A single bag larger than TILE forms its own oversized chunk and is later
    handled by the streaming pair-sum path.
    """
    chunks = []
    start = 0
    rows = 0
    for i, arr in enumerate(arrays):
        n = arr.shape[0]
        if n > TILE:
            if rows > 0:
                chunks.append((start, i, False))
            chunks.append((i, i + 1, True))
            start, rows = i + 1, 0
        elif rows + n > TILE:
            chunks.append((start, i, False))
            start, rows = i, n
        else:
            rows += n
    if rows > 0:
        chunks.append((start, len(arrays), False))
    return chunks


def _chunk_block_sums(
    arrays_a: Sequence[np.ndarray],
    arrays_b: Sequence[np.ndarray],
    ca: tuple[int, int, bool],
    cb: tuple[int, int, bool],
    gamma: float,
) -> np.ndarray:
    """Matrix of per-bag-pair kernel sums for one chunk pair."""
    a0, a1, big_a = ca
    b0, b1, big_b = cb
    if big_a or big_b:
        out = np.empty((a1 - a0, b1 - b0))
        for i in range(a0, a1):
            for j in range(b0, b1):
                out[i - a0, j - b0] = _pair_sum(arrays_a[i], arrays_b[j], gamma)
        return out
    xa = np.concatenate(arrays_a[a0:a1], axis=0)
    xb = np.concatenate(arrays_b[b0:b1], axis=0)
    starts_a = np.cumsum([0] + [arr.shape[0] for arr in arrays_a[a0 : a1 - 1]])
    starts_b = np.cumsum([0] + [arr.shape[0] for arr in arrays_b[b0 : b1 - 1]])
    a_sq = np.einsum("ij,ij->i", xa, xa)
    b_sq = np.einsum("ij,ij->i", xb, xb)
    tile = _kernel_tile(xa, xb, a_sq, b_sq, gamma)
    red = np.add.reduceat(tile, starts_a, axis=0)
    return np.add.reduceat(red, starts_b, axis=1)


def _pair_sum_matrix(
    arrays_a: Sequence[np.ndarray], arrays_b: Sequence[np.ndarray], params: RbfParams
) -> np.ndarray:
    """All per-bag-pair kernel sums between two bag sequences."""
    gamma = params.gamma
    out = np.empty((len(arrays_a), len(arrays_b)))
    for ca in _chunk_arrays(arrays_a):
        for cb in _chunk_arrays(arrays_b):
            out[ca[0] : ca[1], cb[0] : cb[1]] = _chunk_block_sums(
                arrays_a, arrays_b, ca, cb, gamma
            )
    return out


def bag_gram(data: BagDataset, params: RbfParams) -> BagGram:
    """B x B matrix of mean-embedding dot products between all bag pairs.

    Exactly symmetric by construction (the upper triangle is computed and
    mirrored), with entries in (0, 1] and positive semidefinite up to
    round-off.
    """
    arrays = _sorted_instances(data)
    gamma = params.gamma
    counts = np.array([arr.shape[0] for arr in arrays], dtype=float)
    sums = np.empty((len(arrays), len(arrays)))
    chunks = _chunk_arrays(arrays)
    for ia, ca in enumerate(chunks):
        for cb in chunks[ia:]:
            block = _chunk_block_sums(arrays, arrays, ca, cb, gamma)
            if ca is cb:
                # canonicalize on the upper triangle for exact symmetry
                block = np.triu(block) + np.triu(block, 1).T
                sums[ca[0] : ca[1], ca[0] : ca[1]] = block
            else:
                sums[ca[0] : ca[1], cb[0] : cb[1]] = block
                sums[cb[0] : cb[1], ca[0] : ca[1]] = block.T
    values = sums / np.outer(counts, counts)
    return BagGram(values)


def cross_bag_gram(
    test: BagDataset, train: BagDataset, params: RbfParams
) -> np.ndarray:
    """Mean-embedding dot products between every test bag and every train bag.

    Entry (t, b) is (1 / (m_t n_b)) sum_l sum_i k(x_l^t, x_i^b); predictions of
    a dual model are this matrix times its coefficient vector.
    """
    if test.dim != train.dim:
        raise ValueError(
            f"feature dimension mismatch: test d={test.dim}, train d={train.dim}"
        )
    sums = _pair_sum_matrix(_sorted_instances(test), _sorted_instances(train), params)
    m = np.array([b.n_instances for b in test.bags], dtype=float)
    n = np.array([b.n_instances for b in train.bags], dtype=float)
    return sums / np.outer(m, n)


def multisource_bag_gram(
    data: MultiSourceDataset, params: Sequence[RbfParams]
) -> BagGram:
    """Sum of per-source bag Gram matrices (direct-sum composite kernel)."""
    if len(params) != data.n_sources:
        raise ValueError(
            f"need one RbfParams per source: got {len(params)} for "
            f"{data.n_sources} sources"
        )
    total = bag_gram(data.sources[0], params[0]).values.copy()
    for src, p in zip(data.sources[1:], params[1:]):
        total += bag_gram(src, p).values
    return BagGram(total)


def mmd_squared(
    sample_x: np.ndarray, sample_y: np.ndarray, params: RbfParams
) -> float:
    """Squared maximum mean discrepancy between two samples (biased V-statistic).

    Computes ||mu_x - mu_y||^2 in the kernel feature space as
    Kxx_mean + Kyy_mean - 2 Kxy_mean over all instance pairs, including
    diagonal terms. Tiny negative round-off (within -1e-12) is clamped to 0.
    """
    x = _check_matrix(sample_x, "sample_x")
    y = _check_matrix(sample_y, "sample_y")
    _check_same_dim(x, y)
    gamma = params.gamma
    n, m = x.shape[0], y.shape[0]
    kxx = _pair_sum(x, x, gamma) / (n * n)
    kyy = _pair_sum(y, y, gamma) / (m * m)
    kxy = _pair_sum(x, y, gamma) / (n * m)
    value = kxx + kyy - 2.0 * kxy
    if -1e-12 <= value < 0.0:
        return 0.0
    return value


@dataclass(frozen=True)
class MmdTestResult:
    """Permutation two-sample test summary."""

    statistic: float
    p_value: float
    null_q95: float
    null_q99: float
    n_permutations: int


def mmd_permutation_test(
    sample_x: np.ndarray,
    sample_y: np.ndarray,
    params: RbfParams,
    n_permutations: int = 200,
    seed: int = 0,
) -> MmdTestResult:
    """Two-sample test: compare the observed MMD^2 against a permutation null.

    The pooled (n+m) x (n+m) kernel matrix is materialized once and each
    permutation is evaluated with a single matrix-vector product, so memory is
    O((n+m)^2) and time is O((n+m)^2 (d + P)). The p-value uses the standard
    add-one convention (1 + #{null >= observed}) / (1 + P).
    """
    x = _check_matrix(sample_x, "sample_x")
    y = _check_matrix(sample_y, "sample_y")
    _check_same_dim(x, y)
    if n_permutations < 1:
        raise ValueError("need at least one permutation")
    n, m = x.shape[0], y.shape[0]
    pooled = np.concatenate([x, y], axis=0)
    gram = cross_gram(pooled, pooled, params)
    row_sums = gram.sum(axis=1)
    total = float(row_sums.sum())

    def statistic(mask_x: np.ndarray) -> float:
        ax = mask_x.astype(float)
        gx = gram @ ax
        sxx = float(ax @ gx)
        sxy = float(ax @ row_sums) - sxx
        syy = total - sxx - 2.0 * sxy
        value = sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m)
        return 0.0 if -1e-12 <= value < 0.0 else value

    observed_mask = np.zeros(n + m, dtype=bool)
    observed_mask[:n] = True
    observed = statistic(observed_mask)

    rng = np.random.default_rng(seed)
    null = np.empty(n_permutations)
    for i in range(n_permutations):
        mask = np.zeros(n + m, dtype=bool)
        mask[rng.permutation(n + m)[:n]] = True
        null[i] = statistic(mask)

    p_value = (1.0 + float(np.sum(null >= observed))) / (1.0 + n_permutations)
    return MmdTestResult(
        statistic=observed,
        p_value=p_value,
        null_q95=float(np.percentile(null, 95)),
        null_q99=float(np.percentile(null, 99)),
        n_permutations=n_permutations,
    )


def median_heuristic(
    instances: np.ndarray, max_points: int = 2000, seed: int = 0
) -> float:
    """Median pairwise distance over (a subsample of) the given instances.

    The usual default length-scale for the RBF kernel. Falls back to 1.0 when
    the median is zero (all points identical) or undefined (a single point).
    """
    x = _check_matrix(instances, "instances")
    if x.shape[0] > max_points:
        idx = np.random.default_rng(seed).choice(x.shape[0], max_points, replace=False)
        x = x[np.sort(idx)]
    if x.shape[0] < 2:
        return 1.0
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    upper = d2[np.triu_indices(x.shape[0], k=1)]
    med = float(np.sqrt(np.median(upper)))
    return med if med > 0 else 1.0


def median_heuristic_bags(data: BagDataset, max_points: int = 2000, seed: int = 0) -> float:
    """Median heuristic over all instances pooled across a dataset's bags."""
    return median_heuristic(pooled_instances(data), max_points=max_points, seed=seed)
