"""Random Fourier features: explicit trigonometric approximation of the RBF kernel.

For frequencies w_i drawn i.i.d. from N(0, sigma^-2 I), the map

    z(x) = (1 / sqrt(D)) [cos(w_1.x), sin(w_1.x), ..., cos(w_D.x), sin(w_D.x)]

satisfies E[z(x).z(x')] = exp(-||x - x'||^2 / (2 sigma^2)) and the Monte-Carlo
error decays like O(D^-1/2). The cos/sin pairs keep everything real and give
||z(x)|| = 1 exactly, so dot products are directly comparable to RBF kernel
values. One basis is shared by all bags.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Bag, BagDataset, canonical_rows

__all__ = [
    "FourierBasis",
    "bag_feature_matrix",
    "bag_mean_features",
    "feature_map",
    "feature_matrix",
    "sample_basis",
]

# Rows of the feature matrix computed per batch when averaging large bags.
_ROW_CHUNK = 1024


@dataclass(frozen=True)
class FourierBasis:
    """Sampled random projection matrix; columns are frequency vectors.

    Reconstructible bit-exactly from (seed, dim, n_components, sigma), which
    is how fitted models persist it.
    """

    weights: np.ndarray  # (dim, n_components)
    sigma: float
    seed: int

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError(f"weights must be a non-empty 2-D matrix, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite values")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    @property
    def feature_dim(self) -> int:
        """Length of the mapped vectors: one cos and one sin per component."""
        return 2 * self.weights.shape[1]


def sample_basis(dim: int, n_components: int, sigma: float, seed: int) -> FourierBasis:
    """Draw a basis of ``n_components`` frequencies from N(0, sigma^-2 I).

    Uses a counter-based generator (Philox) with ziggurat Gaussian sampling,
    so the same seed yields the same basis regardless of how the surrounding
    code is parallelized.
    """
    if dim < 1 or n_components < 1:
        raise ValueError("dim and n_components must be >= 1")
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive and finite, got {sigma!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    weights = rng.standard_normal((dim, n_components)) / sigma
    return FourierBasis(weights=weights, sigma=float(sigma), seed=int(seed))


def feature_matrix(x: np.ndarray, basis: FourierBasis) -> np.ndarray:
    """Map rows of ``x`` (n x d) to interleaved [cos, sin] features (n x 2D)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"x must be 2-D, got shape {x.shape}")
    if x.shape[1] != basis.dim:
        raise ValueError(
            f"feature dimension mismatch: basis has d={basis.dim}, input has d={x.shape[1]}"
        )
    proj = x @ basis.weights
    out = np.empty((x.shape[0], basis.feature_dim))
    out[:, 0::2] = np.cos(proj)
    out[:, 1::2] = np.sin(proj)
    out *= 1.0 / np.sqrt(basis.n_components)
    return out


def feature_map(x: np.ndarray, basis: FourierBasis) -> np.ndarray:
    """Feature vector of a single input; unit norm by the cos^2+sin^2 identity."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != basis.dim:
        raise ValueError(
            f"feature dimension mismatch: basis has d={basis.dim}, input has d={x.shape[0]}"
        )
    return feature_matrix(x[None, :], basis)[0]


def _mean_features(x: np.ndarray, basis: FourierBasis) -> np.ndarray:
    # canonical row order -> exactly permutation-invariant bag means
    x = canonical_rows(x)
    if x.shape[0] <= _ROW_CHUNK:
        return feature_matrix(x, basis).mean(axis=0)
    acc = np.zeros(basis.feature_dim)
    for i0 in range(0, x.shape[0], _ROW_CHUNK):
        acc += feature_matrix(x[i0 : i0 + _ROW_CHUNK], basis).sum(axis=0)
    return acc / x.shape[0]


def bag_mean_features(bag: Bag, basis: FourierBasis) -> np.ndarray:
    """Mean feature vector of a bag; its norm is at most 1.

    Dot products between bag mean features approximate the mean-embedding
    dot products computed by the exact kernel path.
    """
    if bag.dim != basis.dim:
        raise ValueError(
            f"feature dimension mismatch: basis has d={basis.dim}, bag has d={bag.dim}"
        )
    return _mean_features(bag.instances, basis)


def bag_feature_matrix(data: BagDataset, basis: FourierBasis) -> np.ndarray:
    """Stack of bag mean-feature rows, shape (n_bags, 2D)."""
    if data.dim != basis.dim:
        raise ValueError(
            f"feature dimension mismatch: basis has d={basis.dim}, data has d={data.dim}"
        )
    out = np.empty((data.n_bags, basis.feature_dim))
    for i, bag in enumerate(data.bags):
        out[i] = _mean_features(bag.instances, basis)
    return out
