"""Differential and discrete entropy estimators, in nats.

The continuous estimator is the Kozachenko-Leonenko nearest-neighbour
estimator with max-norm balls,

    H = psi(n) - psi(k) + d * mean(log(2 * eps_i)),

where ``eps_i`` is the max-norm distance from sample ``i`` to its ``k``-th
nearest neighbour.  A max-norm ball of diameter ``2 eps`` has volume
``(2 eps)^d``, so no unit-ball constant appears.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .errors import DegenerateDataError, DomainError

JITTER_SCALE = 1e-10


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DomainError("samples must be an n x d array")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples contain non-finite values")
    return x


def _dejitter(x: np.ndarray, seed: int) -> np.ndarray:
    """Break exact duplicate rows with uniform noise of size ``JITTER_SCALE``."""
    if np.unique(x, axis=0).shape[0] == x.shape[0]:
        return x
    if np.all(x == x[0]):
        raise DegenerateDataError("all samples are identical; entropy is -inf")
    rng = np.random.default_rng(seed)
    return x + rng.uniform(-JITTER_SCALE, JITTER_SCALE, size=x.shape)


def knn_entropy(samples, k: int = 4, seed: int = 0) -> float:
    """Kozachenko-Leonenko entropy estimate of an ``n x d`` sample.

    Parameters
    ----------
    samples : array, shape (n,) or (n, d)
    k : int
        Neighbour order, ``1 <= k < n``.
    seed : int
        Seed for the duplicate-breaking jitter (used only when duplicates exist).

    Raises
    ------
    DegenerateDataError
        Every sample is the same point.
    """
    x = _as_samples(samples)
    n, d = x.shape
    if k < 1 or n <= k:
        raise DomainError(f"need 1 <= k < n, got k={k}, n={n}")
    x = _dejitter(x, seed)
    tree = cKDTree(x)
    dist, _ = tree.query(x, k=k + 1, p=np.inf)
    eps = dist[:, k]
    if np.any(eps <= 0.0):
        # only possible if jitter could not separate points at this magnitude
        raise DegenerateDataError("zero nearest-neighbour distance after jitter")
    return float(digamma(n) - digamma(k) + d * np.mean(np.log(2.0 * eps)))


def plugin_entropy(samples) -> float:
    """Entropy of the empirical distribution of discrete rows."""
    x = _as_samples(samples)
    _, counts = np.unique(x, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))
