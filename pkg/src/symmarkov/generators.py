"""Small reference networks and seeded random instances."""

from __future__ import annotations

import numpy as np

from .measure import FiniteSymmetricMeasure


def _measure(W: np.ndarray, mu=None) -> FiniteSymmetricMeasure:
    W = 0.5 * (W + W.T)
    mu = np.ones(W.shape[0]) if mu is None else np.asarray(mu, dtype=float)
    return FiniteSymmetricMeasure(mu, W)


def path_graph(n: int, weight: float = 1.0) -> FiniteSymmetricMeasure:
    W = np.zeros((n, n))
    i = np.arange(n - 1)
    W[i, i + 1] = W[i + 1, i] = weight
    return _measure(W)


def cycle_graph(n: int, weight: float = 1.0) -> FiniteSymmetricMeasure:
    W = np.zeros((n, n))
    i = np.arange(n)
    W[i, (i + 1) % n] += weight
    W[(i + 1) % n, i] += weight
    if n == 2:
        W /= 2.0  # both orientations hit the same pair
    return _measure(W)


def complete_graph(n: int, weight: float = 1.0) -> FiniteSymmetricMeasure:
    return _measure(weight * (np.ones((n, n)) - np.eye(n)))


def star_graph(leaves: int, weight: float = 1.0) -> FiniteSymmetricMeasure:
    """Center 0 joined to states 1..leaves."""
    W = np.zeros((leaves + 1, leaves + 1))
    W[0, 1:] = W[1:, 0] = weight
    return _measure(W)


def birth_death(n: int, base: float = 2.0, mu=None) -> FiniteSymmetricMeasure:
    """Chain 0..n-1 with W(i, i+1) = base**i."""
    W = np.zeros((n, n))
    i = np.arange(n - 1)
    W[i, i + 1] = W[i + 1, i] = base ** i
    return _measure(W, mu)


def block_diagonal(*blocks: FiniteSymmetricMeasure) -> FiniteSymmetricMeasure:
    n = sum(b.n for b in blocks)
    W = np.zeros((n, n))
    mu = np.empty(n)
    k = 0
    for b in blocks:
        W[k:k + b.n, k:k + b.n] = b.dense()
        mu[k:k + b.n] = b.mu
        k += b.n
    return FiniteSymmetricMeasure(mu, W)


def random_connected(n: int, rng: np.random.Generator, density: float = 0.3,
                     random_mu: bool = True) -> FiniteSymmetricMeasure:
    """Random spanning tree plus extra edges; weights and base weights in [0.1, 2)."""
    W = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[rng.integers(k)]
        W[a, b] = W[b, a] = rng.uniform(0.1, 2.0)
    extra = np.triu(rng.random((n, n)) < density, 1) & (W == 0)
    w = rng.uniform(0.1, 2.0, size=(n, n))
    W = W + np.where(extra, w, 0.0) + np.where(extra, w, 0.0).T
    mu = rng.uniform(0.1, 2.0, size=n) if random_mu else np.ones(n)
    return FiniteSymmetricMeasure(mu, W)


def weighted_graph(adjacency: np.ndarray, rng: np.random.Generator,
                   random_mu: bool = True) -> FiniteSymmetricMeasure:
    A = np.asarray(adjacency) > 0
    w = np.triu(rng.uniform(0.1, 2.0, size=A.shape), 1)
    W = np.where(np.triu(A, 1), w, 0.0)
    W = W + W.T
    n = A.shape[0]
    mu = rng.uniform(0.1, 2.0, size=n) if random_mu else np.ones(n)
    return FiniteSymmetricMeasure(mu, W)
