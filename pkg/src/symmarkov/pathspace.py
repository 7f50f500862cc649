"""Sampled trajectories of the chain and the path-space identities.

Uniforms come from a Philox counter-based generator keyed by the seed.
Path p consumes draws p*(H+1) .. p*(H+1)+H of that stream (H the horizon),
the first choosing the start state and the rest one step each, so any
path can be regenerated without the others.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import EmptyStartError, HorizonExceededError
from .measure import indicator, states_array
from .operators import MarkovSystem, scaled_residual


@dataclass(frozen=True)
class StartLaw:
    states: tuple  # A; a point mass when it has one element
    weights: np.ndarray  # nu restricted to A, normalized
    nu_A: float

    @classmethod
    def from_set(cls, sys: MarkovSystem, A: Iterable[int]) -> "StartLaw":
        A = states_array(A, sys.n)
        nu = sys.nu[A]
        total = float(np.sum(nu))
        if A.size == 0 or total <= 0:
            raise EmptyStartError("start set has zero nu-mass")
        return cls(tuple(A.tolist()), nu / total, total)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    seed: int
    start_law: StartLaw
    horizon: int
    paths: np.ndarray  # (count, horizon + 1) state indices
    system_digest: str

    @property
    def count(self) -> int:
        return self.paths.shape[0]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.seed}|{self.start_law.states}|{self.horizon}|{self.system_digest}|".encode())
        h.update(np.ascontiguousarray(self.paths, dtype=np.int64).tobytes())
        return h.hexdigest()


def _uniforms(seed: int, count: int, width: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)))
    return gen.random((count, width))


def _cumulative_rows(sys: MarkovSystem) -> np.ndarray:
    C = np.cumsum(sys.dense_P(), axis=1)
    # normalize so that the last entry is exactly 1
    C /= C[:, -1:]
    C[:, -1] = 1.0
    return C


def sample_paths(sys: MarkovSystem, start: Iterable[int], horizon: int, count: int,
                 seed: int = 0) -> PathEnsemble:
    """``count`` paths of ``horizon`` steps started from nu restricted to ``start``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    law = start if isinstance(start, StartLaw) else StartLaw.from_set(sys, start)
    U = _uniforms(seed, count, horizon + 1)
    cdf = np.cumsum(law.weights)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    starts = np.asarray(law.states, dtype=np.int64)
    paths = np.empty((count, horizon + 1), dtype=np.int64)
    paths[:, 0] = starts[np.searchsorted(cdf, U[:, 0], side="right")]
    C = _cumulative_rows(sys)
    for k in range(horizon):
        cur = paths[:, k]
        paths[:, k + 1] = (C[cur] <= U[:, k + 1:k + 2]).sum(axis=1)
    paths.setflags(write=False)
    return PathEnsemble(int(seed), law, int(horizon), paths, sys.measure.digest())


class Estimate(NamedTuple):
    value: float
    stderr: float


def estimate_lambda_event(ens: PathEnsemble, A: Iterable[int], B: Iterable[int], n: int) -> Estimate:
    """lambda(X_0 in A, X_n in B) from paths started in nu restricted to A."""
    if n > ens.horizon:
        raise HorizonExceededError(f"step {n} is beyond the ensemble horizon {ens.horizon}")
    if n < 0:
        raise ValueError("n must be nonnegative")
    A = tuple(sorted(set(int(a) for a in A)))
    if A != ens.start_law.states:
        raise ValueError(f"ensemble was started from {ens.start_law.states}, not {A}")
    B = np.asarray(sorted(set(int(b) for b in B)), dtype=np.int64)
    hit = np.isin(ens.paths[:, n], B)
    p = float(np.mean(hit))
    nu_A = ens.start_law.nu_A
    return Estimate(nu_A * p, nu_A * math.sqrt(p * (1.0 - p) / ens.count))


class Reversal(NamedTuple):
    forward: float  # lambda(X_0 in A0, X_1 in A1)
    backward: float  # lambda(X_0 in A1, X_1 in A0)
    residual: float


def check_distribution_reversal(sys: MarkovSystem, A0, A1) -> Reversal:
    a0, a1 = indicator(A0, sys.n), indicator(A1, sys.n)
    P = sys.P
    fwd = float(np.dot(sys.nu * a0, P @ a1))
    bwd = float(np.dot(sys.nu * a1, P @ a0))
    return Reversal(fwd, bwd, abs(fwd - bwd) / (1.0 + max(abs(fwd), abs(bwd))))


@dataclass(frozen=True)
class MartingaleReport:
    exact_residuals: np.ndarray  # |Ph - h| on the harmonic region
    exact_residual: float
    exact_passed: bool
    increments: int  # uncensored steps used
    mean_drift: float
    stderr: float
    empirical_passed: bool

    @property
    def passed(self) -> bool:
        return self.exact_passed and self.empirical_passed


def martingale_diagnostic(sys: MarkovSystem, h, ens: PathEnsemble, region=None,
                          tol: float = 1e-12, sigmas: float = 3.0) -> MartingaleReport:
    """Exact harmonicity of h on ``region`` and the empirical drift of h(X_n).

    A path contributes increments h(X_{k+1}) - h(X_k) while X_k is in the
    region; from its first step outside the region it is censored.
    """
    h = sys._vec(h)
    region = np.arange(sys.n) if region is None else states_array(region, sys.n)
    Ph = sys.P @ h
    res = np.abs(Ph - h)[region]
    worst = scaled_residual(res, h)
    inside = np.zeros(sys.n, dtype=bool)
    inside[region] = True
    X = ens.paths
    alive = np.cumprod(inside[X[:, :-1]], axis=1).astype(bool)
    dh = h[X[:, 1:]] - h[X[:, :-1]]
    inc = dh[alive]
    N = inc.size
    if N == 0:
        mean, se, ok = 0.0, 0.0, True
    else:
        mean = float(np.mean(inc))
        se = float(np.std(inc, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
        ok = abs(mean) <= sigmas * se if se > 0 else abs(mean) <= tol * (1.0 + np.max(np.abs(h)))
    return MartingaleReport(res, worst, worst <= tol, int(N), mean, se, bool(ok))


def transition_counts(ens: PathEnsemble, n: int) -> np.ndarray:
    """counts[i, j] = number of observed steps i -> j."""
    X = ens.paths
    flat = X[:, :-1].ravel() * n + X[:, 1:].ravel()
    return np.bincount(flat, minlength=n * n).reshape(n, n)
