"""Markov operator P, symmetric operator R, Laplacian, embedding J, spectra,
and the reversibility battery.

Functions on states are plain 1-d arrays of length n; functions on pairs
are n x n arrays of which only entries on the support of W matter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, DimensionError, IdentityViolation
from .measure import FiniteSymmetricMeasure, indicator

RTOL = 1e-12


def scaled_residual(diff, scale) -> float:
    """max|diff| / (1 + max|scale|)."""
    diff = np.max(np.abs(diff)) if np.size(diff) else 0.0
    scale = np.max(np.abs(scale)) if np.size(scale) else 0.0
    return float(diff / (1.0 + scale))


@dataclass(frozen=True, eq=False)
class MarkovSystem:
    """The bundle (c, nu, P, R, Delta) derived from a symmetric measure."""

    measure: FiniteSymmetricMeasure

    @property
    def n(self) -> int:
        return self.measure.n

    @property
    def mu(self) -> np.ndarray:
        return self.measure.mu

    @property
    def nu(self) -> np.ndarray:
        return self.measure.nu

    @property
    def c(self) -> np.ndarray:
        return self.measure.c

    @property
    def W(self):
        return self.measure.W

    @cached_property
    def P(self):
        W = self.measure.W
        if sp.issparse(W):
            return sp.csr_array(sp.diags_array(1.0 / self.nu) @ W)
        P = W / self.nu[:, None]
        P.setflags(write=False)
        return P

    @cached_property
    def R(self):
        W = self.measure.W
        if sp.issparse(W):
            return sp.csr_array(sp.diags_array(1.0 / self.mu) @ W)
        R = W / self.mu[:, None]
        R.setflags(write=False)
        return R

    def dense_P(self) -> np.ndarray:
        return self.P.toarray() if sp.issparse(self.P) else np.asarray(self.P)

    def _vec(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,):
            raise DimensionError(f"expected a vector of length {self.n}, got shape {f.shape}")
        return f

    def _pairs(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n, self.n):
            raise DimensionError(f"expected an {self.n}x{self.n} pair function, got {g.shape}")
        return g


def markov_system(m: FiniteSymmetricMeasure) -> MarkovSystem:
    return MarkovSystem(m)


def apply_R(sys: MarkovSystem, f) -> np.ndarray:
    return sys.R @ sys._vec(f)


def apply_P(sys: MarkovSystem, f) -> np.ndarray:
    return sys.P @ sys._vec(f)


def apply_P_power(sys: MarkovSystem, f, n: int) -> np.ndarray:
    v = sys._vec(f)
    for _ in range(n):
        v = sys.P @ v
    return v


def apply_Delta(sys: MarkovSystem, f, method: str = "difference") -> np.ndarray:
    """Laplacian.

    ``difference``: sum_j (f_i - f_j) W_ij / mu_i;  ``c_minus_R``: (cI - R) f;
    ``c_I_minus_P``: c (f - P f).
    """
    f = sys._vec(f)
    if method == "difference":
        return (sys.nu * f - sys.W @ f) / sys.mu
    if method == "c_minus_R":
        return sys.c * f - sys.R @ f
    if method == "c_I_minus_P":
        return sys.c * (f - sys.P @ f)
    raise ValueError(f"unknown method {method!r}")


def embed_J(sys: MarkovSystem, f) -> np.ndarray:
    """(Jf)(i, j) = f_i."""
    f = sys._vec(f)
    return np.repeat(f[:, None], sys.n, axis=1)


def coembed_Jstar(sys: MarkovSystem, g) -> np.ndarray:
    """(J*g)_i = sum_j g(i, j) P_ij."""
    g = sys._pairs(g)
    P = sys.P
    if sp.issparse(P):
        return np.asarray((P.multiply(g)).sum(axis=1)).ravel()
    return np.sum(g * P, axis=1)


# norms in the three L^2 spaces

def l2_norm(f, weights) -> float:
    return float(np.sqrt(np.dot(np.asarray(weights), np.asarray(f) ** 2)))


def l2_inner(f, g, weights) -> float:
    return float(np.dot(np.asarray(weights) * np.asarray(f), np.asarray(g)))


def l1_norm(f, weights) -> float:
    return float(np.dot(np.asarray(weights), np.abs(f)))


def l2_rho_norm(sys: MarkovSystem, g) -> float:
    g = sys._pairs(g)
    W = sys.W
    total = (W.multiply(g * g)).sum() if sp.issparse(W) else np.sum(W * g * g)
    return float(np.sqrt(total))


def symmetrized_P(sys: MarkovSystem) -> np.ndarray:
    """diag(nu)^(1/2) P diag(nu)^(-1/2) = W_ij / sqrt(nu_i nu_j); symmetric."""
    s = np.sqrt(sys.nu)
    return sys.measure.dense() / np.outer(s, s)


def spectrum_P(sys: MarkovSystem) -> np.ndarray:
    """Sorted eigenvalues of P acting on L^2(nu)."""
    S = symmetrized_P(sys)
    S = 0.5 * (S + S.T)
    try:
        ev = np.linalg.eigvalsh(S)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    return np.sort(ev)


def laplacian_spectrum(sys: MarkovSystem) -> np.ndarray:
    """Eigenvalues of Delta as a self-adjoint operator on L^2(mu)."""
    W = sys.measure.dense()
    L = np.diag(sys.nu) - W
    s = 1.0 / np.sqrt(sys.mu)
    S = L * np.outer(s, s)
    return np.sort(np.linalg.eigvalsh(0.5 * (S + S.T)))


def mu_P_density(sys: MarkovSystem, tol: float = RTOL) -> np.ndarray:
    """d(mu P)/d mu, checked against sum_j W_ij / (mu_i c_j)."""
    P = sys.P
    pushed = (sys.mu @ P) / sys.mu
    direct = (sys.W @ (1.0 / sys.c)) / sys.mu
    res = scaled_residual(pushed - direct, direct)
    if res > tol:
        raise IdentityViolation(f"d(mu P)/d mu mismatch: residual {res:.3e}")
    return direct


# reversibility battery

CLAUSES = (
    ("i", "reversibility of P: nu-weighted flux between singletons is symmetric"),
    ("ii", "reversibility of P_n for every n <= depth"),
    ("iii", "P self-adjoint on L^2(nu) and nu P = nu"),
    ("iv", "c(x) P(x,dy) mu(dx) symmetric pointwise"),
    ("v", "diag(mu) R symmetric"),
    ("vi", "rho(A x B) = rho(B x A) on singletons and random sets"),
    ("vii", "rho_n symmetric for every n <= depth"),
)


@dataclass(frozen=True)
class ClauseResult:
    clause: str
    description: str
    passed: bool
    residual: float

    def to_dict(self) -> dict:
        return {"clause": self.clause, "description": self.description,
                "passed": self.passed, "residual": self.residual}


@dataclass(frozen=True)
class BatteryReport:
    depth: int
    clauses: tuple = field(default_factory=tuple)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    @property
    def all_failed(self) -> bool:
        return not any(c.passed for c in self.clauses)

    @property
    def max_residual(self) -> float:
        return max(c.residual for c in self.clauses)

    def to_dict(self) -> dict:
        return {"depth": self.depth, "all_passed": self.all_passed,
                "clauses": [c.to_dict() for c in self.clauses]}


def _asym(M) -> float:
    return scaled_residual(M - M.T, M)


def reversibility_battery(sys: MarkovSystem, n_max: int = 6, tol: float = RTOL,
                          seed: int = 0) -> BatteryReport:
    """Evaluate the seven equivalent reversibility conditions.

    Never raises on broken input; each clause reports its own residual.
    """
    m = sys.measure
    W = m.dense()
    mu, nu, c = m.mu, m.nu, m.c
    P = W / nu[:, None]
    R = W / mu[:, None]
    n = m.n
    res = {}

    res["i"] = _asym(nu[:, None] * P)

    Pk = P.copy()
    worst = 0.0
    for _ in range(n_max):
        worst = max(worst, _asym(nu[:, None] * Pk))
        Pk = Pk @ P
    res["ii"] = worst

    self_adj = _asym(nu[:, None] * P)
    invariance = scaled_residual(nu @ P - nu, nu)
    res["iii"] = max(self_adj, invariance)

    res["iv"] = _asym((c * mu)[:, None] * P)

    res["v"] = _asym(mu[:, None] * R)

    rng = np.random.default_rng(seed)
    masks = rng.random((64, n)) < 0.5
    X = np.vstack([np.eye(n), masks.astype(float)])
    rect = X @ (mu[:, None] * R) @ X.T
    res["vi"] = _asym(rect)

    # rho_n(A x B) via repeated application of P to indicator columns
    V = np.eye(n)
    worst = 0.0
    for _ in range(n_max):
        V = P @ V
        worst = max(worst, _asym(nu[:, None] * V))
    res["vii"] = worst

    clauses = tuple(ClauseResult(k, d, bool(res[k] <= tol), float(res[k])) for k, d in CLAUSES)
    return BatteryReport(n_max, clauses)


def rho_n_form(sys: MarkovSystem, A: Iterable[int], B: Iterable[int], n: int) -> float:
    """<chi_A, P^n chi_B>_{L^2(nu)}."""
    v = apply_P_power(sys, indicator(B, sys.n), n)
    return l2_inner(indicator(A, sys.n), v, sys.nu)
