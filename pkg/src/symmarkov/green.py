"""Green functions of a chain killed outside a finite window D.

A finite irreducible chain is recurrent, so sums of P^n diverge; on the
substochastic block P_D they converge.  The energy form attached to a
window keeps the parent weights inside D and grounds the escape mass
sum_{j not in D} W_ij at each state, so that its matrix is diag(nu_D)(I - P_D).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.sparse.csgraph import connected_components

from .energy import EnergyForm, harmonic_solve
from .errors import ConvergenceError, RecurrentDomainError, SingularSystemError
from .measure import states_array
from .operators import MarkovSystem, scaled_residual

RADIUS_MARGIN = 1e-10


class KilledSystem:
    def __init__(self, parent: MarkovSystem, domain: np.ndarray, W_D: np.ndarray,
                 ground: np.ndarray, radius: float):
        self.parent = parent
        self.domain = domain
        self.W_D = W_D
        self.ground = ground
        self.nu_D = parent.nu[domain]
        self.mu_D = parent.mu[domain]
        self.c_D = parent.c[domain]
        self.P_D = W_D / self.nu_D[:, None]
        self.spectral_radius = radius
        self._lock = threading.Lock()
        self._chol = None
        for a in (self.W_D, self.ground, self.P_D):
            a.setflags(write=False)

    @property
    def size(self) -> int:
        return self.domain.size

    def local(self, states: Iterable[int]) -> np.ndarray:
        """Positions inside D of the given parent states."""
        states = states_array(states, self.parent.n)
        pos = np.searchsorted(self.domain, states)
        if np.any(pos >= self.domain.size) or np.any(self.domain[np.minimum(pos, self.domain.size - 1)] != states):
            raise ValueError("target states must lie inside the domain")
        return pos

    def indicator(self, A: Iterable[int]) -> np.ndarray:
        v = np.zeros(self.size)
        v[self.local(A)] = 1.0
        return v

    def operator(self) -> np.ndarray:
        """diag(nu_D)(I - P_D) = diag(nu_D) - W_D, symmetric positive definite."""
        return np.diag(self.nu_D) - self.W_D

    def factor(self):
        with self._lock:
            if self._chol is None:
                try:
                    self._chol = sla.cho_factor(self.operator())
                except np.linalg.LinAlgError as exc:
                    raise SingularSystemError(str(exc)) from exc
            return self._chol

    def energy_form(self) -> EnergyForm:
        return EnergyForm.from_weights(self.W_D, ground=self.ground)

    def rho_n(self, A, B, n: int) -> float:
        """Killed rho_n(A x B) = <chi_A, P_D^n chi_B> in L^2(nu_D)."""
        v = self.indicator(B)
        for _ in range(n):
            v = self.P_D @ v
        return float(np.dot(self.nu_D * self.indicator(A), v))


def kill(sys: MarkovSystem, D: Iterable[int]) -> KilledSystem:
    D = states_array(D, sys.n)
    if D.size == 0:
        raise ValueError("domain is empty")
    W = sys.measure.dense()
    Dc = np.setdiff1d(np.arange(sys.n), D)
    W_D = W[np.ix_(D, D)].copy()
    ground = W[np.ix_(D, Dc)].sum(axis=1) if Dc.size else np.zeros(D.size)
    k, labels = connected_components(W_D > 0, directed=False)
    for lab in range(k):
        members = labels == lab
        if not np.any(ground[members] > 0):
            raise RecurrentDomainError(
                f"states {D[members].tolist()} of the domain never leave it")
    s = np.sqrt(sys.nu[D])
    S = W_D / np.outer(s, s)
    try:
        ev = np.linalg.eigvalsh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    radius = float(np.max(np.abs(ev)))
    if radius >= 1.0 - RADIUS_MARGIN:
        raise RecurrentDomainError(f"spectral radius {radius!r} of P_D is not below 1")
    return KilledSystem(sys, D, W_D, ground, radius)


@dataclass(frozen=True)
class GreenFunction:
    A: tuple
    domain: np.ndarray
    values: np.ndarray  # G_A on D
    residual: float = 0.0

    def on_parent(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.domain] = self.values
        return out


def green_solve(ks: KilledSystem, A: Iterable[int], tol: float = 1e-12) -> GreenFunction:
    """G_A = (I - P_D)^{-1} chi_A, checked against c (I - P_D) G_A = c chi_A."""
    A = tuple(states_array(A, ks.parent.n).tolist())
    chi = ks.indicator(A)
    G = sla.cho_solve(ks.factor(), ks.nu_D * chi)
    lhs = ks.c_D * (G - ks.P_D @ G)
    res = float(np.max(np.abs(lhs - ks.c_D * chi)) / (1.0 + np.max(np.abs(G)))) if G.size else 0.0
    if res > tol:
        raise SingularSystemError(f"Green solve residual {res:.3e} exceeds {tol:.1e}")
    return GreenFunction(A, ks.domain, G, res)


def _nu_norm(ks: KilledSystem, v: np.ndarray) -> float:
    return float(np.sqrt(np.dot(ks.nu_D, v * v)))


def tail_bound(ks: KilledSystem, v: np.ndarray) -> float:
    """Sup-norm bound on sum_{k>=0} P_D^k v.

    P_D is self-adjoint on L^2(nu_D) with norm equal to its spectral radius r,
    and |u|_inf <= |u|_nu / sqrt(min nu_D).
    """
    return _nu_norm(ks, v) / ((1.0 - ks.spectral_radius) * math.sqrt(float(np.min(ks.nu_D))))


@dataclass(frozen=True)
class SeriesResult:
    green: GreenFunction
    terms: int
    tail: float


def green_series(ks: KilledSystem, A: Iterable[int], tol: float = 1e-12,
                 max_terms: int = 10_000_000) -> SeriesResult:
    """Partial sums of sum_n P_D^n chi_A until the certified tail is below tol."""
    A = tuple(states_array(A, ks.parent.n).tolist())
    total = ks.indicator(A)
    v = ks.P_D @ total
    terms = 1
    while np.any(v):
        tail = tail_bound(ks, v)
        if tail < tol:
            return SeriesResult(GreenFunction(A, ks.domain, total), terms, tail)
        if terms >= max_terms:
            raise ConvergenceError(f"series tail {tail:.3e} above {tol:.1e} after {terms} terms")
        total += v
        v = ks.P_D @ v
        terms += 1
    return SeriesResult(GreenFunction(A, ks.domain, total), terms, 0.0)


@dataclass(frozen=True)
class GreenEnergyReport:
    inner: float  # <G_A, G_B>_{H_E}
    partial_sum: float  # sum_{n<=N} rho_n(A x B)
    terms: int
    tail: float  # bound on the omitted part of the sum
    inner_residual: float
    riesz: tuple  # (<f, G_A>_{H_E}, int_A f dnu) per test function
    riesz_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.inner_residual <= self.tail + self.tol and self.riesz_residual <= self.tol


def green_energy_identities(ks: KilledSystem, A, B, N: Optional[int] = None,
                            form: Optional[EnergyForm] = None, tests=None,
                            tol: float = 1e-8, seed: int = 0) -> GreenEnergyReport:
    """<G_A, G_B> = sum_{n>=0} rho_n(A x B) and <f, G_A> = int_A f dnu.

    N fixes the number of series terms; when omitted, terms are added until
    the tail bound drops below tol / 100.
    """
    form = form or ks.energy_form()
    GA = green_solve(ks, A).values
    GB = green_solve(ks, B).values
    inner = form.inner(GA, GB)
    a = ks.nu_D * ks.indicator(A)
    v = ks.indicator(B)
    parts = []
    n = 0
    a_norm = math.sqrt(float(np.dot(a, a / ks.nu_D)))
    while True:
        tail = a_norm * _nu_norm(ks, v) / (1.0 - ks.spectral_radius)
        if N is not None and n > N:
            break
        if N is None and (tail < tol * 1e-2 or not np.any(v)):
            break
        parts.append(float(np.dot(a, v)))
        v = ks.P_D @ v
        n += 1
    partial = math.fsum(parts)
    inner_res = abs(inner - partial) / (1.0 + abs(inner))
    if tests is None:
        rng = np.random.default_rng(seed)
        tests = [rng.standard_normal(ks.size) for _ in range(3)] + [np.zeros(ks.size)]
    riesz = []
    worst = 0.0
    chiA = ks.indicator(A)
    for f in tests:
        f = np.asarray(f, dtype=float)
        lhs = form.inner(f, GA)
        rhs = float(np.dot(ks.nu_D * chiA, f))
        riesz.append((lhs, rhs))
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(rhs)))
    return GreenEnergyReport(inner, partial, n, tail, inner_res, tuple(riesz), worst, tol)


@dataclass(frozen=True)
class SymmetricPairResult:
    energy_side: float  # <chi_A, G_B>_{H_E}
    l2_side: float  # <chi_A, c (I - P_D) G_B>_{L^2(mu)}
    nu_overlap: float  # nu(A n B)
    residual: float


def symmetric_pair_check(ks: KilledSystem, A, B, form: Optional[EnergyForm] = None) -> SymmetricPairResult:
    form = form or ks.energy_form()
    chiA = ks.indicator(A)
    GB = green_solve(ks, B).values
    e = form.inner(chiA, GB)
    l2 = float(np.dot(ks.mu_D * chiA, ks.c_D * (GB - ks.P_D @ GB)))
    both = np.intersect1d(states_array(A, ks.parent.n), states_array(B, ks.parent.n))
    overlap = float(np.sum(ks.parent.nu[both]))
    vals = (e, l2, overlap)
    res = max(abs(x - y) for x in vals for y in vals) / (1.0 + abs(overlap))
    return SymmetricPairResult(e, l2, overlap, res)


@dataclass(frozen=True)
class Decomposition:
    phi: np.ndarray  # on D
    harmonic: np.ndarray  # on the parent states
    reconstruction_residual: float
    harmonic_residual: float  # max |P h - h| over D


def green_decompose(ks: KilledSystem, f) -> Decomposition:
    """f = G(phi) + h with h harmonic on D and equal to f off D."""
    sys = ks.parent
    f = sys._vec(f)
    D = ks.domain
    Dc = np.setdiff1d(np.arange(sys.n), D)
    h = harmonic_solve(sys, Dc, f[Dc])
    g = (f - h)[D]
    phi = g - ks.P_D @ g
    G_phi = sla.cho_solve(ks.factor(), ks.nu_D * phi)
    recon = h.copy()
    recon[D] += G_phi
    Ph = sys.P @ h
    return Decomposition(phi, h, scaled_residual(recon - f, f), scaled_residual((Ph - h)[D], h))


def power_energy_residual(ks: KilledSystem, A, n: int, form: Optional[EnergyForm] = None) -> float:
    """| ||P_D^n chi_A||^2_{H_E} - (rho_{2n} - rho_{2n+1})(A x A) |, relative."""
    form = form or ks.energy_form()
    v = ks.indicator(A)
    for _ in range(n):
        v = ks.P_D @ v
    lhs = form.norm_sq(v)
    rhs = ks.rho_n(A, A, 2 * n) - ks.rho_n(A, A, 2 * n + 1)
    return abs(lhs - rhs) / (1.0 + abs(ks.rho_n(A, A, 2 * n)))


def green_span_rank(ks: KilledSystem) -> int:
    """Rank of {G_{x} : x in D}; equals |D| when the Green functions span the window."""
    G = sla.cho_solve(ks.factor(), np.diag(ks.nu_D))
    return int(np.linalg.matrix_rank(G))
