"""The finite energy space H_E of a symmetric measure.

Elements are functions modulo constants (per connected component).  The
form may carry a ``ground`` vector: extra mass from each state to an
implicit zero-potential boundary, which is how killed windows are given an
energy form consistent with diag(c)(I - P_D).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse import linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError, IdentityViolation, SingularSystemError
from .measure import DENSE_LIMIT, FiniteSymmetricMeasure, indicator, rectangle_mass, states_array
from .operators import MarkovSystem, apply_Delta, apply_P, coembed_Jstar, l2_norm

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class EnergyForm:
    W: object
    gauge: str = "pinned"  # or "mean"
    nu: Optional[np.ndarray] = None  # weights for the mean-zero gauge
    ground: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.gauge not in ("pinned", "mean"):
            raise ValueError(f"unknown gauge {self.gauge!r}")

    @classmethod
    def from_measure(cls, m: FiniteSymmetricMeasure, gauge: str = "pinned") -> "EnergyForm":
        return cls(m.W, gauge=gauge, nu=m.nu)

    @classmethod
    def from_weights(cls, W, gauge: str = "pinned", ground=None) -> "EnergyForm":
        W = np.asarray(W, dtype=float) if not sp.issparse(W) else sp.csr_array(W)
        nu = np.asarray(W.sum(axis=1)).ravel()
        g = None if ground is None else np.asarray(ground, dtype=float)
        if g is not None:
            nu = nu + g
        return cls(W, gauge=gauge, nu=nu, ground=g)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def _vec(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,):
            raise DimensionError(f"expected a vector of length {self.n}, got shape {f.shape}")
        return f

    def inner(self, f, g) -> float:
        """1/2 sum_ij (f_i - f_j)(g_i - g_j) W_ij (+ sum_i ground_i f_i g_i)."""
        f, g = self._vec(f), self._vec(g)
        W = self.W
        if sp.issparse(W):
            C = sp.coo_array(W)
            df = f[C.row] - f[C.col]
            dg = g[C.row] - g[C.col]
            total = 0.5 * np.dot(C.data * df, dg)
        else:
            df = f[:, None] - f[None, :]
            dg = g[:, None] - g[None, :]
            total = 0.5 * np.sum(W * df * dg)
        if self.ground is not None:
            total += np.dot(self.ground * f, g)
        return float(total)

    def norm_sq(self, f) -> float:
        return self.inner(f, f)

    def norm(self, f) -> float:
        return float(np.sqrt(max(self.norm_sq(f), 0.0)))

    def components(self) -> np.ndarray:
        S = sp.csr_array(self.W)
        return connected_components(S, directed=False)[1]

    def representative(self, f) -> np.ndarray:
        """Canonical representative of f modulo constants on each component.

        Grounded forms have no constant null space; f is returned unchanged.
        """
        f = self._vec(f).copy()
        if self.ground is not None and np.any(self.ground > 0):
            return f
        labels = self.components()
        for lab in np.unique(labels):
            idx = np.flatnonzero(labels == lab)
            if self.gauge == "pinned":
                f[idx] -= f[idx[0]]
            else:
                w = self.nu[idx] if self.nu is not None else np.ones(idx.size)
                f[idx] -= np.dot(w, f[idx]) / np.sum(w)
        return f


def energy_norm(form: EnergyForm, f) -> float:
    return form.norm(f)


def energy_inner(form: EnergyForm, f, g) -> float:
    return form.inner(f, g)


class IndicatorEnergy(NamedTuple):
    crossing_mass: float  # rho(A x A^c)
    energy: float  # ||chi_A||^2
    nu_A: float


def indicator_energy(form: EnergyForm, m: FiniteSymmetricMeasure, A: Iterable[int],
                     tol: float = 1e-12) -> IndicatorEnergy:
    A = states_array(A, m.n)
    Ac = np.setdiff1d(np.arange(m.n), A)
    crossing = rectangle_mass(m, A, Ac)
    energy = form.norm_sq(indicator(A, m.n))
    nu_A = float(np.sum(m.nu[A]))
    if abs(energy - crossing) > tol * (1.0 + crossing):
        raise IdentityViolation(f"||chi_A||^2 = {energy} but rho(A x A^c) = {crossing}")
    if crossing > nu_A * (1.0 + tol):
        raise IdentityViolation(f"rho(A x A^c) = {crossing} exceeds nu(A) = {nu_A}")
    return IndicatorEnergy(crossing, energy, nu_A)


def drop(form: EnergyForm, f) -> np.ndarray:
    """Voltage drop (f_i - f_j) / sqrt(2) as a function on pairs."""
    f = form._vec(f)
    return (f[:, None] - f[None, :]) / SQRT2


def diagram_residual(sys: MarkovSystem, form: EnergyForm, f) -> float:
    """||J*(drop f) - (f - P f)/sqrt 2|| in L^2(nu)."""
    f = sys._vec(f)
    lhs = coembed_Jstar(sys, drop(form, f))
    rhs = (f - apply_P(sys, f)) / SQRT2
    return l2_norm(lhs - rhs, sys.nu)


# Dirichlet problems

def _laplacian_blocks(W, nu, interior, boundary):
    if sp.issparse(W):
        W = sp.csr_array(W)
        L_II = sp.diags_array(nu[interior]) - W[interior][:, interior]
        W_IB = W[interior][:, boundary]
        return sp.csr_array(L_II), sp.csr_array(W_IB)
    W = np.asarray(W)
    L_II = np.diag(nu[interior]) - W[np.ix_(interior, interior)]
    return L_II, W[np.ix_(interior, boundary)]


def solve_spd(L, b, tol: float = 1e-12) -> np.ndarray:
    """Direct Cholesky below DENSE_LIMIT, Jacobi-preconditioned CG above."""
    if L.shape[0] == 0:
        return np.zeros(0)
    if L.shape[0] <= DENSE_LIMIT:
        L = L.toarray() if sp.issparse(L) else L
        try:
            return sla.cho_solve(sla.cho_factor(L), b)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(str(exc)) from exc
    L = sp.csr_array(L)
    d = L.diagonal()
    M = spla.LinearOperator(L.shape, matvec=lambda v: v / d)
    x, info = spla.cg(L, b, rtol=tol, atol=0.0, M=M, maxiter=20 * L.shape[0])
    if info != 0:
        raise SingularSystemError(f"conjugate gradient did not converge (info={info})")
    return x


def check_interior_reaches_boundary(m: FiniteSymmetricMeasure, interior: np.ndarray,
                                    boundary: np.ndarray) -> list:
    """Interior components (lists of states) with no edge to the boundary."""
    S = m.support()
    sub = S[interior][:, interior]
    k, labels = connected_components(sub, directed=False)
    touches = np.asarray(S[interior][:, boundary].sum(axis=1)).ravel() > 0
    stranded = []
    for lab in range(k):
        members = labels == lab
        if not np.any(touches[members]):
            stranded.append(interior[members].tolist())
    return stranded


def harmonic_solve(sys: MarkovSystem, boundary: Iterable[int], values: Sequence[float]) -> np.ndarray:
    """h with P h = h off the boundary and h = values on it."""
    m = sys.measure
    boundary_list = list(boundary)
    values = np.asarray(values, dtype=float)
    if len(boundary_list) != values.size:
        raise DimensionError("boundary and values differ in length")
    if not boundary_list:
        raise SingularSystemError("boundary is empty")
    order = np.argsort(boundary_list)
    boundary = np.asarray(boundary_list, dtype=np.int64)[order]
    values = values[order]
    if np.unique(boundary).size != boundary.size:
        raise ValueError("boundary lists a state twice")
    states_array(boundary, m.n)
    interior = np.setdiff1d(np.arange(m.n), boundary)
    h = np.zeros(m.n)
    h[boundary] = values
    if interior.size == 0:
        return h
    stranded = check_interior_reaches_boundary(m, interior, boundary)
    if stranded:
        raise SingularSystemError(f"interior component {stranded[0]} never meets the boundary")
    L_II, W_IB = _laplacian_blocks(m.W, m.nu, interior, boundary)
    h[interior] = solve_spd(L_II, W_IB @ values)
    return h


class RoydenParts(NamedTuple):
    finite: np.ndarray  # vanishes on the boundary
    harmonic: np.ndarray
    orthogonality_residual: float


def royden_project(form: EnergyForm, sys: MarkovSystem, f, boundary: Iterable[int]) -> RoydenParts:
    f = sys._vec(f)
    boundary = states_array(boundary, sys.n)
    h = harmonic_solve(sys, boundary, f[boundary])
    f0 = f - h
    ip = form.inner(f0, form.representative(h))
    scale = 1.0 + form.norm(f0) * form.norm(h)
    return RoydenParts(f0, h, abs(ip) / scale)


@dataclass(frozen=True)
class CorollaryReport:
    interior_max_delta_sq: float  # max over interior of Delta(f^2)
    square_subharmonic: bool
    pairs: tuple  # (lhs, rhs, residual) per (q, f) pair
    product_rule_holds: bool

    @property
    def passed(self) -> bool:
        return self.square_subharmonic and self.product_rule_holds


def corollary_checks(sys: MarkovSystem, f, interior: Iterable[int], pairs=None,
                     tol: float = 1e-12, seed: int = 0) -> CorollaryReport:
    """Delta(f^2) <= 0 where f is harmonic, and the integrated product rule

    sum mu Delta(qf) = sum mu q Delta f - sum mu f Delta q  (both sides vanish).
    """
    f = sys._vec(f)
    interior = states_array(interior, sys.n)
    d2 = apply_Delta(sys, f * f)
    scale = 1.0 + np.max(np.abs(sys.c * f * f))
    worst = float(np.max(d2[interior])) if interior.size else 0.0
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = [(rng.standard_normal(sys.n), rng.standard_normal(sys.n)) for _ in range(3)]
        pairs.append((f, f))
    out = []
    ok = True
    mu = sys.mu
    for q, g in pairs:
        q, g = sys._vec(q), sys._vec(g)
        lhs = float(np.dot(mu, apply_Delta(sys, q * g)))
        rhs = float(np.dot(mu, q * apply_Delta(sys, g)) - np.dot(mu, g * apply_Delta(sys, q)))
        mag = 1.0 + float(np.dot(mu, np.abs(sys.c * q * g)))
        res = max(abs(lhs - rhs), abs(lhs)) / mag
        ok &= res <= tol
        out.append((lhs, rhs, res))
    return CorollaryReport(worst, worst <= tol * scale, tuple(out), bool(ok))
