"""Equivalent symmetric measures: rho' = r rho with r > 0 symmetric."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from .energy import EnergyForm
from .errors import (AsymmetryError, DimensionError, NonpositiveFactorError, NonProductFormError,
                     SupportMismatchError, SupportViolationError)
from .measure import FiniteSymmetricMeasure
from .operators import RTOL, MarkovSystem, apply_Delta, scaled_residual


@dataclass(frozen=True, eq=False)
class EquivalenceData:
    """Either a positive vector q (r(i,j) = q_i q_j) or a full pair factor r."""

    q: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.q is None) == (self.r is None):
            raise ValueError("give exactly one of q or r")
        if self.q is not None:
            q = np.array(self.q, dtype=float)
            if q.ndim != 1:
                raise DimensionError("q must be a vector")
            if np.any(~np.isfinite(q)) or np.any(q <= 0):
                raise NonpositiveFactorError("q must be strictly positive")
            q.setflags(write=False)
            object.__setattr__(self, "q", q)
        else:
            r = np.array(self.r, dtype=float)
            if r.ndim != 2 or r.shape[0] != r.shape[1]:
                raise DimensionError("r must be a square pair function")
            if not np.array_equal(r, r.T):
                raise AsymmetryError("r(i, j) must equal r(j, i)")
            r.setflags(write=False)
            object.__setattr__(self, "r", r)

    @property
    def is_product(self) -> bool:
        return self.q is not None

    def pair_factor(self) -> np.ndarray:
        if self.q is not None:
            return np.outer(self.q, self.q)
        return self.r

    @classmethod
    def identity(cls, n: int) -> "EquivalenceData":
        return cls(q=np.ones(n))


def _factor_on(m: FiniteSymmetricMeasure, eq: EquivalenceData) -> np.ndarray:
    r = eq.pair_factor()
    if r.shape != (m.n, m.n):
        raise DimensionError(f"factor has shape {r.shape}, measure has {m.n} states")
    W = m.dense()
    on = W > 0
    if np.any(~np.isfinite(r[on])) or np.any(r[on] <= 0):
        i, j = np.argwhere(on & ~(r > 0))[0]
        raise NonpositiveFactorError(f"r({i},{j}) = {r[i, j]!r} is not positive on the support")
    return r


def transform_measure(m: FiniteSymmetricMeasure, eq: EquivalenceData) -> FiniteSymmetricMeasure:
    """W' = r W elementwise with the same base weights."""
    r = _factor_on(m, eq)
    W = m.dense()
    Wp = np.where(W > 0, r * W, 0.0)
    if m.is_sparse:
        Wp = sp.csr_array(Wp)
    return FiniteSymmetricMeasure(m.mu, Wp, allow_diagonal=m.allow_diagonal,
                                  edge_tolerance=m.edge_tolerance)


@dataclass(frozen=True)
class MarkovPrimeReport:
    value: np.ndarray  # P'f by the formula
    direct: np.ndarray  # P'f from W'
    formula_residual: float
    normalizer_residual: float  # P(r_x) = c'/c
    reciprocal_residual: float  # P(r_x) P'(1/r_x) = 1
    interchange_residual: float  # formula with (P', 1/r) gives P
    R_residual: float  # R'(f) = R(f r_x)
    invariance_residual: float  # nu' P' = nu'

    @property
    def residuals(self) -> dict:
        return {k: getattr(self, k) for k in ("formula_residual", "normalizer_residual",
                                              "reciprocal_residual", "interchange_residual",
                                              "R_residual", "invariance_residual")}

    def passed(self, tol: float = RTOL) -> bool:
        return all(v <= tol for v in self.residuals.values())


def _formula(P: np.ndarray, r: np.ndarray, f: np.ndarray) -> tuple:
    """(P(f r_x)(x) / P(r_x)(x), P(r_x)(x)); r_x is row x of r."""
    norm = np.sum(P * r, axis=1)
    return np.sum(P * r * f[None, :], axis=1) / norm, norm


def markov_prime_via_formula(sys: MarkovSystem, eq: EquivalenceData, f) -> MarkovPrimeReport:
    f = sys._vec(f)
    m = sys.measure
    r = _factor_on(m, eq)
    W = m.dense()
    on = W > 0
    r = np.where(on, r, 0.0)
    P = W / m.nu[:, None]
    mp = transform_measure(m, eq)
    Wp = mp.dense()
    Pp = Wp / mp.nu[:, None]

    value, norm = _formula(P, r, f)
    direct = Pp @ f
    inv_r = np.where(on, 1.0 / np.where(on, r, 1.0), 0.0)

    normalizer = scaled_residual(norm - mp.c / m.c, mp.c / m.c)
    recip = scaled_residual(norm * np.sum(Pp * inv_r, axis=1) - 1.0, 1.0)
    back, _ = _formula(Pp, inv_r, f)
    interchange = scaled_residual(back - P @ f, f)
    R, Rp = W / m.mu[:, None], Wp / m.mu[:, None]
    R_res = scaled_residual(Rp @ f - np.sum(R * r * f[None, :], axis=1), np.abs(Rp) @ np.abs(f))
    inv = scaled_residual(mp.nu @ Pp - mp.nu, mp.nu)
    return MarkovPrimeReport(value, direct, scaled_residual(value - direct, f), normalizer,
                             recip, interchange, R_res, inv)


@dataclass(frozen=True)
class LaplacianPrimeReport:
    direct: np.ndarray
    via_identity: np.ndarray
    full_residual: float
    reduced_residual: Optional[float] = None  # Delta' f = q Delta(qf) on the interior
    harmonic_equivalence: Optional[bool] = None  # Delta' f = 0 <=> Delta(qf) = 0 there

    def passed(self, tol: float = RTOL) -> bool:
        ok = self.full_residual <= tol
        if self.reduced_residual is not None:
            ok &= self.reduced_residual <= tol
        if self.harmonic_equivalence is not None:
            ok &= self.harmonic_equivalence
        return bool(ok)


def laplacian_prime_identity(sys: MarkovSystem, eq: EquivalenceData, f, interior=None,
                             tol: float = 1e-10) -> LaplacianPrimeReport:
    """Delta' f against c q f (Pq - q) + q Delta(qf).

    With ``interior`` given, q is expected harmonic there and the reduced
    identity and the harmonicity correspondence are checked on those states.
    """
    if not eq.is_product:
        raise NonProductFormError("the Laplacian identity needs r(i, j) = q_i q_j")
    f = sys._vec(f)
    q = eq.q
    if q.shape != (sys.n,):
        raise DimensionError("q has the wrong length")
    mp = transform_measure(sys.measure, eq)
    direct = (mp.nu * f - mp.dense() @ f) / mp.mu
    W = sys.measure.dense()
    Pq = (W @ q) / sys.nu
    dqf = apply_Delta(sys, q * f)
    ident = sys.c * q * f * (Pq - q) + q * dqf
    scale = np.abs(mp.c * f) + np.abs(mp.dense() / mp.mu[:, None] @ np.abs(f))
    full = scaled_residual(direct - ident, scale)
    reduced = equiv_ok = None
    if interior is not None:
        I = np.asarray(sorted(set(int(i) for i in interior)), dtype=np.int64)
        if I.size:
            reduced = scaled_residual(direct[I] - (q * dqf)[I], scale[I])
            zero_p = np.abs(direct[I]) <= tol * (1.0 + scale[I])
            zero = np.abs(dqf[I]) <= tol * (1.0 + np.abs(sys.c * q * f)[I] + np.abs(W[I] / sys.mu[I, None]) @ np.abs(q * f))
            equiv_ok = bool(np.all(zero_p == zero))
    return LaplacianPrimeReport(direct, ident, full, reduced, equiv_ok)


class IsometryResult(NamedTuple):
    transformed_energy: float  # ||f||^2 in H_E(rho')
    original_energy: float  # ||q f||^2 in H_E(rho)
    residual: float


def q_isometry_check(sys: MarkovSystem, q, f, harmonic_tol: float = 1e-10,
                     form: Optional[EnergyForm] = None,
                     form_prime: Optional[EnergyForm] = None) -> IsometryResult:
    """||f||_{rho'} = ||q f||_rho, which needs Delta q = 0 wherever f != 0."""
    f = sys._vec(f)
    eq = EquivalenceData(q=q)
    q = eq.q
    dq = apply_Delta(sys, q)
    W = sys.measure.dense()
    scale = sys.c * q + (W / sys.mu[:, None]) @ q
    bad = (f != 0) & (np.abs(dq) > harmonic_tol * (1.0 + scale))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise SupportViolationError(f"f is nonzero at state {i} where Delta q = {dq[i]!r}")
    form = form or EnergyForm.from_measure(sys.measure)
    form_prime = form_prime or EnergyForm.from_measure(transform_measure(sys.measure, eq))
    lhs = form_prime.norm_sq(f)
    rhs = form.norm_sq(q * f)
    return IsometryResult(lhs, rhs, abs(lhs - rhs) / (1.0 + lhs))


@dataclass(frozen=True)
class RadonNikodymReport:
    table: np.ndarray  # d rho'_x / d rho_x (y) on the support, 0 elsewhere
    m: np.ndarray  # d mu / d mu'
    r: np.ndarray  # d rho' / d rho on the support
    general_residual: float  # table = m(x) r_x(y)
    phi: Optional[np.ndarray] = None  # table(x, y) / q(y) when r = p(x) q(y)
    product_residual: Optional[float] = None


def general_equivalence_rn(m: FiniteSymmetricMeasure, m_prime: FiniteSymmetricMeasure,
                           q=None, p=None) -> RadonNikodymReport:
    """Fiber Radon-Nikodym derivatives between measures on different base weights.

    Passing q (and optionally p, defaulting to q) declares r(x, y) = p(x) q(y);
    then table(x, y) / q(y) must not depend on y.
    """
    if m.n != m_prime.n:
        raise DimensionError("measures have different state counts")
    W, Wp = m.dense(), m_prime.dense()
    on = W > 0
    if not np.array_equal(on, Wp > 0):
        i, j = np.argwhere(on != (Wp > 0))[0]
        raise SupportMismatchError(f"pair ({i},{j}) lies in one support but not the other")
    safe = np.where(on, W, 1.0)
    table = np.where(on, Wp * m.mu[:, None] / (safe * m_prime.mu[:, None]), 0.0)
    mr = m.mu / m_prime.mu
    r = np.where(on, Wp / safe, 0.0)
    general = scaled_residual(table - mr[:, None] * r, table)
    phi = prod = None
    if q is not None:
        q = np.asarray(q, dtype=float)
        p = q if p is None else np.asarray(p, dtype=float)
        if q.shape != (m.n,) or p.shape != (m.n,):
            raise DimensionError("p and q must be vectors over the states")
        if np.any(q <= 0) or np.any(p <= 0):
            raise NonpositiveFactorError("p and q must be strictly positive")
        ratio = np.where(on, table / q[None, :], np.nan)
        phi = p * mr
        dev = np.where(on, ratio - phi[:, None], 0.0)
        prod = max(scaled_residual(dev, phi), scaled_residual(np.where(on, r - np.outer(p, q), 0.0), r))
    return RadonNikodymReport(table, mr, r, general, phi, prod)
