"""Finite symmetric measures on {0, ..., n-1} x {0, ..., n-1}.

A measure is stored as a base weight vector ``mu`` and a symmetric
nonnegative weight matrix ``W`` with ``W[i, j] = rho({i} x {j})``.  The
disintegration over ``mu`` has fibers ``rho_i(j) = W[i, j] / mu[i]``, total
fiber mass ``c = nu / mu`` and ``nu_i = sum_j W[i, j]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    AsymmetryError,
    DiagonalMassError,
    DimensionError,
    EmptyTargetError,
    NegativeWeightError,
    NonpositiveBaseError,
    SchemaError,
    ZeroFiberError,
)

SCHEMA_VERSION = 1

# States beyond this count are stored as CSR.
DENSE_LIMIT = 512


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def states_array(states: Iterable[int], n: int) -> np.ndarray:
    """Sorted unique int array of states, range-checked against ``n``."""
    idx = np.unique(np.asarray(list(states), dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        bad = idx[0] if idx[0] < 0 else idx[-1]
        raise IndexError(f"state {int(bad)} out of range for {n} states")
    return idx


def indicator(states: Iterable[int], n: int) -> np.ndarray:
    chi = np.zeros(n)
    chi[states_array(states, n)] = 1.0
    return chi


@dataclass(frozen=True, eq=False)
class FiniteSymmetricMeasure:
    """Symmetric measure on a finite state space.

    Pass ``check=False`` to skip validation; used to build deliberately
    broken inputs for the reversibility battery.
    """

    mu: np.ndarray
    W: object  # ndarray, or csr_array when n > DENSE_LIMIT
    allow_diagonal: bool = False
    edge_tolerance: float = 0.0
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        mu = _frozen(self.mu)
        if mu.ndim != 1 or mu.size < 1:
            raise DimensionError("mu must be a nonempty vector")
        W = self.W
        if sp.issparse(W):
            W = sp.csr_array(W, dtype=float)
            W.sum_duplicates()
            W.sort_indices()
        else:
            W = _frozen(W)
        if W.shape != (mu.size, mu.size):
            raise DimensionError(f"W has shape {W.shape}, expected {(mu.size, mu.size)}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "W", W)
        nu = np.asarray(W.sum(axis=1)).ravel()
        nu.setflags(write=False)
        object.__setattr__(self, "_nu", nu)
        if self.check:
            self._validate()

    def _validate(self):
        if np.any(~(self.mu > 0)):
            i = int(np.flatnonzero(~(self.mu > 0))[0])
            raise NonpositiveBaseError(f"mu[{i}] = {self.mu[i]} is not positive")
        W = self.W
        data = W.data if sp.issparse(W) else W
        if not np.all(np.isfinite(data)):
            raise NegativeWeightError("weights must be finite")
        if np.any(data < 0):
            raise NegativeWeightError("weights must be nonnegative")
        if sp.issparse(W):
            asym = (W != W.T).nnz > 0
        else:
            asym = not np.array_equal(W, W.T)
        if asym:
            raise AsymmetryError("W is not symmetric")
        if not self.allow_diagonal and np.any(self.diagonal() != 0):
            i = int(np.flatnonzero(self.diagonal())[0])
            raise DiagonalMassError(f"W[{i}, {i}] > 0 but allow_diagonal is off")
        if np.any(self._nu <= 0):
            i = int(np.flatnonzero(self._nu <= 0)[0])
            raise ZeroFiberError(f"fiber of state {i} has zero total mass")

    # derived measures

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def nu(self) -> np.ndarray:
        return self._nu

    @property
    def c(self) -> np.ndarray:
        return self._nu / self.mu

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.W)

    def diagonal(self) -> np.ndarray:
        return np.asarray(self.W.diagonal()).ravel()

    def dense(self) -> np.ndarray:
        return self.W.toarray() if self.is_sparse else np.asarray(self.W)

    def fiber(self, i: int) -> np.ndarray:
        """The fiber measure j -> rho_i({j})."""
        row = self.W[[i], :].toarray().ravel() if self.is_sparse else self.W[i]
        return row / self.mu[i]

    def total_mass(self) -> float:
        return math.fsum(np.asarray(self.W.data if self.is_sparse else self.W).ravel())

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mu).tobytes())
        h.update(np.ascontiguousarray(self.dense()).tobytes())
        return h.hexdigest()

    # support graph

    def support(self) -> sp.csr_array:
        """Edge (i, j) iff W[i, j] > edge_tolerance."""
        if self.is_sparse:
            S = self.W.copy()
            S.data = (S.data > self.edge_tolerance).astype(float)
            S.eliminate_zeros()
            return S
        return sp.csr_array((self.W > self.edge_tolerance).astype(float))

    def components(self) -> tuple[int, np.ndarray]:
        return connected_components(self.support(), directed=False)

    def neighbors(self, i: int) -> np.ndarray:
        S = self.support()
        return S.indices[S.indptr[i]:S.indptr[i + 1]]


def build_measure(
    mu: Sequence[float],
    entries,
    allow_diagonal: bool = False,
    edge_tolerance: float = 0.0,
) -> FiniteSymmetricMeasure:
    """Build a measure from sparse triplets.

    ``entries`` is a mapping ``{(i, j): w}`` or an iterable of ``(i, j, w)``.
    Each unordered pair may be listed once (mirrored automatically) or in
    both orientations with equal values.
    """
    mu = np.asarray(mu, dtype=float)
    n = mu.size
    if isinstance(entries, Mapping):
        items = [(i, j, w) for (i, j), w in entries.items()]
    else:
        items = [tuple(t) for t in entries]
    seen: dict[tuple[int, int], float] = {}
    for t in items:
        if len(t) != 3:
            raise SchemaError(f"triplet {t!r} does not have three entries")
        i, j, w = int(t[0]), int(t[1]), float(t[2])
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"triplet ({i}, {j}) out of range for {n} states")
        if not w >= 0 or not math.isfinite(w):
            raise NegativeWeightError(f"weight {w} at ({i}, {j}) must be finite and nonnegative")
        if (i, j) in seen and seen[(i, j)] != w:
            raise AsymmetryError(f"pair ({i}, {j}) given with {seen[(i, j)]} and {w}")
        seen[(i, j)] = w
    for (i, j), w in seen.items():
        back = seen.get((j, i))
        if back is not None and back != w:
            raise AsymmetryError(f"W[{i},{j}] = {w} but W[{j},{i}] = {back}")
    rows, cols, vals = [], [], []
    for (i, j), w in seen.items():
        if i <= j or (j, i) not in seen:
            rows.append(i)
            cols.append(j)
            vals.append(w)
            if i != j:
                rows.append(j)
                cols.append(i)
                vals.append(w)
    if n > DENSE_LIMIT:
        W = sp.csr_array((vals, (rows, cols)), shape=(n, n))
    else:
        W = np.zeros((n, n))
        W[rows, cols] = vals
    return FiniteSymmetricMeasure(mu, W, allow_diagonal=allow_diagonal,
                                  edge_tolerance=edge_tolerance)


def from_dense(mu, W, allow_diagonal: Optional[bool] = None, **kw) -> FiniteSymmetricMeasure:
    W = np.asarray(W, dtype=float)
    if allow_diagonal is None:
        allow_diagonal = bool(np.any(np.diag(W) != 0))
    if W.shape[0] > DENSE_LIMIT:
        W = sp.csr_array(W)
    return FiniteSymmetricMeasure(np.asarray(mu, dtype=float), W,
                                  allow_diagonal=allow_diagonal, **kw)


def _submatrix(m: FiniteSymmetricMeasure, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if m.is_sparse:
        return m.W[A][:, B].toarray()
    return m.W[np.ix_(A, B)]


def rectangle_mass(m: FiniteSymmetricMeasure, A: Iterable[int], B: Iterable[int]) -> float:
    """rho(A x B), summed with fsum so the result is order independent."""
    A = states_array(A, m.n)
    B = states_array(B, m.n)
    if A.size == 0 or B.size == 0:
        return 0.0
    return math.fsum(_submatrix(m, A, B).ravel())


def apply_markov(m: FiniteSymmetricMeasure, f: np.ndarray) -> np.ndarray:
    return (m.W @ f) / m.nu


def rho_n_mass(m: FiniteSymmetricMeasure, n: int, A: Iterable[int], B: Iterable[int]) -> float:
    """rho_n(A x B) = <chi_A, P^n chi_B> in L^2(nu)."""
    if n < 0:
        raise ValueError("step count must be nonnegative")
    chi_A = indicator(A, m.n)
    v = indicator(B, m.n)
    if n == 0:
        return float(np.dot(chi_A * m.nu, v))
    for _ in range(n - 1):
        v = apply_markov(m, v)
    # last step as W @ v keeps rho_1 equal to rectangle mass up to rounding
    return float(np.dot(chi_A, m.W @ v))


def rho_n_matrix(m: FiniteSymmetricMeasure, n: int) -> np.ndarray:
    """Dense diag(nu) P^n.  Materialized only on request."""
    W = m.dense()
    P = W / m.nu[:, None]
    M = np.diag(m.nu.copy())
    for _ in range(n):
        M = M @ P
    return M


def symmetrize(rho_raw, mu) -> FiniteSymmetricMeasure:
    """The symmetric measure (rho + rho o flip) / 2."""
    R = np.asarray(rho_raw.toarray() if sp.issparse(rho_raw) else rho_raw, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DimensionError("rho_raw must be square")
    if np.any(R < 0):
        raise NegativeWeightError("rho_raw must be nonnegative")
    W = 0.5 * (R + R.T)
    return from_dense(mu, W)


@dataclass(frozen=True)
class Irreducibility:
    irreducible: bool
    closed_set: Optional[tuple] = None  # witness component when decomposable
    labels: Optional[tuple] = None


def analyze_irreducibility(m: FiniteSymmetricMeasure) -> Irreducibility:
    k, labels = m.components()
    if k == 1:
        return Irreducibility(True, None, tuple(int(v) for v in labels))
    witness = tuple(int(i) for i in np.flatnonzero(labels == labels[0]))
    return Irreducibility(False, witness, tuple(int(v) for v in labels))


def attainable(m: FiniteSymmetricMeasure, x: int, B: Iterable[int]) -> Optional[int]:
    """Smallest n >= 1 with P^n(x, B) > 0, or None if B is unreachable."""
    B = set(states_array(B, m.n).tolist())
    if not B:
        raise EmptyTargetError("target set is empty")
    if not 0 <= x < m.n:
        raise IndexError(f"state {x} out of range")
    S = m.support()
    # breadth-first search over walks of length >= 1
    dist = {}
    queue = deque()
    for j in S.indices[S.indptr[x]:S.indptr[x + 1]]:
        j = int(j)
        if j not in dist:
            dist[j] = 1
            queue.append(j)
    while queue:
        u = queue.popleft()
        if u in B:
            return dist[u]
        for j in S.indices[S.indptr[u]:S.indptr[u + 1]]:
            j = int(j)
            if j not in dist:
                dist[j] = dist[u] + 1
                queue.append(j)
    return None


# JSON interchange

_MEASURE_KEYS = {"schema", "mu", "triplets", "allow_diagonal", "edge_tolerance"}


def measure_to_dict(m: FiniteSymmetricMeasure) -> dict:
    W = sp.coo_array(m.W) if m.is_sparse else sp.coo_array(np.asarray(m.W))
    symmetric = (sp.csr_array(W) != sp.csr_array(W).T).nnz == 0
    trip = sorted((int(i), int(j), float(w)) for i, j, w in zip(W.row, W.col, W.data)
                  if (i <= j or not symmetric) and w != 0)
    doc = {
        "schema": SCHEMA_VERSION,
        "mu": [float(v) for v in m.mu],
        "triplets": [list(t) for t in trip],
        "allow_diagonal": bool(m.allow_diagonal),
    }
    if m.edge_tolerance:
        doc["edge_tolerance"] = m.edge_tolerance
    return doc


def measure_from_dict(doc: dict, force: bool = False) -> FiniteSymmetricMeasure:
    if not isinstance(doc, dict):
        raise SchemaError("network document must be a JSON object")
    unknown = set(doc) - _MEASURE_KEYS
    if unknown:
        raise SchemaError(f"unknown fields: {sorted(unknown)}")
    if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema {doc.get('schema')}")
    for key in ("mu", "triplets"):
        if key not in doc:
            raise SchemaError(f"missing field {key!r}")
    allow_diag = bool(doc.get("allow_diagonal", False))
    tol = float(doc.get("edge_tolerance", 0.0))
    if not force:
        return build_measure(doc["mu"], doc["triplets"], allow_diagonal=allow_diag,
                             edge_tolerance=tol)
    # forced ingestion: no validation; pairs listed in one orientation only
    # are mirrored, pairs listed in both are taken literally
    mu = np.asarray(doc["mu"], dtype=float)
    W = np.zeros((mu.size, mu.size))
    given = {(int(i), int(j)): float(w) for i, j, w in doc["triplets"]}
    for (i, j), w in given.items():
        W[i, j] = w
        if (j, i) not in given:
            W[j, i] = w
    return FiniteSymmetricMeasure(mu, W, allow_diagonal=allow_diag,
                                  edge_tolerance=tol, check=False)


def dumps_measure(m: FiniteSymmetricMeasure) -> str:
    return json.dumps(measure_to_dict(m), sort_keys=True, indent=1) + "\n"


def loads_measure(text: str, force: bool = False) -> FiniteSymmetricMeasure:
    return measure_from_dict(json.loads(text), force=force)
