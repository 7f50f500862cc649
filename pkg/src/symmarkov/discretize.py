"""Dyadic discretization of kernel measures on [0,1].

Level n cuts [0,1] into 2**n cells; the weight between cells i and j is the
kernel mass of their product.  Cell masses are always computed at the
finest level a caller asks for and summed upward in 2x2 blocks, so coarser
levels conserve mass up to rounding.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import AsymmetryError, LevelTooLargeError, MonotonicityViolation
from .kernel.spec import SYMMETRY_TOL, KernelSpec
from .measure import FiniteSymmetricMeasure

MAX_LEVEL = 12
MONOTONE_TOL = 1e-12
_BLOCK_NODES = 1 << 16  # kernel evaluations per row block, in units of columns


def cell_index(x: float, level: int) -> int:
    """i_n(x): the level-n cell containing x (the last cell is closed at 1)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x = {x} is outside [0, 1]")
    return min(int(math.floor(x * 2 ** level)), 2 ** level - 1)


def cell_bounds(i: int, level: int) -> tuple:
    h = 2.0 ** -level
    return i * h, (i + 1) * h


def _check_level(level: int, max_level: int = MAX_LEVEL):
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level > max_level:
        raise LevelTooLargeError(f"level {level} exceeds the maximum {max_level}")


def cell_masses(spec: KernelSpec, level: int, rows: Optional[range] = None,
                cols: Optional[range] = None) -> np.ndarray:
    """Block of level-n cell masses rho(A_n(i) x A_n(j)) for i in rows, j in cols."""
    N = 2 ** level
    rows = range(N) if rows is None else rows
    cols = range(N) if cols is None else cols
    quad = spec.quadrature
    t, w = quad.reference()
    p = t.size
    h = 1.0 / N

    def nodes(r: range) -> np.ndarray:
        lo = np.arange(r.start, r.stop, dtype=float) * h
        return (lo[:, None] + h * t[None, :]).ravel()

    ycols = nodes(cols)
    out = np.empty((len(rows), len(cols)))
    step = max(1, _BLOCK_NODES // max(1, ycols.size))
    for start in range(0, len(rows), step):
        sub = range(rows.start + start, min(rows.stop, rows.start + start + step))
        K = spec.evaluate(nodes(sub)[:, None], ycols[None, :])
        K = K.reshape(len(sub), p, len(cols), p)
        out[start:start + len(sub)] = np.einsum("apbq,p,q->ab", K, w, w) * (h * h)
    return out


def coarsen(W: np.ndarray) -> np.ndarray:
    """Sum 2x2 blocks: weights of the parent partition."""
    a, b = W.shape
    return W.reshape(a // 2, 2, b // 2, 2).sum(axis=(1, 3))


def _symmetrize_checked(W: np.ndarray, level: int) -> np.ndarray:
    gap = np.abs(W - W.T)
    bound = SYMMETRY_TOL * (1.0 + np.abs(W))
    if np.any(gap > bound):
        i, j = np.unravel_index(np.argmax(gap - bound), W.shape)
        raise AsymmetryError(
            f"cell masses ({i},{j}) = {W[i, j]!r} and ({j},{i}) = {W[j, i]!r} differ at level {level}")
    # (a + b) / 2 is bitwise symmetric under a <-> b
    return 0.5 * (W + W.T)


@dataclass(frozen=True, eq=False)
class DiscretizedNetwork:
    level: int
    weights: np.ndarray
    measure: FiniteSymmetricMeasure

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def cell(self, i: int) -> tuple:
        return cell_bounds(i, self.level)


def _network(level: int, W: np.ndarray) -> DiscretizedNetwork:
    W = _symmetrize_checked(W, level)
    mu = np.full(W.shape[0], 2.0 ** -level)
    return DiscretizedNetwork(level, W, FiniteSymmetricMeasure(mu, W, allow_diagonal=True))


def discretize_kernel(spec: KernelSpec, level: int, max_level: int = MAX_LEVEL) -> DiscretizedNetwork:
    _check_level(level, max_level)
    return _network(level, cell_masses(spec, level))


def discretize_ladder(spec: KernelSpec, levels: int, max_level: int = MAX_LEVEL) -> list:
    """Networks for levels 1..levels, all coarsened from the finest one."""
    _check_level(levels, max_level)
    W = cell_masses(spec, levels)
    nets = []
    for lv in range(levels, 0, -1):
        nets.append(_network(lv, W))
        W = coarsen(W)
    return nets[::-1]


def refinement_residual(coarse: DiscretizedNetwork, fine: DiscretizedNetwork) -> float:
    """Relative mass mismatch between w_n and the block sums of w_{n+1}."""
    summed = coarsen(fine.weights)
    return float(np.max(np.abs(summed - coarse.weights)) / (1.0 + np.max(np.abs(coarse.weights))))


def _levels(levels) -> list:
    if isinstance(levels, int):
        return list(range(1, levels + 1))
    out = sorted(int(v) for v in levels)
    if not out:
        raise ValueError("no levels requested")
    return out


def _assert_nonincreasing(seq: Sequence[float], lvls: Sequence[int]):
    for k in range(1, len(seq)):
        if seq[k] > seq[k - 1] + MONOTONE_TOL * (1.0 + abs(seq[k - 1])):
            raise MonotonicityViolation(
                f"sequence increased from {seq[k - 1]!r} to {seq[k]!r}", lvls[k])


def conductance_sequence(spec: KernelSpec, x: float, y: float, levels=8,
                         max_level: int = MAX_LEVEL) -> np.ndarray:
    """c^(n)_xy = rho(A_n(i_n(x)) x A_n(i_n(y))) for the requested levels."""
    lvls = _levels(levels)
    top, fine = lvls[0], lvls[-1]
    _check_level(fine, max_level)
    # only the block under the coarsest requested cells is needed
    span = 2 ** (fine - top)
    ix, iy = cell_index(x, top), cell_index(y, top)
    W = cell_masses(spec, fine, range(ix * span, (ix + 1) * span), range(iy * span, (iy + 1) * span))
    vals = {}
    lv = fine
    while True:
        if lv in lvls:
            s = 2 ** (lv - top)
            vals[lv] = float(W[cell_index(x, lv) - ix * s, cell_index(y, lv) - iy * s])
        if lv == top:
            break
        W = coarsen(W)
        lv -= 1
    seq = np.array([vals[lv] for lv in lvls])
    _assert_nonincreasing(seq, lvls)
    return seq


def vertex_mass_sequence(spec: KernelSpec, x: float, levels=8, normalized: bool = False,
                         max_level: int = MAX_LEVEL) -> np.ndarray:
    """c^(n)(x) = rho(A_n(i_n(x)) x [0,1]); divided by 2**-n when normalized."""
    lvls = _levels(levels)
    top, fine = lvls[0], lvls[-1]
    _check_level(fine, max_level)
    span = 2 ** (fine - top)
    ix = cell_index(x, top)
    strip = cell_masses(spec, fine, range(ix * span, (ix + 1) * span)).sum(axis=1)
    vals = {}
    lv = fine
    while True:
        if lv in lvls:
            vals[lv] = float(strip[cell_index(x, lv) - ix * 2 ** (lv - top)])
        if lv == top:
            break
        strip = strip.reshape(-1, 2).sum(axis=1)
        lv -= 1
    raw = np.array([vals[lv] for lv in lvls])
    if not normalized:
        _assert_nonincreasing(raw, lvls)
        return raw
    return raw * np.array([2.0 ** lv for lv in lvls])


def convergence_order(errors: Sequence[float], lvls: Sequence[int]) -> float:
    """Slope of -log2(error) against level; inf when every error is at rounding level."""
    errors = np.asarray(errors, dtype=float)
    keep = errors > 1e-14
    if keep.sum() < 2:
        return math.inf
    slope = np.polyfit(np.asarray(lvls, dtype=float)[keep], np.log2(errors[keep]), 1)[0]
    return float(-slope)


# connectedness

@dataclass(frozen=True)
class Connectivity:
    connected: bool
    component: tuple = ()  # a closed set of cells when disconnected
    parents: tuple = ()  # BFS tree rooted at cell 0 when connected


def check_connected(net: DiscretizedNetwork, tol: float = 0.0) -> Connectivity:
    S = net.weights > tol
    k, labels = connected_components(S, directed=False)
    if k > 1:
        return Connectivity(False, tuple(np.flatnonzero(labels == labels[0]).tolist()))
    parents = [-1] * net.n
    seen = np.zeros(net.n, dtype=bool)
    seen[0] = True
    q = deque([0])
    while q:
        i = q.popleft()
        for j in np.flatnonzero(S[i]):
            if not seen[j]:
                seen[j] = True
                parents[j] = i
                q.append(int(j))
    return Connectivity(True, parents=tuple(parents))


@dataclass(frozen=True)
class CellPath:
    blocks: tuple  # consecutive blocks of cells; the first is (a,), the last touches b
    greedy: bool  # False when the block construction stalled and BFS was used


def _bfs_path(S: np.ndarray, a: int, b: int) -> Optional[list]:
    prev = {a: None}
    q = deque([a])
    while q:
        i = q.popleft()
        if i == b:
            break
        for j in np.flatnonzero(S[i]):
            j = int(j)
            if j not in prev:
                prev[j] = i
                q.append(j)
    if b not in prev:
        return None
    path = [b]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def connecting_path(net: DiscretizedNetwork, a: int, b: int, tol: float = 0.0) -> Optional[CellPath]:
    """Chain of cell blocks from a to b with positive mass between neighbours.

    Cells are scanned in order with a first; each new block runs from just
    past the previous block to the first cell that the previous block
    touches.  If a block touches nothing further along, BFS on single cells
    takes over.
    """
    S = net.weights > tol
    if a == b:
        return CellPath(((a,),), True)
    order = [a] + [i for i in range(net.n) if i != a]
    pos = {c: k for k, c in enumerate(order)}
    block = [a]
    end = 0
    blocks = [tuple(block)]
    while not S[block, b].any():
        touched = [pos[j] for j in np.flatnonzero(S[block].any(axis=0)) if pos[j] > end]
        if not touched:
            path = _bfs_path(S, a, b)
            return None if path is None else CellPath(tuple((c,) for c in path), False)
        nxt = min(touched)
        block = order[end + 1:nxt + 1]
        end = nxt
        blocks.append(tuple(block))
    if blocks[-1] != (b,) and b not in blocks[-1]:
        blocks.append((b,))
    return CellPath(tuple(blocks), True)


def certificates(spec: KernelSpec, levels: int, probes: Sequence[float] = (0.25, 0.5, 0.75),
                 exact_c=None, nets: Optional[list] = None) -> dict:
    """Monotonicity, refinement, connectedness and convergence results."""
    nets = nets if nets is not None else discretize_ladder(spec, levels)
    lvls = list(range(1, levels + 1))
    out = {"levels": levels, "kernel": spec.text}
    refine = [refinement_residual(nets[k], nets[k + 1]) for k in range(len(nets) - 1)]
    out["refinement"] = {"max_residual": max(refine, default=0.0),
                         "passed": all(r <= 1e-10 for r in refine)}
    conn = [check_connected(n).connected for n in nets]
    out["connected"] = {"per_level": conn, "passed": all(conn)}
    mono = []
    for x in probes:
        try:
            vertex_mass_sequence(spec, x, lvls)
            for y in probes:
                if y != x:
                    conductance_sequence(spec, x, y, lvls)
            mono.append({"x": x, "passed": True})
        except MonotonicityViolation as exc:
            mono.append({"x": x, "passed": False, "level": exc.level})
    out["monotone"] = {"probes": mono, "passed": all(m["passed"] for m in mono)}
    conv = []
    for x in probes:
        seq = vertex_mass_sequence(spec, x, lvls, normalized=True)
        entry = {"x": x, "normalized": seq.tolist()}
        if exact_c is not None:
            err = np.abs(seq - exact_c(x))
            order = convergence_order(err, lvls)
            entry.update(error=err.tolist(), order=order if math.isfinite(order) else "exact",
                         passed=bool(order >= 0.9))
        conv.append(entry)
    out["convergence"] = {"probes": conv,
                          "passed": all(c.get("passed", True) for c in conv)}
    out["passed"] = all(out[k]["passed"] for k in ("refinement", "connected", "monotone", "convergence"))
    return out
