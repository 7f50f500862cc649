"""Symmetric kernel densities on [0,1]^2 and their quadrature."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from ..errors import EvaluationError, SchemaError
from .expr import BinOp, Call, Neg, Node, Num, Var, compile_expr, parse_kernel, substitute, to_text

SYMMETRY_TOL = 1e-10
RULES = ("gauss-legendre", "midpoint")
_RULE_ALIASES = {"gauss": "gauss-legendre", "gauss-legendre": "gauss-legendre",
                 "gl": "gauss-legendre", "midpoint": "midpoint"}


@dataclass(frozen=True)
class Quadrature:
    rule: str = "gauss-legendre"
    points_per_cell: int = 4

    def __post_init__(self):
        rule = _RULE_ALIASES.get(self.rule)
        if rule is None:
            raise SchemaError(f"unknown quadrature rule {self.rule!r}")
        object.__setattr__(self, "rule", rule)
        if int(self.points_per_cell) < 1:
            raise SchemaError("points_per_cell must be positive")
        object.__setattr__(self, "points_per_cell", int(self.points_per_cell))

    def reference(self) -> tuple:
        """Nodes in [0,1] and weights summing to 1 for one unit cell."""
        p = self.points_per_cell
        if self.rule == "gauss-legendre":
            t, w = np.polynomial.legendre.leggauss(p)
            return (t + 1.0) / 2.0, w / 2.0
        return (np.arange(p) + 0.5) / p, np.full(p, 1.0 / p)

    def nodes(self, edges: np.ndarray) -> tuple:
        """Nodes and weights on consecutive cells [edges[k], edges[k+1]]."""
        t, w = self.reference()
        lo, width = edges[:-1], np.diff(edges)
        return ((lo[:, None] + width[:, None] * t[None, :]).ravel(),
                (width[:, None] * w[None, :]).ravel())


# builtin families, expanded to expression trees

def _builtin_constant(value: float = 1.0) -> Node:
    return Num(float(value))


def _builtin_gaussian_diff(s: float = 1.0) -> Node:
    d = BinOp("-", Var("x"), Var("y"))
    return Call("exp", (Neg(BinOp("*", Num(float(s)), BinOp("^", d, Num(2.0)))),))


def _builtin_product(q: str = "1") -> Node:
    qx = parse_kernel(q)
    qy = substitute(qx, {"x": Var("y"), "y": Var("x")})
    return BinOp("*", qx, qy)


def _builtin_rank_one_plus_constant(q: str = "x", a: float = 1.0, b: float = 1.0) -> Node:
    return BinOp("+", Num(float(a)), BinOp("*", Num(float(b)), _builtin_product(q)))


BUILTINS = {
    "constant": _builtin_constant,
    "gaussian_diff": _builtin_gaussian_diff,
    "product": _builtin_product,
    "rank_one_plus_constant": _builtin_rank_one_plus_constant,
}


@dataclass(frozen=True, eq=False)
class KernelSpec:
    ast: Node
    quadrature: Quadrature = field(default_factory=Quadrature)
    source: str = ""
    builtin: Optional[str] = None
    params: dict = field(default_factory=dict)
    symmetry_checked: bool = False

    @classmethod
    def from_expr(cls, text: str, quadrature: Optional[Quadrature] = None) -> "KernelSpec":
        return cls(parse_kernel(text), quadrature or Quadrature(), source=text)

    @classmethod
    def from_builtin(cls, name: str, params: Optional[dict] = None,
                     quadrature: Optional[Quadrature] = None) -> "KernelSpec":
        if name not in BUILTINS:
            raise SchemaError(f"unknown builtin {name!r}; known: {sorted(BUILTINS)}")
        params = dict(params or {})
        try:
            ast = BUILTINS[name](**params)
        except TypeError as exc:
            raise SchemaError(f"bad parameters for {name}: {exc}") from exc
        return cls(ast, quadrature or Quadrature(), source=to_text(ast), builtin=name, params=params)

    @property
    def text(self) -> str:
        return to_text(self.ast)

    @cached_property
    def _fn(self):
        return compile_expr(self.ast)

    def raw(self, x, y) -> np.ndarray:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            return np.asarray(self._fn(x, y), dtype=float)

    def evaluate(self, x, y) -> np.ndarray:
        """k(x, y); EvaluationError on NaN, infinite or negative values."""
        v = self.raw(x, y)
        bad = ~np.isfinite(v) | (v < 0)
        if np.any(bad):
            idx = np.unravel_index(np.argmax(bad), v.shape)
            bx = np.broadcast_to(np.asarray(x, dtype=float), v.shape)[idx]
            by = np.broadcast_to(np.asarray(y, dtype=float), v.shape)[idx]
            kind = "negative" if np.isfinite(v[idx]) else "non-finite"
            raise EvaluationError(f"kernel is {kind} ({v[idx]!r})", (float(bx), float(by)))
        return v

    def to_dict(self) -> dict:
        q = {"rule": self.quadrature.rule, "points": self.quadrature.points_per_cell}
        if self.builtin is not None:
            return {"builtin": self.builtin, "params": self.params, "quadrature": q}
        return {"expr": self.text, "quadrature": q}


def spec_from_dict(doc: dict) -> KernelSpec:
    known = {"expr", "builtin", "params", "quadrature"}
    extra = set(doc) - known
    if extra:
        raise SchemaError(f"unknown kernel fields: {sorted(extra)}")
    qd = doc.get("quadrature", {})
    if set(qd) - {"rule", "points", "points_per_cell"}:
        raise SchemaError(f"unknown quadrature fields: {sorted(set(qd))}")
    quad = Quadrature(qd.get("rule", "gauss-legendre"),
                      qd.get("points", qd.get("points_per_cell", 4)))
    if ("expr" in doc) == ("builtin" in doc):
        raise SchemaError("kernel spec needs exactly one of 'expr' or 'builtin'")
    if "expr" in doc:
        return KernelSpec.from_expr(doc["expr"], quad)
    return KernelSpec.from_builtin(doc["builtin"], doc.get("params"), quad)


def load_kernel(arg: str) -> KernelSpec:
    """CLI helper: a path to a .json/.toml spec, otherwise an inline expression."""
    import os
    if os.path.isfile(arg):
        with open(arg, "rb") as fh:
            data = fh.read()
        if arg.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return spec_from_dict(tomllib.loads(data.decode()))
        return spec_from_dict(json.loads(data))
    return KernelSpec.from_expr(arg)


# symmetry

@dataclass(frozen=True)
class SymmetryResult:
    symmetric: bool
    nodes_checked: int
    violation: Optional[tuple] = None  # (x, y, k(x,y), k(y,x))


def check_symmetry(spec: KernelSpec, samples: int = 256, level: int = 3) -> SymmetryResult:
    """Scan a Halton node set plus the quadrature grid of the given level."""
    pts = []
    if samples > 0:
        pts.append(qmc.Halton(d=2, scramble=False).random(samples + 1)[1:])
    gx, _ = spec.quadrature.nodes(np.linspace(0.0, 1.0, 2 ** level + 1))
    X, Y = np.meshgrid(gx, gx, indexing="ij")
    pts.append(np.column_stack([X.ravel(), Y.ravel()]))
    pts = np.vstack(pts)
    x, y = pts[:, 0], pts[:, 1]
    kxy = spec.evaluate(x, y)
    kyx = spec.evaluate(y, x)
    bad = np.abs(kxy - kyx) > SYMMETRY_TOL * (1.0 + np.abs(kxy))
    if np.any(bad):
        i = int(np.argmax(bad))
        return SymmetryResult(False, len(x), (float(x[i]), float(y[i]), float(kxy[i]), float(kyx[i])))
    return SymmetryResult(True, len(x))


# rectangle masses

Interval = tuple
IntervalSet = Sequence[Interval]


def normalize_intervals(S) -> list:
    """Sorted, validated list of (a, b) with 0 <= a <= b <= 1; empty ones dropped."""
    if S is None:
        return []
    if len(S) == 2 and all(isinstance(v, (int, float)) for v in S):
        S = [tuple(S)]
    out = []
    for a, b in S:
        a, b = float(a), float(b)
        if not (0.0 <= a <= b <= 1.0):
            raise ValueError(f"interval [{a}, {b}] is not inside [0, 1]")
        if b > a:
            out.append((a, b))
    out.sort()
    for (a0, b0), (a1, b1) in zip(out, out[1:]):
        if a1 < b0:
            raise ValueError(f"intervals [{a0}, {b0}] and [{a1}, {b1}] overlap")
    return out


def _axis_nodes(spec: KernelSpec, S: list) -> tuple:
    xs, ws = [], []
    for a, b in S:
        x, w = spec.quadrature.nodes(np.array([a, b]))
        xs.append(x)
        ws.append(w)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def kernel_rectangle_mass(spec: KernelSpec, A, B) -> float:
    """Quadrature of the kernel over A x B, one tensor rule per interval pair."""
    A, B = normalize_intervals(A), normalize_intervals(B)
    if not A or not B:
        return 0.0
    total = []
    for ia in A:
        xa, wa = _axis_nodes(spec, [ia])
        for ib in B:
            yb, wb = _axis_nodes(spec, [ib])
            K = spec.evaluate(xa[:, None], yb[None, :])
            total.append(float(wa @ K @ wb))
    return math.fsum(total)


def fiber_mass(spec: KernelSpec, x: float, B=((0.0, 1.0),)) -> float:
    """Quadrature of y -> k(x, y) over B; with B = [0,1] this is c(x)."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x = {x} is outside [0, 1]")
    B = normalize_intervals(B)
    parts = []
    for ib in B:
        yb, wb = _axis_nodes(spec, [ib])
        parts.append(float(np.dot(wb, spec.evaluate(np.full_like(yb, x), yb))))
    return math.fsum(parts)
