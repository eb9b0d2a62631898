"""Expressions for order-preserving, homogeneous maps on the standard cone.

Every node type keeps the two defining properties by structural induction:
nonnegative atoms are linear, and sums, maxima, minima and weighted
geometric means of monotone homogeneous terms are again monotone and
homogeneous of degree one.  Variables are stored 0-based; the text format
prints them 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EvalOverflow

GEO_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class Atom:
    coef: float
    var: int

    def __post_init__(self):
        if not (self.coef > 0 and math.isfinite(self.coef)):
            raise ValueError(f"atom coefficient must be positive and finite, got {self.coef!r}")
        if self.var < 0:
            raise ValueError("variable index must be nonnegative")


@dataclass(frozen=True)
class Sum:
    args: tuple

    def __post_init__(self):
        _check_arity("sum", self.args)


@dataclass(frozen=True)
class Max:
    args: tuple

    def __post_init__(self):
        _check_arity("max", self.args)


@dataclass(frozen=True)
class Min:
    args: tuple

    def __post_init__(self):
        _check_arity("min", self.args)


@dataclass(frozen=True)
class Geo:
    """Weighted geometric mean ``prod(arg_i ** weight_i)`` with weights summing to one."""

    weights: tuple
    args: tuple

    def __post_init__(self):
        _check_arity("geo", self.args)
        if len(self.weights) != len(self.args):
            raise ValueError("geo needs one weight per argument")
        if any(not (w > 0 and math.isfinite(w)) for w in self.weights):
            raise ValueError("geo weights must be positive")
        if abs(math.fsum(self.weights) - 1.0) > GEO_WEIGHT_TOL:
            raise ValueError("geo weights must sum to 1")


Expr = Union[Zero, Atom, Sum, Max, Min, Geo]
ZERO = Zero()


def _check_arity(kind: str, args: tuple) -> None:
    if not isinstance(args, tuple) or len(args) < 2:
        raise ValueError(f"{kind} needs at least two arguments")


# -- smart constructors -------------------------------------------------------

def atom(coef: float, var: int) -> Expr:
    if coef < 0:
        raise ValueError(f"negative coefficient {coef!r}")
    return ZERO if coef == 0 else Atom(float(coef), var)


def make_sum(args: Sequence[Expr]) -> Expr:
    """Sum with zero terms dropped; collapses to a single term or ``Zero``."""
    kept = tuple(a for a in args if not isinstance(a, Zero))
    if not kept:
        return ZERO
    if len(kept) == 1:
        return kept[0]
    return Sum(kept)


def normalize_weights(weights: Sequence[float]) -> tuple:
    """Rescale geo weights to sum to one.

    Vectors that already sum to one up to a few ulps are returned untouched so
    that normalization is idempotent (needed for text round trips).
    """
    total = math.fsum(weights)
    if abs(total - 1.0) <= 4 * np.finfo(float).eps:
        return tuple(float(w) for w in weights)
    return tuple(float(w) / total for w in weights)


def scale(expr: Expr, c: float) -> Expr:
    """Return an expression for ``c * expr`` by pushing the factor to the atoms."""
    if c < 0:
        raise ValueError("scale factor must be nonnegative")
    if c == 0:
        return ZERO
    if isinstance(expr, Zero):
        return expr
    if isinstance(expr, Atom):
        return Atom(expr.coef * c, expr.var)
    if isinstance(expr, Geo):
        return Geo(expr.weights, tuple(scale(a, c) for a in expr.args))
    return type(expr)(tuple(scale(a, c) for a in expr.args))


def children(expr: Expr) -> tuple:
    return getattr(expr, "args", ())


def walk(expr: Expr) -> Iterator[Expr]:
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def max_var(expr: Expr) -> int:
    """Largest variable index used, or -1 when there is none."""
    return max((node.var for node in walk(expr) if isinstance(node, Atom)), default=-1)


# -- maps ---------------------------------------------------------------------

@dataclass(frozen=True)
class MapDef:
    name: str
    coords: tuple

    @property
    def n(self) -> int:
        return len(self.coords)

    def __post_init__(self):
        n = len(self.coords)
        for i, e in enumerate(self.coords):
            if max_var(e) >= n:
                raise ValueError(f"map {self.name!r}, coordinate {i + 1}: variable index out of range")

    def scaled(self, c: float) -> "MapDef":
        return MapDef(self.name, tuple(scale(e, c) for e in self.coords))


@dataclass(frozen=True)
class Classification:
    subadditive_certified: bool
    contains_min: bool
    contains_geo: bool


def eval_expr(expr: Expr, x: Sequence[float]) -> float:
    if isinstance(expr, Atom):
        return expr.coef * x[expr.var]
    if isinstance(expr, Zero):
        return 0.0
    vals = [eval_expr(a, x) for a in expr.args]
    if isinstance(expr, Sum):
        # left-to-right, matching the compiled kernels bit for bit
        out = vals[0]
        for v in vals[1:]:
            out += v
        return out
    if isinstance(expr, Max):
        return max(vals)
    if isinstance(expr, Min):
        return min(vals)
    # factor out a power of two so that scaling every argument by 2**k scales
    # the mean by exactly 2**k; 0 ** w == 0 gives the continuous extension
    e = math.frexp(max(vals))[1] - 1
    out = 1.0
    for w, v in zip(expr.weights, vals):
        out *= math.ldexp(v, -e) ** w
    return math.ldexp(out, e)


def eval_map(f: MapDef, x) -> np.ndarray:
    """Evaluate ``f(x)`` for a nonnegative vector ``x``."""
    xs = [float(v) for v in x]
    if len(xs) != f.n:
        raise DimensionMismatch(f"map {f.name!r} has dimension {f.n}, got a vector of length {len(xs)}")
    if any(v < 0 or not math.isfinite(v) for v in xs):
        raise ValueError("eval expects a finite nonnegative vector")
    try:
        out = np.array([eval_expr(e, xs) for e in f.coords], dtype=float)
    except OverflowError as exc:
        raise EvalOverflow(str(exc)) from exc
    if not np.all(np.isfinite(out)):
        raise EvalOverflow(f"map {f.name!r} overflowed; use a normalized iteration")
    return out


def classify(f: MapDef) -> Classification:
    nodes = [node for e in f.coords for node in walk(e)]
    has_min = any(isinstance(node, Min) for node in nodes)
    has_geo = any(isinstance(node, Geo) for node in nodes)
    return Classification(not (has_min or has_geo), has_min, has_geo)


def expr_support(expr: Expr, support: frozenset) -> bool:
    """Whether ``expr`` is positive at the indicator vector of ``support``."""
    if isinstance(expr, Atom):
        return expr.var in support
    if isinstance(expr, Zero):
        return False
    flags = [expr_support(a, support) for a in expr.args]
    if isinstance(expr, (Sum, Max)):
        return any(flags)
    return all(flags)


def support_transition(f: MapDef, support) -> frozenset:
    """``supp f(e_S)``, computed by exact zero propagation."""
    s = frozenset(support)
    return frozenset(i for i, e in enumerate(f.coords) if expr_support(e, s))
