"""Seeded random families for property checks and benchmarks."""

from __future__ import annotations

import numpy as np

from .expr import ZERO, Geo, MapDef, Max, Min, atom, make_sum, normalize_weights
from .family import Family


def _row(coefs, combine):
    terms = [atom(float(c), j) for j, c in enumerate(coefs) if c > 0]
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return combine(tuple(terms))


def matrix_map(name: str, A, kind: str = "linear") -> MapDef:
    """Nonnegative-linear (``kind='linear'``) or max-times (``'maxplus'``) map of a matrix."""
    A = np.asarray(A, dtype=float)
    combine = make_sum if kind == "linear" else Max
    return MapDef(name, tuple(_row(row, combine) for row in A))


def random_matrix(rng: np.random.Generator, n: int, density: float = 0.7) -> np.ndarray:
    A = rng.uniform(0.1, 2.0, size=(n, n))
    A[rng.random((n, n)) > density] = 0.0
    return np.round(A, 3)


def random_subadditive_family(rng: np.random.Generator, n: int = None, k: int = None,
                              kind: str = None, density: float = 0.7) -> Family:
    """Max-plus or nonnegative-linear family (subadditivity certified)."""
    n = n or int(rng.integers(2, 5))
    k = k or int(rng.integers(1, 4))
    kind = kind or ("maxplus" if rng.random() < 0.5 else "linear")
    maps = tuple(matrix_map(f"m{j + 1}", random_matrix(rng, n, density), kind) for j in range(k))
    return Family(n, maps)


def _random_expr(rng: np.random.Generator, n: int, depth: int):
    if depth == 0 or rng.random() < 0.35:
        if rng.random() < 0.15:
            return ZERO
        return atom(float(np.round(rng.uniform(0.1, 2.0), 3)), int(rng.integers(n)))
    arity = int(rng.integers(2, 4))
    args = tuple(_random_expr(rng, n, depth - 1) for _ in range(arity))
    kind = rng.integers(4)
    if kind == 0:
        return make_sum(args)
    if kind == 1:
        return Max(args)
    if kind == 2:
        return Min(args)
    w = rng.uniform(0.2, 1.0, size=arity)
    return Geo(normalize_weights(np.round(w / w.sum(), 6).tolist()), args)


def random_general_family(rng: np.random.Generator, n: int = None, k: int = None, depth: int = 2) -> Family:
    """Family mixing every node type, including Min and Geo."""
    n = n or int(rng.integers(2, 5))
    k = k or int(rng.integers(1, 4))
    maps = tuple(
        MapDef(f"m{j + 1}", tuple(_random_expr(rng, n, depth) for _ in range(n))) for j in range(k)
    )
    return Family(n, maps)
