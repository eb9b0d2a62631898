"""Truncated extremal and Barabanov norms.

For a family scaled so that its joint spectral radius is (about) one,

    ||x||_{*,m}  = max over words w with |w| <= m of ||f_w(|x|)||
    ||x||_{**}   ~ max over |w| in [m_outer, m_outer + m_inner] of ||f_w(|x|)||

The truncations increase with m toward the extremal norm and are exact lower
approximations of it.  Scaling the family is left to the caller (divide by
the ``upper`` of :func:`monocone.joint.jsr_bounds`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import EvalOverflow
from .family import Family
from .joint import DEFAULT_BUDGET, _Counter, _levels
from .structure import classify_growth


@dataclass
class NormEvaluation:
    value: float
    level_values: list
    achieving_word: tuple
    diverging: bool
    achieving_map: Optional[int] = None
    residual: Optional[float] = None
    map_values: list = field(default_factory=list)


def _level_maxima(family: Family, a: np.ndarray, depth: int, budget: int):
    """Max of ||f_w(a)|| and a maximizing word for each length 0..depth."""
    if not np.any(a > 0):
        return [(0.0, ())] * (depth + 1)
    maxima = [(float(a.max()), ())]
    counter = _Counter(budget)
    for m, Y, Wn, log_scale, _, _ in _levels(family.program, a, depth, True, counter):
        if log_scale != 0.0:
            raise EvalOverflow("truncated norm overflowed; scale the family by its joint spectral radius first")
        norms = Y.max(axis=1)
        b = int(np.argmax(norms))
        maxima.append((float(norms[b]), tuple(int(i) for i in Wn[b])))
    return maxima


def _check_x(family: Family, x) -> np.ndarray:
    a = np.abs(np.asarray(x, dtype=float)).reshape(-1)
    if a.shape[0] != family.n:
        raise ValueError(f"x has length {a.shape[0]}, expected {family.n}")
    return a


def extremal_norm_eval(family: Family, x, m: int, budget: int = DEFAULT_BUDGET) -> NormEvaluation:
    """``||x||_{*,m}`` with per-level values and divergence flag."""
    if m < 0:
        raise ValueError("m must be >= 0")
    a = _check_x(family, x)
    maxima = _level_maxima(family, a, m, budget)
    levels, best, word = [], -1.0, ()
    for level, (v, w) in enumerate(maxima):
        if v > best:
            best, word = v, w
        levels.append((level, best))
    return NormEvaluation(best, levels, word, classify_growth([v for _, v in levels]) == "growing")


def _window(maxima, lo: int, hi: int):
    best, word = -1.0, ()
    for j in range(lo, hi + 1):
        v, w = maxima[j]
        if v > best:
            best, word = v, w
    return best, word


def barabanov_norm_eval(family: Family, x, m_outer: int, m_inner: int,
                        budget: int = DEFAULT_BUDGET) -> NormEvaluation:
    """Truncated Barabanov norm and the map that (nearly) attains it.

    ``residual`` is ``|max_g ||g(|x|)||_** - ||x||_**|``; it vanishes for an exact
    Barabanov norm of a family with joint spectral radius one.
    """
    if m_outer < 0 or m_inner < 0:
        raise ValueError("truncation levels must be >= 0")
    a = _check_x(family, x)
    top = m_outer + m_inner
    maxima = _level_maxima(family, a, top, budget)
    levels = []
    for i in range(m_inner + 1):
        levels.append((m_outer + i, _window(maxima, m_outer, m_outer + i)[0]))
    value, word = _window(maxima, m_outer, top)
    if not np.any(a > 0):
        return NormEvaluation(0.0, levels, (), False, None, 0.0, [0.0] * len(family))
    prog = family.program
    map_values = []
    for k in range(len(family)):
        ga = kernels.eval_batch(prog, k, a)[0]
        mk = _level_maxima(family, ga, top, budget)
        map_values.append(_window(mk, m_outer, top)[0])
    k_best = int(np.argmax(map_values))
    residual = abs(map_values[k_best] - value)
    diverging = classify_growth([v for v, _ in maxima]) == "growing"
    return NormEvaluation(value, levels, word, diverging, k_best, residual, map_values)


def verify_extremal(family: Family, m: int, sample_count: int, seed: int) -> float:
    """max over random x and maps g of ``||g(|x|)||_{*,m} - ||x||_{*,m+1}`` (never positive)."""
    if m < 0 or sample_count < 1:
        raise ValueError("need m >= 0 and sample_count >= 1")
    rng = np.random.default_rng(seed)
    prog = family.program
    worst = -np.inf
    for _ in range(sample_count):
        x = rng.standard_normal(family.n)
        rhs = extremal_norm_eval(family, x, m + 1).value
        a = np.abs(x)
        for k in range(len(family)):
            lhs = extremal_norm_eval(family, kernels.eval_batch(prog, k, a)[0], m).value
            worst = max(worst, lhs - rhs)
    return float(worst)
