"""Single-map analysis: cone operator norm and cone spectral radius brackets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .expr import MapDef, eval_map
from .kernels import Program, compile_maps

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000
STALL_WINDOW = 50
RESTART_ITERS = 500


@dataclass
class RadiusBracket:
    """Certified bracket ``lower <= r(f) <= upper``.

    ``lower_vector`` satisfies ``f(x) >= lower * x``.  ``upper`` is the smaller
    of ``upper_norm_root = min_{k<=n} ||f^k(1)||^(1/k)`` (attained at
    ``upper_n``) and ``upper_cw``, the smallest beta with ``f(x) <= beta * x``
    seen at an interior iterate.
    """

    lower: float
    upper: float
    lower_vector: np.ndarray
    upper_n: int
    upper_norm_root: float
    upper_cw: float
    iterations_used: int
    converged: bool
    norm_roots: list = field(default_factory=list, repr=False)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def map_norm(f: MapDef) -> float:
    """``sup{||f(x)|| : x >= 0, ||x|| = 1}`` in the sup-norm, i.e. ``||f(1)||``."""
    return float(np.max(eval_map(f, np.ones(f.n))))


def collatz_wielandt_lower(f: MapDef, x) -> float:
    x = np.asarray(x, dtype=float)
    if not np.any(x > 0):
        raise ValueError("x must be a nonzero nonnegative vector")
    y = eval_map(f, x)
    pos = x > 0
    return float(np.min(y[pos] / x[pos]))


def _support_cycle(prog: Program, word, x) -> list:
    """Supports visited by sigma_word from supp(x) once the orbit repeats."""
    seen: list = []
    s = tuple(np.flatnonzero(x > 0))
    while s not in seen:
        seen.append(s)
        e = np.zeros(prog.n)
        e[list(s)] = 1.0
        s = tuple(np.flatnonzero(kernels.apply_word(prog, word, e) > 0))
    return seen[seen.index(s):]


def word_bracket(prog: Program, word, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 restart_iters: int = RESTART_ITERS) -> RadiusBracket:
    """Bracket the cone spectral radius of ``f_word`` (the composed map itself).

    At most ``max_iter`` evaluations of ``f_word`` are spent, restarts
    included.  ``restart_iters=0`` disables the restarts, so that the main
    trajectory from the all-ones vector uses the whole budget.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    n = prog.n
    word = np.asarray(word, dtype=np.int64)
    x = np.ones(n)
    lower, lower_vec = -1.0, x.copy()
    upper_nr, upper_n, upper_cw = math.inf, 0, math.inf
    log_total, done = 0.0, 0
    norm_roots: list = []
    restarted = False
    extra = 0

    def consider(cw_best, vec):
        nonlocal lower, lower_vec
        if cw_best > lower:
            lower, lower_vec = float(cw_best), np.array(vec, dtype=float)

    while done + extra < max_iter:
        chunk = min(STALL_WINDOW, max_iter - done - extra)
        logs, cws, steps, x_next, best_vec, ucws = kernels.power_run(prog, word, x, chunk)
        before = lower
        consider(cws.max(), best_vec)
        upper_cw = min(upper_cw, float(ucws.min()))
        for t in range(steps):
            log_total += logs[t]
            k = done + t + 1
            root = math.exp(log_total / k) if log_total > -math.inf else 0.0
            norm_roots.append(root)
            if root < upper_nr:
                upper_nr, upper_n = root, k
        done += steps
        if logs[-1] == -math.inf:
            # f_word^k(1) = 0, so the spectral radius is exactly 0
            return RadiusBracket(0.0, 0.0, np.ones(n), upper_n, 0.0, upper_cw, done + extra, True, norm_roots)
        x = x_next
        upper = min(upper_nr, upper_cw)
        if upper - lower <= tol * max(1.0, upper):
            break
        if not restarted and lower <= before and restart_iters > 0:
            restarted = True
            extra += _restarts(prog, word, x, restart_iters, max_iter - done - extra, upper, consider)
            upper = min(upper_nr, upper_cw)
            if upper - lower <= tol * max(1.0, upper):
                break
    upper = min(upper_nr, upper_cw)
    lower = max(lower, 0.0)
    converged = upper - lower <= tol * max(1.0, upper)
    return RadiusBracket(lower, max(upper, lower), lower_vec, upper_n, upper_nr, upper_cw,
                         done + extra, converged, norm_roots)


def _restarts(prog, word, x, iters, budget, upper, consider) -> int:
    """Boundary and damped restarts; returns the iterations spent (at most ``budget``)."""
    n = prog.n
    starts = [np.eye(n)[i] for i in range(n)]
    for s in _support_cycle(prog, word, x):
        e = np.zeros(n)
        e[list(s)] = 1.0
        if not any(np.array_equal(e, st) for st in starts):
            starts.append(e)
    # damping by the current upper estimate breaks periodic orbits
    damp = upper if math.isfinite(upper) and upper > 0 else 1.0
    runs = [(st, 0.0) for st in starts] + [(st, damp) for st in [x] + starts]
    spent = 0
    for st, d in runs:
        if spent >= budget:
            break
        _, cws, steps, _, best_vec, _ = kernels.power_run(prog, word, st, min(iters, budget - spent), d)
        consider(cws.max(), best_vec)
        spent += steps
    return spent


def cone_spectral_radius(f: MapDef, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> RadiusBracket:
    """Certified bracket for the Bonsall cone spectral radius of ``f``."""
    prog = compile_maps([f], f.n)
    return word_bracket(prog, [0], tol, max_iter)
