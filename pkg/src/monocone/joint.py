"""Family-level radii by pruned word enumeration.

Upper bounds come from operator norms of compositions (``alpha_m``), lower
bounds from Collatz-Wielandt certificates ``f_w(x) >= c x`` which give
``r(f_w) >= c`` and hence ``r(A) >= c^(1/|w|)``.  Enumeration is breadth first;
a frontier vector that is dominated componentwise by another one of the same
length can be dropped when maximizing, because every map is order-preserving
(symmetrically when minimizing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import BudgetExceeded
from .family import Family
from .words import all_words, lyndon_count, lyndon_of_length

DEFAULT_BUDGET = 5_000_000
SCREEN_ITERS = 16
REFINE_ITERS = 500
REFINE_PER_LENGTH = 4
GAMMA_SAMPLE = 64
_LN2 = math.log(2.0)
_RESCALE_HI = 2.0 ** 300
_RESCALE_LO = 2.0 ** -300


@dataclass
class BoundsReport:
    lower: float
    upper: float
    lower_word: tuple
    lower_vector: np.ndarray
    upper_m: int
    upper_word: tuple
    alpha_seq: list = field(default_factory=list)
    alpha_raw: list = field(default_factory=list)
    gamma_seq: list = field(default_factory=list)
    pruned_count: int = 0
    visited_count: int = 0
    support: Optional[frozenset] = None
    estimate_seq: list = field(default_factory=list)

    @property
    def estimate(self) -> Optional[float]:
        return self.estimate_seq[-1][1] if self.estimate_seq else None


@dataclass
class Stable:
    word: tuple
    norm: float


@dataclass
class Unknown:
    best_norm_seen: float
    best_word: tuple = ()


@dataclass
class SubradiusReport:
    r_star_upper: float
    beta_seq: list
    gamma_seq: list
    best_word: tuple
    pruned_count: int = 0
    visited_count: int = 0


class _Counter:
    def __init__(self, budget: int):
        self.budget = budget
        self.visited = 0
        self.pruned = 0

    def spend(self, count: int) -> None:
        if self.visited + count > self.budget:
            raise BudgetExceeded(self.budget)
        self.visited += count


def _levels(prog, x0, max_len: int, keep_max: bool, counter: _Counter):
    """Yield ``(m, Y, W, log_scale, X_kept, W_kept)`` for m = 1..max_len.

    ``Y`` holds every child of the pruned level m-1 frontier in lex word
    order, scaled by ``exp(-log_scale)``; rescaling is by powers of two, so
    values are exact multiples of the true ones.
    """
    k = prog.n_maps
    X = np.asarray(x0, dtype=float).reshape(1, prog.n)
    W = np.zeros((1, 0), dtype=np.int64)
    log_scale = 0.0
    for m in range(1, max_len + 1):
        counter.spend(len(X) * k)
        Y = np.stack([kernels.eval_batch(prog, j, X) for j in range(k)], axis=1).reshape(-1, prog.n)
        Wn = np.concatenate([np.repeat(W, k, axis=0), np.tile(np.arange(k), len(X))[:, None]], axis=1)
        top = Y.max() if Y.size else 0.0
        if top > _RESCALE_HI or 0.0 < top < _RESCALE_LO:
            e = math.frexp(top)[1]
            Y = np.ldexp(Y, -e)
            log_scale += e * math.log(2.0)
        keep = kernels.pareto_keep(Y, keep_max)
        counter.pruned += int(len(Y) - keep.sum())
        yield m, Y, Wn, log_scale, Y[keep], Wn[keep]
        X, W = Y[keep], Wn[keep]


def _exponent(log_scale: float) -> int:
    # log_scale is always an integer multiple of log 2
    return int(round(log_scale / _LN2))


def _norm_from(value: float, log_scale: float) -> float:
    return value if log_scale == 0.0 else math.ldexp(value, _exponent(log_scale))


def _root(value: float, log_scale: float, m: int) -> float:
    """``(value * exp(log_scale)) ** (1/m)``, computed so that multiplying the
    value by ``2**(k*m)`` multiplies the root by exactly ``2**k``."""
    if value <= 0.0:
        return 0.0
    mant, e = math.frexp(value)
    q, r = divmod(e + _exponent(log_scale), m)
    if r > 1000:
        return math.exp((math.log(value) + log_scale) / m)
    return math.ldexp(math.ldexp(mant, r) ** (1.0 / m), q)


def _indicator(n: int, support) -> np.ndarray:
    e = np.zeros(n)
    e[list(support)] = 1.0
    return e


def _closure(prog, support: frozenset) -> frozenset:
    """Smallest superset of ``support`` mapped into itself by every map."""
    cur = frozenset(support)
    while True:
        e = _indicator(prog.n, cur)
        grow = set(cur)
        for j in range(prog.n_maps):
            grow.update(np.flatnonzero(kernels.eval_batch(prog, j, e)[0] > 0).tolist())
        if grow == cur:
            return cur
        cur = frozenset(grow)


def _reachable_supports(prog, support: frozenset) -> list:
    """Supports sigma_w(J) over all words w including the empty one, BFS order."""
    seen = [frozenset(support)]
    queue = [frozenset(support)]
    while queue:
        s = queue.pop(0)
        e = _indicator(prog.n, s)
        for j in range(prog.n_maps):
            t = frozenset(np.flatnonzero(kernels.eval_batch(prog, j, e)[0] > 0).tolist())
            if t not in seen:
                seen.append(t)
                queue.append(t)
    return seen


def _probes_and_seeds(n: int, reachable: list):
    """Certificate vectors must have support inside a support reachable from J."""
    nonempty = [s for s in reachable if s]
    maximal = [s for s in nonempty if not any(s < t for t in nonempty)]
    maximal.sort(key=lambda s: (-len(s), sorted(s)))
    singles = sorted({i for s in nonempty for i in s})
    probes = np.eye(n)[singles] if singles else np.zeros((0, n))
    seeds = np.array([_indicator(n, s) for s in maximal]) if maximal else np.zeros((0, n))
    return probes, seeds


def _refine(prog, word, seeds, iters: int):
    """Longer plain and damped power runs for one word; returns (cw, vector)."""
    best, vec = -1.0, None
    for seed in seeds:
        scale = float(kernels.apply_word(prog, word, seed).max())
        for damp in (0.0, scale):
            _, cws, _, _, bv, _ = kernels.power_run(prog, word, seed, iters, damp)
            c = float(cws.max())
            if c > best:
                best, vec = c, bv
    return best, vec


def _lower_search(prog, max_len: int, reachable: list, counter: _Counter, gamma_seq: list,
                  refine_iters: int = REFINE_ITERS):
    """Best certified lower bound over Lyndon words of length <= max_len."""
    n = prog.n
    probes, seeds = _probes_and_seeds(n, reachable)
    best_val, best_word, best_vec = 0.0, (0,), np.ones(n) if not len(seeds) else seeds[0].copy()
    if not len(probes) and not len(seeds):
        return best_val, best_word, best_vec
    for m in range(1, max_len + 1):
        # charge the budget before materializing the words
        count = lyndon_count(prog.n_maps, m)
        if not count:
            continue
        counter.spend(count)
        W = lyndon_of_length(prog.n_maps, m)
        vals, vecs = kernels.screen_words(prog, W, probes, seeds, SCREEN_ITERS)
        top = np.argsort(-vals, kind="stable")[:REFINE_PER_LENGTH]
        for b in top:
            c, v = _refine(prog, W[b], seeds, refine_iters)
            if c > vals[b]:
                vals[b], vecs[b] = c, v
        b = int(np.argmax(vals))
        root = _root(float(vals[b]), 0.0, m)
        gamma_seq.append((m, root))
        if root > best_val:
            best_val, best_word, best_vec = root, tuple(int(i) for i in W[b]), vecs[b].copy()
    return best_val, best_word, best_vec


def partial_jsr(family: Family, support, max_len: int = 12, tol: float = 1e-6,
                budget: int = DEFAULT_BUDGET) -> BoundsReport:
    """Bounds for the partial joint spectral radius on the part with the given support.

    The estimate sequence is ``max_w ||f_w(e_J)||^(1/m)``.  The certified upper
    bound uses operator norms on the smallest invariant face containing J, the
    lower bound Collatz-Wielandt certificates supported in parts reachable
    from J.
    """
    J = frozenset(int(i) for i in support)
    if not J:
        raise ValueError("support must be nonempty")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if not J <= frozenset(range(family.n)):
        raise ValueError("support out of range")
    prog = family.program
    counter = _Counter(budget)
    report = BoundsReport(0.0, math.inf, (0,), np.ones(family.n), 0, (), support=J)
    try:
        face = _closure(prog, J)
        best_upper = math.inf
        for m, Y, Wn, log_scale, _, _ in _levels(prog, _indicator(family.n, face), max_len, True, counter):
            norms = Y.max(axis=1)
            b = int(np.argmax(norms))
            alpha = _norm_from(float(norms[b]), log_scale)
            root = _root(float(norms[b]), log_scale, m)
            report.alpha_raw.append((m, alpha))
            report.alpha_seq.append((m, root))
            if root < best_upper:
                best_upper = root
                report.upper, report.upper_m, report.upper_word = root, m, tuple(int(i) for i in Wn[b])
        if face == J:
            report.estimate_seq = list(report.alpha_seq)
        else:
            for m, Y, _, log_scale, _, _ in _levels(prog, _indicator(family.n, J), max_len, True, counter):
                report.estimate_seq.append((m, _root(float(Y.max()), log_scale, m)))
        val, word, vec = _lower_search(prog, max_len, _reachable_supports(prog, J), counter, report.gamma_seq)
        report.lower, report.lower_word, report.lower_vector = val, word, vec
    except BudgetExceeded as exc:
        report.visited_count, report.pruned_count = counter.visited, counter.pruned
        raise BudgetExceeded(budget, report) from exc
    report.visited_count, report.pruned_count = counter.visited, counter.pruned
    return report


def jsr_bounds(family: Family, max_len: int = 12, tol: float = 1e-6, budget: int = DEFAULT_BUDGET) -> BoundsReport:
    """Certified lower and upper bounds on the joint spectral radius.

    ``upper = min_m alpha_m^(1/m)`` with ``alpha_m = max_{|w|=m} ||f_w(1)||``;
    ``lower`` is the best ``c^(1/|w|)`` over certificates ``f_w(x) >= c x``.
    Both are valid at every truncation depth.
    """
    return partial_jsr(family, range(family.n), max_len, tol, budget)


def gsr_lower(family: Family, max_len: int = 12, budget: int = DEFAULT_BUDGET):
    """Certified lower bound on the generalized spectral radius: (value, word, vector)."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    prog = family.program
    counter = _Counter(budget)
    gamma: list = []
    full = frozenset(range(family.n))
    return _lower_search(prog, max_len, _reachable_supports(prog, full), counter, gamma)


def verify_certificate(family: Family, word, vector, value: float, rtol: float = 1e-12) -> bool:
    """Check ``f_w(x) >= value^|w| * x`` on supp(x)."""
    x = np.asarray(vector, dtype=float)
    y = kernels.apply_word(family.program, word, x)
    need = value ** len(word) * x
    pos = x > 0
    return bool(np.all(y[pos] >= need[pos] * (1 - rtol)))


def _short_upper(prog, word, iters: int = 50) -> float:
    logs, _, steps, _, _, ucws = kernels.power_run(prog, word, np.ones(prog.n), iters)
    if logs[-1] == -math.inf:
        return 0.0
    roots = np.exp(np.cumsum(logs) / np.arange(1, steps + 1))
    return float(min(roots.min(), ucws.min()))


def subradius_bounds(family: Family, max_len: int = 12, budget: int = DEFAULT_BUDGET) -> SubradiusReport:
    """Upper bound on the joint spectral subradius.

    ``beta_m = min_{|w|=m} ||f_w(1)||``; ``r_* <= min_m beta_m^(1/m)``.  The
    gamma sequence holds the smallest short-run spectral radius upper estimate
    among sampled frontier words of each length.  It is a diagnostic only:
    an upper estimate of a minimum of radii does not bound r_* from below.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    prog = family.program
    counter = _Counter(budget)
    beta_seq, gamma_seq = [], []
    best, best_word = math.inf, (0,)
    try:
        for m, Y, Wn, log_scale, Xk, Wk in _levels(prog, np.ones(family.n), max_len, False, counter):
            norms = Y.max(axis=1)
            b = int(np.argmin(norms))
            beta = _norm_from(float(norms[b]), log_scale)
            beta_seq.append((m, beta))
            root = _root(float(norms[b]), log_scale, m)
            if root < best:
                best, best_word = root, tuple(int(i) for i in Wn[b])
            sample = Wk[:GAMMA_SAMPLE]
            gam = min(_short_upper(prog, w) for w in sample)
            gamma_seq.append((m, gam ** (1.0 / m) if gam > 0 else 0.0))
    except BudgetExceeded as exc:
        partial = SubradiusReport(best, beta_seq, gamma_seq, best_word, counter.pruned, counter.visited)
        raise BudgetExceeded(budget, partial) from exc
    return SubradiusReport(best, beta_seq, gamma_seq, best_word, counter.pruned, counter.visited)


def check_selectable_stability(family: Family, max_len: int = 12, budget: int = DEFAULT_BUDGET):
    """Search for a composition with operator norm < 1.

    Such a word exists iff the discrete inclusion is selectably stable.  Among
    words of the shortest length L achieving norm < 1 the witness prefers
    powers ``u^(L/p)`` of the shortest period p (lex least u), so that a
    constant switching rule is reported when one works; words of full period
    are taken lex least among the enumerated frontier.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    prog = family.program
    counter = _Counter(budget)
    best, best_word = math.inf, ()
    try:
        for m, Y, Wn, log_scale, _, _ in _levels(prog, np.ones(family.n), max_len, False, counter):
            norms = np.ldexp(Y.max(axis=1), _exponent(log_scale))
            b = int(np.argmin(norms))
            if norms[b] < best:
                best, best_word = float(norms[b]), tuple(int(i) for i in Wn[b])
            if norms[b] < 1.0:
                return _periodic_witness(prog, m, counter) or Stable(
                    tuple(int(i) for i in Wn[int(np.flatnonzero(norms < 1.0)[0])]),
                    float(norms[np.flatnonzero(norms < 1.0)[0]]),
                )
    except BudgetExceeded as exc:
        raise BudgetExceeded(budget, Unknown(best, best_word)) from exc
    return Unknown(best, best_word)


def _periodic_witness(prog, length: int, counter: _Counter):
    k = prog.n_maps
    for p in range(1, length):
        if length % p:
            continue
        counter.spend(k ** p)
        U = all_words(k, p)
        W = np.tile(U, (1, length // p))
        norms = kernels.apply_words(prog, W, np.ones((len(W), prog.n))).max(axis=1)
        hit = np.flatnonzero(norms < 1.0)
        if len(hit):
            return Stable(tuple(int(i) for i in W[hit[0]]), float(norms[hit[0]]))
    return None
