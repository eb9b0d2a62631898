"""Compiled evaluation kernels.

A family is flattened into one postfix program (``Program``) that both
execution paths consume:

* numba ``@njit`` kernels (default), and
* a pure-numpy path, selected by setting ``MONOCONE_DISABLE_NUMBA=1`` or when
  numba is not importable.  Batch kernels get a vectorized numpy version;
  the scalar loop kernels run as plain Python.

Both paths compute the same values; only Geo powers may differ in the last
ulp because numpy uses its own ``power`` implementation.
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .expr import Atom, Geo, Max, Min, Sum, Zero

_DISABLED = os.environ.get("MONOCONE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:  # pragma: no cover - exercised through both env settings in CI
    if _DISABLED:
        raise ImportError
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


USE_NUMBA = HAVE_NUMBA

OP_ZERO, OP_ATOM, OP_SUM, OP_MAX, OP_MIN, OP_POW, OP_PROD, OP_STORE = range(8)


@dataclass(frozen=True, eq=False)
class Program:
    """Postfix code for every map of a family.

    Map ``k`` occupies ``ops[start[k]:start[k + 1]]``.
    """

    n: int
    ops: np.ndarray
    iarg: np.ndarray
    farg: np.ndarray
    start: np.ndarray
    stack_size: int

    @property
    def n_maps(self) -> int:
        return len(self.start) - 1


def _emit(expr, ops, iarg, farg) -> int:
    """Append postfix code for ``expr``; returns the stack depth it needs."""
    if isinstance(expr, Zero):
        ops.append(OP_ZERO); iarg.append(0); farg.append(0.0)
        return 1
    if isinstance(expr, Atom):
        ops.append(OP_ATOM); iarg.append(expr.var); farg.append(expr.coef)
        return 1
    depth = 0
    if isinstance(expr, Geo):
        # arguments first, then one weight marker per argument, then the product
        for j, a in enumerate(expr.args):
            depth = max(depth, j + _emit(a, ops, iarg, farg))
        for w in expr.weights:
            ops.append(OP_POW); iarg.append(0); farg.append(w)
        ops.append(OP_PROD)
    else:
        for j, a in enumerate(expr.args):
            depth = max(depth, j + _emit(a, ops, iarg, farg))
        ops.append({Sum: OP_SUM, Max: OP_MAX, Min: OP_MIN}[type(expr)])
    iarg.append(len(expr.args)); farg.append(0.0)
    return depth


def compile_maps(maps, n: int) -> Program:
    ops, iarg, farg, start = [], [], [], [0]
    depth = 1
    for f in maps:
        for i, e in enumerate(f.coords):
            depth = max(depth, _emit(e, ops, iarg, farg))
            ops.append(OP_STORE); iarg.append(i); farg.append(0.0)
        start.append(len(ops))
    return Program(
        n=n,
        ops=np.asarray(ops, dtype=np.int64),
        iarg=np.asarray(iarg, dtype=np.int64),
        farg=np.asarray(farg, dtype=np.float64),
        start=np.asarray(start, dtype=np.int64),
        stack_size=depth,
    )


def compile_family(family) -> Program:
    return compile_maps(family.maps, family.n)


# -- scalar loop kernels (jitted when numba is on, plain Python otherwise) -----

@njit(cache=True, nogil=True)
def _eval_into(ops, iarg, farg, lo, hi, x, out, stack):
    sp = 0
    for p in range(lo, hi):
        op = ops[p]
        if op == 1:
            stack[sp] = farg[p] * x[iarg[p]]
            sp += 1
        elif op == 7:
            sp -= 1
            out[iarg[p]] = stack[sp]
        elif op == 0:
            stack[sp] = 0.0
            sp += 1
        elif op == 5:
            pass
        else:
            k = iarg[p]
            base = sp - k
            if op == 6:
                top = stack[base]
                for j in range(1, k):
                    if stack[base + j] > top:
                        top = stack[base + j]
                e = math.frexp(top)[1] - 1
                acc = 1.0
                for j in range(k):
                    acc *= math.ldexp(stack[base + j], -e) ** farg[p - k + j]
                acc = math.ldexp(acc, e)
            else:
                acc = stack[base]
                for j in range(1, k):
                    v = stack[base + j]
                    if op == 2:
                        acc += v
                    elif op == 3:
                        if v > acc:
                            acc = v
                    else:
                        if v < acc:
                            acc = v
            sp = base
            stack[sp] = acc
            sp += 1


@njit(cache=True, nogil=True)
def _apply_word(ops, iarg, farg, start, word, x, out, tmp, stack):
    """out = f_word(x); letters applied first to last."""
    n = x.shape[0]
    for i in range(n):
        tmp[i] = x[i]
    for t in range(word.shape[0]):
        k = word[t]
        _eval_into(ops, iarg, farg, start[k], start[k + 1], tmp, out, stack)
        for i in range(n):
            tmp[i] = out[i]


@njit(cache=True, nogil=True)
def _cw(x, y):
    """Largest alpha with y >= alpha * x, taken over supp(x)."""
    best = np.inf
    for i in range(x.shape[0]):
        if x[i] > 0.0:
            r = y[i] / x[i]
            if r < best:
                best = r
    if best == np.inf:
        return 0.0
    return best


@njit(cache=True, nogil=True)
def _ucw(x, y):
    """Smallest beta with y <= beta * x; +inf unless x is interior."""
    worst = 0.0
    for i in range(x.shape[0]):
        if x[i] <= 0.0:
            return np.inf
        r = y[i] / x[i]
        if r > worst:
            worst = r
    return worst


@njit(cache=True, nogil=True)
def _power_run(ops, iarg, farg, start, stack_size, word, x0, iters, damp):
    """Normalized iteration ``x <- (f_word(x) + damp * x) / norm`` from ``x0``.

    Returns (log_norms, cws, steps, x_last, best_vec, ucws): ``cws[t]`` and
    ``ucws[t]`` are the lower and upper Collatz-Wielandt ratios of f_word at
    the t-th iterate (the upper one is +inf off the interior), ``log_norms[t]``
    the log of the normalizing factor after step t.  Stops early when the
    image is zero.  ``damp > 0`` breaks periodic orbits; the log norms are then
    those of the damped map.
    """
    n = x0.shape[0]
    x = x0.copy()
    y = np.empty(n)
    tmp = np.empty(n)
    stack = np.empty(stack_size)
    logs = np.empty(iters)
    cws = np.empty(iters)
    ucws = np.empty(iters)
    best = -1.0
    best_vec = x0.copy()
    steps = 0
    for t in range(iters):
        _apply_word(ops, iarg, farg, start, word, x, y, tmp, stack)
        c = _cw(x, y)
        cws[t] = c
        ucws[t] = _ucw(x, y)
        if c > best:
            best = c
            for i in range(n):
                best_vec[i] = x[i]
        s = 0.0
        for i in range(n):
            y[i] += damp * x[i]
            if y[i] > s:
                s = y[i]
        steps = t + 1
        if s == 0.0:
            logs[t] = -np.inf
            break
        logs[t] = np.log(s)
        for i in range(n):
            x[i] = y[i] / s
    return logs[:steps], cws[:steps], steps, x, best_vec, ucws[:steps]


@njit(cache=True, nogil=True)
def _screen_words(ops, iarg, farg, start, stack_size, words, probes, seeds, iters):
    """Collatz-Wielandt screening of many words of equal length.

    Candidates per word, in order: each probe vector once, then the normalized
    iterates of f_w from each seed vector.  Returns the best ratio per word and
    the first vector achieving it.
    """
    nw = words.shape[0]
    n = probes.shape[1]
    best = np.zeros(nw)
    vecs = np.zeros((nw, n))
    x = np.empty(n)
    y = np.empty(n)
    tmp = np.empty(n)
    stack = np.empty(stack_size)
    for b in range(nw):
        w = words[b]
        bb = -1.0
        for q in range(probes.shape[0]):
            for i in range(n):
                x[i] = probes[q, i]
            _apply_word(ops, iarg, farg, start, w, x, y, tmp, stack)
            c = _cw(x, y)
            if c > bb:
                bb = c
                for i in range(n):
                    vecs[b, i] = x[i]
        for q in range(seeds.shape[0]):
            for i in range(n):
                x[i] = seeds[q, i]
            for t in range(iters):
                _apply_word(ops, iarg, farg, start, w, x, y, tmp, stack)
                c = _cw(x, y)
                if c > bb:
                    bb = c
                    for i in range(n):
                        vecs[b, i] = x[i]
                s = 0.0
                for i in range(n):
                    if y[i] > s:
                        s = y[i]
                if s == 0.0:
                    break
                for i in range(n):
                    x[i] = y[i] / s
        if bb < 0.0:
            bb = 0.0
        best[b] = bb
    return best, vecs


@njit(cache=True, nogil=True)
def _pareto_keep(X, order, keep_max):
    """Greedy dominance filter over rows of X visited in ``order``.

    With ``keep_max`` a row is dropped when an already kept row is >= it
    componentwise; otherwise when a kept row is <= it.
    """
    m, n = X.shape
    keep = np.zeros(m, dtype=np.bool_)
    kept = np.empty(m, dtype=np.int64)
    nk = 0
    for a in range(m):
        i = order[a]
        dominated = False
        for b in range(nk):
            j = kept[b]
            ok = True
            for c in range(n):
                if keep_max:
                    if X[j, c] < X[i, c]:
                        ok = False
                        break
                else:
                    if X[j, c] > X[i, c]:
                        ok = False
                        break
            if ok:
                dominated = True
                break
        if not dominated:
            keep[i] = True
            kept[nk] = i
            nk += 1
    return keep


@njit(cache=True, nogil=True)
def _support_table(ops, iarg, lo, hi, n, stack_size):
    """sigma(S) for every bitmask S < 2**n by boolean zero propagation."""
    size = 1 << n
    table = np.zeros(size, dtype=np.int64)
    stack = np.zeros(stack_size, dtype=np.bool_)
    for s in range(size):
        sp = 0
        res = 0
        for p in range(lo, hi):
            op = ops[p]
            if op == 1:
                stack[sp] = ((s >> iarg[p]) & 1) == 1
                sp += 1
            elif op == 7:
                sp -= 1
                if stack[sp]:
                    res |= 1 << iarg[p]
            elif op == 0:
                stack[sp] = False
                sp += 1
            elif op == 5:
                pass
            else:
                k = iarg[p]
                base = sp - k
                if op == 2 or op == 3:
                    acc = False
                    for j in range(k):
                        acc = acc or stack[base + j]
                else:
                    acc = True
                    for j in range(k):
                        acc = acc and stack[base + j]
                sp = base
                stack[sp] = acc
                sp += 1
        table[s] = res
    return table


@njit(cache=True, nogil=True)
def _eval_rows(ops, iarg, farg, lo, hi, X, stack_size):
    m, n = X.shape
    Y = np.empty((m, n))
    stack = np.empty(stack_size)
    for r in range(m):
        _eval_into(ops, iarg, farg, lo, hi, X[r], Y[r], stack)
    return Y


@njit(cache=True, nogil=True)
def _apply_words_rows(ops, iarg, farg, start, W, X, stack_size):
    m, n = X.shape
    Y = np.empty((m, n))
    tmp = np.empty(n)
    stack = np.empty(stack_size)
    for r in range(m):
        _apply_word(ops, iarg, farg, start, W[r], X[r], Y[r], tmp, stack)
    return Y


# -- vectorized numpy path -------------------------------------------------------

def _eval_columns(prog: Program, k: int, X: np.ndarray) -> np.ndarray:
    ops, iarg, farg = prog.ops, prog.iarg, prog.farg
    m = X.shape[0]
    out = np.empty_like(X, dtype=float)
    stack = []
    for p in range(prog.start[k], prog.start[k + 1]):
        op = ops[p]
        if op == OP_ATOM:
            stack.append(farg[p] * X[:, iarg[p]])
        elif op == OP_STORE:
            out[:, iarg[p]] = stack.pop()
        elif op == OP_ZERO:
            stack.append(np.zeros(m))
        elif op == OP_POW:
            continue
        else:
            cnt = int(iarg[p])
            args = stack[-cnt:]
            del stack[-cnt:]
            acc = args[0]
            if op == OP_PROD:
                e = np.frexp(np.max(args, axis=0))[1] - 1
                acc = np.ones(m)
                for j, a in enumerate(args):
                    acc = acc * np.power(np.ldexp(a, -e), farg[p - cnt + j])
                acc = np.ldexp(acc, e)
            elif op == OP_SUM:
                for a in args[1:]:
                    acc = acc + a
            elif op == OP_MAX:
                for a in args[1:]:
                    acc = np.maximum(acc, a)
            else:
                for a in args[1:]:
                    acc = np.minimum(acc, a)
            stack.append(acc)
    return out


def _apply_words_numpy(prog: Program, W: np.ndarray, X: np.ndarray) -> np.ndarray:
    Y = np.array(X, dtype=float, copy=True)
    for t in range(W.shape[1]):
        col = W[:, t]
        nxt = np.empty_like(Y)
        for k in range(prog.n_maps):
            sel = col == k
            if sel.any():
                nxt[sel] = _eval_columns(prog, k, Y[sel])
        Y = nxt
    return Y


def _cw_rows(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(X > 0, Y / np.where(X > 0, X, 1.0), np.inf)
    c = ratio.min(axis=1)
    c[np.isinf(c)] = 0.0
    return c


def _screen_words_numpy(prog: Program, W: np.ndarray, probes: np.ndarray, seeds: np.ndarray, iters: int):
    nw, n = W.shape[0], prog.n
    best = np.full(nw, -1.0)
    vecs = np.zeros((nw, n))

    def offer(idx, X, c):
        better = c > best[idx]
        best[idx[better]] = c[better]
        vecs[idx[better]] = X[better]

    everyone = np.arange(nw)
    for q in range(probes.shape[0]):
        X = np.broadcast_to(probes[q], (nw, n)).copy()
        offer(everyone, X, _cw_rows(X, _apply_words_numpy(prog, W, X)))
    for q in range(seeds.shape[0]):
        X = np.broadcast_to(seeds[q], (nw, n)).copy()
        alive = np.ones(nw, dtype=bool)
        for _ in range(iters):
            if not alive.any():
                break
            idx = np.flatnonzero(alive)
            Xa = X[idx]
            Y = _apply_words_numpy(prog, W[idx], Xa)
            offer(idx, Xa, _cw_rows(Xa, Y))
            s = Y.max(axis=1)
            dead = s == 0
            X[idx] = Y / np.where(dead, 1.0, s)[:, None]
            alive[idx[dead]] = False
    np.maximum(best, 0.0, out=best)
    return best, vecs


def _pareto_keep_numpy(X: np.ndarray, order: np.ndarray, keep_max: bool, chunk: int = 512) -> np.ndarray:
    m = X.shape[0]
    rank = np.empty(m, dtype=np.int64)
    rank[order] = np.arange(m)
    keep = np.ones(m, dtype=bool)
    for lo in range(0, m, chunk):
        rows = np.arange(lo, min(m, lo + chunk))
        xi = X[rows][:, None, :]
        if keep_max:
            weak = (X[None, :, :] >= xi).all(axis=2)
        else:
            weak = (X[None, :, :] <= xi).all(axis=2)
        equal = (X[None, :, :] == xi).all(axis=2)
        earlier = rank[None, :] < rank[rows][:, None]
        dom = weak & (~equal | earlier)
        dom[np.arange(len(rows)), rows] = False
        keep[rows] = ~dom.any(axis=1)
    return keep


def _support_table_numpy(prog: Program, k: int, chunk_bits: int = 16) -> np.ndarray:
    n = prog.n
    size = 1 << n
    table = np.zeros(size, dtype=np.int64)
    ops, iarg = prog.ops, prog.iarg
    step = 1 << min(n, chunk_bits)
    for lo in range(0, size, step):
        masks = np.arange(lo, min(size, lo + step), dtype=np.int64)
        res = np.zeros(len(masks), dtype=np.int64)
        stack = []
        for p in range(prog.start[k], prog.start[k + 1]):
            op = ops[p]
            if op == OP_ATOM:
                stack.append(((masks >> iarg[p]) & 1).astype(bool))
            elif op == OP_STORE:
                res |= stack.pop().astype(np.int64) << iarg[p]
            elif op == OP_ZERO:
                stack.append(np.zeros(len(masks), dtype=bool))
            elif op == OP_POW:
                pass
            else:
                cnt = int(iarg[p])
                args = stack[-cnt:]
                del stack[-cnt:]
                if op in (OP_SUM, OP_MAX):
                    stack.append(np.logical_or.reduce(args))
                else:
                    stack.append(np.logical_and.reduce(args))
        table[lo:lo + len(masks)] = res
    return table


# -- public dispatch ---------------------------------------------------------------

def _py(fn):
    return getattr(fn, "py_func", fn)


@contextmanager
def numba_enabled(flag: bool):
    """Temporarily switch between the numba and the numpy path."""
    global USE_NUMBA
    old = USE_NUMBA
    USE_NUMBA = bool(flag) and HAVE_NUMBA
    try:
        yield
    finally:
        USE_NUMBA = old


def _as_rows(X, n):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, n)
    return X


def eval_batch(prog: Program, k: int, X) -> np.ndarray:
    """Apply map ``k`` to every row of ``X``."""
    X = _as_rows(X, prog.n)
    if USE_NUMBA:
        return _eval_rows(prog.ops, prog.iarg, prog.farg, prog.start[k], prog.start[k + 1], X, prog.stack_size)
    return _eval_columns(prog, k, X)


def apply_words(prog: Program, W, X) -> np.ndarray:
    """Row r of the result is ``f_{W[r]}(X[r])``."""
    X = _as_rows(X, prog.n)
    W = np.ascontiguousarray(W, dtype=np.int64)
    if W.ndim == 1:
        W = np.broadcast_to(W, (X.shape[0], W.shape[0])).copy()
    if USE_NUMBA:
        return _apply_words_rows(prog.ops, prog.iarg, prog.farg, prog.start, W, X, prog.stack_size)
    return _apply_words_numpy(prog, W, X)


def apply_word(prog: Program, word, x) -> np.ndarray:
    return apply_words(prog, np.asarray([word], dtype=np.int64).reshape(1, -1), x)[0]


def power_run(prog: Program, word, x0, iters: int, damp: float = 0.0):
    word = np.ascontiguousarray(word, dtype=np.int64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    fn = _power_run if USE_NUMBA else _py(_power_run)
    return fn(prog.ops, prog.iarg, prog.farg, prog.start, prog.stack_size, word, x0, int(iters), float(damp))


def screen_words(prog: Program, W, probes, seeds, iters: int):
    """Best Collatz-Wielandt ratio of ``f_w`` per word row of ``W``.

    ``probes`` are tested once each; ``seeds`` start ``iters`` normalized
    iterations each.
    """
    W = np.ascontiguousarray(W, dtype=np.int64)
    probes = np.ascontiguousarray(probes, dtype=np.float64).reshape(-1, prog.n)
    seeds = np.ascontiguousarray(seeds, dtype=np.float64).reshape(-1, prog.n)
    if USE_NUMBA:
        return _screen_words(prog.ops, prog.iarg, prog.farg, prog.start, prog.stack_size, W, probes, seeds, int(iters))
    return _screen_words_numpy(prog, W, probes, seeds, int(iters))


def pareto_keep(X, keep_max: bool = True) -> np.ndarray:
    """Mask of rows surviving dominance pruning.

    Rows are ranked by coordinate sum (descending when keeping maxima); among
    equal vectors the lowest row index survives.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    sums = X.sum(axis=1)
    order = np.argsort(-sums if keep_max else sums, kind="stable").astype(np.int64)
    if USE_NUMBA:
        return _pareto_keep(X, order, keep_max)
    return _pareto_keep_numpy(X, order, keep_max)


def support_table(prog: Program, k: int) -> np.ndarray:
    if USE_NUMBA:
        return _support_table(prog.ops, prog.iarg, prog.start[k], prog.start[k + 1], prog.n, prog.stack_size)
    return _support_table_numpy(prog, k)


def set_threads(count: int) -> None:
    if USE_NUMBA and count > 0:
        numba.set_num_threads(min(count, numba.config.NUMBA_NUM_THREADS))
