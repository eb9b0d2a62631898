"""Words over a family: enumeration, rotation classes and periods.

A word is a tuple of map indices in application order, so ``(i1, ..., im)``
denotes ``f_im o ... o f_i1``.
"""

from __future__ import annotations

from itertools import product

import numpy as np


def lyndon_words(k: int, max_len: int):
    """Yield Lyndon words over ``range(k)`` of length <= max_len in lex order (Duval)."""
    if k < 1 or max_len < 1:
        return
    w = [-1]
    while w:
        w[-1] += 1
        yield tuple(w)
        m = len(w)
        while len(w) < max_len:
            w.append(w[len(w) - m])
        while w and w[-1] == k - 1:
            w.pop()


def lyndon_by_length(k: int, max_len: int) -> dict:
    """Lyndon words grouped by length; each group is a lex-sorted (count, m) int array."""
    groups: dict = {m: [] for m in range(1, max_len + 1)}
    for w in lyndon_words(k, max_len):
        groups[len(w)].append(w)
    return {m: np.asarray(ws, dtype=np.int64).reshape(len(ws), m) for m, ws in groups.items()}


def lyndon_of_length(k: int, m: int) -> np.ndarray:
    """Lyndon words of length exactly m, lex-sorted, as a (count, m) int array."""
    ws = [w for w in lyndon_words(k, m) if len(w) == m]
    return np.asarray(ws, dtype=np.int64).reshape(len(ws), m)


def lyndon_count(k: int, m: int) -> int:
    """Number of Lyndon words of length m over k letters (Moebius formula)."""
    total = 0
    for d in range(1, m + 1):
        if m % d == 0:
            total += _mobius(d) * k ** (m // d)
    return total // m


def _mobius(d: int) -> int:
    result, p = 1, 2
    while p * p <= d:
        if d % p == 0:
            d //= p
            if d % p == 0:
                return 0
            result = -result
        p += 1
    return -result if d > 1 else result


def canonical_rotation(word) -> tuple:
    word = tuple(word)
    if not word:
        return word
    return min(word[i:] + word[:i] for i in range(len(word)))


def primitive_period(word) -> int:
    """Length of the shortest u with word == u^k."""
    word = tuple(word)
    m = len(word)
    for p in range(1, m + 1):
        if m % p == 0 and word == word[:p] * (m // p):
            return p
    return m


def all_words(k: int, m: int) -> np.ndarray:
    """All k**m words of length m, lex order."""
    if m == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.asarray(list(product(range(k), repeat=m)), dtype=np.int64)
