"""Exact structural analysis over the lattice of supports.

Parts of the standard cone are indexed by supports, and an order-preserving
homogeneous map moves the part with support S into the part with support
``sigma_f(S) = supp f(e_S)``.  Supports are handled as bitmasks; every answer
here is exact because nonnegative arithmetic cannot cancel to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import DimensionTooLarge
from .family import Family
from .joint import DEFAULT_BUDGET, _Counter, _levels, _norm_from

SCAN_CAP = 24
PREORDER_CAP = 16


def mask_of(support) -> int:
    m = 0
    for i in support:
        m |= 1 << int(i)
    return m


def support_of(mask: int) -> frozenset:
    return frozenset(i for i in range(int(mask).bit_length()) if (mask >> i) & 1)


def _order_key(mask: int):
    s = sorted(support_of(mask))
    return (len(s), s)


@dataclass(frozen=True, eq=False)
class SupportTransitionSystem:
    """``tables[k][S]`` is ``sigma_{f_k}(S)`` for every bitmask ``S < 2**n``."""

    n: int
    tables: tuple

    @classmethod
    def of(cls, family: Family, cap: int = SCAN_CAP) -> "SupportTransitionSystem":
        if family.n > cap:
            raise DimensionTooLarge(family.n, cap)
        prog = family.program
        return cls(family.n, tuple(kernels.support_table(prog, k) for k in range(prog.n_maps)))

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def step(self, mask: int) -> list:
        return [int(t[mask]) for t in self.tables]

    def apply_word(self, word, mask: int) -> int:
        for k in word:
            mask = int(self.tables[k][mask])
        return mask

    def reachable(self, mask: int) -> set:
        """Supports sigma_w(S) over every word w, the empty word included."""
        seen = {int(mask)}
        stack = [int(mask)]
        while stack:
            s = stack.pop()
            for t in self.step(s):
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return seen


def invariant_faces(family: Family) -> list:
    """Proper nonempty supports J with sigma_f(J) inside J for every map."""
    sts = SupportTransitionSystem.of(family)
    masks = np.arange(1, sts.full, dtype=np.int64)
    ok = np.ones(len(masks), dtype=bool)
    for t in sts.tables:
        ok &= (t[masks] & ~masks) == 0
    found = sorted((int(m) for m in masks[ok]), key=_order_key)
    return [support_of(m) for m in found]


def is_irreducible(family: Family):
    faces = invariant_faces(family)
    return (not faces, faces[0] if faces else None)


def support_graph(family: Family) -> list:
    """Edges (i, j) of G(A): some map has f(e_j)_i > 0."""
    prog = family.program
    edges = set()
    eye = np.eye(family.n)
    for k in range(prog.n_maps):
        Y = kernels.eval_batch(prog, k, eye)  # row j is f(e_j)
        for j, i in zip(*np.nonzero(Y > 0)):
            edges.add((int(i), int(j)))
    return sorted(edges)


def _reach(n: int, adj: dict, start: int) -> set:
    seen, stack = {start}, [start]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def graph_irreducibility(family: Family):
    """Strong connectivity of G(A) and its edge list.

    Strong connectivity always implies irreducibility; the converse holds for
    subadditive families.
    """
    edges = support_graph(family)
    fwd: dict = {}
    bwd: dict = {}
    for i, j in edges:
        fwd.setdefault(i, []).append(j)
        bwd.setdefault(j, []).append(i)
    n = family.n
    strong = len(_reach(n, fwd, 0)) == n and len(_reach(n, bwd, 0)) == n
    return strong, edges


def is_primitive(family: Family):
    """Whether full support is reachable from every nonempty support.

    Returns ``(flag, witness)`` where the witness is the smallest nonempty
    support from which the interior is never reached.
    """
    sts = SupportTransitionSystem.of(family)
    size = 1 << sts.n
    can = np.zeros(size, dtype=bool)
    can[sts.full] = True
    while True:
        nxt = can.copy()
        for t in sts.tables:
            nxt |= can[t]
        if (nxt == can).all():
            break
        can = nxt
    bad = [m for m in range(1, size) if not can[m]]
    if not bad:
        return True, None
    return False, support_of(min(bad, key=_order_key))


class PartPreorder:
    """``J >= J'`` iff some support reachable from J contains J'.

    Queries work for n <= 16; :meth:`matrix` materializes the full table over
    nonempty supports (rows and columns indexed by bitmask - 1).
    """

    def __init__(self, family: Family):
        if family.n > PREORDER_CAP:
            raise DimensionTooLarge(family.n, PREORDER_CAP)
        self.n = family.n
        self.sts = SupportTransitionSystem.of(family, PREORDER_CAP)
        self._reach: dict = {}

    def reach(self, J) -> set:
        m = J if isinstance(J, int) else mask_of(J)
        if m not in self._reach:
            self._reach[m] = self.sts.reachable(m)
        return self._reach[m]

    def geq(self, J, Jp) -> bool:
        mp = Jp if isinstance(Jp, int) else mask_of(Jp)
        return any((s & mp) == mp for s in self.reach(J))

    def strict(self, J, Jp) -> bool:
        return self.geq(J, Jp) and not self.geq(Jp, J)

    def matrix(self) -> np.ndarray:
        size = 1 << self.n
        R = np.zeros((size, size), dtype=bool)
        for m in range(1, size):
            R[m, list(self.reach(m))] = True
        # close downward: containing S' means reaching a superset of S'
        cols = np.arange(size)
        for b in range(self.n):
            has = cols[(cols >> b) & 1 == 1]
            R[:, has ^ (1 << b)] |= R[:, has]
        return R[1:, 1:]

    def strict_matrix(self) -> np.ndarray:
        G = self.matrix()
        return G & ~G.T


def part_preorder(family: Family) -> PartPreorder:
    return PartPreorder(family)


def classify_growth(seq) -> str:
    """'bounded', 'growing' or 'inconclusive' for a nonnegative sequence.

    bounded: the overall maximum exceeds the first-half maximum by at most a
    factor 1 + 1e-9.  growing: the last quarter is nondecreasing and strictly
    rising, and the final value is at least 1.5 times the first-half maximum.
    """
    vals = [float(v) for v in seq]
    if not vals:
        return "inconclusive"
    d = len(vals)
    head = max(vals[: max(1, d // 2)])
    if max(vals) <= (1 + 1e-9) * head:
        return "bounded"
    q = max(1, d // 4)
    tail = vals[-(q + 1):]
    rising = all(b >= a for a, b in zip(tail, tail[1:])) and tail[-1] > tail[0]
    if rising and vals[-1] >= 1.5 * head:
        return "growing"
    return "inconclusive"


@dataclass
class ProbeResult:
    max_norm_per_length: list
    growth_classification: str


def boundedness_probe(family: Family, depth: int = 12, budget: int = DEFAULT_BUDGET) -> ProbeResult:
    """alpha_m for m <= depth and a growth verdict for the semigroup."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    counter = _Counter(budget)
    alphas = []
    for m, Y, _, log_scale, _, _ in _levels(family.program, np.ones(family.n), depth, True, counter):
        alphas.append(_norm_from(float(Y.max()), log_scale))
    return ProbeResult(alphas, classify_growth(alphas))
