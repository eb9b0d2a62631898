from __future__ import annotations

import itertools
import os
import sys

import numpy as np
import pytest

from monocone.expr import eval_map
from monocone.family import parse_family

FAMILY_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "families")

EX34_TEXT = """\
dim 2
map f = [ x1 + min(x1, x2) ; x2 ]
map g = [ 0 ; x1 + x2 ]
map h = [ x1 + x2 ; 0 ]
"""
GOLDEN_TEXT = "dim 2\nmap A = [ x1 + x2 ; x2 ]\nmap B = [ x1 ; x1 + x2 ]\n"
MAXPLUS_PAIR_TEXT = (
    "dim 2\n"
    "map a = [ max(0.5*x1, 2*x2) ; max(0.5*x1, 0.3*x2) ]\n"
    "map b = [ max(0.2*x1, 0.8*x2) ; max(0.9*x1, 0.7*x2) ]\n"
)
SWAP_TEXT = "dim 2\nmap s = [ x2 ; x1 ]\n"


def geomean_family(lam: float) -> str:
    return f"dim 2\nmap f = [ geo({lam!r}: x1, {1 - lam:.12g}: x2) ; 0.5*x2 ]\n"


@pytest.fixture(scope="session")
def ex34():
    return parse_family(EX34_TEXT)


@pytest.fixture(scope="session")
def golden():
    return parse_family(GOLDEN_TEXT)


@pytest.fixture(scope="session")
def maxplus_pair():
    return parse_family(MAXPLUS_PAIR_TEXT)


@pytest.fixture(scope="session")
def swap():
    return parse_family(SWAP_TEXT)


@pytest.fixture(scope="session")
def q5():
    return parse_family(geomean_family(0.5))


def brute_word_norms(family, m, start=None):
    """Pure-Python enumeration of ||f_w(start)|| over all words of length m."""
    x0 = np.ones(family.n) if start is None else np.asarray(start, dtype=float)
    out = {}
    for word in itertools.product(range(len(family)), repeat=m):
        x = x0
        for k in word:
            x = eval_map(family.maps[k], x)
        out[word] = float(np.max(x))
    return out


def brute_alpha(family, m, start=None):
    return max(brute_word_norms(family, m, start).values())


def brute_beta(family, m, start=None):
    return min(brute_word_norms(family, m, start).values())



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
