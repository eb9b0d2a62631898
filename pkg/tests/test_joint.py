from __future__ import annotations

import math

import numpy as np
import pytest

from monocone.errors import BudgetExceeded
from monocone.family import parse_family
from monocone.generators import random_general_family, random_subadditive_family
from monocone.joint import (
    Stable,
    Unknown,
    check_selectable_stability,
    gsr_lower,
    jsr_bounds,
    partial_jsr,
    subradius_bounds,
    verify_certificate,
)
from monocone.spectral import word_bracket
from monocone.words import canonical_rotation, lyndon_count, lyndon_words

from conftest import brute_alpha, brute_beta, brute_word_norms, geomean_family

GOLDEN_PHI = (1 + math.sqrt(5)) / 2


def _small_families():
    rng = np.random.default_rng(41)
    fams = []
    for i in range(6):
        fams.append(random_subadditive_family(rng, n=int(rng.integers(2, 5)), k=int(rng.integers(1, 4))))
        fams.append(random_general_family(rng, n=int(rng.integers(2, 4)), k=int(rng.integers(1, 4))))
    return fams


SMALL = _small_families()


# -- words -----------------------------------------------------------------------

@pytest.mark.parametrize("k, L", [(1, 6), (2, 10), (3, 7)])
def test_lyndon_counts(k, L):
    words = list(lyndon_words(k, L))
    assert len(words) == len(set(words))
    for m in range(1, L + 1):
        assert sum(1 for w in words if len(w) == m) == lyndon_count(k, m)
    for w in words:
        assert canonical_rotation(w) == w


# -- alpha / beta against brute force -----------------------------------------------

@pytest.mark.parametrize("idx", range(len(SMALL)))
def test_pruned_alpha_matches_enumeration(idx):
    fam = SMALL[idx]
    depth = 8 if len(fam) <= 2 else 6
    rep = jsr_bounds(fam, max_len=depth)
    for m, alpha in rep.alpha_raw:
        assert alpha == pytest.approx(brute_alpha(fam, m), rel=1e-13, abs=0)


@pytest.mark.parametrize("idx", range(len(SMALL)))
def test_pruned_beta_matches_enumeration(idx):
    fam = SMALL[idx]
    depth = 8 if len(fam) <= 2 else 6
    rep = subradius_bounds(fam, max_len=depth)
    for m, beta in rep.beta_seq:
        assert beta == pytest.approx(brute_beta(fam, m), rel=1e-13, abs=0)
    assert rep.r_star_upper == pytest.approx(min(b ** (1 / m) for m, b in rep.beta_seq), rel=1e-15)


@pytest.mark.parametrize("idx", range(len(SMALL)))
def test_bounds_are_ordered_and_certified(idx):
    fam = SMALL[idx]
    rep = jsr_bounds(fam, max_len=7)
    assert rep.lower <= rep.upper + 1e-12
    if rep.lower > 0:
        assert verify_certificate(fam, rep.lower_word, rep.lower_vector, rep.lower)
    assert rep.upper == min(v for _, v in rep.alpha_seq)


def test_example34_bounds(ex34):
    rep = jsr_bounds(ex34, max_len=10)
    assert rep.lower == 1.0
    assert rep.lower_word == (0,)
    assert rep.lower_vector.tolist() == [1.0, 0.0]
    assert [a for _, a in rep.alpha_raw] == [float(m + 1) for m in range(1, 11)]
    assert rep.upper == pytest.approx(11 ** 0.1, rel=1e-15)


def test_example34_gsr_lower(ex34):
    val, word, vec = gsr_lower(ex34, max_len=1)
    assert (val, word) == (1.0, (0,))


def test_golden_pair(golden):
    rep = jsr_bounds(golden, max_len=12)
    assert rep.lower >= GOLDEN_PHI - 1e-6
    assert len(rep.lower_word) == 2
    assert 1.618 <= rep.upper <= 1.70
    # oracle: exact enumeration of all 4096 products as integer matrices
    A = np.array([[1, 1], [0, 1]], dtype=np.int64)
    B = np.array([[1, 0], [1, 1]], dtype=np.int64)
    alpha12 = 0
    for bits in range(1 << 12):
        P = np.eye(2, dtype=np.int64)
        for t in range(12):
            P = (A if (bits >> t) & 1 == 0 else B) @ P
        alpha12 = max(alpha12, int(P.sum(axis=1).max()))
    assert dict(rep.alpha_raw)[12] == alpha12
    val, word, _ = gsr_lower(golden, max_len=2)
    assert val == pytest.approx(GOLDEN_PHI, abs=1e-9)
    assert val == rep.lower or gsr_lower(golden, max_len=12)[0] == rep.lower


def test_gsr_lower_equals_jsr_lower():
    for fam in SMALL[:6]:
        assert gsr_lower(fam, max_len=6)[0] == jsr_bounds(fam, max_len=6).lower


def test_singleton_geomean_half(q5):
    rep = jsr_bounds(q5, max_len=40)
    assert 0.5 <= rep.lower <= 0.60 and 0.5 <= rep.upper <= 0.60


def test_zero_map_family():
    fam = parse_family("dim 2\nmap z = [ 0 ; 0 ]")
    rep = jsr_bounds(fam, max_len=4)
    assert (rep.lower, rep.upper) == (0.0, 0.0)
    assert gsr_lower(fam, 4)[0] == 0.0


def test_budget_exceeded_carries_partial(golden):
    with pytest.raises(BudgetExceeded) as info:
        jsr_bounds(golden, max_len=30, budget=200)
    partial = info.value.partial
    assert partial is not None and partial.alpha_seq


def test_cyclic_rotations_have_overlapping_brackets():
    rng = np.random.default_rng(3)
    for fam in SMALL:
        k = len(fam)
        for _ in range(3):
            w = tuple(int(v) for v in rng.integers(0, k, 4))
            rot = w[1:] + w[:1]
            a = word_bracket(fam.program, w, max_iter=3000)
            b = word_bracket(fam.program, rot, max_iter=3000)
            assert a.lower <= b.upper + 1e-9 and b.lower <= a.upper + 1e-9


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_scaling_equivariance_exact(c):
    for fam in SMALL[:8]:
        a = jsr_bounds(fam, max_len=6)
        b = jsr_bounds(fam.scaled(c), max_len=6)
        assert b.upper == c * a.upper
        assert b.lower == c * a.lower
        assert [v for _, v in b.alpha_raw] == [v * c ** m for m, v in a.alpha_raw]


# -- partial radii ---------------------------------------------------------------------

def test_partial_example34_part_two(ex34):
    rep = partial_jsr(ex34, {1}, max_len=8)
    assert all(v == 1.0 for _, v in rep.estimate_seq)


def test_partial_full_support_matches(golden):
    a = partial_jsr(golden, {0, 1}, max_len=10)
    b = jsr_bounds(golden, max_len=10)
    assert (a.lower, a.upper, a.alpha_seq) == (b.lower, b.upper, b.alpha_seq)


def test_partial_orbit_hits_zero(q5):
    rep = partial_jsr(q5, {0}, max_len=6)
    assert all(v == 0.0 for _, v in rep.estimate_seq)
    assert rep.lower == 0.0


def test_partial_estimates_against_enumeration():
    for fam in SMALL[:6]:
        rep = partial_jsr(fam, {0}, max_len=5)
        e = np.zeros(fam.n)
        e[0] = 1.0
        for m, v in rep.estimate_seq:
            assert v == pytest.approx(brute_alpha(fam, m, e) ** (1 / m), rel=1e-12)
        assert rep.lower <= rep.upper + 1e-12


# -- subradius and stability ---------------------------------------------------------

def test_subradius_g_h(ex34):
    gh = ex34.subfamily(["g", "h"])
    rep = subradius_bounds(gh, max_len=20)
    assert [b for _, b in rep.beta_seq] == [2.0] * 20
    assert rep.r_star_upper == pytest.approx(2 ** (1 / 20), rel=1e-15)


def test_subradius_half_identity():
    fam = parse_family("dim 2\nmap h = [ 0.5*x1 ; 0.5*x2 ]")
    rep = subradius_bounds(fam, max_len=5)
    assert rep.r_star_upper == 0.5
    assert [b for _, b in rep.beta_seq] == [0.5 ** m for m in range(1, 6)]


def test_subradius_singleton_matches_radius(q5):
    rep = subradius_bounds(q5, max_len=40)
    assert abs(rep.r_star_upper - 0.5) <= 0.02


def test_stability_scaled_example(ex34):
    out = check_selectable_stability(ex34.scaled(0.9), max_len=8)
    assert isinstance(out, Stable)
    assert out.word == (1,) * 7
    assert out.norm == pytest.approx(0.9 ** 7 * 2, abs=1e-12)


def test_stability_trivial_cases():
    half = parse_family("dim 1\nmap h = [ 0.5*x1 ]")
    out = check_selectable_stability(half, max_len=3)
    assert isinstance(out, Stable) and out.word == (0,) and out.norm == 0.5
    ident = parse_family("dim 2\nmap id = [ x1 ; x2 ]")
    for L in (1, 5):
        out = check_selectable_stability(ident, max_len=L)
        assert isinstance(out, Unknown) and out.best_norm_seen == 1.0


def test_stability_witness_is_shortest():
    for fam in SMALL:
        out = check_selectable_stability(fam.scaled(0.6), max_len=6)
        if isinstance(out, Stable):
            L = len(out.word)
            assert brute_word_norms(fam.scaled(0.6), L)[out.word] == pytest.approx(out.norm, rel=1e-13)
            assert out.norm < 1.0
            for m in range(1, L):
                assert brute_beta(fam.scaled(0.6), m) >= 1.0


def test_geomean_singleton_radius(q5):
    rep = jsr_bounds(parse_family(geomean_family(0.9)), max_len=12)
    assert rep.lower <= 0.5 + 1e-12 <= rep.upper
