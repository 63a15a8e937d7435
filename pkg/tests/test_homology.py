import random

import numpy as np
import pytest

from bigmcg.homology import (HomologyClass, OutsideWindow, Overflow, TruncationWindow,
                             curve_class, lattice, oracle_check, symplectic_form,
                             word_matrix)
from bigmcg.model import load_model, parse_curve
from bigmcg.word import Word, parse_word, symmetry, twist

S8 = load_model("s_n", 8)
WIN = TruncationWindow()
MODELS = [("s_n", 8), ("s_n", 3), ("jacob", None), ("lochness", None)]


def in_window(m, c):
    try:
        curve_class(m, c, WIN)
        return True
    except OutsideWindow:
        return False


def window_curves(m):
    return [c for c in m.curves(WIN.N) if in_window(m, c)]


def T(m, *cs, exp=1):
    return word_matrix(Word([twist(c, exp) for c in cs]), m, WIN)


def test_examples():
    assert np.array_equal(word_matrix(Word(), S8), np.eye(lattice(S8, WIN).dim, dtype=np.int64))
    a = curve_class(S8, parse_curve("A[1,1]", 8), WIN)
    assert a.coeffs == {("x", (1, 1)): 1}
    with pytest.raises(OutsideWindow):
        curve_class(S8, parse_curve("A[20,1]", 8), WIN)
    assert oracle_check(parse_word("A[1,1]", S8), parse_word("A[2,1]", S8), S8).status == "unequal"
    far = parse_word("A[17,1]", S8)
    assert oracle_check(far, far, S8).status == "inapplicable"
    f1 = parse_word("B[1,1]*C[0,3]*A[1,4]*H[7]", S8)
    f4 = parse_word("B[1,2]*C[0,3]*A[1,4]*H[7]", S8)
    assert oracle_check(f1 + f4.inverse(S8), parse_word("B[1,1]*~B[1,2]", S8), S8).status == "equal"


def test_transvection_fixes_complement():
    L = lattice(S8, WIN)
    M = T(S8, parse_curve("A[1,1]", 8))
    v = L.vector(HomologyClass({("x", (2, 1)): 3, ("x", (1, 1)): 1, ("y", (4, 5)): -2}))
    assert np.array_equal(M @ v, v)


def test_pairing_matches_convention():
    x = HomologyClass({("x", (1, 1)): 1})
    y = HomologyClass({("y", (1, 1)): 1})
    assert x.pairing(y) == 1 and y.pairing(x) == -1


def test_overflow_guard():
    w = parse_word("A[1,1]*~B[1,1]", S8)
    with pytest.raises(Overflow):
        word_matrix(Word(list(w) * 60), S8, WIN)


@pytest.mark.parametrize("name,n", MODELS)
def test_braid_identity_on_every_meeting_pair(name, n):
    m = load_model(name, n)
    pairs = {(a, b) for a in window_curves(m) for b in m.neighbors(a)
             if a.sort_key() < b.sort_key() and in_window(m, b)}
    assert pairs
    for a, b in sorted(pairs, key=lambda p: (p[0].sort_key(), p[1].sort_key())):
        assert np.array_equal(T(m, a, b, a), T(m, b, a, b)), (a, b)


@pytest.mark.parametrize("name,n", MODELS)
def test_commutation_on_sampled_disjoint_pairs(name, n):
    m = load_model(name, n)
    cs = window_curves(m)
    rng = random.Random(7)
    seen = 0
    while seen < 200:
        a, b = rng.sample(cs, 2)
        if m.intersection(a, b) != 0:
            continue
        assert curve_class(m, a).pairing(curve_class(m, b)) == 0
        assert np.array_equal(T(m, a, b), T(m, b, a)), (a, b)
        seen += 1


@pytest.mark.parametrize("name", ["jacob", "lochness"])
def test_lantern_matrix_identity(name):
    m = load_model(name)
    for lt in m.lanterns:
        assert np.array_equal(T(m, *lt.boundary), T(m, *lt.interior))
        # the seven twists commute pairwise with the boundary twists
        for b in lt.boundary:
            for c in lt.boundary + lt.interior:
                assert np.array_equal(T(m, b, c), T(m, c, b))


def test_printed_d1_word_cannot_reach_lantern_curve():
    # Every curve of the lantern sub-surface has a class in the span of the
    # x's, but the quoted word sends b2 to 2 x1 + y2 under both twist signs.
    m = load_model("jacob")
    L = lattice(m, WIN)
    w = parse_word("B[2]*~A[1]*C[1]*~A[1]*A[1]*~A[2]*C[1]*~A[2]", m)
    b2 = L.vector(curve_class(m, parse_curve("B[2]")))
    for word in (w, Word([twist(l.curve, -l.exp) for l in w])):
        img = word_matrix(word, m, WIN) @ b2
        assert img[2 * L.pos[(2,)] + 1] == 1
        assert abs(img[2 * L.pos[(1,)]]) == 2


@pytest.mark.parametrize("text", ["A[1,1]", "C[0,8]", "H[3]", "~H[3]", "R", "~R", "A'[2,4]"])
def test_letters_are_symplectic(text):
    L = lattice(S8, WIN)
    M = word_matrix(parse_word(text, S8), S8, WIN)
    J = symplectic_form(L)
    assert np.array_equal(M.T @ J @ M, J)


@pytest.mark.parametrize("j", range(1, 9))
def test_rotation_conjugates_shifts(j):
    L = lattice(S8, WIN)
    R = word_matrix(parse_word("R", S8), S8, WIN)
    Rinv = word_matrix(parse_word("~R", S8), S8, WIN)
    lhs = R @ word_matrix(Word([symmetry("H", j)]), S8, WIN) @ Rinv
    rhs = word_matrix(Word([symmetry("H", j % 8 + 1)]), S8, WIN)
    safe = [2 * k + e for k, h in enumerate(L.handles) if h[0] <= WIN.N for e in (0, 1)]
    assert np.array_equal(lhs[:, safe], rhs[:, safe])
