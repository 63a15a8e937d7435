import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bigmcg.action import (EndPermutation, apply_to_curve, end_permutation,
                           sym_generation_check, try_apply)
from bigmcg.homology import OracleError, curve_class, lattice, word_matrix, TruncationWindow
from bigmcg.model import RelabelGap, load_model, parse_curve
from bigmcg.word import Word, inverse, parse_word
from action_table import TABLE, table_model
from wordgen import words

S8 = load_model("s_n", 8)


@pytest.mark.parametrize("name,n,session,word,curve,image", TABLE,
                         ids=[f"{r[0]}:{r[3]}({r[4]})" for r in TABLE])
def test_quoted_curve_images(name, n, session, word, curve, image):
    m = table_model(name, n, session)
    out = apply_to_curve(parse_word(word, m), parse_curve(curve, m.n), m)
    assert out.resolved and out.curve == parse_curve(image, m.n)


def test_small_examples():
    c = parse_curve
    assert apply_to_curve(parse_word("A[4,1]", S8), c("B[1,1]", 8), S8).curve == c("B[1,1]", 8)
    out = apply_to_curve(parse_word("C[3,1]*B[3,1]", S8), c("C[3,1]", 8), S8)
    assert out.curve == c("B[3,1]", 8)


def test_relabel_gap_and_unresolved():
    with pytest.raises(RelabelGap):
        apply_to_curve(parse_word("TAU", S8), parse_curve("A[1,1]", 8), S8)
    out = apply_to_curve(parse_word("A[1,1]", S8), parse_curve("B[1,1]", 8), S8)
    assert not out.resolved


def test_end_permutation_examples():
    assert str(end_permutation(parse_word("R", S8), S8)) == "(1 2 3 4 5 6 7 8)"
    assert end_permutation(parse_word("A[1,1]", S8), S8) == EndPermutation.identity(8)
    assert str(end_permutation(parse_word("TAU", S8), S8)) == "(1 2)"
    assert str(end_permutation(parse_word("H[3]*A[1,1]", S8), S8)) == "()"


def test_sym_generation_examples():
    r = end_permutation(parse_word("R", S8), S8)
    t = end_permutation(parse_word("TAU", S8), S8)
    assert sym_generation_check({r, t}, 8)
    assert not sym_generation_check({EndPermutation.identity(8)}, 8)
    s3 = load_model("s_n", 3)
    assert not sym_generation_check({end_permutation(parse_word("R", s3), s3)}, 3)


@pytest.mark.parametrize("n", range(3, 13))
def test_rotation_and_swap_generate_sym_n(n):
    m = load_model("s_n", n)
    gens = {end_permutation(parse_word(x, m), m) for x in ("R", "TAU")}
    assert sym_generation_check(gens, n)


@settings(max_examples=200, deadline=None)
@given(words(S8, 8))
def test_end_permutation_of_inverse(w):
    assert end_permutation(inverse(w, S8), S8) == end_permutation(w, S8).inverse()


@settings(max_examples=200, deadline=None)
@given(words(S8, 6), words(S8, 6), st.sampled_from(S8.curves(2)))
def test_action_is_homomorphic(a, b, c):
    inner = try_apply(b, c, S8)
    assume(inner is not None)
    step = try_apply(a, inner, S8)
    assume(step is not None)
    assert try_apply(a + b, c, S8) in (step, None)


@settings(max_examples=200, deadline=None)
@given(words(S8, 8), st.sampled_from(S8.curves(2)))
def test_resolved_images_agree_with_homology(w, c):
    img = try_apply(w, c, S8)
    assume(img is not None)
    win = TruncationWindow()
    try:
        M = word_matrix(w, S8, win)
        L = lattice(S8, win)
        v, u = L.vector(curve_class(S8, c)), L.vector(curve_class(S8, img))
    except OracleError:
        assume(False)
    got = M @ v
    assert np.array_equal(got, u) or np.array_equal(got, -u)
