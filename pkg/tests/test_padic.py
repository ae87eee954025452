import random

import pytest
from hypothesis import given, settings, strategies as st

from kmspec.errors import FreenessViolationError, InvalidInputError
from kmspec.padic import (MAT2_IDENTITY, Mat2, default_alphabet,
                          enumerate_reduced_words, eval_word, freeness_suite,
                          generator, letter_matrix, reduce_word, sl2_order,
                          subgroup_closure_mod)


def test_generator_matrices():
    assert generator("a").entries() == (1, 2, 0, 1)
    assert generator("b").entries() == (1, 0, 2, 1)
    assert generator("g1").entries() == (1, 8, 0, 1)
    assert generator("g2").entries() == (1, 0, 8, 1)
    assert (generator("a") * generator("b")).entries() == (5, 2, 2, 1)
    assert generator("h", 0).entries() == (1, 2, 2, 5)


def test_determinant_one_preserved():
    m = generator("h", 3) * generator("g1").inv() * generator("h", -2)
    a, b, c, d = m.entries()
    assert a * d - b * c == 1


def test_eval_word_examples():
    assert eval_word(()).entries() == (1, 0, 0, 1)
    assert eval_word((("g1", 1), ("g2", 1))).entries() == (65, 8, 8, 1)


def test_reduce_word_cancels():
    a, ainv, b = ("g1", 1), ("g1", -1), ("g2", 1)
    assert reduce_word((a, ainv)) == ()
    assert reduce_word((b, a, ainv)) == (b,)
    # reduction is idempotent
    w = (a, b, ("h:1", 1), ("h:1", -1), b)
    assert reduce_word(reduce_word(w)) == reduce_word(w)


def test_enumerate_reduced_words_count():
    words = list(enumerate_reduced_words(3, ("g1", "g2")))
    # 4 + 4*3 + 4*9 nonempty reduced words over two free letters
    assert len(words) == 4 + 12 + 36
    assert len(set(words)) == len(words)


def test_freeness_small():
    cert = freeness_suite(4, ("g1", "g2"))
    assert not cert.identity_found


def test_freeness_detects_relations():
    # a and g1 = a^4 satisfy an obvious relation at length 5
    with pytest.raises(FreenessViolationError):
        freeness_suite(8, ("a", "g1"))


def test_freeness_guard():
    with pytest.raises(InvalidInputError):
        freeness_suite(11)


def test_mod_reduction_is_homomorphism():
    rng = random.Random(5)
    alphabet = default_alphabet()
    mod = 27
    for _ in range(30):
        letters = tuple((rng.choice(alphabet), rng.choice((1, -1)))
                        for _ in range(7))
        w = reduce_word(letters)
        full = tuple(v % mod for v in eval_word(w).entries())
        acc = (1, 0, 0, 1)
        for letter in w:
            g = tuple(v % mod for v in letter_matrix(letter).entries())
            acc = ((acc[0] * g[0] + acc[1] * g[2]) % mod,
                   (acc[0] * g[1] + acc[1] * g[3]) % mod,
                   (acc[2] * g[0] + acc[3] * g[2]) % mod,
                   (acc[2] * g[1] + acc[3] * g[3]) % mod)
        assert acc == full


def test_sl2_order_formula():
    assert sl2_order(3, 1) == 24
    assert sl2_order(3, 2) == 648
    assert sl2_order(5, 1) == 120


@pytest.mark.parametrize("N,expected", [(1, 24), (2, 648)])
def test_closure_is_full(N, expected):
    out = subgroup_closure_mod(3, N, [generator("g1"), generator("g2")])
    assert out["order"] == expected
    assert out["is_full"]
    assert sl2_order(3, N) % out["order"] == 0


def test_closure_lagrange_on_proper_subgroup():
    out = subgroup_closure_mod(3, 1, [generator("g1")])
    assert not out["is_full"]
    assert sl2_order(3, 1) % out["order"] == 0


def test_closure_rejects_even_prime():
    with pytest.raises(InvalidInputError):
        subgroup_closure_mod(2, 1, [generator("g1")])


@given(st.integers(-4, 4))
@settings(max_examples=9, deadline=None)
def test_h_n_has_det_one(n):
    a, b, c, d = generator("h", n).entries()
    assert a * d - b * c == 1
