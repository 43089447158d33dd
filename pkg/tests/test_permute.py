import itertools
import math

import pytest
from hypothesis import given, strategies as st

from ligocr.permute import PermutationOverflow, count_permutations, k_permutations


def brute_count(n, k):
    # ordered k-tuples over range(n) with no repeated element
    return sum(1 for t in itertools.product(range(n), repeat=k) if len(set(t)) == k)


@pytest.mark.parametrize("n,k,expected", [(18, 2, 306), (18, 3, 4896), (38, 1, 38)])
def test_published_counts(n, k, expected):
    assert count_permutations(n, k) == expected


def test_small_cases():
    assert count_permutations(5, 0) == 1
    assert count_permutations(5, 3) == brute_count(5, 3) == 60


def test_k_permutations_order():
    assert list(k_permutations("abc", 2)) == [tuple(p) for p in ["ab", "ac", "ba", "bc", "ca", "cb"]]
    assert list(k_permutations([7, 8, 9], 1)) == [(7,), (8,), (9,)]
    assert list(k_permutations([], 0)) == [()]


@pytest.mark.parametrize("n", range(9))
def test_enumeration_matches_formula_exhaustively(n):
    for k in range(n + 1):
        seqs = list(k_permutations(range(n), k))
        assert len(seqs) == count_permutations(n, k) == brute_count(n, k)
        assert len(set(seqs)) == len(seqs)
        assert all(len(set(s)) == k for s in seqs)
        assert seqs == sorted(seqs)


@given(st.integers(0, 20))
def test_identities(n):
    assert count_permutations(n, n) == math.factorial(n)
    assert count_permutations(n, 0) == 1
    if n:
        assert count_permutations(n, 1) == n


@given(st.integers(0, 64).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_matches_math_perm_or_overflows(nk):
    n, k = nk
    exact = math.perm(n, k)
    if exact < 2 ** 64:
        assert count_permutations(n, k) == exact
    else:
        with pytest.raises(PermutationOverflow):
            count_permutations(n, k)


def test_errors():
    with pytest.raises(ValueError):
        count_permutations(3, 4)
    with pytest.raises(ValueError):
        count_permutations(65, 1)
    with pytest.raises(ValueError):
        list(k_permutations([1, 2], 3))
