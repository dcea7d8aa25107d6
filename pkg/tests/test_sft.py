import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mflab.sft import (
    Alphabet,
    SubshiftSpec,
    allowed_words,
    boolean_product,
    enumerate_adjacencies,
    higher_block_recode,
    is_aperiodic,
    is_irreducible,
    is_primitive,
    is_primitive_by_powers,
    period,
    spectral_radius,
    strongly_connected_components,
    topological_entropy,
    trim,
)

GOLDEN = SubshiftSpec.from_matrix("01", [[1, 1], [1, 0]])
CYCLE3 = SubshiftSpec.from_matrix("abc", [[0, 1, 0], [0, 0, 1], [1, 0, 0]])


def adjacency(n):
    return st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=n, max_size=n)


def test_alphabet_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        Alphabet(("a", "a"))


def test_alphabet_roundtrip():
    a = Alphabet(("x", "y", "z"))
    assert a.decode(a.encode(("z", "x"))) == ("z", "x")
    with pytest.raises(KeyError):
        a.index("w")


def test_adjacency_must_be_square_binary():
    with pytest.raises(ValueError):
        SubshiftSpec.from_matrix("ab", [[1, 2], [0, 1]])
    with pytest.raises(ValueError):
        SubshiftSpec.from_matrix("ab", [[1, 1]])


def test_trim_removes_dead_ends():
    s = SubshiftSpec.from_matrix("abc", [[1, 1, 0], [1, 0, 1], [0, 0, 0]])
    t, kept = trim(s)
    assert kept == (0, 1)
    assert t.adjacency == ((1, 1), (1, 0))


def test_trim_empty_raises():
    with pytest.raises(ValueError, match="empty"):
        trim(SubshiftSpec.from_matrix("ab", [[0, 1], [0, 0]]))


def test_golden_mean_is_primitive():
    assert is_irreducible(GOLDEN)
    assert is_aperiodic(GOLDEN)
    assert is_primitive(GOLDEN)


def test_cycle_has_period_three():
    assert is_irreducible(CYCLE3)
    assert period(CYCLE3, 0) == 3
    assert not is_primitive(CYCLE3)


def test_reducible_components():
    s = SubshiftSpec.from_matrix("abc", [[1, 1, 0], [0, 1, 1], [0, 0, 1]])
    assert not is_irreducible(s)
    assert strongly_connected_components(s) == [(0,), (1,), (2,)]


def test_golden_mean_entropy():
    assert abs(topological_entropy(GOLDEN) - math.log((1 + math.sqrt(5)) / 2)) < 1e-12


def test_full_shift_entropy():
    assert abs(topological_entropy(SubshiftSpec.full_shift("abc")) - math.log(3)) < 1e-12


def test_entropy_of_periodic_orbit_is_zero():
    assert abs(topological_entropy(CYCLE3)) < 1e-12


def test_allowed_words_lexicographic():
    assert allowed_words(GOLDEN, 3) == [
        ("0", "0", "0"),
        ("0", "0", "1"),
        ("0", "1", "0"),
        ("1", "0", "0"),
        ("1", "0", "1"),
    ]


def test_higher_block_identity_for_k1():
    s, blocks = higher_block_recode(GOLDEN, 1)
    assert s is GOLDEN
    assert blocks == {"0": ("0",), "1": ("1",)}


def test_higher_block_labels_and_size():
    s, blocks = higher_block_recode(GOLDEN, 2)
    assert s.alphabet.symbols == ("0,0", "0,1", "1,0")
    assert blocks["1,0"] == ("1", "0")


@pytest.mark.parametrize("k", [2, 3, 4])
def test_higher_block_preserves_entropy(k):
    s, _ = higher_block_recode(GOLDEN, k)
    assert abs(topological_entropy(s) - topological_entropy(GOLDEN)) < 1e-9


def test_boolean_product():
    assert boolean_product([[1, 0], [1, 1]], [[0, 1], [1, 0]]) == ((0, 1), (1, 1))


def test_primitivity_agrees_with_powers_exhaustively_for_three_states():
    for m in enumerate_adjacencies(3):
        s = SubshiftSpec.from_matrix("abc", m)
        assert is_primitive(s) == is_primitive_by_powers(s), m


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5).flatmap(adjacency))
def test_primitivity_agrees_with_powers(m):
    s = SubshiftSpec.from_matrix([str(i) for i in range(len(m))], m)
    assert is_primitive(s) == is_primitive_by_powers(s)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5).flatmap(adjacency))
def test_spectral_radius_matches_numpy(m):
    s = SubshiftSpec.from_matrix([str(i) for i in range(len(m))], m)
    expected = max(abs(np.linalg.eigvals(np.array(m, dtype=float))))
    assert abs(spectral_radius(s) - expected) < 1e-8


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4).flatmap(adjacency), st.integers(1, 5))
def test_word_count_is_matrix_power_sum(m, n):
    s = SubshiftSpec.from_matrix([str(i) for i in range(len(m))], m)
    a = np.array(m, dtype=np.int64)
    expected = int(np.linalg.matrix_power(a, n - 1).sum())
    assert len(allowed_words(s, n)) == expected
