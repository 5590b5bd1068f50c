import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bowen_dim.errors import BudgetExceededError, ValidationError
from bowen_dim.symbolic import (PotentialSpec, TransitionStructure, birkhoff_sum, enumerate_words, perron_root,
                                topological_entropy, word_array)

EX2_A = np.array([[1, 1, 0, 0], [0, 0, 1, 1], [1, 1, 0, 0], [0, 0, 1, 1]], dtype=bool)


def brute_force_words(a, n):
    m = len(a)
    return [w for w in itertools.product(range(m), repeat=n) if all(a[x][y] for x, y in zip(w, w[1:]))]


def test_full_two_shift_length_three_has_eight_words():
    assert len(enumerate_words(TransitionStructure.full_shift(2), 3)) == 8


def test_full_four_shift_length_one():
    assert enumerate_words(TransitionStructure.full_shift(4), 1) == [(0,), (1,), (2,), (3,)]


def test_example2_structure_length_three_matches_brute_force():
    words = enumerate_words(TransitionStructure(EX2_A), 3)
    assert len(words) == 16
    assert words == brute_force_words(EX2_A, 3)


def test_words_are_lexicographic_and_unique():
    ts = TransitionStructure(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=bool))
    words = enumerate_words(ts, 5)
    assert words == sorted(set(words))


def test_partitioned_enumeration_concatenates_to_the_whole():
    ts = TransitionStructure(EX2_A)
    parts = [w for s in range(4) for w in enumerate_words(ts, 6, first_symbol=s)]
    assert parts == enumerate_words(ts, 6)


def test_enumeration_budget_is_enforced_before_generating():
    with pytest.raises(BudgetExceededError):
        word_array(TransitionStructure.full_shift(4), 20, budget=10**6)


def test_depth_must_be_positive():
    with pytest.raises(ValidationError):
        enumerate_words(TransitionStructure.full_shift(2), 0)


@given(st.integers(2, 5), st.integers(1, 6), st.data())
@settings(max_examples=40, deadline=None)
def test_word_counts_follow_successor_recursion(m, n, data):
    bits = data.draw(st.lists(st.lists(st.booleans(), min_size=m, max_size=m), min_size=m, max_size=m))
    a = np.array(bits, dtype=bool)
    a[np.arange(m), (np.arange(m) + 1) % m] = True  # a cycle keeps every symbol alive
    ts = TransitionStructure(a)
    words = enumerate_words(ts, n)
    assert len(words) == len(brute_force_words(a, n)) == ts.count_words(n)
    successors = sum(int(a[w[-1]].sum()) for w in words)
    assert ts.count_words(n + 1) == successors


def test_full_shift_counts_are_powers():
    for m in (2, 3, 5):
        ts = TransitionStructure.full_shift(m)
        assert [ts.count_words(n) for n in range(1, 7)] == [m ** n for n in range(1, 7)]


def test_dead_symbol_rejected():
    with pytest.raises(ValidationError, match="no admissible successor"):
        TransitionStructure(np.array([[1, 1], [0, 0]], dtype=bool))


def test_irreducibility_and_primitivity():
    periodic = TransitionStructure(np.array([[0, 1], [1, 0]], dtype=bool))
    assert periodic.is_irreducible() and not periodic.is_primitive()
    reducible = TransitionStructure(np.array([[1, 1], [0, 1]], dtype=bool))
    assert not reducible.is_irreducible()
    with pytest.raises(ValidationError):
        topological_entropy(reducible)
    assert TransitionStructure(EX2_A).is_primitive()


def test_birkhoff_sum_of_constant():
    psi = PotentialSpec.constant(0.7, 2)
    orbit = [(0, (0.1, 0.2))] * 5
    assert birkhoff_sum(psi, orbit) == pytest.approx(3.5, abs=1e-15)


def test_birkhoff_sum_of_table_along_coded_orbit():
    phi = PotentialSpec.from_table([math.log(2), math.log(3)])
    orbit = [(0, (0.0, 0.0)), (1, (0.0, 0.0)), (0, (0.0, 0.0))]
    assert birkhoff_sum(phi, orbit) == pytest.approx(math.log(12), abs=1e-14)


def test_birkhoff_sum_of_zero_potential():
    assert birkhoff_sum(PotentialSpec.constant(0.0, 3), [(2, (0.3, 0.4)), (1, (0.5, 0.5))]) == 0.0


def test_birkhoff_sum_rejects_empty_orbit():
    with pytest.raises(ValidationError):
        birkhoff_sum(PotentialSpec.constant(0.0, 2), [])


@given(st.lists(st.tuples(st.integers(0, 2), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=8),
       st.lists(st.tuples(st.integers(0, 2), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=8))
def test_birkhoff_sum_is_additive_under_concatenation(left, right):
    psi = PotentialSpec(lambda s, p: np.sin(3 * p[:, 1]) + s, holder_modulus=3.0)
    a = [(s, (x, y)) for s, x, y in left]
    b = [(s, (x, y)) for s, x, y in right]
    assert birkhoff_sum(psi, a + b) == pytest.approx(birkhoff_sum(psi, a) + birkhoff_sum(psi, b), abs=1e-12)


def test_locally_constant_potential_matches_table_on_its_cylinder():
    phi = PotentialSpec.from_table([0.5, -1.0, 2.0])
    pts = np.random.default_rng(0).uniform(size=(30, 2))
    syms = np.repeat([0, 1, 2], 10)
    assert np.array_equal(phi(syms, pts), np.array([0.5, -1.0, 2.0])[syms])


def test_entropy_examples():
    assert topological_entropy(TransitionStructure.full_shift(3)) == pytest.approx(math.log(3), abs=1e-10)
    assert topological_entropy(TransitionStructure(EX2_A)) == pytest.approx(math.log(2), abs=1e-10)
    assert topological_entropy(TransitionStructure.full_shift(1)) == pytest.approx(0.0, abs=1e-12)


def test_entropy_of_golden_mean_shift():
    ts = TransitionStructure(np.array([[1, 1], [1, 0]], dtype=bool))
    assert topological_entropy(ts) == pytest.approx(math.log((1 + math.sqrt(5)) / 2), abs=1e-10)


def test_perron_root_on_periodic_matrix():
    assert perron_root(np.array([[0.0, 2.0], [8.0, 0.0]])) == pytest.approx(4.0, rel=1e-11)


@given(st.integers(2, 6), st.data())
@settings(max_examples=60, deadline=None)
def test_perron_root_agrees_with_dense_eigensolver(m, data):
    entries = data.draw(st.lists(st.floats(0.0, 5.0), min_size=m * m, max_size=m * m))
    mat = np.array(entries).reshape(m, m)
    mat[np.arange(m), (np.arange(m) + 1) % m] += 0.5  # irreducible
    expected = np.max(np.abs(np.linalg.eigvals(mat)))
    assert perron_root(mat) == pytest.approx(expected, rel=1e-9)
