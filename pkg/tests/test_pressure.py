import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bowen_dim.errors import BracketError, BudgetExceededError, ValidationError
from bowen_dim.pressure import (PressureCurve, bisect_decreasing, bowen_root, cylinder_orbits, epsilon_pressure,
                                pressure_partition_sum, pressure_spectral, similarity_dimension,
                                variational_check)
from bowen_dim.symbolic import PotentialSpec, TransitionStructure
from bowen_dim.systems import build_ifs

LOG2, LOG3 = math.log(2), math.log(3)


def full_shift_system(m, ratio=0.5):
    # m equal branches; only the transition structure and stable data matter here
    return build_ifs([ratio] * m, [k * (1 - ratio) / (m - 1) for k in range(m)])


def test_partition_sum_full_three_shift_zero_potential():
    sys = full_shift_system(3, 0.3)
    for n in (2, 3, 5, 7):
        assert pressure_partition_sum(sys, PotentialSpec.constant(0.0, 3), n).value == pytest.approx(LOG3, abs=1e-12)


def test_partition_sum_full_four_shift_normalised():
    sys = full_shift_system(4, 0.2)
    for n in range(2, 9):
        est = pressure_partition_sum(sys, PotentialSpec.constant(-math.log(4), 4), n)
        assert abs(est.value) <= 1e-12
        assert est.method == "partition_sum" and est.depth == n and est.variation_bound == 0.0


def test_partition_sum_example2_matches_spectral(example2):
    phi = PotentialSpec.constant(math.log(0.5), 4)
    spectral = pressure_spectral(example2.transitions, phi.locally_constant)
    for n in (2, 3, 6, 10):
        part = pressure_partition_sum(example2, phi, n)
        assert abs(part.value) <= 1e-10
        assert abs(part.value - spectral.value) <= 1e-10


def test_partition_sum_depth_must_be_at_least_two(example2):
    with pytest.raises(ValidationError):
        pressure_partition_sum(example2, PotentialSpec.constant(0.0, 4), 1)


def test_partition_sum_budget(example2):
    with pytest.raises(BudgetExceededError):
        pressure_partition_sum(example2, PotentialSpec.constant(0.0, 4), 12, budget=1000)


def test_spectral_examples():
    ts3 = TransitionStructure.full_shift(3)
    assert pressure_spectral(ts3, [0.4] * 3).value == pytest.approx(LOG3 + 0.4, abs=1e-12)
    a = np.array([[1, 1, 0, 0], [0, 0, 1, 1], [1, 1, 0, 0], [0, 0, 1, 1]], dtype=bool)
    est = pressure_spectral(TransitionStructure(a), [math.log(0.3)] * 4)
    assert est.value == pytest.approx(LOG2 + math.log(0.3), abs=1e-12)
    assert est.method == "spectral" and est.epsilon == 0 and est.variation_bound == 0
    two = pressure_spectral(TransitionStructure.full_shift(2), [LOG2, LOG3])
    assert two.value == pytest.approx(math.log(5), abs=1e-12)


def test_spectral_rejects_reducible_and_bad_tables():
    with pytest.raises(ValidationError):
        pressure_spectral(TransitionStructure(np.array([[1, 1], [0, 1]], dtype=bool)), [0.0, 0.0])
    with pytest.raises(ValidationError):
        pressure_spectral(TransitionStructure.full_shift(2), [0.0, np.inf])


def test_spectral_handles_very_negative_tables():
    ts = TransitionStructure.full_shift(2)
    assert pressure_spectral(ts, [-2000.0, -2000.0]).value == pytest.approx(LOG2 - 2000.0, abs=1e-9)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.integers(2, 8))
@settings(max_examples=40, deadline=None)
def test_oracle_agreement_full_shift_any_table(table, n):
    sys = full_shift_system(3, 0.3)
    part = pressure_partition_sum(sys, PotentialSpec.from_table(table), n).value
    spectral = pressure_spectral(sys.transitions, table).value
    assert abs(part - spectral) <= 1e-9


@given(c=st.floats(-3, 3), n=st.integers(2, 12))
@settings(max_examples=30, deadline=None)
def test_oracle_agreement_example2_constant_row_sums(c, n, example2):
    part = pressure_partition_sum(example2, PotentialSpec.constant(c, 4), n).value
    assert abs(part - pressure_spectral(example2.transitions, [c] * 4).value) <= 1e-9


@given(table=st.lists(st.floats(-2, 2), min_size=4, max_size=4), n=st.integers(2, 12))
@settings(max_examples=30, deadline=None)
def test_oracle_agreement_example2_generic_tables_within_eigenvalue_gap(table, n, example2):
    # periodic-word sums equal trace(M^n); the gap to rho^n is set by the subdominant eigenvalues
    m = example2.transitions.admissible * np.exp(np.array(table))[None, :]
    eig = np.sort(np.abs(np.linalg.eigvals(m)))[::-1]
    r = eig[1] / eig[0]
    bound = -math.log(1 - 3 * r ** n) / n if 3 * r ** n < 1 else math.inf
    part = pressure_partition_sum(example2, PotentialSpec.from_table(table), n).value
    spectral = pressure_spectral(example2.transitions, table).value
    assert abs(part - spectral) <= bound + 1e-12


def test_depth_stability_for_holder_potential(example1, example2):
    psi = PotentialSpec(lambda s, p: 0.3 * np.sin(2 * np.pi * p[:, 1]) + 0.2 * p[:, 0], None,
                        0.6 * math.pi + 0.2, "smooth")
    for sys, n in ((example1, 4), (example2, 5)):
        a = pressure_partition_sum(sys, psi, n)
        b = pressure_partition_sum(sys, psi, 2 * n)
        assert a.variation_bound > 0
        assert abs(a.value - b.value) <= a.variation_bound


def test_cylinder_orbits_follow_the_dynamics(example2):
    orb = cylinder_orbits(example2, 5)
    adm = example2.transitions.admissible
    assert np.all(adm[orb.words[:, -1], orb.words[:, 0]])
    stepped = example2.apply(orb.points[:, 0, :])
    assert np.allclose(stepped[:, 0], orb.points[:, 1, 0], atol=1e-9)
    assert np.allclose(stepped[:, 1], orb.points[:, 1, 1], atol=1e-12)
    assert np.array_equal(example2.symbol_of(orb.points[:, 2, 0]), orb.words[:, 2])


def test_epsilon_pressure_single_cell_is_zero(example2):
    assert epsilon_pressure(example2, PotentialSpec.constant(0.0, 4), 6, 4.0) == 0.0


def test_epsilon_pressure_fine_grid_on_two_shift(cantor):
    zero = PotentialSpec.constant(0.0, 2)
    for n in (8, 10):
        value = epsilon_pressure(cantor, zero, n, 2.0 ** -n)
        assert abs(value - pressure_partition_sum(cantor, zero, n).value) <= 0.05
        assert abs(value - LOG2) <= 0.05


def test_epsilon_pressure_ladder_converges_to_partition_sum(example2):
    psi = PotentialSpec(lambda s, p: 0.5 * p[:, 1], None, 0.5, "fiber")
    n = 10
    orb = cylinder_orbits(example2, n)
    target = pressure_partition_sum(example2, psi, n, orbits=orb).value
    ladder = [2.0 ** -k for k in range(0, 16, 3)]
    devs = [abs(epsilon_pressure(example2, psi, n, e, orbits=orb) - target) for e in ladder]
    assert devs[-1] <= 1e-12
    assert all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))
    assert max(devs) > 0.1


def test_epsilon_pressure_errors(example2):
    zero = PotentialSpec.constant(0.0, 4)
    with pytest.raises(ValidationError):
        epsilon_pressure(example2, zero, 4, 0.0)
    with pytest.raises(BudgetExceededError):
        epsilon_pressure(example2, zero, 4, 1e-9, grid_budget=10**12)


def test_bowen_root_examples(example2):
    four = full_shift_system(4, 0.5)
    assert bowen_root(four, 1.0).t == pytest.approx(2.0, abs=1e-8)
    assert bowen_root(four, 2.0).t == pytest.approx(1.0, abs=1e-8)
    assert bowen_root(example2, 1.0).t == pytest.approx(1.0, abs=1e-8)
    exact = bowen_root(four, 4.0)
    assert exact.t == 0.0 and not exact.clamped


def test_bowen_root_clamps_when_pressure_starts_negative():
    root = bowen_root(full_shift_system(4, 0.5), 8.0)
    assert root.t == 0.0 and root.clamped
    assert root.residual == pytest.approx(LOG2, abs=1e-12)


def test_bowen_root_residual_and_certificate_by_reevaluation(example1, example2):
    for sys, omega in ((example2, [1.0, 1.5, 1.0, 2.0]), (example1, 1.3), (example2, lambda p: 1 + 0.2 * p[:, 1])):
        root = bowen_root(sys, omega, depth=8)
        curve = PressureCurve(sys, omega, depth=8)
        assert root.residual <= 1e-10
        assert abs(curve(root.t)) == pytest.approx(root.residual, abs=1e-15)
        lo, hi = root.bracket
        assert lo <= root.t <= hi and hi - lo <= 1e-9
        assert curve(lo) >= 0.0 >= curve(hi)
        assert root.certified


def test_bowen_root_rejects_omega_below_one(example2):
    with pytest.raises(ValidationError):
        bowen_root(example2, 0.5)
    with pytest.raises(ValidationError):
        bowen_root(example2, [1.0, 1.0, 0.9, 1.0])


def test_bracketing_failure_is_reported():
    with pytest.raises(BracketError):
        bisect_decreasing(lambda t: 1.0 - 1e-30 * t)


@given(omega=st.lists(st.floats(1.0, 4.0), min_size=4, max_size=4), t1=st.floats(0.0, 2.0), dt=st.floats(0.01, 2.0))
@settings(max_examples=40, deadline=None)
def test_pressure_strictly_decreasing_in_t(omega, t1, dt, example2):
    curve = PressureCurve(example2, omega)
    inf_phi = float(np.min(np.abs(example2.stable_potential.locally_constant)))
    assert curve(t1) - curve(t1 + dt) >= dt * inf_phi - 1e-9


def test_pressure_strictly_decreasing_partition_path(example2):
    omega = lambda p: 1 + 0.3 * p[:, 1]
    curve = PressureCurve(example2, omega, depth=8)
    inf_phi = float(np.min(np.abs(example2.stable_potential.locally_constant)))
    ts = np.linspace(0, 2, 11)
    vals = [curve(t) for t in ts]
    for (ta, va), (tb, vb) in zip(zip(ts, vals), zip(ts[1:], vals[1:])):
        assert va - vb >= (tb - ta) * inf_phi - 2 * curve.variation - 1e-12


@given(omega=st.lists(st.floats(1.0, 3.0), min_size=4, max_size=4), bump=st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
@settings(max_examples=30, deadline=None)
def test_bowen_root_monotone_in_omega(omega, bump, example2):
    bigger = [w + b for w, b in zip(omega, bump)]
    assert bowen_root(example2, omega).t >= bowen_root(example2, bigger).t - 1e-9


def test_similarity_dimension_examples():
    assert similarity_dimension([0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)
    assert similarity_dimension([1 / 3, 1 / 3]) == pytest.approx(LOG2 / LOG3, abs=1e-12)
    assert similarity_dimension([0.5]) == 0.0


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=6))
def test_similarity_dimension_residual(ratios):
    s = similarity_dimension(ratios)
    assert abs(sum(r ** s for r in ratios) - 1.0) < 1e-12 or s == 0.0


def test_similarity_dimension_rejects_bad_ratios():
    with pytest.raises(ValidationError):
        similarity_dimension([0.5, 1.0])
    with pytest.raises(ValidationError):
        similarity_dimension([])


def test_variational_examples():
    assert variational_check(TransitionStructure.full_shift(3), [0.0] * 3, [1 / 3] * 3) == pytest.approx(0, abs=1e-12)
    two = TransitionStructure.full_shift(2)
    assert abs(variational_check(two, [LOG2, LOG3], [0.4, 0.6])) <= 1e-10
    assert variational_check(two, [LOG2, LOG3], [0.9, 0.1]) > 1e-3


def test_variational_weights_must_sum_to_one():
    with pytest.raises(ValidationError):
        variational_check(TransitionStructure.full_shift(2), [0.0, 0.0], [0.5, 0.5 + 1e-9])


def test_variational_bernoulli_needs_full_shift(example2):
    with pytest.raises(ValidationError):
        variational_check(example2.transitions, [0.0] * 4, [0.25] * 4)


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.lists(st.floats(0.01, 1), min_size=3, max_size=3))
def test_variational_gap_never_negative_bernoulli(phi, w):
    p = np.array(w) / np.sum(w)
    p[-1] = 1.0 - p[:-1].sum()
    assert variational_check(TransitionStructure.full_shift(3), phi, p) >= -1e-12


@given(phi=st.lists(st.floats(-2, 2), min_size=4, max_size=4), w=st.lists(st.floats(0.05, 1), min_size=4, max_size=4))
def test_variational_gap_never_negative_markov(phi, w, example2):
    a = example2.transitions.admissible
    p = np.zeros((4, 4))
    for i in range(4):
        cols = np.flatnonzero(a[i])
        p[i, cols] = [w[i], w[(i + 1) % 4]]
        p[i] /= p[i].sum()
    assert variational_check(example2.transitions, phi, p) >= -1e-12


def test_variational_markov_parry_measure_is_optimal(example2):
    # for phi = 0 the maximal-entropy chain has uniform transitions here
    a = example2.transitions.admissible
    p = a / a.sum(axis=1, keepdims=True)
    assert abs(variational_check(example2.transitions, [0.0] * 4, p)) <= 1e-10
