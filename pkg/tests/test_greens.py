import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirac_delta.closedform import preset_problem, single_energy
from dirac_delta.core import BoundStateProblem, DomainError
from dirac_delta.greens import Matrix2, assemble_delta_matrix, delta_determinant, free_greens, greens_spectrum


def g0_oracle(dx, E, m=1.0):
    k = math.sqrt(m * m - E * E)
    s = float(np.sign(dx))
    return 0.5 * math.exp(-abs(dx) * k) * np.array([[(E - m) / k, -s], [s, (E + m) / k]])


def test_free_greens_at_zero_energy():
    G = free_greens(1.0, 0.0, 1.0).as_array()
    assert np.allclose(G, 0.5 * math.exp(-1) * np.array([[-1, -1], [1, 1]]), atol=1e-15)
    assert np.allclose(free_greens(0.0, 0.0, 1.0).as_array(), [[-0.5, 0], [0, 0.5]])


@given(st.floats(-5, 5), st.floats(-0.99, 0.99))
def test_free_greens_transpose_symmetry(dx, E):
    a = free_greens(dx, E, 1.0).as_array()
    b = free_greens(-dx, E, 1.0).as_array()
    assert np.array_equal(a.T, b)


def test_free_greens_outside_gap():
    with pytest.raises(DomainError):
        free_greens(1.0, 1.0, 1.0)


def test_double_delta_matrix_entries():
    g, R, E = 0.9, 0.7, 0.35
    D = assemble_delta_matrix(preset_problem("double", g, R=R), E)
    diag = -np.eye(2) / g + g0_oracle(0.0, E)
    expected = np.block([[diag, g0_oracle(-2 * R, E)], [g0_oracle(2 * R, E), diag]])
    assert np.allclose(D.entries, expected, atol=1e-15)
    assert np.allclose(D.block(0, 1), g0_oracle(-2 * R, E))


def test_triple_delta_matrix_any_ordering():
    # Centers listed as (-R1, R2, 0) assemble to the same matrix up to a block permutation.
    g, R1, R2, E = 1.2, 0.4, 0.9, -0.2
    pos = [-R1, R2, 0.0]
    expected = np.zeros((6, 6))
    for i, ri in enumerate(pos):
        for j, rj in enumerate(pos):
            blk = g0_oracle(ri - rj, E) - (np.eye(2) / g if i == j else 0)
            expected[2 * i:2 * i + 2, 2 * j:2 * j + 2] = blk
    got = assemble_delta_matrix(preset_problem("triple_same", g, R1=R1, R2=R2), E).entries
    perm = np.array([0, 1, 4, 5, 2, 3])  # sorted order -R1, 0, R2
    assert np.allclose(got, expected[np.ix_(perm, perm)], atol=1e-15)
    assert np.linalg.det(got) == pytest.approx(np.linalg.det(expected), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5, unique=True),
       st.floats(-0.95, 0.95), st.floats(0.2, 3.0))
def test_delta_matrix_is_symmetric(xs, E, g):
    xs = sorted(xs)
    if len(xs) > 1 and np.min(np.diff(xs)) < 1e-6:
        return
    p = BoundStateProblem.from_lists(xs, [(-1) ** i * g for i in range(len(xs))])
    D = assemble_delta_matrix(p, E).entries
    assert np.array_equal(D, D.T)


def test_single_center_determinant_formula():
    g = 1.3
    p = preset_problem("single", g)
    for E in np.linspace(-0.9, 0.9, 7):
        k = math.sqrt(1 - E * E)
        assert delta_determinant(p, E) == pytest.approx(1 / g**2 - E / (g * k) - 0.25, rel=1e-13, abs=1e-14)


def test_determinant_matches_numpy():
    p = preset_problem("triple_alt", 0.8, R1=0.5, R2=1.5)
    for E in (-0.7, 0.0, 0.4):
        assert delta_determinant(p, E) == pytest.approx(np.linalg.det(assemble_delta_matrix(p, E).entries),
                                                        rel=1e-12)


@pytest.mark.parametrize("g", [0.5, 1.0, 1.9, 2.5, 4.0])
def test_single_center_spectrum(g):
    roots = greens_spectrum(preset_problem("single", g)).energies
    assert len(roots) == 1
    assert roots[0] == pytest.approx(single_energy(g), abs=1e-12)


def test_no_bound_state_for_repulsive_center_above_cayley_pole():
    # a single -g delta with g < 0 binds at -E of its mirror image
    roots = greens_spectrum(preset_problem("single", -1.0)).energies
    assert roots == pytest.approx([-single_energy(1.0)], abs=1e-12)


def test_matrix2():
    M = Matrix2(1.0, 2.0, 3.0, 4.0)
    assert M.det == -2.0
    assert Matrix2.of(M.as_array()) == M
    with pytest.raises(ValueError):
        Matrix2(float("nan"), 0, 0, 0)
