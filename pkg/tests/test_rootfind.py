import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirac_delta.core import SolverBudgetExceeded
from dirac_delta.rootfind import (Bracket, SolverOptions, bisect, bisect_many, golden_min, refine_root,
                                  scan_brackets, solve_all)

OPTS = SolverOptions()


def test_linear_bracket_and_refine():
    (b,) = scan_brackets(lambda E: E - 0.5, (-1.0, 1.0), OPTS)
    assert b.kind == "sign_change" and b.lo <= 0.5 <= b.hi
    assert refine_root(lambda E: E - 0.5, b, OPTS) == pytest.approx(0.5, abs=1e-12)


def test_touching_candidate_accepted():
    f = lambda E: (E - 0.3) ** 2
    (b,) = scan_brackets(f, (-1.0, 1.0), OPTS)
    assert b.kind == "touching_candidate"
    assert refine_root(f, b, OPTS) == pytest.approx(0.3, abs=1e-6)


def test_touching_candidate_rejected():
    b = Bracket(0.2, 0.4, 0.11, 0.11, "touching_candidate", scale=1.0)
    assert refine_root(lambda E: (E - 0.3) ** 2 + 0.1, b, OPTS) is None


def test_pair_inside_one_cell_is_split():
    roots = solve_all(lambda E: (E - 0.3) ** 2 - 1e-12, (-1.0, 1.0), OPTS)
    assert [r.multiplicity for r in roots] == ["simple", "simple"]
    assert roots[0].energy == pytest.approx(0.3 - 1e-6, abs=1e-12)
    assert roots[1].energy == pytest.approx(0.3 + 1e-6, abs=1e-12)


def test_branches_scanned_independently():
    f = lambda E: np.stack([E - 0.2, E + 0.7], axis=-1)
    roots = solve_all(f, (-1.0, 1.0), OPTS)
    assert [round(r.energy, 12) for r in roots] == [-0.7, 0.2]


def test_empty_result():
    assert solve_all(lambda E: E * 0 + 1.0, (-1.0, 1.0), OPTS) == []


def test_min_count_budget():
    with pytest.raises(SolverBudgetExceeded):
        solve_all(lambda E: E - 0.5, (-1.0, 1.0), SolverOptions(grid_points=11, max_refinements=1), min_count=2)


def test_bracket_invariants():
    with pytest.raises(ValueError):
        Bracket(1.0, 0.0, -1.0, 1.0, "sign_change")
    with pytest.raises(ValueError):
        Bracket(0.0, 1.0, 1.0, 1.0, "sign_change")
    with pytest.raises(ValueError):
        SolverOptions(grid_points=1)
    with pytest.raises(ValueError):
        SolverOptions(tol_energy=0.0)


def test_golden_and_bisect():
    assert golden_min(lambda x: (x - 0.123) ** 2, 0.0, 1.0, 1e-10) == pytest.approx(0.123, abs=1e-8)
    assert bisect(lambda x: x**3 - 0.001, 0.0, 1.0, -0.001, 1e-14) == pytest.approx(0.1, abs=1e-13)


def test_precise_evaluator_splits_cluster():
    # Three roots 1e-9 apart: the float cubic cannot separate them, the exact one can.
    from fractions import Fraction
    c = [Fraction(3, 10) + k * Fraction(1, 10**9) for k in (-1, 0, 1)]
    f = lambda E: (E - 0.3) ** 3
    exact = lambda E: (Fraction(E) - c[0]) * (Fraction(E) - c[1]) * (Fraction(E) - c[2])
    roots = solve_all(f, (-1.0, 1.0), OPTS, precise=exact)
    assert len(roots) == 3
    assert np.allclose([r.energy for r in roots], [float(x) for x in c], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=-0.95, max_value=0.95), min_size=1, max_size=4, unique=True))
def test_polynomial_roots_recovered(rs):
    rs = sorted(rs)
    if np.min(np.diff(rs), initial=1.0) < 1e-3:
        return
    f = lambda E: np.prod([E - r for r in rs], axis=0)
    roots = solve_all(f, (-1.0, 1.0), OPTS)
    got = [r.energy for r in roots]
    assert len(got) == len(rs)
    assert np.allclose(got, rs, atol=1e-11)
    assert all(b - a > 10 * OPTS.tol_energy for a, b in zip(got, got[1:]))


def test_bisect_many_matches_scalar():
    f = lambda E: np.sin(8 * E)
    brackets = [b for b in scan_brackets(f, (-1.0, 1.0), OPTS) if b.kind == "sign_change"]
    xs = bisect_many(f, brackets, 1e-13)
    assert np.allclose(sorted(xs), np.arange(-2, 3) * np.pi / 8, atol=1e-12)
