import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from lagspec.errors import BranchLostError, ConvergenceError
from lagspec.roots import (
    BranchSelector,
    PolyReal,
    newton_system,
    select_branch,
    solve_cubic,
    solve_quartic,
)

coef = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_cubic_unity_roots():
    roots = solve_cubic(PolyReal([-1, 0, 0, 1]))
    expected = np.exp(2j * np.pi * np.arange(3) / 3)
    for e in expected:
        assert np.min(np.abs(roots - e)) < 1e-14
    real = roots[roots.imag == 0]
    assert real.size == 1 and real[0] == pytest.approx(1.0, abs=1e-15)


def test_quartic_biquadratic():
    # (x^2 - 1)(x^2 - 4) = x^4 - 5 x^2 + 4
    roots = solve_quartic(PolyReal([4, 0, -5, 0, 1]))
    np.testing.assert_allclose(roots.real, [-2, -1, 1, 2], atol=1e-13)
    assert np.all(roots.imag == 0)


def test_cyclic_law_cubic_selects_half():
    # 4F^3 - F/3 - 1/3 has the single real root 1/2
    p = PolyReal([-1 / 3, -1 / 3, 0, 4])
    F = select_branch(solve_cubic(p), BranchSelector.range(0.0, 1.0))
    assert F.real == pytest.approx(0.5, abs=1e-14)


def test_double_root_uses_robust_path():
    # (x - 1)^2 (x + 2): discriminant zero
    roots = solve_cubic(PolyReal([2, -3, 0, 1]))
    np.testing.assert_allclose(np.sort(roots.real), [-2, 1, 1], atol=1e-7)


def test_range_selector_ambiguity_raises():
    with pytest.raises(BranchLostError) as info:
        select_branch([0.2, 0.7, 3.0], BranchSelector.range(0, 1))
    assert len(info.value.candidates) == 3


def test_range_selector_uses_previous_to_disambiguate():
    assert select_branch([0.2, 0.7], BranchSelector.range(0, 1, previous=0.65)).real == pytest.approx(0.7)


def test_continuity_selector_jump_limit():
    assert select_branch([0.0, 1.0, 2.05], BranchSelector.continuity(2.0)).real == pytest.approx(2.05)
    with pytest.raises(BranchLostError):
        select_branch([0.0, 1.0], BranchSelector.continuity(2.0, max_jump=0.5))


def test_asymptotic_selector():
    assert select_branch([1j, 5.0, -3.0], BranchSelector.asymptotic(4.0)) == 5.0


def test_newton_sqrt2():
    x = newton_system(lambda v: np.array([v[0] ** 2 - 2.0]), np.array([1.0]))
    assert x[0] == pytest.approx(math.sqrt(2), abs=1e-12)


def test_newton_reports_failure():
    with pytest.raises(ConvergenceError) as info:
        newton_system(lambda v: np.array([v[0] ** 2 + 1.0]), np.array([1.0]), max_iter=20)
    assert info.value.residual_norm > 0


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
def test_cubic_from_real_roots_residual(rts):
    c = np.poly(rts)[::-1]
    p = PolyReal(c)
    roots = solve_cubic(p)
    assert p.residual(roots) < 1e-9


@given(coef, coef, coef, st.floats(0.1, 10))
def test_cubic_rescaling_invariance(b, c, d, scale):
    p = PolyReal([d, c, b, 1.0])
    q = PolyReal([scale * d, scale * c, scale * b, scale])
    r1, r2 = solve_cubic(p), solve_cubic(q)
    assert np.max(np.abs(np.sort_complex(r1) - np.sort_complex(r2))) < 1e-6 * (1 + np.max(np.abs(r1)))


@given(coef, coef, coef, coef)
def test_quartic_residual(a, b, c, d):
    p = PolyReal([d, c, b, a, 1.0])
    roots = solve_quartic(p)
    assume(np.all(np.isfinite(roots)))
    assert roots.shape == (4,)
    assert p.residual(roots) < 1e-8
