import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagspec import frv, qgreen
from lagspec.errors import ResolutionError
from lagspec.lag2d import unit_lag_cdf

small_T = st.integers(2, 4)


def test_quaternion_argument_and_value_layout():
    q = qgreen.Quaternion2.argument(1 + 2j, 0.5j)
    assert q.m[0, 0] == 1 + 2j and q.m[1, 1] == 1 - 2j
    assert q.conjugation_defect() == pytest.approx(0.0, abs=1e-15)
    v = qgreen.Quaternion2.value(0.3 - 0.1j, 0.2 + 0.4j)
    assert v.g == 0.3 - 0.1j and v.abs_v == pytest.approx(abs(0.2 + 0.4j))


def test_quaternion_inverse():
    q = qgreen.Quaternion2.argument(1 + 1j, 0.3)
    np.testing.assert_allclose((q @ q.inv()).m, np.eye(2), atol=1e-14)


def test_sandwich_problem_validation():
    with pytest.raises(ValueError):
        qgreen.SandwichProblem(np.ones((2, 3)), 0.5)
    with pytest.raises(ValueError):
        qgreen.SandwichProblem(np.eye(2), -1.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        qgreen.ContinuationSchedule([0.1, 0.2])
    with pytest.raises(ValueError):
        qgreen.ContinuationSchedule([0.1, 0.01])


def test_word_monomial():
    assert qgreen.word_monomial([0, 1]) == ((0, 1), (0, 1, 0, 0))
    assert qgreen.word_monomial([0, 1, 1, 0]) == ((0, 0), (0, 1, 1, 1))
    with pytest.raises(ValueError):
        qgreen.word_monomial([0, 2])


def test_nilpotent_pair_trace():
    A = np.array([[0, 1], [0, 0]], dtype=complex)
    # (1/T) Tr A A^dagger = 1/2
    assert qgreen.mixed_moment(A, [0, 1]) == pytest.approx(0.5, abs=1e-12)


def test_shifts():
    D = qgreen.nilpotent_shift(4, 1)
    assert D[0, 1] == 1 and D[3, 0] == 0 and np.trace(D @ D.T) == 3
    C = qgreen.cyclic_shift(4, 1)
    np.testing.assert_array_equal(C @ C.T, np.eye(4))


def test_marchenko_pastur_from_identity():
    prob = qgreen.SandwichProblem(np.eye(6), 0.5)
    for z in (1.0 + 0.5j, 2.5 + 0.3j):
        sol = qgreen.solve_sandwich(prob, z)
        assert sol.g == pytest.approx(frv.wishart_transforms("G", z, 0.5), abs=1e-9)
        assert not sol.inside


def test_cyclic_unit_lag_matches_closed_form():
    T, r = 64, 0.5
    prob = qgreen.SandwichProblem(qgreen.cyclic_shift(T, 1), r)
    z = 0.6 * np.exp(0.3j)
    sol = qgreen.solve_sandwich(prob, z)
    assert sol.inside
    assert (sol.g * z).real == pytest.approx(unit_lag_cdf(0.6, r), abs=1e-6)
    assert qgreen.overlap_from_field(sol.G.v) > 0


def test_density_from_samples_of_uniform_disc():
    # g = conj(z) inside the unit disc gives density 1/pi
    h = 0.01
    x = np.arange(-0.2, 0.2 + h / 2, h)
    Z = x[None, :] + 1j * x[:, None]
    rho = qgreen.density_from_samples(np.conj(Z), h)
    np.testing.assert_allclose(rho, 1 / np.pi, rtol=1e-12)


def test_density_from_field_detects_under_resolution():
    g = lambda z: np.conj(z)
    assert qgreen.density_from_field(g, np.array([0.1 + 0.1j]), 1e-3)[0] == pytest.approx(1 / np.pi)
    wild = lambda z: np.conj(z) * np.cos(40 * np.abs(z)) ** 2
    with pytest.raises(ResolutionError):
        qgreen.density_from_field(wild, np.array([0.4 + 0.1j]), 0.05)


def test_radial_shortcut():
    assert qgreen.radial_density_from_f(0.5, 0.25, 1.0) == pytest.approx(1 / np.pi)


def chain_sum(A, word):
    import itertools

    mats = (A, A.conj().T)
    target = qgreen.word_monomial(word)
    total = 0.0
    for w in itertools.product((0, 1), repeat=len(word)):
        if qgreen.word_monomial(w) == target:
            P = np.eye(A.shape[0], dtype=complex)
            for a in w:
                P = P @ mats[a]
            total += np.trace(P) / A.shape[0]
    return total


@given(small_T, st.integers(0, 2**31), st.lists(st.integers(0, 1), min_size=1, max_size=4))
def test_mixed_moments_match_chain_traces(T, seed, word):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((T, T)) + 1j * rng.standard_normal((T, T))
    ref = chain_sum(A, word)
    assert abs(qgreen.mixed_moment(A, word) - ref) <= 1e-9 * max(1.0, abs(ref))


@given(st.floats(0.3, 2.0), st.floats(0.2, 1.0), st.floats(0.05, 1.0))
def test_moment_function_conjugation_symmetry(x, y, w):
    A = qgreen.cyclic_shift(5, 2) * 0.7
    M = qgreen.quaternionic_moment_gf(A, qgreen.Quaternion2.argument(x + 1j * y, w).inv())
    assert M.conjugation_defect() < 1e-10
