import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagspec import mc
from lagspec.errors import SingularCovarianceError


def test_spec_validation():
    with pytest.raises(ValueError):
        mc.EnsembleSpec(4, 8, 8)
    with pytest.raises(ValueError):
        mc.EnsembleSpec(4, 8, 1, variant="nope")
    with pytest.raises(ValueError):
        mc.EnsembleSpec(4, 8, 1, field="quaternion")
    spec = mc.EnsembleSpec(4, 8, 2)
    assert spec.r == 0.5 and spec.beta == 0.25 and not spec.hermitian


def test_gaussian_draws_are_keyed_by_index():
    a = mc.sample_gaussian(3, 5, "complex", seed=1, index=0)
    b = mc.sample_gaussian(3, 5, "complex", seed=1, index=0)
    c = mc.sample_gaussian(3, 5, "complex", seed=1, index=1)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_complex_entries_unit_variance():
    x = mc.sample_gaussian(200, 200, "complex", seed=5, index=0)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=0.02)


def test_lagged_matrix_against_explicit_shift():
    X = mc.sample_gaussian(3, 7, "complex", 2, 0)
    D = np.eye(7, k=2)
    np.testing.assert_allclose(mc.build_lagged(X, 2), X @ D @ X.conj().T / 5, atol=1e-13)
    Dc = np.roll(np.eye(7), 2, axis=1)
    np.testing.assert_allclose(mc.build_lagged(X, 2, "lagged_cyclic"), X @ Dc @ X.conj().T / 7, atol=1e-13)


def test_symmetrized_is_hermitian():
    X = mc.sample_gaussian(4, 9, "complex", 3, 0)
    S = mc.symmetrized_sample(X, 1)
    np.testing.assert_allclose(S, S.conj().T, atol=1e-14)


def test_whitened_square_spectrum_in_unit_interval():
    X = mc.sample_gaussian(20, 60, "complex", 4, 0)
    ev = np.linalg.eigvalsh(mc.whitened_square(X, 1))
    assert ev.min() > -1e-10 and ev.max() < 1 + 1e-10


def test_whitening_needs_more_times_than_series():
    X = mc.sample_gaussian(8, 6, "complex", 4, 0)
    with pytest.raises(SingularCovarianceError):
        mc.whitened_square(X, 1)


def test_overlaps_of_normal_matrix_are_one():
    rng = np.random.default_rng(0)
    H = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    s = mc.eigen_biorthogonal(H + H.conj().T)
    np.testing.assert_allclose(s.overlaps, 1.0, atol=1e-10)
    assert s.accepted and s.biorthogonality < 1e-12


def test_overlaps_of_jordan_like_matrix_are_large():
    s = mc.eigen_biorthogonal(np.array([[1.0, 1e3], [0.0, 1.001]]))
    assert s.overlaps.min() > 1e5


def test_ill_conditioned_sample_rejected():
    s = mc.eigen_biorthogonal(np.array([[1.0, 1.0], [0.0, 1.0 + 1e-15]]), cond_limit=1e8)
    assert not s.accepted


def test_run_is_deterministic_and_worker_independent():
    spec = mc.EnsembleSpec(16, 32, 1, samples=4, seed=9)
    a = mc.run_ensemble(spec, workers=1)
    b = mc.run_ensemble(spec, workers=3)
    np.testing.assert_array_equal(a.eigenvalues(), b.eigenvalues())
    np.testing.assert_array_equal(a.overlaps(), b.overlaps())


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("LAGSPEC_THREADS", "3")
    assert mc._worker_count(None) == 3
    monkeypatch.setenv("LAGSPEC_THREADS", "x")
    assert mc._worker_count(None) == 1


def test_half_lag_matrix_has_no_zero_modes_below_one():
    spec = mc.EnsembleSpec(8, 32, 16, samples=1, seed=1)
    ev = mc.run_ensemble(spec, overlaps=False).eigenvalues()
    assert np.min(np.abs(ev)) > 1e-6


def test_lagged_matrix_zero_modes_when_rank_deficient():
    # T - tau = 4 < N = 8: at least 4 exact zero eigenvalues
    spec = mc.EnsembleSpec(8, 8, 4, samples=1, seed=1)
    res = mc.run_ensemble(spec, overlaps=False)
    curve = mc.empirical_radial(res, mc.default_edges(2.0, 8))
    assert curve.zero_count >= 4


def test_empirical_radial_normalisation():
    spec = mc.EnsembleSpec(32, 64, 1, samples=5, seed=2)
    res = mc.run_ensemble(spec)
    curve = mc.empirical_radial(res, mc.default_edges(1.0, 20))
    assert curve.cdf[-1] == pytest.approx(1.0)
    assert np.sum(curve.density * curve.areas) == pytest.approx(1.0)
    assert np.all(curve.overlap >= 0)


def test_empirical_real_cdf():
    np.testing.assert_allclose(mc.empirical_real_cdf([0.0, 1.0, 2.0, 3.0], [-1, 0, 1.5, 3]), [0, 0.25, 0.5, 1.0])


@given(st.integers(0, 2**63), st.integers(0, 1000))
def test_seed_index_determinism(seed, index):
    a = mc.sample_gaussian(2, 3, "real", seed, index)
    b = mc.sample_gaussian(2, 3, "real", seed, index)
    np.testing.assert_array_equal(a, b)


@given(st.integers(0, 2**32))
def test_overlaps_at_least_one(seed):
    spec = mc.EnsembleSpec(6, 12, 1, samples=1, seed=seed)
    s = mc.run_ensemble(spec).samples[0]
    assert np.all(s.overlaps >= 1 - 1e-9)


@given(st.integers(0, 2**32))
def test_hermitian_variants_have_real_spectra(seed):
    spec = mc.EnsembleSpec(5, 20, 1, variant="symmetrized", samples=1, seed=seed)
    ev = mc.run_ensemble(spec).eigenvalues()
    assert np.all(ev.imag == 0)
