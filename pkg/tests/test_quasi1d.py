import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad, tanhsinh

from lagspec import quasi1d

ratios = st.floats(0.1, 3.0)


@pytest.mark.parametrize(
    "r, s_int, s_ext",
    [(1.0, 0.0, math.sqrt(2)), (2.0, 1 / math.sqrt(2), math.sqrt(6)), (0.25, 0.0, math.sqrt(0.25 * 1.25))],
)
def test_spectral_radii(r, s_int, s_ext):
    ring = quasi1d.spectral_radii(r)
    assert ring.s_int == pytest.approx(s_int, abs=1e-15)
    assert ring.s_ext == pytest.approx(s_ext, abs=1e-15)


def test_cyclic_cdf_interior_value():
    # at r = 1 half of the spectrum lies within s = 1/sqrt(3)
    assert quasi1d.hl_radial_cdf(1 / math.sqrt(3), 1.0) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("r", [0.25, 0.5, 1.0, 2.0])
def test_cyclic_cdf_endpoints_and_mass(r):
    ring = quasi1d.spectral_radii(r)
    assert quasi1d.hl_radial_cdf(ring.s_int, r) == pytest.approx(max(1 - r, 0.0), abs=1e-12)
    assert quasi1d.hl_radial_cdf(ring.s_ext, r) == pytest.approx(1.0, abs=1e-12)
    mass, _ = quad(lambda s: 2 * np.pi * s * quasi1d.hl_density(s, r), ring.s_int, ring.s_ext, limit=200)
    assert mass == pytest.approx(min(1.0, 1.0 / r), abs=1e-6)


def test_cyclic_density_is_derivative_of_cdf():
    r, s = 0.5, np.linspace(0.1, 0.8, 8)
    h = 1e-6
    dF = (quasi1d.hl_radial_cdf(s + h, r) - quasi1d.hl_radial_cdf(s - h, r)) / (2 * h)
    np.testing.assert_allclose(quasi1d.hl_density(s, r), dF / (2 * np.pi * s * r), rtol=1e-6)


def test_hl_curve_flags_outside():
    c = quasi1d.hl_curve(np.linspace(0, 3, 31), 2.0)
    ring = quasi1d.spectral_radii(2.0)
    assert c.convention == "T"
    np.testing.assert_array_equal(c.outside, (c.grid < ring.s_int) | (c.grid > ring.s_ext))
    assert np.all(c.rho[c.outside] == 0)


def test_radial_curve_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        quasi1d.RadialCurve([0.0, 0.0], [0, 0], [0, 0], [0, 0])


@given(ratios)
def test_cyclic_cdf_monotone(r):
    ring = quasi1d.spectral_radii(r)
    s = np.linspace(ring.s_int, ring.s_ext, 60)
    F = quasi1d.hl_radial_cdf(s, r)
    assert np.all(np.diff(F) >= -1e-12)
    assert np.all((F >= max(1 - r, 0) - 1e-12) & (F <= 1 + 1e-12))


@pytest.mark.parametrize("r, edge", [(0.25, 0.80891), (0.5, 1.24908), (1.0, 2.0), (2.0, 3.33019)])
def test_symmetrized_support_edge(r, edge):
    assert quasi1d.sym_support_edge(r) == pytest.approx(edge, abs=1e-5)


@pytest.mark.parametrize("r", [0.25, 0.5, 1.0])
def test_symmetrized_mass_and_variance(r):
    edge = quasi1d.sym_support_edge(r)
    assert quasi1d.sym_cdf(edge, r) == pytest.approx(1.0, abs=1e-6)
    # second moment of (C + C^dagger)/2 with unit lag is r/2
    res = tanhsinh(lambda x: 2 * x * x * quasi1d.sym_density(x, r), 0.0, edge, rtol=1e-8)
    assert res.integral == pytest.approx(r / 2, rel=1e-5)


def test_symmetrized_density_even():
    x = np.linspace(0.05, 1.2, 9)
    np.testing.assert_allclose(quasi1d.sym_density(x, 0.5), quasi1d.sym_density(-x, 0.5), rtol=1e-9)


def test_symmetrized_density_derivative():
    r, x, h = 0.5, np.array([0.2, 0.5, 0.9]), 1e-6
    fd = (quasi1d.sym_density(x + h, r) - quasi1d.sym_density(x - h, r)) / (2 * h)
    np.testing.assert_allclose(quasi1d.sym_density_derivative(x, r), fd, rtol=1e-5)


def test_forward_abel_of_uniform_disc():
    # a uniform disc of radius 1 projects onto the semicircle 2 sqrt(1 - x^2) / pi
    x = np.array([0.0, 0.3, 0.7])
    out = quasi1d.abel_forward(lambda s: np.full_like(np.asarray(s, float), 1 / np.pi), x, 1.0)
    np.testing.assert_allclose(out, 2 * np.sqrt(1 - x * x) / np.pi, rtol=1e-8)


def test_abel_pair_for_parabolic_disc():
    # rho(s) = 2 (1 - s^2) / pi on the unit disc has marginal 8 (1 - x^2)^{3/2} / (3 pi)
    radial = lambda s: 2 * (1 - s * s) / np.pi
    x = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(quasi1d.abel_forward(radial, x, 1.0), 8 * (1 - x * x) ** 1.5 / (3 * np.pi), rtol=1e-8)
    deriv = lambda x: -8 * x * np.sqrt(np.clip(1 - x * x, 0, None)) / np.pi
    s = np.array([0.2, 0.5, 0.8])
    np.testing.assert_allclose(quasi1d.abel_inverse(deriv, s, 1.0), radial(s), rtol=1e-7)


def test_abelized_differs_from_cyclic_law():
    s = np.array([0.1, 1.0])
    abel = quasi1d.abelized_density(s, 1.0)
    hl = quasi1d.hl_density(s, 1.0)
    assert np.all(np.abs(abel - hl) > 1e-3)
    # the Abelized curve extends past the cyclic outer radius
    assert quasi1d.abelized_density(1.6, 1.0) > 0
