"""Free-probability transforms for Wishart-type ensembles and free projectors.

Conventions
-----------
``G(z) = tr (z - H)^{-1}``, ``M(z) = z G(z) - 1``, ``B`` is the functional
inverse of ``G`` with ``B(z) = R(z) + 1/z`` and ``N`` is the functional
inverse of ``M``.  Square roots are written as products of principal roots
``sqrt(z - a) * sqrt(z - b)``, which places the cut exactly on ``[a, b]`` and
gives ``G ~ 1/z`` at infinity.  On the cut itself the formulas return the
limit from the upper half plane.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import PoleError, QuadratureError

KINDS = ("G", "R", "S", "N", "B", "M")


@dataclass(frozen=True)
class TransformEval:
    """A transform value tagged with its kind and argument."""

    kind: str
    argument: complex
    value: complex


@dataclass
class AtomicMeasure:
    """Probability measure made of point masses and an algebraic continuous part.

    The continuous density on ``support = (lo, hi)`` is
    ``smooth(x) * (x - lo)**a * (hi - x)**b`` with ``(a, b) = exponents``.
    Keeping the endpoint behaviour explicit lets the mass be integrated with
    algebraic-weight Gauss rules, which are exact to machine precision for
    square-root edges and inverse square-root divergences.
    """

    atoms: list = field(default_factory=list)
    smooth: Callable | None = None
    support: tuple = (0.0, 0.0)
    exponents: tuple = (0.0, 0.0)

    def density(self, x):
        """Continuous part of the density (atoms excluded)."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        a, b = self.exponents
        out = np.zeros_like(x)
        if self.smooth is None:
            return out
        inside = (x > lo) & (x < hi)
        xi = x[inside]
        out[inside] = self.smooth(xi) * (xi - lo) ** a * (hi - xi) ** b
        return out

    def continuous_mass(self, upto: float | None = None) -> float:
        if self.smooth is None:
            return 0.0
        lo, hi = self.support
        a, b = self.exponents
        f = lambda x: float(self.smooth(np.array([x]))[0])
        if upto is None or upto >= hi:
            val, err = integrate.quad(f, lo, hi, weight="alg", wvar=(a, b), epsabs=1e-14, epsrel=1e-13, limit=200)
        elif upto <= lo:
            return 0.0
        else:
            g = lambda x: f(x) * (hi - x) ** b
            val, err = integrate.quad(g, lo, upto, weight="alg", wvar=(a, 0.0), epsabs=1e-14, epsrel=1e-12, limit=200)
        if not np.isfinite(val) or err > 1e-9:
            raise QuadratureError(f"mass quadrature error estimate {err:.2g}", achieved=err)
        return val

    def total_mass(self) -> float:
        return sum(w for _, w in self.atoms) + self.continuous_mass()

    def cdf(self, x) -> np.ndarray:
        """Cumulative distribution ``P(X <= x)`` including atoms."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for k, xv in enumerate(x):
            atom = sum(w for loc, w in self.atoms if loc <= xv)
            out[k] = atom + self.continuous_mass(xv)
        return out


def _check_r(r):
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")


def _sqrt_cut(z, a, b):
    """Branch of sqrt((z-a)(z-b)) with its cut on [a, b] and value ~ z at infinity."""
    return np.sqrt(z - a + 0j) * np.sqrt(z - b + 0j)


def _pole(z, at, what):
    if np.any(np.isclose(z, at, rtol=0, atol=1e-300)):
        raise PoleError(f"{what} has a pole at z = {at}")


def wishart_transforms(kind: str, z, r: float):
    """Transforms of the Wishart matrix ``x x^dagger / T`` with ``r = N/T``.

    Parameters
    ----------
    kind : {'G', 'R', 'S', 'N', 'B', 'M'}
    z : complex or array_like
    r : float
        Rectangularity, positive.

    Returns
    -------
    complex or ndarray
    """
    _check_r(r)
    z = np.asarray(z, dtype=complex)
    if kind == "R":
        _pole(z, 1.0 / r, "R_W")
        out = 1.0 / (1.0 - r * z)
    elif kind == "S":
        _pole(z, -1.0 / r, "S_W")
        out = 1.0 / (1.0 + r * z)
    elif kind == "N":
        _pole(z, 0.0, "N_W")
        out = (1.0 + z) * (1.0 + r * z) / z
    elif kind in ("G", "M", "B"):
        if kind == "B":
            _pole(z, 0.0, "B_W")
            out = 1.0 / (1.0 - r * z) + 1.0 / z
        else:
            _pole(z, 0.0, "G_W")
            lp, lm = (1 + np.sqrt(r)) ** 2, (1 - np.sqrt(r)) ** 2
            g = ((z + r - 1.0) - _sqrt_cut(z, lm, lp)) / (2.0 * r * z)
            out = g if kind == "G" else z * g - 1.0
    else:
        raise ValueError(f"unknown transform kind {kind!r}")
    return out[()] if out.ndim == 0 else out


def antiwishart_transforms(kind: str, z, r: float):
    """Transforms of the anti-Wishart matrix ``x^dagger x / N`` (size ``T``).

    Satisfies the duality ``M_aW(z) = r * M_W(r z)``.
    """
    _check_r(r)
    z = np.asarray(z, dtype=complex)
    if kind == "R":
        _pole(z, r, "R_aW")
        out = r / (r - z)
    elif kind == "S":
        _pole(z, -r, "S_aW")
        out = r / (r + z)
    elif kind == "N":
        _pole(z, 0.0, "N_aW")
        out = (1.0 + z) * (r + z) / (r * z)
    elif kind in ("G", "M", "B"):
        if kind == "B":
            _pole(z, 0.0, "B_aW")
            _pole(z, r, "B_aW")
            out = r / (r - z) + 1.0 / z
        else:
            _pole(z, 0.0, "G_aW")
            a, b = (1 - np.sqrt(r)) ** 2 / r, (1 + np.sqrt(r)) ** 2 / r
            # z G^2 + (r - 1 - z r) G + r = 0
            g = (-(r - 1.0 - z * r) - r * _sqrt_cut(z, a, b)) / (2.0 * z)
            out = g if kind == "G" else z * g - 1.0
    else:
        raise ValueError(f"unknown transform kind {kind!r}")
    return out[()] if out.ndim == 0 else out


def transform(family: str, kind: str, z, r: float) -> TransformEval:
    """Scalar evaluation wrapped in a :class:`TransformEval`."""
    fn = {"wishart": wishart_transforms, "antiwishart": antiwishart_transforms}[family]
    return TransformEval(kind, complex(z), complex(fn(kind, z, r)))


# ---------------------------------------------------------------------------
# sums and products of free projectors
# ---------------------------------------------------------------------------

def projector_r_transform(z):
    """R-transform of the two-point law with atoms 1/2 at -1/2 and +1/2."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    out = np.where(small, z / 4.0, (np.sqrt(1.0 + zs * zs) - 1.0) / (2.0 * zs))
    return out[()] if out.ndim == 0 else out


def free_add_projectors(z):
    """Green's function of the free sum of two symmetric two-point laws.

    The sum of two free copies of ``(delta(x + 1/2) + delta(x - 1/2)) / 2``
    follows the arcsine law on ``[-1, 1]`` with ``G(z) = 1/sqrt(z^2 - 1)``.
    """
    z = np.asarray(z, dtype=complex)
    out = 1.0 / _sqrt_cut(z, -1.0, 1.0)
    return out[()] if out.ndim == 0 else out


def arcsine_density(x):
    """Arcsine density ``1 / (pi sqrt(1 - x^2))`` on ``(-1, 1)``, unit mass."""
    return arcsine_measure().density(x)


def arcsine_measure() -> AtomicMeasure:
    return AtomicMeasure(
        atoms=[],
        smooth=lambda x: np.full_like(np.asarray(x, float), 1.0 / np.pi),
        support=(-1.0, 1.0),
        exponents=(-0.5, -0.5),
    )


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def free_multiply_projectors(alpha: float, z):
    """Moment generating function of ``P1 P2`` for free projectors of rank fraction ``alpha``.

    Solves ``(z - 1) M^2 + (z - 2 alpha) M - alpha^2 = 0`` on the branch with
    ``M ~ alpha^2 / z``.  The rationalised form used here stays finite at the
    atom ``z = 1``.
    """
    _check_alpha(alpha)
    z = np.asarray(z, dtype=complex)
    c = 4.0 * alpha * (1.0 - alpha)
    den = z - 2.0 * alpha + np.sqrt(z) * np.sqrt(z - c)
    if np.any(den == 0):
        raise PoleError("moment generating function is singular at this z")
    out = 2.0 * alpha**2 / den
    return out[()] if out.ndim == 0 else out


def free_jacobi_measure(alpha: float) -> AtomicMeasure:
    """Spectral measure of the product of two free projectors.

    Atoms ``1 - alpha`` at 0 and ``max(2 alpha - 1, 0)`` at 1 plus the
    continuous part ``sqrt(c - x) / (2 pi sqrt(x) (1 - x))`` on ``[0, c]``,
    ``c = 4 alpha (1 - alpha)``.
    """
    _check_alpha(alpha)
    c = 4.0 * alpha * (1.0 - alpha)
    atoms = [(0.0, 1.0 - alpha)]
    if alpha > 0.5:
        atoms.append((1.0, 2.0 * alpha - 1.0))
    if np.isclose(c, 1.0, rtol=0, atol=1e-15):
        # c = 1: sqrt(1 - x)/(1 - x) collapses to (1 - x)^(-1/2)
        return AtomicMeasure(atoms, lambda x: np.full_like(np.asarray(x, float), 0.5 / np.pi), (0.0, 1.0), (-0.5, -0.5))
    smooth = lambda x: 1.0 / (2.0 * np.pi * (1.0 - np.asarray(x, float)))
    return AtomicMeasure(atoms, smooth, (0.0, c), (-0.5, 0.5))


def whitened_lag_moment_gf(z, r: float):
    """Moment generating function of the whitened lag square, ``alpha = r``."""
    return free_multiply_projectors(r, z)


def whitened_lag_measure(r: float) -> AtomicMeasure:
    """Free-Jacobi measure of the whitened lag square (``T x T`` normalisation)."""
    return free_jacobi_measure(r)


def boundary_density(green: Callable, x, eps: float = 1e-8):
    """``-Im G(x + i0) / pi`` from two offsets and a Richardson step.

    The error of ``-Im G(x + i eps)/pi`` is linear in ``eps`` away from
    singular points, so ``2 rho(eps/2) - rho(eps)`` removes it.
    """
    x = np.asarray(x, dtype=float)
    rho1 = -np.imag(green(x + 1j * eps)) / np.pi
    rho2 = -np.imag(green(x + 0.5j * eps)) / np.pi
    return 2.0 * rho2 - rho1


def duality_residual(z, r: float):
    """``M_aW(z) - r M_W(r z)``, which vanishes identically.

    This orientation is the one compatible with the N-transforms of both
    ensembles; the mirrored form ``M_W(z) - r M_aW(r z)`` does not vanish.
    """
    z = np.asarray(z, dtype=complex)
    return antiwishart_transforms("M", z, r) - r * wishart_transforms("M", r * z, r)
