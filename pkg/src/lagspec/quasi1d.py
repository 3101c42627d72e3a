"""Quasi-one-dimensional reductions of the lagged correlation spectrum.

Four routes are provided: the symmetrised matrix ``(C + C^dagger)/2`` with
its quartic for the moment generating function, whitening (see
:mod:`lagspec.frv`), Abel transforms linking a radial law to its marginal,
and the exact radial law of the cyclic lag problem from the Haagerup-Larsen
theorem.

Normalisation of the radial law
-------------------------------
The cubic for ``F`` describes the ``T x T`` product of a Haar unitary with
``x^dagger x / T``.  ``F`` therefore counts ``T`` eigenvalues and includes the
``T - N`` zero modes when ``r < 1``: ``F(s_int) = max(1 - r, 0)``.  The
density :func:`hl_density` is normalised per nonzero ``N x N`` eigenvalue and
integrates to ``min(1, 1/r)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import tanhsinh
from scipy.optimize import brentq

from .errors import BranchLostError, QuadratureError, SingularPointError
from .roots import BranchSelector, PolyReal, quartic_roots, select_branch, solve_cubic

ABEL_RTOL = 1e-9


@dataclass(frozen=True)
class SupportRing:
    """Annulus ``s_int <= |z| <= s_ext`` carrying the nonzero eigenvalues."""

    s_int: float
    s_ext: float
    zero_mode_weight: float

    def __post_init__(self):
        if not (0.0 <= self.s_int < self.s_ext):
            raise ValueError(f"invalid ring ({self.s_int}, {self.s_ext})")
        if not 0.0 <= self.zero_mode_weight < 1.0:
            raise ValueError("zero_mode_weight must lie in [0, 1)")


@dataclass
class RadialCurve:
    """Radial functions sampled on an ascending grid.

    ``convention`` names what ``F`` counts: ``'T'`` for the cyclic product
    (zero modes of the ``T x T`` problem included) and ``'N'`` for the
    ``N x N`` lagged matrix (its own zero modes included when ``r > 1``).
    ``outside`` flags grid points beyond the ring, where values are clamped.
    """

    grid: np.ndarray
    F: np.ndarray
    rho: np.ndarray
    O: np.ndarray
    params: dict = field(default_factory=dict)
    convention: str = "N"
    outside: np.ndarray | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        for name in ("F", "rho", "O"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.grid.ndim != 1 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        if self.outside is None:
            self.outside = np.zeros(self.grid.shape, bool)


def spectral_radii(r: float) -> SupportRing:
    """Inner and outer radius of the cyclic single-lag spectrum.

    ``s_ext = sqrt(r (r + 1))`` and ``s_int = (r - 1)^{3/2} / sqrt(r)`` for
    ``r > 1`` (zero otherwise).
    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    s_ext = np.sqrt(r * (r + 1.0))
    s_int = (r - 1.0) ** 1.5 / np.sqrt(r) if r > 1 else 0.0
    return SupportRing(float(s_int), float(s_ext), max(1.0 - 1.0 / r, 0.0))


# ---------------------------------------------------------------------------
# Haagerup-Larsen radial law
# ---------------------------------------------------------------------------

def hl_polynomial(s: float, r: float) -> PolyReal:
    """Cubic in ``F`` whose real branch is the radial CDF at radius ``s``."""
    a = r - 1.0
    s2 = s * s
    return PolyReal([a**3 - r * s2, 5 * a * a - s2, 8 * a, 4.0])


def _hl_scalar(s, r, ring, prev=None):
    lo = max(1.0 - r, 0.0)
    if s <= ring.s_int:
        return lo
    if s >= ring.s_ext:
        return 1.0
    roots = solve_cubic(hl_polynomial(s, r))
    sel = BranchSelector.range(lo, 1.0, previous=prev)
    return select_branch(roots, sel).real


def hl_radial_cdf(s, r: float):
    """Radial CDF ``F(s)`` of the cyclic lag problem (``T``-normalised).

    Values are clamped to ``max(1 - r, 0)`` below ``s_int`` and to 1 above
    ``s_ext``; use :func:`hl_curve` to get the clamping flags.
    """
    ring = spectral_radii(r)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s_arr)
    order = np.argsort(s_arr)
    prev = None
    for k in order:
        prev = out[k] = _hl_scalar(s_arr[k], r, ring, prev)
    return out[0] if np.ndim(s) == 0 else out


def _hl_dF(F, s, r):
    a = r - 1.0
    PF = 12 * F * F + 16 * a * F + 5 * a * a - s * s
    scale = 12 + 16 * abs(a) + 5 * a * a + s * s
    if np.any(np.abs(PF) <= 1e-13 * scale):
        raise SingularPointError(f"cubic derivative vanishes near s = {s}")
    return PF


def hl_density(s, r: float):
    """Radial density ``dF/ds / (2 pi s r)`` via implicit differentiation.

    Zero outside the ring.  ``2 pi int s rho ds = min(1, 1/r)``.
    """
    ring = spectral_radii(r)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros_like(s_arr)
    inside = (s_arr > ring.s_int) & (s_arr < ring.s_ext)
    if np.any(inside):
        si = s_arr[inside]
        F = hl_radial_cdf(si, r)
        PF = _hl_dF(F, si, r)
        # dF/ds = 2 s (F + r) / PF
        out[inside] = (F + r) / (np.pi * r * PF)
    return out[0] if np.ndim(s) == 0 else out


def hl_overlap(s, r: float):
    """Eigenvector correlator ``F (1 - F) / (pi s^2)`` of the cyclic product."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    F = hl_radial_cdf(s_arr, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = F * (1.0 - F) / (np.pi * s_arr**2)
    out = np.where(F >= 1.0, 0.0, out)
    return out[0] if np.ndim(s) == 0 else out


def hl_curve(grid, r: float) -> RadialCurve:
    """Sample ``F``, ``rho`` and ``O`` of the cyclic law on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    ring = spectral_radii(r)
    outside = (grid < ring.s_int) | (grid > ring.s_ext)
    return RadialCurve(
        grid,
        hl_radial_cdf(grid, r),
        hl_density(grid, r),
        hl_overlap(grid, r),
        params={"method": "hl", "r": r},
        convention="T",
        outside=outside,
    )


# ---------------------------------------------------------------------------
# symmetrised lag matrix
# ---------------------------------------------------------------------------

def sym_quartic_coeffs(z, r: float) -> np.ndarray:
    """Descending coefficients of the quartic for ``M(z)``, shape ``(..., 5)``."""
    z = np.asarray(z, dtype=complex)
    z2 = z * z
    one = np.ones_like(z)
    return np.stack(
        [
            r**3 * one,
            2 * r * r * (1 + r) * one,
            r * (1 + 4 * r + r * r - z2),
            2 * (r * r + r - z2),
            r * one,
        ],
        axis=-1,
    )


def sym_moment_gf(lam, r: float, y_start: float | None = None, ratio: float = 0.6, y_stop: float = 1e-13):
    """Physical root ``M(lam + i0)`` of the symmetrisation quartic.

    The root is followed along ``z = lam + i y`` from large ``y``, where it
    behaves as ``r / (2 z^2)``, down to the real axis.  Each step keeps the
    root nearest to the previous one; the physical branch is analytic in the
    upper half plane, so it never collides with another root on the way.
    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    lam_in = np.asarray(lam, dtype=float)
    lam = lam_in.ravel()
    if y_start is None:
        y_start = 10.0 + 2.0 * float(np.max(np.abs(lam), initial=0.0))
    n_steps = int(np.ceil(np.log(y_stop / y_start) / np.log(ratio)))
    ys = np.append(y_start * ratio ** np.arange(n_steps + 1), 0.0)
    z = lam + 1j * ys[0]
    M = r / (2.0 * z * z)
    for y in ys:
        z = lam + 1j * y
        roots = quartic_roots(sym_quartic_coeffs(z, r))
        idx = np.argmin(np.abs(roots - M[:, None]), axis=1)
        Mn = roots[np.arange(lam.size), idx]
        jump = np.abs(Mn - M)
        if np.any(~np.isfinite(Mn)):
            raise BranchLostError("non-finite root during continuation", roots[~np.isfinite(Mn)])
        # a jump much larger than the step in z signals a lost branch
        if y > 0 and np.any(jump > 10.0 * (1.0 + np.abs(M))):
            bad = int(np.argmax(jump))
            raise BranchLostError(f"branch jump at lambda = {lam[bad]}", roots[bad])
        M = Mn
    return M.reshape(lam_in.shape)


_SYM_ORIGIN = 1e-7


def _sym_G(lam, r):
    M = sym_moment_gf(lam, r)
    # G = (M + 1)/z is 0/0 at z = 0; step off by a hair there
    lam_eff = np.where(np.abs(lam) < _SYM_ORIGIN, _SYM_ORIGIN, lam)
    if np.any(np.abs(lam) < _SYM_ORIGIN):
        M = np.where(np.abs(lam) < _SYM_ORIGIN, sym_moment_gf(lam_eff, r), M)
    return M, (M + 1.0) / lam_eff, lam_eff


def sym_density(lam, r: float):
    """Eigenvalue density of ``(C + C^dagger)/2`` for the single-step lag.

    Parameters
    ----------
    lam : float or array_like
    r : float

    Returns
    -------
    float or ndarray
        ``-Im G(lam + i0) / pi``, clipped at zero against round-off
        outside the support.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    _, G, _ = _sym_G(lam_arr, r)
    out = np.maximum(-G.imag / np.pi, 0.0)
    near = np.abs(lam_arr) < _SYM_ORIGIN
    if np.any(near):
        # (M + 1)/lam loses precision at the origin, where the density may
        # diverge like |lam|^(-1/2) (r = 1); continue the local power law
        d = _SYM_ORIGIN
        _, Gd, _ = _sym_G(np.array([d, 4 * d]), r)
        rd, r4 = -Gd.imag / np.pi
        p = np.log(r4 / rd) / np.log(4.0) if rd > 0 and r4 > 0 else 0.0
        a = np.maximum(np.abs(lam_arr[near]), 1e-300)
        out[near] = rd * (a / d) ** p
    return out[0] if np.ndim(lam) == 0 else out


def sym_density_derivative(lam, r: float):
    """``d rho_sym / d lam`` by implicit differentiation of the quartic."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    M, G, z = _sym_G(lam_arr, r)
    z2 = z * z
    PM = (
        4 * r**3 * M**3
        + 6 * r * r * (1 + r) * M**2
        + 2 * r * (1 + 4 * r + r * r - z2) * M
        + 2 * (r * r + r - z2)
    )
    Pz = -2 * r * z * M**2 - 4 * z * M
    dM = -Pz / PM
    dG = (dM * z - (M + 1.0)) / z2
    out = -dG.imag / np.pi
    out = np.where(sym_density(lam_arr, r) > 0, out, 0.0)
    return out[0] if np.ndim(lam) == 0 else out


def sym_cdf(x, r: float, edge: float | None = None):
    """Cumulative distribution of the symmetrised spectrum.

    Uses evenness, ``P(X <= x) = 1/2 + sign(x) int_0^|x| rho``, with one
    vectorised tanh-sinh pass over all upper limits.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if edge is None:
        edge = sym_support_edge(r)
    b = np.minimum(np.abs(x_arr), edge)
    # x = t^2 keeps the integrand bounded when the density diverges at 0
    half = _tanhsinh(lambda t: 2.0 * t * sym_density(t * t, r), np.zeros_like(b), np.sqrt(b), "symmetric CDF")
    out = np.clip(0.5 + np.sign(x_arr) * half, 0.0, 1.0)
    return out[0] if np.ndim(x) == 0 else out


def sym_support_edge(r: float) -> float:
    """Upper edge of the symmetric support.

    Located by bisection on the sign of the density, then polished on the
    quartic discriminant when it changes sign there.  At some ``r`` the
    discriminant only touches zero at the edge, so the bisection result is
    kept as is in that case.
    """
    from .roots import _quartic_discriminant

    def disc(x):
        return _quartic_discriminant(*sym_quartic_coeffs(x, r).real)

    xs = np.linspace(1e-3, 2.0 * np.sqrt(r * (r + 1.0)) + 2.0, 801)
    pos = np.flatnonzero(sym_density(xs, r) > 1e-12)
    if pos.size == 0:
        raise BranchLostError("empty symmetric support")
    a, b = xs[pos[-1]], xs[min(pos[-1] + 1, xs.size - 1)]
    while b - a > 1e-13 * (1.0 + b):
        m = 0.5 * (a + b)
        if sym_density(m, r) > 1e-12:
            a = m
        else:
            b = m
    h = 1e-6 * (1.0 + b)
    if disc(b - h) * disc(b + h) < 0:
        return float(brentq(disc, b - h, b + h, xtol=1e-15, rtol=1e-15))
    return float(0.5 * (a + b))


# ---------------------------------------------------------------------------
# Abel transforms
# ---------------------------------------------------------------------------

def _tanhsinh(f, a, b, what, args=()):
    res = tanhsinh(f, a, b, args=args, rtol=ABEL_RTOL, atol=1e-13, maxlevel=14)
    if not np.all(res.success):
        raise QuadratureError(f"{what} quadrature did not converge", achieved=float(np.max(res.error)))
    return res.integral


def abel_forward(rho_radial, x, support: float):
    """Marginal ``rho_x(x) = 2 int_x^R s rho(s) ds / sqrt(s^2 - x^2)``.

    With ``s = sqrt(x^2 + u^2)`` the integrand becomes ``2 rho(s)`` on
    ``u in [0, sqrt(R^2 - x^2)]`` and the endpoint singularity disappears.

    Parameters
    ----------
    rho_radial : callable
        Vectorised radial density, zero beyond ``support``.
    x : float or array_like
    support : float
        Outer radius ``R``.
    """
    x_arr = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
    out = np.zeros_like(x_arr)
    inside = x_arr < support
    if np.any(inside):
        xi = x_arr[inside]
        umax = np.sqrt(support**2 - xi**2)

        def f(t, xi, umax):
            u = t * umax
            return 2.0 * rho_radial(np.sqrt(xi * xi + u * u)) * umax

        out[inside] = _abel_loop(f, xi, umax, "forward Abel")
    return out[0] if np.ndim(x) == 0 else out


def _abel_loop(f, xs, umax, what):
    # one elementwise tanh-sinh pass; t in [0, 1] is rescaled per point
    zeros = np.zeros_like(xs)
    return _tanhsinh(f, zeros, zeros + 1.0, what, args=(xs, umax))


def abel_inverse(rho_sym_deriv, s, support: float):
    """Radial density ``-(1/pi) int_s^R rho'(x) dx / sqrt(x^2 - s^2)``.

    ``rho_sym_deriv`` is the derivative of the marginal (vectorised), zero
    beyond ``support``.  Negative results are returned as they are: for a
    non-normal matrix this map need not produce a density.
    """
    s_arr = np.abs(np.atleast_1d(np.asarray(s, dtype=float)))
    out = np.zeros_like(s_arr)
    inside = s_arr < support
    if np.any(inside):
        si = s_arr[inside]
        umax = np.sqrt(support**2 - si**2)

        # u = umax (1 - w^2) absorbs the inverse square root of rho' at the edge
        def f(w, sv, um):
            u = um * (1.0 - w * w)
            x = np.sqrt(sv * sv + u * u)
            safe = np.where(x > 0, x, 1.0)
            val = np.where(x > 0, rho_sym_deriv(safe) / safe, 0.0)
            return -val * 2.0 * w * um / np.pi

        out[inside] = _abel_loop(f, si, umax, "inverse Abel")
    return out[0] if np.ndim(s) == 0 else out


def abelized_density(s, r: float):
    """Radial density that would follow if ``C`` were normal.

    Treats the symmetrised density as the marginal of the radial law and
    inverts the Abel transform.
    """
    edge = sym_support_edge(r)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return abel_inverse(lambda x: sym_density_derivative(x, r), s, edge)
