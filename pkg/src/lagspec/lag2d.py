"""Radial laws of the true (nilpotent) lagged correlation matrix.

``C = X D X^dagger / (T - tau)`` with ``D[t, t'] = delta(t + tau, t')``.  In
the limit ``N, T, tau -> inf`` with ``r = N/T`` and ``beta = tau/T`` fixed the
spectrum is rotationally symmetric and described by ``f(s)``, the fraction of
eigenvalues with ``|lambda| <= s`` (zero modes included), the radial density
``rho = f'(s) / (2 pi s)`` and the correlator ``O = |v|^2 / pi``.

All ``f`` here are normalised per ``N x N`` eigenvalue.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import ContinuationError, ConvergenceError, SingularPointError
from .qgreen import quaternionic_moment_gf
from .quasi1d import RadialCurve, spectral_radii
from .roots import BranchSelector, PolyReal, fd_jacobian, newton_system, select_branch, solve_cubic


@dataclass(frozen=True)
class LagLaw:
    """Lag parameters ``r`` and ``beta = p/q``.

    ``beta`` is stored as a :class:`fractions.Fraction`; floats are converted
    with a bounded denominator.
    """

    r: float
    beta: Fraction

    def __init__(self, r: float, beta, max_denominator: int = 10**6):
        if not r > 0:
            raise ValueError(f"r must be positive, got {r}")
        b = beta if isinstance(beta, Fraction) else Fraction(beta).limit_denominator(max_denominator)
        if not 0 <= b < 1:
            raise ValueError(f"beta must lie in [0, 1), got {beta}")
        object.__setattr__(self, "r", float(r))
        object.__setattr__(self, "beta", b)

    @property
    def p(self) -> int:
        return self.beta.numerator

    @property
    def q(self) -> int:
        return self.beta.denominator

    @property
    def alpha(self) -> float:
        return 1.0 / (1.0 - float(self.beta))

    @property
    def M_ceil(self) -> float:
        """``ceil(1/beta)``; infinite at ``beta = 0``."""
        if self.beta == 0:
            return math.inf
        return math.ceil(1 / self.beta)

    @property
    def zero_mode_weight(self) -> float:
        """Fraction of exact zero eigenvalues, ``max(1 - 1/(alpha r), 0)``.

        ``D`` has rank ``T - tau``, so ``C`` has at most ``T - tau`` nonzero
        eigenvalues out of ``N``.
        """
        return max(1.0 - 1.0 / (self.alpha * self.r), 0.0)


# ---------------------------------------------------------------------------
# unit lag
# ---------------------------------------------------------------------------

def unit_lag_polynomial(s: float, r: float) -> PolyReal:
    """Cubic in ``f`` for the single-step lag at radius ``s``."""
    s2 = s * s
    return PolyReal([-s2, r * ((1 - r) ** 2 - s2), 4 * r * r * (1 - r), 4 * r**3])


def _f_inner(r):
    return max(1.0 - 1.0 / r, 0.0)


def unit_lag_cdf(s, r: float):
    """Fraction ``f(s)`` of eigenvalues of the single-step lag matrix inside radius ``s``.

    ``f = 0`` (or ``1 - 1/r`` for ``r > 1``, the zero modes) at the inner
    radius and 1 at ``sqrt(r (r + 1))``.
    """
    ring = spectral_radii(r)
    lo = _f_inner(r)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s_arr)
    prev = None
    for k in np.argsort(s_arr):
        sv = s_arr[k]
        if sv <= ring.s_int:
            val = lo
        elif sv >= ring.s_ext:
            val = 1.0
        else:
            roots = solve_cubic(unit_lag_polynomial(sv, r))
            val = select_branch(roots, BranchSelector.range(lo, 1.0, previous=prev)).real
        prev = out[k] = val
    return out[0] if np.ndim(s) == 0 else out


def unit_lag_density(s, r: float):
    """Radial density ``f'(s) / (2 pi s)`` by implicit differentiation (zero modes excluded)."""
    ring = spectral_radii(r)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros_like(s_arr)
    inside = (s_arr > ring.s_int) & (s_arr < ring.s_ext)
    if np.any(inside):
        si = s_arr[inside]
        f = unit_lag_cdf(si, r)
        Pf = 12 * r**3 * f * f + 8 * r * r * (1 - r) * f + r * ((1 - r) ** 2 - si * si)
        if np.any(np.abs(Pf) < 1e-14):
            raise SingularPointError("cubic derivative vanishes inside the ring")
        # f' = 2 s (r f + 1) / Pf
        out[inside] = (r * f + 1.0) / (np.pi * Pf)
    return out[0] if np.ndim(s) == 0 else out


def unit_lag_overlap(s, r: float):
    """Correlator ``1/(pi (2 f r^2 + r - r^2)) - f^2 / (pi s^2)``, zero outside the ring."""
    ring = spectral_radii(r)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros_like(s_arr)
    inside = (s_arr > ring.s_int) & (s_arr < ring.s_ext)
    if np.any(inside):
        si = s_arr[inside]
        f = unit_lag_cdf(si, r)
        out[inside] = 1.0 / (np.pi * (2 * f * r * r + r - r * r)) - f * f / (np.pi * si * si)
    return out[0] if np.ndim(s) == 0 else out


def unit_lag_curve(grid, r: float) -> RadialCurve:
    ring = spectral_radii(r)
    grid = np.asarray(grid, dtype=float)
    return RadialCurve(
        grid,
        unit_lag_cdf(grid, r),
        unit_lag_density(grid, r),
        unit_lag_overlap(grid, r),
        params={"method": "unit", "r": r, "zero_mode_weight": ring.zero_mode_weight},
        convention="N",
        outside=(grid < ring.s_int) | (grid > ring.s_ext),
    )


# ---------------------------------------------------------------------------
# lags of at least half the window: product of two independent factors
# ---------------------------------------------------------------------------

def product_laws(s, r_eff: float):
    """``(f, rho, O)`` for ``A B^dagger / L`` with independent ``N x L`` Gaussian factors.

    ``r_eff = N / L``.  ``f`` solves ``r_eff^2 f^2 + r_eff (1 - r_eff) f = s^2``
    on ``s <= sqrt(r_eff)``.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    q = r_eff
    s_ext = np.sqrt(q)
    inside = s_arr < s_ext
    root = np.sqrt((1 - q) ** 2 + 4 * s_arr**2)
    f = np.where(inside, (-(1 - q) + root) / (2 * q), 1.0)
    rho = np.where(inside, 1.0 / (np.pi * q * root), 0.0)
    # u = |v|^2 = (1 - f) / (q (1 - q (1 - f)));  O = u / pi
    with np.errstate(divide="ignore", invalid="ignore"):
        O = np.where(inside, (1 - f) / (np.pi * q * (1 - q * (1 - f))), 0.0)
    if np.ndim(s) == 0:
        return float(f[0]), float(rho[0]), float(O[0])
    return f, rho, O


def half_lag_laws(s, r: float):
    """Closed forms for ``tau = T/2``: ``(f, rho, O)`` with ``s_ext = sqrt(2 r)``.

    Beyond ``s_ext`` the density and correlator are zero and ``f = 1``.
    """
    return product_laws(s, 2.0 * r)


def half_lag_overlap_direct(s, r: float):
    """``(2r - 1 - 2 s^2 + sqrt((2r - 1)^2 + 4 s^2)) / (8 pi r^2 s^2)`` inside the disc."""
    s = np.asarray(s, dtype=float)
    val = (2 * r - 1 - 2 * s * s + np.sqrt((2 * r - 1) ** 2 + 4 * s * s)) / (8 * np.pi * r * r * s * s)
    return np.where(s < np.sqrt(2 * r), val, 0.0)


# ---------------------------------------------------------------------------
# spectral radius for arbitrary lag depth
# ---------------------------------------------------------------------------

def radius_lhs(x: float, law: LagLaw) -> float:
    """``sum_{k=1}^{M-1} x^k (1 - k beta)`` with ``x = (alpha r / s)^2``."""
    m = law.M_ceil
    b = float(law.beta)
    k = np.arange(1, int(m))
    coef = 1.0 - k * b
    # descending powers x^{M-1} .. x^1 followed by the zero constant term
    return float(np.polyval(np.append(coef[::-1], 0.0), x))


def deep_lag_radius(law: LagLaw) -> float:
    """Outer spectral radius for lag fraction ``beta``.

    Solves ``sum_{k=1}^{M-1} (alpha r / s)^{2k} (1 - k beta) = r`` with
    ``M = ceil(1/beta)``.  For ``beta >= 1/2`` this is ``sqrt(alpha r)``;
    at ``beta = 0`` the single-step value ``sqrt(r (r + 1))``.
    """
    r = law.r
    if law.beta == 0:
        return math.sqrt(r * (r + 1.0))
    if law.M_ceil == 2:
        return math.sqrt(law.alpha * r)
    # the sum is increasing in x > 0 since every 1 - k beta > 0 for k < M
    hi = 1.0
    while radius_lhs(hi, law) < r:
        hi *= 2.0
    x = brentq(lambda x: radius_lhs(x, law) - r, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return law.alpha * r / math.sqrt(x)


# ---------------------------------------------------------------------------
# deep lag: quaternionic equation reduced to (f, u)
# ---------------------------------------------------------------------------

def kronecker_block(law: LagLaw) -> np.ndarray:
    """``alpha * N_q^p``: the ``q x q`` shift by ``p`` that ``D`` reduces to.

    For ``T = q m`` and ``tau = p m`` one has ``D = N_q^p (x) 1_m`` exactly, so
    block traces over ``T`` collapse to block traces over ``q``.
    """
    if law.q > 64:
        warnings.warn(f"beta denominator {law.q} is large; cost grows with q^3", RuntimeWarning, stacklevel=2)
    return law.alpha * np.eye(law.q, k=law.p)


def deep_lag_residual(x, s: float, law: LagLaw, A=None) -> np.ndarray:
    """Real and reduced off-diagonal parts of ``[Q - M(rG)] G - 1`` at ``w = 0``.

    ``G = [[f/s, i v], [i v, f/s]]`` with ``v = sqrt(u)``.  The off-diagonal
    equation is divided by ``i v`` to remove the trivial ``v = 0`` branch;
    it depends on ``u`` only, so negative ``u`` is admissible during Newton.
    """
    if A is None:
        A = kronecker_block(law)
    f, u = float(x[0]), float(x[1])
    v = np.sqrt(complex(u))
    if abs(v) < 1e-150:
        v = 1e-150
    G = np.array([[f / s, 1j * v], [1j * v, f / s]])
    M = quaternionic_moment_gf(A, law.r * G).m
    E = (s * np.eye(2) - M) @ G - np.eye(2)
    return np.array([E[0, 0].real, (E[0, 1] / (1j * v)).real])


@dataclass
class DeepLagPoint:
    s: float
    f: float
    u: float
    dfds: float

    @property
    def rho(self) -> float:
        return self.dfds / (2 * np.pi * self.s)

    @property
    def O(self) -> float:
        return self.u / np.pi


def _derivative(law, A, s, f, u):
    J = fd_jacobian(lambda y: deep_lag_residual(y[:2], y[2], law, A), np.array([f, u, s]))
    try:
        d = np.linalg.solve(J[:, :2], -J[:, 2])
    except np.linalg.LinAlgError as exc:
        raise SingularPointError(f"singular Jacobian at s = {s}") from exc
    return d


def _newton(law, A, s, seed):
    return newton_system(lambda y: deep_lag_residual(y, s, law, A), seed, tol=1e-12, max_iter=60)


def deep_lag_path(law: LagLaw, targets, min_step: float = 1e-9, max_step: float | None = None):
    """Continue the ``(f, u)`` solution from the outer edge inward through ``targets``.

    Returns a dict ``s -> DeepLagPoint`` for targets inside the spectrum and
    the located inner radius (0 when the spectrum reaches the origin).
    Steps are halved on Newton failure and the predictor uses the tangent
    from implicit differentiation.
    """
    A = kronecker_block(law)
    s_ext = deep_lag_radius(law)
    targets = np.sort(np.unique(np.asarray(targets, dtype=float)))[::-1]
    targets = targets[(targets > 0) & (targets < s_ext)]
    if max_step is None:
        max_step = 0.02 * s_ext
    results = {}
    # first point just inside the edge; u grows linearly from zero there
    s = s_ext * (1 - 1e-6)
    x = None
    for seed_u in (1e-6, 1e-4, 1e-2):
        try:
            x = _newton(law, A, s, [1.0, seed_u])
            if x[1] > 0:
                break
        except ConvergenceError:
            continue
    if x is None or x[1] <= 0:
        raise ContinuationError("could not start the continuation at the outer edge")
    d = _derivative(law, A, s, *x)
    s_int = 0.0
    idx = 0
    h = min(max_step, 1e-3 * s_ext)
    while idx < targets.size:
        tgt = targets[idx]
        s_new = max(s - h, tgt)
        pred = x + d * (s_new - s)
        try:
            xn = _newton(law, A, s_new, pred)
        except ConvergenceError as exc:
            h *= 0.5
            if h < min_step * s_ext:
                err = ContinuationError(f"deep-lag continuation stalled at s = {s:.6g}", x=x)
                err.last_ok = s
                raise err from exc
            continue
        if xn[1] <= 0:
            # u crossed zero: inner edge between s_new and s
            s_int = _inner_edge(law, A, s_new, s, x, d)
            for t in targets[idx:]:
                results[t] = None
            break
        s, x = s_new, xn
        d = _derivative(law, A, s, *x)
        if s == tgt:
            results[tgt] = DeepLagPoint(s, x[0], x[1], d[0])
            idx += 1
        h = min(max_step, 2 * h)
    return results, s_ext, s_int


def _inner_edge(law, A, lo, hi, x_hi, d_hi):
    """Bisection for the radius where ``u`` reaches zero."""
    x_ref, s_ref = x_hi, hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        try:
            xm = _newton(law, A, mid, x_ref + d_hi * (mid - s_ref))
        except ConvergenceError:
            lo = mid
            continue
        if xm[1] > 0:
            hi, x_ref, s_ref = mid, xm, mid
        else:
            lo = mid
        if hi - lo < 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


def deep_lag_curve(law: LagLaw, grid) -> RadialCurve:
    """Sample ``f``, ``rho`` and ``O`` of the lag-``beta`` law on ``grid``.

    Points below the numerically located inner radius carry ``f`` equal to
    the zero-mode weight and vanishing density and correlator.
    """
    grid = np.asarray(grid, dtype=float)
    res, s_ext, s_int = deep_lag_path(law, grid)
    f0 = law.zero_mode_weight
    F = np.empty_like(grid)
    rho = np.zeros_like(grid)
    O = np.zeros_like(grid)
    for k, s in enumerate(grid):
        if s >= s_ext:
            F[k] = 1.0
        elif s <= 0 or res.get(s) is None:
            F[k] = f0
        else:
            pt = res[s]
            F[k], rho[k], O[k] = pt.f, pt.rho, pt.O
    return RadialCurve(
        grid,
        F,
        rho,
        O,
        params={
            "method": "deep",
            "r": law.r,
            "beta": str(law.beta),
            "s_ext": s_ext,
            "s_int": s_int,
            "zero_mode_weight": f0,
        },
        convention="N",
        outside=(grid >= s_ext) | (grid <= s_int),
    )


def deep_lag_solve(law: LagLaw, s: float):
    """``(f, u)`` at radius ``s``; outside the spectrum ``(1, 0)``."""
    res, s_ext, s_int = deep_lag_path(law, [s])
    if s >= s_ext:
        return 1.0, 0.0
    pt = res.get(float(s))
    if pt is None:
        return law.zero_mode_weight, 0.0
    return pt.f, pt.u
