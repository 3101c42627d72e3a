"""Closed-form cubic/quartic roots, branch selection and a small Newton solver.

The vectorised kernels (:func:`cubic_roots`, :func:`quartic_roots`) accept
complex coefficient arrays so that branch continuation in the complex plane
can solve thousands of polynomials per step.  The scalar entry points
(:func:`solve_cubic`, :func:`solve_quartic`) work on :class:`PolyReal` and add
discriminant-based classification of real roots.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BranchLostError, ConvergenceError

# |Im| <= REAL_TOL * (1 + |Re|) counts as a real root
REAL_TOL = 1e-9
# relative discriminant below which closed forms hand over to the companion matrix
DISC_TOL = 1e-10
# relative size under which a leading coefficient is treated as zero
LEAD_TOL = 1e-14


class DegreeReductionWarning(UserWarning):
    """Leading coefficient vanished; roots of the reduced polynomial returned."""


@dataclass(frozen=True)
class PolyReal:
    """Real polynomial, coefficients in ascending degree."""

    coeffs: tuple

    def __init__(self, coeffs: Sequence[float]):
        c = tuple(float(x) for x in coeffs)
        if not all(math.isfinite(x) for x in c):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", c)
        if self.degree < 1:
            raise ValueError(f"polynomial must have degree >= 1, got {c}")

    @property
    def degree(self) -> int:
        return len(self.trimmed_coeffs) - 1

    @property
    def trimmed_coeffs(self) -> tuple:
        c = list(self.coeffs)
        scale = max((abs(x) for x in c), default=0.0)
        while len(c) > 1 and abs(c[-1]) <= LEAD_TOL * scale:
            c.pop()
        return tuple(c)

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, np.asarray(self.coeffs))

    def residual(self, roots) -> float:
        """max |p(root)| / max |coeff| over ``roots``."""
        roots = np.asarray(roots, dtype=complex)
        if roots.size == 0:
            return 0.0
        scale = max(abs(x) for x in self.coeffs)
        return float(np.max(np.abs(self(roots))) / scale)


# ---------------------------------------------------------------------------
# vectorised kernels, coefficients in DESCENDING order along the last axis
# ---------------------------------------------------------------------------

def _quadratic(b, c):
    """Roots of x^2 + b x + c with the cancellation-free formula."""
    d = np.sqrt(b * b - 4.0 * c + 0j)
    sgn = np.where((np.conj(b) * d).real >= 0, 1.0, -1.0)
    q = -0.5 * (b + sgn * d)
    safe = np.where(q == 0, 1.0, q)
    r1 = q
    r2 = np.where(q == 0, 0.0, c / safe)
    return r1, r2


def _polish(coeffs, roots, iters=3):
    """Newton polish on the full polynomial; keeps an update only if it helps."""
    deg = coeffs.shape[-1] - 1
    dcoeffs = coeffs[..., :-1] * np.arange(deg, 0, -1)

    def horner(c, x):
        acc = np.zeros_like(x) + c[..., :1]
        for k in range(1, c.shape[-1]):
            acc = acc * x + c[..., k : k + 1]
        return acc

    for _ in range(iters):
        p = horner(coeffs, roots)
        dp = horner(dcoeffs, roots)
        ok = dp != 0
        step = np.where(ok, p / np.where(ok, dp, 1.0), 0.0)
        cand = roots - step
        better = np.abs(horner(coeffs, cand)) < np.abs(p)
        roots = np.where(better, cand, roots)
    return roots


def cubic_roots(coeffs) -> np.ndarray:
    """Roots of ``a x^3 + b x^2 + c x + d`` for complex coefficient arrays.

    ``coeffs`` has shape ``(..., 4)`` (descending).  Returns ``(..., 3)``.
    Leading coefficients must be nonzero.
    """
    c = np.asarray(coeffs, dtype=complex)
    a = c[..., 0:1]
    b, cc, d = c[..., 1:2] / a, c[..., 2:3] / a, c[..., 3:4] / a
    shift = -b / 3.0
    p = cc - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * cc / 3.0 + d
    disc = np.sqrt(q * q / 4.0 + p**3 / 27.0 + 0j)
    u1 = -q / 2.0 + disc
    u2 = -q / 2.0 - disc
    u = np.where(np.abs(u1) >= np.abs(u2), u1, u2)
    C = u ** (1.0 / 3.0)
    omega = np.exp(2j * np.pi / 3.0)
    k = np.arange(3)
    Ck = C * omega**k
    safe = np.where(Ck == 0, 1.0, Ck)
    t = np.where(Ck == 0, 0.0, Ck - p / (3.0 * safe))
    roots = t + shift
    return _polish(c / a, roots)


def quartic_roots(coeffs) -> np.ndarray:
    """Ferrari roots of a quartic for complex coefficient arrays ``(..., 5)``."""
    c = np.asarray(coeffs, dtype=complex)
    n = c / c[..., 0:1]
    a, b, cc, d = (n[..., k : k + 1] for k in range(1, 5))
    p = b - 3.0 * a * a / 8.0
    q = cc - a * b / 2.0 + a**3 / 8.0
    r0 = d - a * cc / 4.0 + a * a * b / 16.0 - 3.0 * a**4 / 256.0
    # resolvent cubic 8 m^3 + 8 p m^2 + (2 p^2 - 8 r0) m - q^2 = 0
    ones = np.ones_like(p)
    res = np.concatenate([8.0 * ones, 8.0 * p, 2.0 * p * p - 8.0 * r0, -q * q], axis=-1)
    ms = cubic_roots(res)
    m = np.take_along_axis(ms, np.argmax(np.abs(ms), axis=-1)[..., None], axis=-1)
    scale = 1.0 + np.abs(p) + np.sqrt(np.abs(r0))
    small_m = np.abs(m) <= 1e-14 * scale
    m_safe = np.where(small_m, 1.0, m)
    s2m = np.sqrt(2.0 * m_safe)
    t = s2m * q / (4.0 * m_safe)
    y1, y2 = _quadratic(-s2m, p / 2.0 + m_safe + t)
    y3, y4 = _quadratic(s2m, p / 2.0 + m_safe - t)
    ys = np.concatenate([y1, y2, y3, y4], axis=-1)
    # q == 0 and m == 0 only when the quartic is biquadratic with a double pair
    z1, z2 = _quadratic(p, r0)
    bq = np.concatenate([np.sqrt(z1), -np.sqrt(z1), np.sqrt(z2), -np.sqrt(z2)], axis=-1)
    ys = np.where(small_m, bq, ys)
    return _polish(n, ys - a / 4.0)


def companion_roots(coeffs_desc) -> np.ndarray:
    """Companion-matrix eigenvalues, batched over leading axes."""
    c = np.asarray(coeffs_desc, dtype=complex)
    c = c / c[..., 0:1]
    deg = c.shape[-1] - 1
    comp = np.zeros(c.shape[:-1] + (deg, deg), dtype=complex)
    comp[..., 0, :] = -c[..., 1:]
    idx = np.arange(deg - 1)
    comp[..., idx + 1, idx] = 1.0
    return np.linalg.eigvals(comp)


# ---------------------------------------------------------------------------
# scalar API on PolyReal
# ---------------------------------------------------------------------------

def sort_roots(roots) -> np.ndarray:
    """Deterministic order: by real part, then imaginary part."""
    roots = np.asarray(roots, dtype=complex)
    order = np.lexsort((roots.imag, roots.real))
    return roots[order]


def _clean_real(roots, force_real=None):
    roots = np.array(roots, dtype=complex)
    dust = np.abs(roots.imag) <= REAL_TOL * (1.0 + np.abs(roots.real))
    mask = dust if force_real is None else (dust | force_real)
    roots[mask] = roots[mask].real
    return roots


def _cubic_discriminant(a, b, c, d):
    return 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d


def _quartic_discriminant(a, b, c, d, e):
    return (
        256 * a**3 * e**3 - 192 * a**2 * b * d * e**2 - 128 * a**2 * c**2 * e**2
        + 144 * a**2 * c * d**2 * e - 27 * a**2 * d**4 + 144 * a * b**2 * c * e**2
        - 6 * a * b**2 * d**2 * e - 80 * a * b * c**2 * d * e + 18 * a * b * c * d**3
        + 16 * a * c**4 * e - 4 * a * c**3 * d**2 - 27 * b**4 * e**2
        + 18 * b**3 * c * d * e - 4 * b**3 * d**3 - 4 * b**2 * c**3 * e + b**2 * c**2 * d**2
    )


def _reduced(p: PolyReal, expected: int):
    trimmed = p.trimmed_coeffs
    if len(trimmed) - 1 == expected:
        return None
    if len(p.coeffs) - 1 != expected and len(trimmed) - 1 > expected:
        raise ValueError(f"expected degree {expected}, got {len(trimmed) - 1}")
    warnings.warn(
        f"leading coefficient negligible, solving degree {len(trimmed) - 1} instead of {expected}",
        DegreeReductionWarning,
        stacklevel=3,
    )
    q = PolyReal(trimmed)
    if q.degree == 1:
        return np.array([-trimmed[0] / trimmed[1] + 0j])
    if q.degree == 2:
        r1, r2 = _quadratic(np.array([trimmed[1] / trimmed[2]]), np.array([trimmed[0] / trimmed[2]]))
        return sort_roots(_clean_real(np.concatenate([r1, r2])))
    if q.degree == 3:
        return solve_cubic(q)
    raise ValueError("unexpected degree after trimming")


def solve_cubic(p: PolyReal) -> np.ndarray:
    """All three roots of a real cubic, sorted, real roots with exact zero imaginary part.

    Cardano is used unless the discriminant is tiny relative to the
    coefficients, in which case companion-matrix eigenvalues take over.
    """
    if len(p.coeffs) != 4:
        red = _reduced(p, 3) if len(p.coeffs) > 4 else None
        if red is None:
            raise ValueError(f"solve_cubic needs a degree-3 polynomial, got {p.coeffs}")
    red = _reduced(p, 3)
    if red is not None:
        return red
    d, c, b, a = p.coeffs
    scale = max(abs(a), abs(b), abs(c), abs(d))
    disc = _cubic_discriminant(a, b, c, d) / scale**4
    desc = np.array([a, b, c, d])
    if abs(disc) < DISC_TOL:
        roots = _polish(desc[None, :] / a + 0j, companion_roots(desc)[None, :])[0]
        roots = _clean_real(roots, np.ones(3, bool))
    else:
        roots = cubic_roots(desc)
        if disc > 0:
            roots = _clean_real(roots, np.ones(3, bool))
        else:
            force = np.zeros(3, bool)
            force[np.argmin(np.abs(roots.imag))] = True
            roots = _clean_real(roots, force)
            # the conjugate pair must be exact conjugates
            pair = roots[~force]
            if pair.size == 2:
                re = pair.real.mean()
                im = abs(pair.imag).mean()
                roots[~force] = [re - 1j * im, re + 1j * im]
    return sort_roots(roots)


def solve_quartic(p: PolyReal) -> np.ndarray:
    """All four roots of a real quartic (Ferrari), sorted deterministically."""
    if len(p.coeffs) != 5:
        raise ValueError(f"solve_quartic needs a degree-4 polynomial, got {p.coeffs}")
    red = _reduced(p, 4)
    if red is not None:
        return red
    e, d, c, b, a = p.coeffs
    scale = max(abs(a), abs(b), abs(c), abs(d), abs(e))
    disc = _quartic_discriminant(a, b, c, d, e) / scale**6
    desc = np.array([a, b, c, d, e])
    if abs(disc) < DISC_TOL:
        roots = _polish(desc[None, :] / a + 0j, companion_roots(desc)[None, :])[0]
    else:
        roots = quartic_roots(desc)
    return sort_roots(_clean_real(roots))


# ---------------------------------------------------------------------------
# branch selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchSelector:
    """How to pick one root out of several.

    Use the constructors :meth:`continuity`, :meth:`range` and
    :meth:`asymptotic` rather than building instances by hand.
    """

    mode: str
    previous: complex | None = None
    max_jump: float = math.inf
    lo: float = -math.inf
    hi: float = math.inf
    monotonic: bool = False
    target: complex | None = None

    def __post_init__(self):
        if self.mode == "continuity":
            if self.previous is None or not np.isfinite(self.previous):
                raise ValueError("continuity mode needs a finite previous root")
        elif self.mode == "range":
            if not self.lo < self.hi:
                raise ValueError("range mode needs lo < hi")
        elif self.mode == "asymptotic":
            if self.target is None:
                raise ValueError("asymptotic mode needs a target value")
        else:
            raise ValueError(f"unknown branch mode {self.mode!r}")

    @classmethod
    def continuity(cls, previous, max_jump=math.inf):
        return cls("continuity", previous=complex(previous), max_jump=float(max_jump))

    @classmethod
    def range(cls, lo, hi, monotonic=False, previous=None):
        prev = None if previous is None else complex(previous)
        return cls("range", lo=float(lo), hi=float(hi), monotonic=monotonic, previous=prev)

    @classmethod
    def asymptotic(cls, target):
        return cls("asymptotic", target=complex(target))


def _closest(roots, ref):
    dist = np.abs(roots - ref)
    best = dist.min()
    ties = np.flatnonzero(dist <= best + 1e-12 * (1.0 + best))
    # equal distances: prefer the larger real part
    return roots[ties[np.argmax(roots[ties].real)]]


def select_branch(roots, sel: BranchSelector) -> complex:
    """Return the single admissible root under ``sel`` or raise :class:`BranchLostError`."""
    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    if roots.size == 0:
        raise BranchLostError("no roots to select from", roots)
    if sel.mode == "continuity":
        pick = _closest(roots, sel.previous)
        if abs(pick - sel.previous) > sel.max_jump:
            raise BranchLostError(
                f"branch jumped by {abs(pick - sel.previous):.3g} > {sel.max_jump:.3g}", roots
            )
        return complex(pick)
    if sel.mode == "asymptotic":
        return complex(_closest(roots, sel.target))
    # range mode
    real = np.abs(roots.imag) <= REAL_TOL * (1.0 + np.abs(roots.real))
    span = sel.hi - sel.lo
    tol = 1e-10 * (1.0 + span if math.isfinite(span) else 1.0)
    ok = real & (roots.real >= sel.lo - tol) & (roots.real <= sel.hi + tol)
    if sel.monotonic and sel.previous is not None:
        ok &= roots.real >= sel.previous.real - tol
    cand = roots[ok].real
    if cand.size == 0:
        raise BranchLostError(f"no real root in [{sel.lo}, {sel.hi}]", roots)
    cand = np.unique(np.round(cand, 12))
    if cand.size > 1:
        if sel.previous is None:
            raise BranchLostError(f"{cand.size} admissible roots in [{sel.lo}, {sel.hi}]", roots)
        return complex(_closest(cand.astype(complex), sel.previous).real)
    return complex(min(max(cand[0], sel.lo), sel.hi))


# ---------------------------------------------------------------------------
# Newton for small real systems
# ---------------------------------------------------------------------------

def fd_jacobian(fun: Callable, x: np.ndarray, f0=None) -> np.ndarray:
    """Central-difference Jacobian with step ``1e-7 * (1 + |x_j|)``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        h = 1e-7 * (1.0 + abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((np.asarray(fun(xp), float) - np.asarray(fun(xm), float)) / (2 * h))
    return np.column_stack(cols)


def newton_system(residual_fn: Callable, x0, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Solve ``residual_fn(x) = 0`` by Newton with a finite-difference Jacobian.

    Steps are halved (at most 30 times) whenever the full step would
    increase the residual.  On failure a :class:`ConvergenceError` carries
    the last iterate and its residual norm.
    """
    x = np.array(x0, dtype=float)
    f = np.asarray(residual_fn(x), dtype=float)
    norm = np.max(np.abs(f)) if f.size else 0.0
    for _ in range(max_iter):
        if not np.isfinite(norm):
            break
        if norm <= tol:
            return x
        J = fd_jacobian(residual_fn, x)
        step = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam = 1.0
        for _ in range(30):
            xn = x + lam * step
            fn = np.asarray(residual_fn(xn), dtype=float)
            nn = np.max(np.abs(fn))
            if np.isfinite(nn) and nn < norm:
                break
            lam *= 0.5
        else:
            raise ConvergenceError("Newton line search failed", x=x, residual_norm=norm)
        x, f, norm = xn, fn, nn
    if norm <= tol:
        return x
    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations (|F|={norm:.3g})", x=x, residual_norm=norm
    )
