"""Quaternionic Green's functions of sandwiched Gaussian matrices.

For ``Y = (1/T) X A X^dagger`` with ``X`` an ``N x T`` complex Gaussian
matrix and ``A`` any ``T x T`` matrix, the ``2 x 2`` quaternionic resolvent
``G`` obeys

    [Q - M_A(r G)] G = 1,   M_A(P) = (1/T) bTr( A2 [1 - (P (x) 1_T) A2]^{-1} ),

with ``A2 = diag(A, A^dagger)`` and ``Q = [[z, i conj(w)], [i w, conj(z)]]``.
``G = [[g, i conj(v)], [i v, conj(g)]]`` carries the holomorphic part ``g``
and the eigenvector correlator ``O = |v|^2 / pi`` once ``w -> 0``.

Block matrices of size ``2T`` use the quaternion index as the outer index:
``P (x) 1_T == np.kron(P, eye(T))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContinuationError, ConvergenceError, ResolutionError, SingularPointError

# ---------------------------------------------------------------------------
# quaternion values
# ---------------------------------------------------------------------------


@dataclass
class Quaternion2:
    """2 x 2 complex matrix in the quaternion block convention.

    Arguments are ``[[z, i conj(w)], [i w, conj(z)]]`` and converged values
    ``[[g, i conj(v)], [i v, conj(g)]]``.
    """

    m: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=complex).reshape(2, 2)

    @classmethod
    def argument(cls, z: complex, w: complex = 0.0) -> "Quaternion2":
        return cls([[z, 1j * np.conj(w)], [1j * w, np.conj(z)]])

    @classmethod
    def value(cls, g: complex, v: complex = 0.0) -> "Quaternion2":
        return cls([[g, 1j * np.conj(v)], [1j * v, np.conj(g)]])

    @property
    def g(self) -> complex:
        return complex(self.m[0, 0])

    @property
    def v(self) -> complex:
        """``v`` read from the lower-left entry ``i v``."""
        return complex(self.m[1, 0] / 1j)

    @property
    def abs_v(self) -> float:
        return float(np.sqrt(abs(self.m[0, 1] * self.m[1, 0])))

    def conjugation_defect(self) -> float:
        """``|G22 - conj(G11)| + |G12 + conj(G21)|``; zero for a physical value."""
        m = self.m
        return float(abs(m[1, 1] - np.conj(m[0, 0])) + abs(m[0, 1] + np.conj(m[1, 0])))

    def __matmul__(self, other):
        return Quaternion2(self.m @ (other.m if isinstance(other, Quaternion2) else other))

    def inv(self) -> "Quaternion2":
        return Quaternion2(np.linalg.inv(self.m))


@dataclass
class SandwichProblem:
    """``Y = scale * X A X^dagger`` with ``r = N / T``.

    ``scale`` defaults to ``1/T``; the lagged matrix uses ``1/(T - tau)``.
    Internally the problem is rewritten as ``(1/T) X A_eff X^dagger`` with
    ``A_eff = scale * T * A``.
    """

    A: np.ndarray
    r: float
    scale: float | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1] or self.A.shape[0] < 1:
            raise ValueError("A must be a nonempty square matrix")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.scale is None:
            self.scale = 1.0 / self.T

    @property
    def T(self) -> int:
        return self.A.shape[0]

    @property
    def A_eff(self) -> np.ndarray:
        return self.scale * self.T * self.A


@dataclass
class ContinuationSchedule:
    """Decreasing regulators ``w`` used to approach the ``w -> 0`` limit."""

    w_values: np.ndarray = field(default_factory=lambda: 0.1 * 0.5 ** np.arange(0, 21))
    tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        self.w_values = np.asarray(self.w_values, dtype=float)
        if self.w_values.size == 0 or np.any(self.w_values <= 0):
            raise ValueError("w values must be positive")
        if np.any(np.diff(self.w_values) >= 0):
            raise ValueError("w values must be strictly decreasing")
        if self.w_values[-1] > 1e-6:
            raise ValueError("last w must be at most 1e-6")


# ---------------------------------------------------------------------------
# block-trace moment function
# ---------------------------------------------------------------------------

def _blockdiag(A):
    T = A.shape[-1]
    out = np.zeros(A.shape[:-2] + (2 * T, 2 * T), dtype=complex)
    out[..., :T, :T] = A
    out[..., T:, T:] = np.conj(np.swapaxes(A, -1, -2))
    return out


def _resolvent_blocks(A, P):
    """``W = [1 - A2 (P (x) 1)]^{-1} A2`` split into its four ``T x T`` blocks.

    ``A2 [1 - (P (x) 1) A2]^{-1}`` equals ``W`` by the push-through identity.
    """
    T = A.shape[-1]
    A2 = _blockdiag(A)
    K = np.kron(P, np.eye(T))
    lhs = np.eye(2 * T) - A2 @ K
    try:
        W = np.linalg.solve(lhs, A2)
    except np.linalg.LinAlgError as exc:
        raise SingularPointError("block resolvent is singular at this argument") from exc
    if not np.all(np.isfinite(W)):
        raise SingularPointError("block resolvent is singular at this argument")
    return W.reshape(2, T, 2, T).transpose(0, 2, 1, 3)


def quaternionic_moment_gf(A, Q) -> Quaternion2:
    """``(1/T) bTr( A2 [1 - (Q (x) 1_T) A2]^{-1} )`` for ``A2 = diag(A, A^dagger)``.

    Parameters
    ----------
    A : (T, T) array_like
    Q : Quaternion2 or (2, 2) array_like

    Returns
    -------
    Quaternion2
    """
    A = np.asarray(A, dtype=complex)
    P = Q.m if isinstance(Q, Quaternion2) else np.asarray(Q, dtype=complex)
    Wb = _resolvent_blocks(A, P)
    return Quaternion2(np.trace(Wb, axis1=2, axis2=3) / A.shape[0])


def moment_gf_batch(A, P):
    """Vectorised ``M_A(P)`` for a stack of arguments ``P`` of shape ``(..., 2, 2)``."""
    A = np.asarray(A, dtype=complex)
    P = np.asarray(P, dtype=complex)
    T = A.shape[0]
    lead = P.shape[:-2]
    A2 = _blockdiag(A)
    K = np.einsum("...ab,ij->...aibj", P, np.eye(T)).reshape(lead + (2 * T, 2 * T))
    W = np.linalg.solve(np.eye(2 * T) - A2 @ K, np.broadcast_to(A2, lead + (2 * T, 2 * T)))
    Wb = W.reshape(lead + (2, T, 2, T))
    return np.einsum("...aibi->...ab", Wb) / T


def moment_gf_jacobian(Wb, T):
    """``J[a, b, c, d] = dM_ab / dP_cd = (1/T) Tr(W_ac W_db)``."""
    return np.einsum("acij,dbji->abcd", Wb, Wb) / T


# ---------------------------------------------------------------------------
# mixed moments
# ---------------------------------------------------------------------------

def word_monomial(word):
    """Map a chain ``A^{(a1)} A^{(a2)} ... A^{(an)}`` to its generating-function slot.

    ``word`` lists 0 for ``A`` and 1 for ``A^dagger``.  The normalised trace
    of the chain contributes to the coefficient of
    ``Q[a1, a2] Q[a2, a3] ... Q[a_{n-1}, a_n]`` in ``M[a1, an]``.

    Returns
    -------
    component : tuple
        ``(a1, an)``.
    exponents : tuple of int
        Powers of ``(Q00, Q01, Q10, Q11)``.
    """
    word = tuple(int(a) for a in word)
    if not word or any(a not in (0, 1) for a in word):
        raise ValueError("word must be a nonempty sequence of 0/1")
    exps = [0, 0, 0, 0]
    for a, b in zip(word[:-1], word[1:]):
        exps[2 * a + b] += 1
    return (word[0], word[-1]), tuple(exps)


def moment_coefficient(A, component, exponents, radius: float | None = None, points: int = 16) -> complex:
    """Coefficient of a monomial in the entries of ``Q`` within ``M_A(Q)[component]``.

    Cauchy's formula on a torus: only variables with nonzero exponent are
    sampled (the others are set to zero, which removes every monomial that
    contains them), each on ``points`` equispaced angles of radius
    ``radius``.  Aliasing from higher orders is of relative size
    ``(radius * ||A||)^points``.
    """
    A = np.asarray(A, dtype=complex)
    exps = np.asarray(exponents, dtype=int)
    if exps.shape != (4,) or np.any(exps < 0):
        raise ValueError("exponents must be four nonnegative integers")
    if radius is None:
        radius = 0.1 / max(np.linalg.norm(A, 2), 1e-300)
    if points <= exps.max():
        raise ValueError("need more torus points than the largest exponent")
    used = np.flatnonzero(exps)
    theta = 2 * np.pi * np.arange(points) / points
    grids = np.meshgrid(*([theta] * used.size), indexing="ij") if used.size else []
    n = points ** used.size
    P = np.zeros((n, 4), dtype=complex)
    phase = np.zeros(n)
    for k, var in enumerate(used):
        th = grids[k].ravel()
        P[:, var] = radius * np.exp(1j * th)
        phase += exps[var] * th
    vals = moment_gf_batch(A, P.reshape(n, 2, 2))[:, component[0], component[1]]
    return complex(np.mean(vals * np.exp(-1j * phase)) / radius ** exps.sum())


def mixed_moment(A, word, **kw) -> complex:
    """Generating-function coefficient associated with a chain ``word``.

    Chains sharing the same start, end and multiset of transitions land on
    the same monomial, so the value is the sum of their normalised traces.
    """
    comp, exps = word_monomial(word)
    return moment_coefficient(A, comp, exps, **kw)


# ---------------------------------------------------------------------------
# the sandwich equation
# ---------------------------------------------------------------------------

def _equation(prob, Qm, G):
    Wb = _resolvent_blocks(prob.A_eff, prob.r * G)
    M = np.trace(Wb, axis1=2, axis2=3) / prob.T
    F = (Qm - M) @ G - np.eye(2)
    return F, M, Wb


def _newton_jacobian(prob, Qm, G, M, Wb):
    J4 = moment_gf_jacobian(Wb, prob.T)
    J = np.empty((4, 4), dtype=complex)
    for col in range(4):
        dG = np.zeros((2, 2), dtype=complex)
        dG.flat[col] = 1.0
        dM = prob.r * np.einsum("abcd,cd->ab", J4, dG)
        J[:, col] = (-dM @ G + (Qm - M) @ dG).ravel()
    return J


def _solve_at_w(prob, Qm, G, tol, max_iter, damping=0.5, switch=1e-3):
    F, M, Wb = _equation(prob, Qm, G)
    res = np.max(np.abs(F))
    it = 0
    # damped fixed point until close enough for Newton
    while res > switch and it < max_iter:
        G = (1 - damping) * G + damping * np.linalg.inv(Qm - M)
        F, M, Wb = _equation(prob, Qm, G)
        res = np.max(np.abs(F))
        it += 1
    while res > tol and it < max_iter:
        J = _newton_jacobian(prob, Qm, G, M, Wb)
        step = np.linalg.solve(J, -F.ravel()).reshape(2, 2)
        lam = 1.0
        while True:
            Gn = G + lam * step
            Fn, Mn, Wbn = _equation(prob, Qm, Gn)
            rn = np.max(np.abs(Fn))
            if rn < res or lam < 1e-4:
                break
            lam *= 0.5
        G, F, M, Wb, res = Gn, Fn, Mn, Wbn, rn
        it += 1
    if not res <= tol:
        raise ConvergenceError(f"sandwich equation did not converge (|F|={res:.3g})", x=G, residual_norm=res)
    return G


@dataclass
class SandwichSolution:
    """Converged quaternion value at the smallest regulator."""

    G: Quaternion2
    z: complex
    w: float
    inside: bool

    @property
    def g(self) -> complex:
        return self.G.g

    @property
    def abs_v(self) -> float:
        return self.G.abs_v


def solve_sandwich(prob: SandwichProblem, z: complex, sched: ContinuationSchedule | None = None) -> SandwichSolution:
    """Solve the quaternionic equation at ``z`` while driving ``w`` to zero.

    Each regulator step starts from the previous solution; the first from
    ``Q^{-1}``.  A point counts as inside the spectrum when the final
    ``|v|`` exceeds ten times the final ``w`` (outside, ``|v|`` is linear in
    ``w``).
    """
    sched = sched or ContinuationSchedule()
    G = None
    last_ok = None
    for w in sched.w_values:
        Qm = Quaternion2.argument(z, w).m
        if G is None:
            G = np.linalg.inv(Qm)
        try:
            G = _solve_at_w(prob, Qm, G, sched.tol, sched.max_iter)
        except (ConvergenceError, SingularPointError) as exc:
            err = ContinuationError(f"continuation failed at w={w:.3g}: {exc}", x=G)
            err.last_ok = last_ok
            raise err from exc
        last_ok = w
    q = Quaternion2(G)
    w_final = float(sched.w_values[-1])
    return SandwichSolution(q, complex(z), w_final, q.abs_v > 10.0 * w_final)


def overlap_from_field(v) -> float:
    """Eigenvector correlator ``|v|^2 / pi``."""
    return np.abs(v) ** 2 / np.pi


def density_from_samples(g_field, h: float):
    """``(1/pi) d g / d conj(z)`` by central differences on a uniform grid.

    ``g_field[i, j]`` holds ``g`` at ``x_j + i y_i``.  The returned array has
    the interior shape ``(ny - 2, nx - 2)``.
    """
    g = np.asarray(g_field, dtype=complex)
    gx = (g[1:-1, 2:] - g[1:-1, :-2]) / (2 * h)
    gy = (g[2:, 1:-1] - g[:-2, 1:-1]) / (2 * h)
    return (0.5 * (gx + 1j * gy)).real / np.pi


def density_from_field(g, z, h: float, rel_tol: float = 0.05):
    """Density ``(1/pi) d_{conj z} g`` at points ``z`` from a callable field.

    The estimate at spacing ``h`` is compared with the one at ``h/2``; a
    relative change above ``rel_tol`` raises :class:`ResolutionError`.
    """
    z = np.asarray(z, dtype=complex)

    def est(hh):
        gx = (g(z + hh) - g(z - hh)) / (2 * hh)
        gy = (g(z + 1j * hh) - g(z - 1j * hh)) / (2 * hh)
        return (0.5 * (gx + 1j * gy)).real / np.pi

    coarse, fine = est(h), est(h / 2)
    scale = np.maximum(np.abs(fine), 1e-12)
    bad = np.abs(coarse - fine) > rel_tol * scale
    # points where both estimates vanish are holomorphic and fine
    bad &= np.maximum(np.abs(coarse), np.abs(fine)) > 1e-10
    if np.any(bad):
        raise ResolutionError(f"density unstable under grid refinement at {int(bad.sum())} points")
    return fine


def radial_density_from_f(s, f, dfds):
    """Rotationally symmetric shortcut ``rho = f'(s) / (2 pi s)``."""
    return np.asarray(dfds) / (2 * np.pi * np.asarray(s))


def nilpotent_shift(T: int, tau: int) -> np.ndarray:
    """``D[t, t'] = 1`` when ``t' = t + tau`` (no wrap-around)."""
    return np.eye(T, k=tau)


def cyclic_shift(T: int, tau: int) -> np.ndarray:
    """Cyclic version of :func:`nilpotent_shift`."""
    return np.roll(np.eye(T), tau, axis=1)


__all__ = [
    "Quaternion2",
    "SandwichProblem",
    "ContinuationSchedule",
    "SandwichSolution",
    "quaternionic_moment_gf",
    "moment_gf_batch",
    "moment_gf_jacobian",
    "word_monomial",
    "moment_coefficient",
    "mixed_moment",
    "solve_sandwich",
    "overlap_from_field",
    "density_from_samples",
    "density_from_field",
    "radial_density_from_f",
    "nilpotent_shift",
    "cyclic_shift",
]
