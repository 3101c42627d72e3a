"""Monte-Carlo ensembles of lagged correlation matrices.

Every Gaussian draw comes from a Philox stream keyed by
``(seed, sample index, stream tag)``, so a sample is the same no matter which
worker produces it or in what order.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularCovarianceError

log = logging.getLogger(__name__)

VARIANTS = ("lagged_nilpotent", "lagged_cyclic", "symmetrized", "whitened_square", "independent_product")
FIELDS = ("complex", "real")
COND_LIMIT = 1e12

# stream tags inside one sample
_MAIN, _SECOND = 0, 1


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of a Monte-Carlo run."""

    N: int
    T: int
    tau: int
    field: str = "complex"
    variant: str = "lagged_nilpotent"
    samples: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.N < 2 or self.T < 2:
            raise ValueError("N and T must be at least 2")
        if not 0 <= self.tau < self.T:
            raise ValueError(f"need 0 <= tau < T, got tau={self.tau}, T={self.T}")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.field not in FIELDS:
            raise ValueError(f"field must be one of {FIELDS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def r(self) -> float:
        return self.N / self.T

    @property
    def beta(self) -> float:
        return self.tau / self.T

    @property
    def hermitian(self) -> bool:
        return self.variant in ("symmetrized", "whitened_square")


@dataclass
class SpectrumSample:
    """Eigenvalues of one draw, with diagonal overlaps when computed."""

    eigenvalues: np.ndarray
    overlaps: np.ndarray | None
    sample_index: int
    condition: float = 1.0
    biorthogonality: float = 0.0
    accepted: bool = True


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def _generator(seed: int, index: int, stream: int = _MAIN) -> np.random.Generator:
    key = np.array([seed % 2**64, (index << 4) | stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_gaussian(N: int, T: int, field: str, seed: int, index: int, stream: int = _MAIN) -> np.ndarray:
    """``N x T`` Gaussian matrix for draw ``index`` of run ``seed``.

    Complex entries have independent real and imaginary parts of variance
    1/2 (so ``E|x|^2 = 1``); real entries have unit variance.
    """
    rng = _generator(seed, index, stream)
    if field == "complex":
        z = rng.standard_normal((N, T, 2))
        return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
    if field == "real":
        return rng.standard_normal((N, T))
    raise ValueError(f"unknown field {field!r}")


def build_lagged(X, tau: int, variant: str = "lagged_nilpotent") -> np.ndarray:
    """Lagged correlation matrix without forming the shift matrix.

    ``lagged_nilpotent``: ``C_ij = sum_{t < T - tau} x_it conj(x_j,t+tau) / (T - tau)``.
    ``lagged_cyclic``: time index taken modulo ``T``, prefactor ``1/T``.
    """
    X = np.asarray(X)
    T = X.shape[1]
    if not 0 <= tau < T:
        raise ValueError("need 0 <= tau < T")
    if variant == "lagged_nilpotent":
        L = T - tau
        return X[:, :L] @ X[:, tau:].conj().T / L
    if variant == "lagged_cyclic":
        return X @ np.roll(X, -tau, axis=1).conj().T / T
    raise ValueError(f"unknown lag variant {variant!r}")


def independent_product(N: int, L: int, field: str, seed: int, index: int) -> np.ndarray:
    """``A B^dagger / L`` with two independent ``N x L`` Gaussian blocks."""
    A = sample_gaussian(N, L, field, seed, index, _MAIN)
    B = sample_gaussian(N, L, field, seed, index, _SECOND)
    return A @ B.conj().T / L


def symmetrized_sample(X, tau: int, variant: str = "lagged_nilpotent") -> np.ndarray:
    """``(C + C^dagger) / 2`` for the lagged matrix ``C``."""
    C = build_lagged(X, tau, variant)
    return 0.5 * (C + C.conj().T)


def whitening_transform(X) -> np.ndarray:
    """``Lambda^{-1/2} U^dagger`` for the equal-time covariance ``X X^dagger / T = U Lambda U^dagger``."""
    T = X.shape[1]
    lam, U = np.linalg.eigh(X @ X.conj().T / T)
    if lam[0] <= 1e-12 * lam[-1]:
        raise SingularCovarianceError("equal-time covariance is singular (need N < T)")
    return (U / np.sqrt(lam)).conj().T


def _whitened_pair(X, tau):
    N, T = X.shape
    if N >= T:
        raise SingularCovarianceError(f"whitening needs N < T, got N={N}, T={T}")
    Y = np.roll(X, -tau, axis=1)
    return whitening_transform(X) @ X, whitening_transform(Y) @ Y


def whitened_square(X, tau: int) -> np.ndarray:
    """``C' C'^dagger`` with ``C' = x' y'^dagger / T`` built from whitened series.

    ``y`` is the cyclic shift of ``x`` by ``tau``, so both series have the
    full length ``T``.
    """
    Xw, Yw = _whitened_pair(X, tau)
    T = X.shape[1]
    C = Xw @ Yw.conj().T / T
    return C @ C.conj().T


def whitened_projector_product(X, tau: int) -> np.ndarray:
    """``T x T`` product ``P1 P2`` of the projectors ``x'^dagger x' / T`` and ``y'^dagger y' / T``."""
    Xw, Yw = _whitened_pair(X, tau)
    T = X.shape[1]
    return (Xw.conj().T @ Xw / T) @ (Yw.conj().T @ Yw / T)


def draw_matrix(spec: EnsembleSpec, index: int) -> np.ndarray:
    """Matrix of draw ``index`` for ``spec``."""
    if spec.variant == "independent_product":
        return independent_product(spec.N, spec.T - spec.tau, spec.field, spec.seed, index)
    X = sample_gaussian(spec.N, spec.T, spec.field, spec.seed, index)
    if spec.variant in ("lagged_nilpotent", "lagged_cyclic"):
        return build_lagged(X, spec.tau, spec.variant)
    if spec.variant == "symmetrized":
        return symmetrized_sample(X, spec.tau)
    return whitened_square(X, spec.tau)


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

def eigen_biorthogonal(C, index: int = 0, cond_limit: float = COND_LIMIT) -> SpectrumSample:
    """Eigenvalues and diagonal overlaps ``O_ii = |L_i|^2 |R_i|^2``.

    Right eigenvectors are the columns of ``V``; left eigenvectors are the
    rows of ``V^{-1}``, which makes ``<L_i|R_j> = delta_ij`` exact up to
    round-off.  Samples whose 1-norm condition number of ``V`` exceeds
    ``cond_limit`` are flagged as rejected.
    """
    C = np.asarray(C, dtype=complex)
    lam, V = np.linalg.eig(C)
    try:
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError:
        log.warning("sample %d rejected: singular eigenvector matrix", index)
        return SpectrumSample(lam, None, index, np.inf, np.inf, False)
    cond = np.linalg.norm(V, 1) * np.linalg.norm(Vinv, 1)
    bio = float(np.max(np.abs(Vinv @ V - np.eye(V.shape[0]))))
    overlaps = np.sum(np.abs(Vinv) ** 2, axis=1) * np.sum(np.abs(V) ** 2, axis=0)
    ok = bool(np.isfinite(cond) and cond <= cond_limit)
    if not ok:
        log.warning("sample %d rejected: eigenvector condition %.3g", index, cond)
    return SpectrumSample(lam, overlaps, index, float(cond), bio, ok)


def spectrum_only(C, index: int = 0, hermitian: bool = False) -> SpectrumSample:
    """Eigenvalues without eigenvectors."""
    lam = np.linalg.eigvalsh(C) if hermitian else np.linalg.eigvals(C)
    return SpectrumSample(np.asarray(lam, dtype=complex), None, index)


def _worker_count(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("LAGSPEC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer LAGSPEC_THREADS=%r", env)
    return 1


@dataclass
class EnsembleResult:
    spec: EnsembleSpec
    samples: list = field(default_factory=list)

    @property
    def accepted(self) -> list:
        return [s for s in self.samples if s.accepted]

    @property
    def rejected(self) -> int:
        return sum(not s.accepted for s in self.samples)

    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([s.eigenvalues for s in self.accepted])

    def overlaps(self) -> np.ndarray | None:
        acc = self.accepted
        if not acc or acc[0].overlaps is None:
            return None
        return np.concatenate([s.overlaps for s in acc])


def run_ensemble(spec: EnsembleSpec, overlaps: bool = True, workers: int | None = None) -> EnsembleResult:
    """Draw, build and decompose all samples of ``spec``.

    Results are sorted by sample index, so the outcome does not depend on
    ``workers`` (default: ``LAGSPEC_THREADS`` or 1).
    """

    def one(i):
        C = draw_matrix(spec, i)
        if overlaps and not spec.hermitian:
            return eigen_biorthogonal(C, i)
        return spectrum_only(C, i, hermitian=spec.hermitian)

    n = _worker_count(workers)
    if n == 1:
        out = [one(i) for i in range(spec.samples)]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            out = list(pool.map(one, range(spec.samples)))
    out.sort(key=lambda s: s.sample_index)
    res = EnsembleResult(spec, out)
    if res.rejected:
        log.info("%d of %d samples rejected", res.rejected, spec.samples)
    return res


# ---------------------------------------------------------------------------
# empirical radial statistics
# ---------------------------------------------------------------------------

@dataclass
class EmpiricalCurve:
    """Annular histogram of eigenvalue moduli and overlaps.

    ``cdf`` is the fraction of all eigenvalues (zero modes included) with
    modulus at most each right bin edge.  ``density`` excludes zero modes.
    """

    edges: np.ndarray
    density: np.ndarray
    overlap: np.ndarray | None
    counts: np.ndarray
    zero_count: int
    samples: int
    N: int
    empty: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def areas(self) -> np.ndarray:
        return np.pi * (self.edges[1:] ** 2 - self.edges[:-1] ** 2)

    @property
    def cdf(self) -> np.ndarray:
        total = self.samples * self.N
        return (self.zero_count + np.cumsum(self.counts)) / total


def default_edges(s_ext: float, bins: int = 64) -> np.ndarray:
    """``bins`` equal-width annuli over ``[0, 1.1 s_ext]``."""
    return np.linspace(0.0, 1.1 * s_ext, bins + 1)


def _moduli(result_or_samples, real_band):
    samples = result_or_samples.accepted if isinstance(result_or_samples, EnsembleResult) else [
        s for s in result_or_samples if s.accepted
    ]
    if not samples:
        raise ValueError("no accepted samples")
    lam = np.concatenate([s.eigenvalues for s in samples])
    ov = None
    if samples[0].overlaps is not None:
        ov = np.concatenate([s.overlaps for s in samples])
    keep = np.ones(lam.shape, bool)
    if real_band is not None:
        keep = np.abs(lam.imag) >= real_band
    return samples, lam, ov, keep


def empirical_radial(samples, edges, zero_tol: float = 1e-8, real_band: float | None = None) -> EmpiricalCurve:
    """Radial density ``count / (samples N area)`` per annulus, zero modes counted apart.

    Eigenvalues with ``|lambda| <= zero_tol * max|lambda|`` are zero modes.
    ``real_band`` drops eigenvalues with ``|Im lambda|`` below it (used for
    real-field ensembles, which accumulate eigenvalues on the real axis).
    """
    edges = np.asarray(edges, dtype=float)
    smp, lam, ov, keep = _moduli(samples, real_band)
    N = smp[0].eigenvalues.size
    mod = np.abs(lam)
    zero = mod <= zero_tol * max(mod.max(), 1e-300)
    sel = keep & ~zero
    counts, _ = np.histogram(mod[sel], bins=edges)
    areas = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    n = len(smp)
    density = counts / (n * N * areas)
    overlap = None
    if ov is not None:
        sums, _ = np.histogram(mod[sel], bins=edges, weights=ov[sel])
        overlap = sums / (n * N * N * areas)
    return EmpiricalCurve(edges, density, overlap, counts, int(np.sum(zero & keep)), n, N, counts == 0)


def empirical_overlap(samples, edges, **kw) -> EmpiricalCurve:
    """Same histogram as :func:`empirical_radial`; requires overlaps."""
    curve = empirical_radial(samples, edges, **kw)
    if curve.overlap is None:
        raise ValueError("samples carry no overlaps")
    return curve


def empirical_real_cdf(eigenvalues, x) -> np.ndarray:
    """Empirical CDF of real spectra evaluated at ``x``."""
    ev = np.sort(np.asarray(eigenvalues).real)
    return np.searchsorted(ev, np.asarray(x, dtype=float), side="right") / ev.size
