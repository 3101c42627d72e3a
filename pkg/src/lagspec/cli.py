"""Command-line interface: ``lagspec {analytic,mc,radius,compare}``.

Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction

import numpy as np

from . import formats
from .errors import NumericalError, SingularCovarianceError

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
METHODS = ("sym", "whiten", "hl", "unit", "half", "deep", "sandwich")
SANDWICH_ANGLE = math.pi / 4


class UsageError(Exception):
    """Invalid arguments detected after parsing."""


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` to an inclusive linear grid; raises :class:`UsageError`."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid {text!r} must look like start:stop:count")
    try:
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise UsageError(f"grid {text!r} has non-numeric fields") from None
    if not (math.isfinite(start) and math.isfinite(stop)) or not start < stop:
        raise UsageError(f"grid {text!r} needs start < stop")
    if count < 2:
        raise UsageError(f"grid {text!r} needs at least 2 points")
    return np.linspace(start, stop, count)


def parse_beta(text: str) -> Fraction:
    try:
        b = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"beta {text!r} must be a fraction p/q") from None
    if not 0 <= b < 1:
        raise UsageError(f"beta {text!r} must lie in [0, 1)")
    return b


def _positive(name, value):
    if value is None:
        raise UsageError(f"--{name} is required")
    if not value > 0:
        raise UsageError(f"--{name} must be positive")
    return value


# ---------------------------------------------------------------------------
# analytic
# ---------------------------------------------------------------------------

def analytic_columns(method: str, r: float, grid, beta: Fraction | None = None, matrix=None):
    """Compute the columns and parameter block of an analytic curve file."""
    from . import frv, lag2d, quasi1d

    params = {"kind": "analytic", "method": method, "r": r, "version": formats.tool_version()}
    if method == "sym":
        params["edge"] = quasi1d.sym_support_edge(r)
        return {"lambda": grid, "rho": quasi1d.sym_density(grid, r)}, params
    if method == "whiten":
        if r >= 1:
            raise UsageError("whiten needs r < 1 (the sample covariance must be invertible)")
        m = frv.whitened_lag_measure(r)
        # per-N normalisation: continuous part divided by r, atom at 1 of weight (2r - 1)/r
        rho = np.where((grid > m.support[0]) & (grid < m.support[1]), m.density(grid), 0.0) / r
        atoms = [(loc, w / r) for loc, w in m.atoms if loc == 1.0 and w > 0]
        params["atoms"] = formats.format_atoms(atoms)
        return {"lambda": grid, "rho": rho}, params
    if method == "hl":
        curve = quasi1d.hl_curve(grid, r)
    elif method == "unit":
        curve = lag2d.unit_lag_curve(grid, r)
    elif method == "half":
        f, rho, O = lag2d.half_lag_laws(grid, r)
        law = lag2d.LagLaw(r, Fraction(1, 2))
        f = np.maximum(f, law.zero_mode_weight)
        params.update(beta="1/2", s_ext=math.sqrt(2 * r), s_int=0.0, convention="N")
        return {"s": grid, "F": f, "rho": rho, "O": O}, params
    elif method == "deep":
        if beta is None:
            raise UsageError("deep requires --beta p/q")
        curve = lag2d.deep_lag_curve(lag2d.LagLaw(r, beta), grid)
    elif method == "sandwich":
        if matrix is None:
            raise UsageError("sandwich requires --matrix FILE")
        return sandwich_columns(matrix, r, grid, params)
    else:
        raise UsageError(f"unknown method {method!r}")
    ring = quasi1d.spectral_radii(r)
    params.update({k: v for k, v in curve.params.items() if k not in ("method", "r")})
    params.setdefault("s_int", ring.s_int)
    params.setdefault("s_ext", ring.s_ext)
    params["convention"] = curve.convention
    return {"s": curve.grid, "F": curve.F, "rho": curve.rho, "O": curve.O}, params


def sandwich_columns(A, r, grid, params):
    """Solve the quaternionic equation along the ray ``arg z = pi/4``.

    ``F`` is ``Re(z g)``, which is the radial counting function when the
    spectrum is rotationally symmetric; ``rho`` then follows from
    ``F'(s) / (2 pi s)``.
    """
    from .qgreen import SandwichProblem, solve_sandwich

    if grid[0] <= 0:
        raise UsageError("sandwich grid must start above 0")
    prob = SandwichProblem(A, r)
    phase = np.exp(1j * SANDWICH_ANGLE)
    F = np.empty_like(grid)
    O = np.empty_like(grid)
    for k, s in enumerate(grid):
        sol = solve_sandwich(prob, s * phase)
        F[k] = (sol.g * s * phase).real
        O[k] = sol.abs_v**2 / np.pi if sol.inside else 0.0
    rho = np.maximum(np.gradient(F, grid) / (2 * np.pi * grid), 0.0)
    params.update(T=prob.T, angle=SANDWICH_ANGLE, convention="N")
    return {"s": grid, "F": F, "rho": rho, "O": O}, params


def cmd_analytic(args) -> int:
    r = _positive("r", args.r)
    grid = parse_grid(args.grid)
    beta = parse_beta(args.beta) if args.beta is not None else None
    if args.method == "deep" and beta is None:
        raise UsageError("deep requires --beta p/q")
    if args.method == "sandwich" and not args.matrix:
        raise UsageError("sandwich requires --matrix FILE")
    if args.method in ("hl", "unit", "half", "deep", "sandwich") and grid[0] < 0:
        raise UsageError("radial grids must be non-negative")
    matrix = formats.read_matrix(args.matrix) if args.matrix else None
    cols, params = analytic_columns(args.method, r, grid, beta, matrix)
    formats.write_curve(args.out, cols, params, args.format)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def empirical_columns(spec, result, bins: int):
    """Binned empirical curve and parameter block for an ensemble result."""
    from . import mc, quasi1d

    samples = result.accepted
    params = {
        "kind": "mc",
        "variant": spec.variant,
        "N": spec.N,
        "T": spec.T,
        "tau": spec.tau,
        "r": spec.r,
        "field": spec.field,
        "samples": spec.samples,
        "seed": spec.seed,
        "rejected": result.rejected,
        "version": formats.tool_version(),
    }
    if spec.hermitian:
        ev = np.concatenate([s.eigenvalues.real for s in samples]) if samples else np.zeros(0)
        lo, hi = (float(ev.min()), float(ev.max())) if ev.size else (0.0, 1.0)
        pad = 1e-9 * max(1.0, hi - lo)
        edges = np.linspace(lo - pad, hi + pad, bins + 1)
        counts, _ = np.histogram(ev, edges)
        total = max(len(samples) * spec.N, 1)
        F = np.cumsum(counts) / total
        rho = counts / (total * np.diff(edges))
        return {"x_lo": edges[:-1], "x_hi": edges[1:], "F": F, "rho": rho, "count": counts}, params
    r_for_edge = spec.r
    if spec.variant == "independent_product":
        r_for_edge = spec.N / (spec.T - spec.tau)
        s_ext = math.sqrt(r_for_edge)
    elif spec.variant == "lagged_cyclic":
        s_ext = quasi1d.spectral_radii(spec.r).s_ext
    else:
        from .lag2d import LagLaw, deep_lag_radius

        s_ext = deep_lag_radius(LagLaw(spec.r, Fraction(spec.tau, spec.T)))
    edges = mc.default_edges(s_ext, bins)
    emp = mc.empirical_radial(samples, edges)
    O = emp.overlap if emp.overlap is not None else np.full(emp.density.shape, np.nan)
    return {
        "s_lo": edges[:-1],
        "s_hi": edges[1:],
        "F": emp.cdf,
        "rho": emp.density,
        "O": O,
        "count": emp.counts,
    }, params


def cmd_mc(args) -> int:
    from . import mc

    N = args.n
    if N is None or N < 1:
        raise UsageError("--n must be a positive integer")
    if args.t is not None and args.r is not None:
        raise UsageError("give either --t or --r, not both")
    if args.t is not None:
        T = args.t
    elif args.r is not None:
        T = int(round(N / _positive("r", args.r)))
    else:
        raise UsageError("one of --t or --r is required")
    if T < 1:
        raise UsageError("T must be positive")
    if not 1 <= args.tau < T:
        raise UsageError(f"--tau must satisfy 1 <= tau < T = {T}")
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    spec = mc.EnsembleSpec(N, T, args.tau, args.field, args.variant, args.samples, args.seed)
    result = mc.run_ensemble(spec, overlaps=not args.no_overlaps and not spec.hermitian, workers=args.workers)
    cols, params = empirical_columns(spec, result, args.bins)
    formats.write_curve(args.out, cols, params, args.format)
    if args.raw:
        formats.write_raw_records(args.raw, result.samples)
    return EXIT_OK


# ---------------------------------------------------------------------------
# radius and compare
# ---------------------------------------------------------------------------

def cmd_radius(args) -> int:
    from .lag2d import LagLaw, deep_lag_radius

    r = _positive("r", args.r)
    grid = parse_grid(args.grid)
    if grid[0] <= 0 or grid[-1] >= 1:
        raise UsageError("beta grid must lie inside (0, 1)")
    s_ext = np.array([deep_lag_radius(LagLaw(r, b)) for b in grid])
    params = {"kind": "radius", "r": r, "version": formats.tool_version()}
    formats.write_curve(args.out, {"beta": grid, "s_ext": s_ext}, params, args.format)
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        rep = formats.compare_curves(args.analytic, args.empirical)
    except formats.IncompatibleError as exc:
        print(f"lagspec: {exc}", file=sys.stderr)
        for k, (a, b) in exc.diff.items():
            print(f"  {k}: analytic={a!r} empirical={b!r}", file=sys.stderr)
        return EXIT_USAGE
    text = rep.to_json()
    if args.out:
        formats.write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lagspec", description="Spectra of lagged correlation matrices.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", help="analytic density, radial CDF and correlator")
    a.add_argument("--method", required=True, choices=METHODS)
    a.add_argument("--r", type=float, required=True, help="N/T")
    a.add_argument("--beta", help="lag fraction p/q (deep)")
    a.add_argument("--matrix", help="matrix file (sandwich)")
    a.add_argument("--grid", required=True, help="start:stop:count")
    a.add_argument("--out", required=True)
    a.add_argument("--format", choices=("csv", "json"), default="csv")
    a.set_defaults(func=cmd_analytic)

    m = sub.add_parser("mc", help="Monte Carlo ensemble")
    m.add_argument("--variant", required=True, choices=("lagged_nilpotent", "lagged_cyclic", "symmetrized", "whitened_square", "independent_product"))
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--r", type=float, help="N/T; T is rounded to the nearest integer")
    m.add_argument("--t", type=int, help="window length T")
    m.add_argument("--tau", type=int, default=1)
    m.add_argument("--samples", type=int, default=100)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--field", choices=("complex", "real"), default="complex")
    m.add_argument("--bins", type=int, default=64)
    m.add_argument("--workers", type=int)
    m.add_argument("--no-overlaps", action="store_true")
    m.add_argument("--out", required=True, help="binned curve file")
    m.add_argument("--raw", help="raw eigenvalue records (sample,re,im,O_ii)")
    m.add_argument("--format", choices=("csv", "json"), default="csv")
    m.set_defaults(func=cmd_mc)

    rd = sub.add_parser("radius", help="outer spectral radius against lag fraction")
    rd.add_argument("--r", type=float, required=True)
    rd.add_argument("--grid", required=True, help="beta grid start:stop:count in (0, 1)")
    rd.add_argument("--out", required=True)
    rd.add_argument("--format", choices=("csv", "json"), default="csv")
    rd.set_defaults(func=cmd_radius)

    c = sub.add_parser("compare", help="compare an analytic curve with an empirical one")
    c.add_argument("analytic")
    c.add_argument("empirical")
    c.add_argument("--out", help="report path (JSON); stdout if omitted")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, formats.FormatError, ValueError) as exc:
        print(f"lagspec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SingularCovarianceError as exc:
        print(f"lagspec: singular covariance: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (NumericalError, ArithmeticError) as exc:
        print(f"lagspec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"lagspec: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
