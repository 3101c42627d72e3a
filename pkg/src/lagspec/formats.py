"""File formats and analytic-versus-empirical comparison.

Curve files are CSV with leading ``# key=value`` parameter lines, one header
row and numbers printed with 17 significant digits, or JSON with the same
content under a versioned schema.  Writes go to a temporary file in the
target directory followed by an atomic rename.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import LagspecError

SCHEMA = 1
RADIAL_COLUMNS = ("s", "F", "rho", "O")
REAL_COLUMNS = ("lambda", "rho")
MC_RADIAL_COLUMNS = ("s_lo", "s_hi", "F", "rho", "O", "count")
MC_REAL_COLUMNS = ("x_lo", "x_hi", "F", "rho", "count")
RAW_COLUMNS = ("sample", "re", "im", "O_ii")
RADIUS_COLUMNS = ("beta", "s_ext")


class FormatError(LagspecError, ValueError):
    """A file does not follow the expected layout."""


class IncompatibleError(LagspecError, ValueError):
    """Two curve files describe different models."""

    def __init__(self, message, diff=None):
        super().__init__(message)
        self.diff = diff or {}


def tool_version() -> str:
    from . import __version__

    return __version__


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and ``os.replace``."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _param_text(v) -> str:
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def _parse_param(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text in ("True", "False"):
        return text == "True"
    return text


def curve_to_csv(columns: dict, params: dict) -> str:
    """Render named equal-length columns and parameters as CSV text."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    lines = [f"# {k}={_param_text(v)}" for k, v in params.items()]
    lines.append(",".join(names))
    for row in zip(*arrays):
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def curve_to_json(columns: dict, params: dict) -> str:
    doc = {
        "schema": SCHEMA,
        "params": params,
        "columns": list(columns),
        "data": {k: [float(x) if not isinstance(x, (int, np.integer)) else int(x) for x in np.asarray(v).tolist()] for k, v in columns.items()},
    }
    return json.dumps(doc, indent=1, allow_nan=True) + "\n"


def write_curve(path, columns: dict, params: dict, fmt: str = "csv") -> None:
    text = curve_to_json(columns, params) if fmt == "json" else curve_to_csv(columns, params)
    write_atomic(path, text)


def read_curve(path):
    """Parse a curve file written by :func:`write_curve`.

    Returns
    -------
    params : dict
    columns : dict of str -> ndarray
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from exc
        if doc.get("schema") != SCHEMA:
            raise FormatError(f"{path}: unsupported schema {doc.get('schema')!r}")
        cols = {k: np.asarray(doc["data"][k], dtype=float) for k in doc["columns"]}
        return doc.get("params", {}), cols
    params, header, rows = {}, None, []
    for ln, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if not sep:
                raise FormatError(f"{path}:{ln}: malformed parameter line")
            params[key.strip()] = _parse_param(val.strip())
        elif header is None:
            header = line.strip().split(",")
        else:
            parts = line.split(",")
            if len(parts) != len(header):
                raise FormatError(f"{path}:{ln}: expected {len(header)} fields")
            try:
                rows.append([float(p) if p.strip() else math.nan for p in parts])
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: {exc}") from exc
    if header is None:
        raise FormatError(f"{path}: missing header row")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return params, {h: data[:, k] for k, h in enumerate(header)}


def write_raw_records(path, samples) -> None:
    """``sample,re,im,O_ii`` rows for every eigenvalue of every accepted sample."""
    lines = [",".join(RAW_COLUMNS)]
    for s in samples:
        if not s.accepted:
            continue
        ov = s.overlaps if s.overlaps is not None else [math.nan] * s.eigenvalues.size
        for lam, o in zip(s.eigenvalues, ov):
            lines.append(f"{s.sample_index},{_fmt(lam.real)},{_fmt(lam.imag)},{_fmt(o) if not math.isnan(o) else ''}")
    write_atomic(path, "\n".join(lines) + "\n")


def read_raw_records(path):
    """Inverse of :func:`write_raw_records`: arrays ``sample, eigenvalue, overlap``."""
    _, cols = read_curve(path)
    if tuple(cols) != RAW_COLUMNS:
        raise FormatError(f"{path}: expected columns {RAW_COLUMNS}")
    return cols["sample"].astype(int), cols["re"] + 1j * cols["im"], cols["O_ii"]


# ---------------------------------------------------------------------------
# matrix files
# ---------------------------------------------------------------------------

def write_matrix(path, A) -> None:
    """``T=<n>`` header followed by rows of ``re+imj`` entries."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    lines = [f"T={A.shape[0]}"]
    for row in A:
        lines.append(",".join(f"{_fmt(c.real)}{'+' if c.imag >= 0 or math.isnan(c.imag) else '-'}{_fmt(abs(c.imag))}j" for c in row))
    write_atomic(path, "\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("T="):
        raise FormatError(f"{path}: first line must be T=<n>")
    try:
        T = int(lines[0][2:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad size line {lines[0]!r}") from exc
    if T < 1 or len(lines) - 1 != T:
        raise FormatError(f"{path}: expected {T} rows, found {len(lines) - 1}")
    A = np.empty((T, T), dtype=complex)
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != T:
            raise FormatError(f"{path}: row {i + 1} has {len(parts)} entries, expected {T}")
        try:
            A[i] = [complex(p.strip().replace(" ", "")) for p in parts]
        except ValueError as exc:
            raise FormatError(f"{path}: row {i + 1}: {exc}") from exc
    return A


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    """Discrepancies between an analytic curve and an empirical one."""

    sup_cdf_error: float
    l1_density_error: float
    overlap_rel_error_bulk: float | None
    rejected_samples: int = 0
    params: dict = field(default_factory=dict)
    tool_version: str = ""
    wall_clock: float = 0.0

    def to_json(self) -> str:
        doc = {"schema": SCHEMA, **asdict(self)}
        return json.dumps(doc, indent=1, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ComparisonReport":
        doc = json.loads(text)
        if doc.pop("schema", None) != SCHEMA:
            raise FormatError("unsupported report schema")
        return cls(**doc)


def bulk_mask(edges, s_int: float, s_ext: float, frac: float = 0.1) -> np.ndarray:
    """Bins lying inside the ring after trimming ``frac`` of its width at both ends."""
    edges = np.asarray(edges, dtype=float)
    width = s_ext - s_int
    return (edges[:-1] >= s_int + frac * width) & (edges[1:] <= s_ext - frac * width)


def overlap_bulk_error(edges, emp_O, ana_O, s_int, s_ext, frac: float = 0.1) -> float:
    """Area-weighted relative L1 error of the correlator over the bulk bins.

    ``sum |O_emp - O| A_k / sum O A_k``; per-bin ratios are dominated by the
    heavy tail of ``O_ii`` at moderate sample counts, the weighted ratio is not.
    """
    edges = np.asarray(edges, dtype=float)
    m = bulk_mask(edges, s_int, s_ext, frac)
    if not np.any(m):
        return math.nan
    areas = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    num = np.sum(np.abs(np.asarray(emp_O)[m] - np.asarray(ana_O)[m]) * areas[m])
    den = np.sum(np.abs(np.asarray(ana_O)[m]) * areas[m])
    return float(num / den)


_RADIAL_METHODS = ("hl", "unit", "half", "deep", "sandwich")
_REAL_METHODS = ("sym", "whiten")
_VARIANT_METHODS = {
    "lagged_nilpotent": ("unit", "half", "deep", "sandwich"),
    "lagged_cyclic": ("hl", "unit", "sandwich"),
    "independent_product": ("half", "deep"),
    "symmetrized": ("sym",),
    "whitened_square": ("whiten",),
}


def _beta_value(v) -> float:
    if isinstance(v, (int, float)):
        return float(v)
    num, _, den = str(v).partition("/")
    return float(num) / float(den or 1)


def check_compatible(pa: dict, pm: dict) -> None:
    """Raise :class:`IncompatibleError` with a parameter diff if the files disagree."""
    diff = {}
    ra, rm = pa.get("r"), pm.get("r")
    if ra is None or rm is None or abs(float(ra) - float(rm)) > 1e-6 * max(abs(float(ra)), 1e-300):
        diff["r"] = (ra, rm)
    method = pa.get("method")
    if pm.get("kind") == "mc":
        variant = pm.get("variant")
        if method not in _VARIANT_METHODS.get(variant, ()):
            diff["method/variant"] = (method, variant)
        beta_m = int(pm.get("tau", 0)) / int(pm.get("T", 1))
        if method == "unit" and int(pm.get("tau", -1)) != 1:
            diff["tau"] = (1, pm.get("tau"))
        if method == "half" and abs(beta_m - 0.5) > 1e-12 and variant != "independent_product":
            diff["beta"] = (0.5, beta_m)
        if method == "deep" and abs(_beta_value(pa.get("beta", -1)) - beta_m) > 1e-9:
            diff["beta"] = (pa.get("beta"), beta_m)
    else:
        if method != pm.get("method"):
            diff["method"] = (method, pm.get("method"))
        if "beta" in pa or "beta" in pm:
            if str(pa.get("beta")) != str(pm.get("beta")):
                diff["beta"] = (pa.get("beta"), pm.get("beta"))
    if diff:
        lines = ", ".join(f"{k}: {a!r} != {b!r}" for k, (a, b) in diff.items())
        raise IncompatibleError(f"incompatible curves ({lines})", diff)


def _analytic_cdf_radial(pa, ca, s):
    """Analytic ``f`` (per ``N`` eigenvalue) interpolated at radii ``s``."""
    F = np.interp(s, ca["s"], ca["F"], left=ca["F"][0], right=1.0)
    if pa.get("convention") == "T":
        r = float(pa["r"])
        F = (F - (1.0 - r)) / r
    return F


def _analytic_cdf_real(pa, ca, x):
    """Analytic CDF at ``x``: exact from the model parameters when available.

    Trapezoidal integration of the tabulated density is the fallback; it
    loses accuracy at inverse square-root edges.
    """
    method, r = pa.get("method"), float(pa.get("r", 0))
    x = np.asarray(x, dtype=float)
    if method == "sym":
        from .quasi1d import sym_cdf

        return np.asarray(sym_cdf(x, r), dtype=float)
    if method == "whiten" and 0 < r < 1:
        from .frv import whitened_lag_measure

        # per-N counting: remove the zero atom of the T-normalised law
        return (whitened_lag_measure(r).cdf(x) - max(1.0 - r, 0.0) * (x >= 0)) / r
    lam, rho = ca["lambda"], ca["rho"]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(lam))])
    out = np.interp(x, lam, cum, left=0.0, right=cum[-1])
    for loc, w in _parse_atoms(pa.get("atoms", "")):
        out = out + w * (np.asarray(x) >= loc)
    return out


def _parse_atoms(text):
    atoms = []
    for item in str(text).split(";"):
        if item.strip():
            loc, _, w = item.partition(":")
            atoms.append((float(loc), float(w)))
    return atoms


def format_atoms(atoms) -> str:
    return ";".join(f"{_fmt(loc)}:{_fmt(w)}" for loc, w in atoms)


def compare_curves(analytic_path, mc_path) -> ComparisonReport:
    """Compare an analytic curve file with an empirical (or another analytic) one.

    The analytic curve is linearly interpolated onto the other file's
    points: right bin edges for the CDF, bin centres for density and
    correlator.
    """
    t0 = time.perf_counter()
    pa, ca = read_curve(analytic_path)
    pm, cm = read_curve(mc_path)
    check_compatible(pa, pm)
    method = pa.get("method")
    overlap_err = None
    if method in _REAL_METHODS:
        if pm.get("kind") == "mc":
            x_hi, x_lo = cm["x_hi"], cm["x_lo"]
            centers = 0.5 * (x_lo + x_hi)
            widths = x_hi - x_lo
            F_emp, rho_emp = cm["F"], cm["rho"]
            F_ana = _analytic_cdf_real(pa, ca, x_hi)
        else:
            centers = cm["lambda"]
            widths = np.gradient(centers)
            x_hi = centers
            F_emp = _analytic_cdf_real(pm, cm, centers)
            rho_emp = cm["rho"]
            F_ana = _analytic_cdf_real(pa, ca, centers)
        rho_ana = np.interp(centers, ca["lambda"], ca["rho"], left=0.0, right=0.0)
        if pm.get("kind") == "mc":
            # atoms land in a single histogram bin; spread their mass over it
            for loc, w in _parse_atoms(pa.get("atoms", "")):
                k = int(np.clip(np.searchsorted(x_hi, loc - 1e-9), 0, len(x_hi) - 1))
                if x_lo[k] - 1e-9 <= loc <= x_hi[k] + 1e-9:
                    rho_ana[k] += w / widths[k]
        sup = float(np.max(np.abs(F_emp - F_ana)))
        l1 = float(np.sum(np.abs(rho_emp - rho_ana) * widths))
    else:
        if pm.get("kind") == "mc":
            s_lo, s_hi = cm["s_lo"], cm["s_hi"]
            edges = np.concatenate([[s_lo[0]], s_hi])
            centers = 0.5 * (s_lo + s_hi)
            F_emp, rho_emp, O_emp = cm["F"], cm["rho"], cm["O"]
            F_ana = _analytic_cdf_radial(pa, ca, s_hi)
        else:
            centers = cm["s"]
            edges = np.concatenate([[centers[0]], 0.5 * (centers[1:] + centers[:-1]), [centers[-1]]])
            F_emp = _analytic_cdf_radial(pm, cm, centers)
            rho_emp, O_emp = cm["rho"], cm["O"]
            F_ana = _analytic_cdf_radial(pa, ca, centers)
        areas = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
        rho_ana = np.interp(centers, ca["s"], ca["rho"], left=0.0, right=0.0)
        O_ana = np.interp(centers, ca["s"], ca["O"], left=0.0, right=0.0)
        sup = float(np.max(np.abs(F_emp - F_ana)))
        l1 = float(np.sum(np.abs(rho_emp - rho_ana) * areas))
        if np.all(np.isfinite(O_emp)):
            s_int = float(pa.get("s_int", 0.0))
            s_ext = float(pa.get("s_ext", ca["s"][-1]))
            overlap_err = overlap_bulk_error(edges, O_emp, O_ana, s_int, s_ext)
            if method == "hl":
                overlap_err = None  # the cyclic-product correlator is not the one of C
    rep = ComparisonReport(
        sup_cdf_error=sup,
        l1_density_error=l1,
        overlap_rel_error_bulk=overlap_err,
        rejected_samples=int(pm.get("rejected", 0)),
        params={"analytic": pa, "empirical": pm},
        tool_version=tool_version(),
        wall_clock=time.perf_counter() - t0,
    )
    return rep
