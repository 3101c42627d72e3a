import json
import math
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagspec import cli, formats, mc
from lagspec.qgreen import nilpotent_shift

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def run(*argv):
    return cli.main([str(a) for a in argv])


# ---------------------------------------------------------------------------
# formats
# ---------------------------------------------------------------------------

def test_csv_layout(tmp_path):
    p = tmp_path / "c.csv"
    formats.write_curve(p, {"s": [0.0, 0.5], "F": [0.1, 1 / 3], "rho": [1, 2], "O": [0, 0]}, {"method": "unit", "r": 0.5})
    lines = p.read_text().splitlines()
    assert lines[:2] == ["# method=unit", "# r=0.5"]
    assert lines[2] == "s,F,rho,O"
    assert lines[4].split(",")[1] == "0.33333333333333331"


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_curve_roundtrip_csv_and_json(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("rt")
    a = np.array(rows)
    cols = {"lambda": a[:, 0], "rho": a[:, 1]}
    params = {"method": "sym", "r": 0.25, "atoms": ""}
    for fmt in ("csv", "json"):
        p = d / f"c.{fmt}"
        formats.write_curve(p, cols, params, fmt)
        got_params, got = formats.read_curve(p)
        assert got_params["method"] == "sym" and got_params["r"] == 0.25
        np.testing.assert_array_equal(got["lambda"], cols["lambda"])
        np.testing.assert_array_equal(got["rho"], cols["rho"])


def test_json_schema_field(tmp_path):
    p = tmp_path / "c.json"
    formats.write_curve(p, {"beta": [0.5], "s_ext": [1.0]}, {"r": 0.5}, "json")
    assert json.loads(p.read_text())["schema"] == 1


@given(st.lists(st.tuples(finite, finite), min_size=4, max_size=4))
def test_matrix_roundtrip(tmp_path_factory, entries):
    p = tmp_path_factory.mktemp("m") / "a.txt"
    A = np.array([complex(a, b) for a, b in entries]).reshape(2, 2)
    formats.write_matrix(p, A)
    assert p.read_text().startswith("T=2\n")
    np.testing.assert_array_equal(formats.read_matrix(p), A)


def test_matrix_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("T=2\n1+0j,2+0j\n")
    with pytest.raises(formats.FormatError):
        formats.read_matrix(p)
    p.write_text("1+0j\n")
    with pytest.raises(formats.FormatError):
        formats.read_matrix(p)


def test_raw_records_roundtrip(tmp_path):
    s0 = mc.SpectrumSample(np.array([1 + 2j, -0.5j]), np.array([1.5, 2.0]), 0)
    s1 = mc.SpectrumSample(np.array([3.0 + 0j]), np.array([1.0]), 1, accepted=False)
    p = tmp_path / "raw.csv"
    formats.write_raw_records(p, [s0, s1])
    assert p.read_text().splitlines()[0] == "sample,re,im,O_ii"
    idx, lam, ov = formats.read_raw_records(p)
    np.testing.assert_array_equal(idx, [0, 0])
    np.testing.assert_array_equal(lam, s0.eigenvalues)
    np.testing.assert_array_equal(ov, s0.overlaps)


def test_atomic_write_leaves_no_partial_file(tmp_path):
    p = tmp_path / "out.csv"
    p.write_text("old\n")

    class Boom:
        def __array__(self, *a, **k):
            raise RuntimeError("fail mid-write")

    with pytest.raises(RuntimeError):
        formats.write_curve(p, {"s": Boom()}, {})
    assert p.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["out.csv"]


def test_report_roundtrip():
    rep = formats.ComparisonReport(0.01, 0.02, 0.05, 1, {"r": 0.5}, "0.1.0", 1.5)
    back = formats.ComparisonReport.from_json(rep.to_json())
    assert back == rep


def test_overlap_bulk_error_excludes_edges():
    edges = np.linspace(0, 1, 11)
    ana = np.ones(10)
    emp = ana.copy()
    emp[[0, 9]] = 100.0
    assert formats.overlap_bulk_error(edges, emp, ana, 0.0, 1.0) == 0.0


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("grid", ["5:1:10", "0:1", "a:b:3", "0:1:1"])
def test_bad_grid_is_usage_error(tmp_path, grid, capsys):
    assert run("analytic", "--method", "unit", "--r", 1, f"--grid={grid}", "--out", tmp_path / "x.csv") == 2
    assert "grid" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_analytic_unit_half_mass_row(tmp_path):
    out = tmp_path / "u.csv"
    assert run("analytic", "--method", "unit", "--r", 1, "--grid", "0:1.5:300", "--out", out) == 0
    params, cols = formats.read_curve(out)
    assert list(cols) == ["s", "F", "rho", "O"]
    k = np.argmin(np.abs(cols["s"] - 1 / math.sqrt(3)))
    assert cols["F"][k] == pytest.approx(0.5, abs=5e-3)


def test_analytic_cyclic_first_support_row(tmp_path):
    out = tmp_path / "h.csv"
    assert run("analytic", "--method", "hl", "--r", 2, "--grid", "0:3:301", "--out", out) == 0
    params, cols = formats.read_curve(out)
    first = cols["s"][np.argmax(cols["rho"] > 0)]
    assert first == pytest.approx(1 / math.sqrt(2), abs=0.011)
    assert params["convention"] == "T"


def test_analytic_real_line_columns(tmp_path):
    out = tmp_path / "w.json"
    assert run("analytic", "--method", "whiten", "--r", 0.75, "--grid", "0:1:51", "--out", out, "--format", "json") == 0
    params, cols = formats.read_curve(out)
    assert list(cols) == ["lambda", "rho"]
    assert params["atoms"].startswith("1:")


def test_deep_requires_beta_and_sandwich_requires_matrix(tmp_path):
    assert run("analytic", "--method", "deep", "--r", 0.5, "--grid", "0:1:5", "--out", tmp_path / "d.csv") == 2
    assert run("analytic", "--method", "sandwich", "--r", 0.5, "--grid", "0.1:1:5", "--out", tmp_path / "s.csv") == 2


def test_sandwich_cli_matches_unit_lag(tmp_path):
    T = 48
    mat = tmp_path / "d.txt"
    formats.write_matrix(mat, nilpotent_shift(T, 1) * T / (T - 1))
    out = tmp_path / "s.csv"
    assert run("analytic", "--method", "sandwich", "--matrix", mat, "--r", 0.5, "--grid", "0.3:0.6:2", "--out", out) == 0
    _, cols = formats.read_curve(out)
    from lagspec.lag2d import unit_lag_cdf

    np.testing.assert_allclose(cols["F"], unit_lag_cdf(cols["s"], 0.5), atol=0.01)


def test_radius_command(tmp_path):
    out = tmp_path / "r.csv"
    assert run("radius", "--r", 0.5, "--grid", "0.001:0.5:500", "--out", out) == 0
    _, cols = formats.read_curve(out)
    assert list(cols) == ["beta", "s_ext"]
    assert cols["s_ext"][0] == pytest.approx(math.sqrt(0.75), abs=1e-2)
    assert cols["s_ext"][-1] == 1.0
    assert run("radius", "--r", 0.5, "--grid", "0:1:5", "--out", out) == 2


def test_mc_command_deterministic_and_radius_bound(tmp_path):
    args = ["mc", "--variant", "lagged_nilpotent", "--n", 256, "--r", 0.5, "--tau", 1, "--samples", 10, "--seed", 7]
    a, b, raw = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "raw.csv"
    assert run(*args, "--out", a, "--raw", raw) == 0
    assert run(*args, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    _, lam, ov = formats.read_raw_records(raw)
    assert np.mean(np.abs(lam) <= 1.05 * math.sqrt(0.75)) >= 0.99
    assert np.all(ov >= 1 - 1e-9)


def test_mc_usage_and_numerical_errors(tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert run("mc", "--variant", "lagged_nilpotent", "--n", 8, "--t", 16, "--tau", 16, "--out", out) == 2
    assert run("mc", "--variant", "whitened_square", "--n", 16, "--t", 8, "--tau", 1, "--samples", 1, "--out", out) == 3
    assert "N < T" in capsys.readouterr().err


def test_compare_identical_mismatched_and_mc(tmp_path, capsys):
    ana = tmp_path / "a.csv"
    assert run("analytic", "--method", "unit", "--r", 0.5, "--grid", "0:1:400", "--out", ana) == 0
    rep = tmp_path / "rep.json"
    assert run("compare", ana, ana, "--out", rep) == 0
    r = formats.ComparisonReport.from_json(rep.read_text())
    assert r.sup_cdf_error == 0 and r.l1_density_error == 0 and r.overlap_rel_error_bulk == 0

    other = tmp_path / "b.csv"
    assert run("analytic", "--method", "unit", "--r", 0.25, "--grid", "0:1:400", "--out", other) == 0
    assert run("compare", ana, other) == 2
    assert "r:" in capsys.readouterr().err

    emp = tmp_path / "m.csv"
    assert run("mc", "--variant", "lagged_nilpotent", "--n", 128, "--r", 0.5, "--samples", 10, "--out", emp) == 0
    assert run("compare", ana, emp, "--out", rep) == 0
    r = formats.ComparisonReport.from_json(rep.read_text())
    assert 0 < r.sup_cdf_error < 0.05 and r.rejected_samples == 0


def test_missing_input_is_io_error(tmp_path):
    assert run("compare", tmp_path / "nope.csv", tmp_path / "nope2.csv") == 4
