import json
import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from cuspwinding.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, UsageError, parse_grid, render, run
from cuspwinding.moebius import rotation
from cuspwinding.schottky import GroupPresentation, preset, serialize

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# grids

def test_parse_grid_examples():
    assert parse_grid("1:3:1") == [(1.0,), (2.0,), (3.0,)]
    assert parse_grid("1:2:1x1:2:1") == [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0)]
    assert parse_grid("0.5:0.5:0.5") == [(0.5,)]


def test_parse_grid_inclusive_with_rounding():
    pts = parse_grid("0.5:8:0.5")
    assert len(pts) == 16 and pts[-1][0] == pytest.approx(8.0)
    assert len(parse_grid("0.05:0.95:0.05")) == 19
    # a step that does not divide the span stops short
    assert parse_grid("0:1:0.3")[-1][0] == pytest.approx(0.9)


@pytest.mark.parametrize("spec", ["1:0:1", "1:2:0", "1:2:-1", "1:2", "a:b:c", "1:2:1x"])
def test_parse_grid_errors(spec):
    with pytest.raises(UsageError):
        parse_grid(spec)


@given(st.integers(0, 50), st.integers(1, 40), st.integers(1, 9))
def test_parse_grid_counts(start, span, step):
    spec = f"{start}:{start + span}:{step}"
    pts = parse_grid(spec)
    assert len(pts) == span // step + 1
    assert pts[0] == (float(start),)


# formats

def test_csv_format():
    text = render(["x", "n", "ok"], [[0.1, 3, True]], "csv")
    assert text == "x,n,ok\n0.10000000000000001,3,true\n"


def test_json_format():
    text = render(["x", "y"], [[1.5, math.nan]], "json")
    assert json.loads(text) == [{"x": 1.5, "y": None}]


# commands

def test_validate_ok(capsys):
    code, out, _ = call(capsys, "validate", "--config", str(CONFIGS / "one_cusp.json"))
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "RESULT pass"


def test_validate_failure(capsys, tmp_path):
    p = preset("one_cusp")
    bad = GroupPresentation((rotation(0.5, "g1"),), p.hyperbolics)
    f = tmp_path / "bad.json"
    f.write_text(serialize(bad))
    code, out, _ = call(capsys, "validate", "--config", str(f))
    assert code == EXIT_INVALID
    assert "FAIL classify g1" in out
    code, _, err = call(capsys, "dim", "--config", str(f))
    assert code == EXIT_INVALID and "invalid presentation" in err


def test_dim_row(capsys):
    code, out, _ = call(capsys, "dim", "--config", "preset:one_cusp", "--L", "25", "--tol", "1e-10")
    assert code == EXIT_OK
    header, row, *rest = out.splitlines()
    assert header == "s,low,high,L,residual" and not rest
    s, low, high, L, res = row.split(",")
    assert 0.5 < float(s) < 1 and float(low) <= float(s) <= float(high) and L == "25"


def test_pressure_command(capsys):
    code, out, _ = call(capsys, "pressure", "--config", "preset:one_cusp", "--L", "3", "--q", "0", "--b", "0", "--no-tail")
    assert code == EXIT_OK
    header, row = out.splitlines()
    assert header == "value,distortion_bound,L,iterations,converged"
    assert float(row.split(",")[0]) == pytest.approx(math.log(13), abs=1e-13)


def test_pressure_outside_region(capsys):
    code, _, err = call(capsys, "pressure", "--config", "preset:one_cusp", "--L", "3", "--q", "0", "--b", "0")
    assert code == EXIT_USAGE and "infinite" in err


def test_spectrum_header(capsys):
    code, out, _ = call(capsys, "spectrum", "--config", "preset:two_cusp", "--L", "10", "--alpha", "1,1")
    assert code == EXIT_OK
    header = out.splitlines()[0]
    assert header == "alpha_1,alpha_2,q_1,q_2,b,residual_p,residual_grad_max,lambda,entropy,L,iters"


def test_spectrum_grid_json(capsys):
    code, out, _ = call(capsys, "spectrum", "--config", "preset:one_cusp", "--L", "20",
                        "--alpha-grid", "1:2:1", "--format", "json")
    assert code == EXIT_OK
    recs = json.loads(out)
    assert [r["alpha_1"] for r in recs] == [1.0, 2.0]
    assert recs[0]["b"] < recs[1]["b"]
    assert all(r["residual_grad_max"] < 1e-10 for r in recs)


def test_spectrum_failure_exit(capsys):
    code, out, err = call(capsys, "spectrum", "--config", "preset:one_cusp", "--L", "20", "--alpha", "-1")
    assert code == EXIT_NUMERIC
    assert "nan" in out.splitlines()[1] and "failed" in err


def test_distortion_command(capsys):
    code, out, _ = call(capsys, "distortion", "--config", "preset:one_cusp", "--l-range", "20:200")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "cusp,sign,slope,intercept" and len(lines) == 3
    assert all(abs(float(r.split(",")[2]) - 2) < 0.05 for r in lines[1:])


def test_oracle_command(capsys):
    code, out, _ = call(capsys, "oracle", "--config", "preset:one_cusp", "--L", "20", "--alpha", "2",
                        "--q-grid", "0.05:1:0.05", "--b-grid", "0.2:0.5:0.05")
    assert code == EXIT_OK
    header, row = out.splitlines()
    assert header == "b_low,b_high,b_star,q_1,min_low,min_high"
    vals = [float(x) for x in row.split(",")]
    assert vals[0] <= vals[2] <= vals[1]


def test_byte_identical_output(capsys, tmp_path):
    outs = []
    for k in range(2):
        f = tmp_path / f"run{k}.csv"
        code, _, _ = call(capsys, "spectrum", "--config", "preset:one_cusp", "--L", "20",
                          "--alpha-grid", "0.5:1.5:0.5", "--out", str(f))
        assert code == EXIT_OK
        outs.append(f.read_bytes())
    assert outs[0] == outs[1]
    assert b"\r" not in outs[0] and outs[0].endswith(b"\n")


# usage errors

@pytest.mark.parametrize("argv", [
    ["frobnicate", "--config", "preset:one_cusp"],
    ["dim"],
    ["dim", "--config", "preset:one_cusp", "--L", "0"],
    ["dim", "--config", "preset:one_cusp", "--L", "x"],
    ["pressure", "--config", "preset:one_cusp", "--b", "0.7"],
    ["pressure", "--config", "preset:two_cusp", "--q", "1", "--b", "0.7"],
    ["spectrum", "--config", "preset:one_cusp"],
    ["spectrum", "--config", "preset:two_cusp", "--alpha-grid", "1:2:1"],
    ["spectrum", "--config", "preset:one_cusp", "--alpha-grid", "2:1:1"],
    ["dim", "--config", "preset:nowhere"],
    ["dim", "--config", "/nonexistent/config.json"],
])
def test_usage_errors(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code in (EXIT_USAGE, EXIT_INVALID)
    assert out == ""
    assert len(err.strip().splitlines()) == 1


def test_unknown_preset_is_invalid(capsys):
    code, _, _ = call(capsys, "dim", "--config", "preset:nowhere")
    assert code == EXIT_INVALID


def test_missing_file_is_usage(capsys):
    code, _, _ = call(capsys, "dim", "--config", "/nonexistent/config.json")
    assert code == EXIT_USAGE
