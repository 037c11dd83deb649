"""Command line front end: config parsing, CSV output, exit codes."""

from __future__ import annotations

import numpy as np
import pytest

from dgflow.cli import main, parse_config, UsageError


def _run(tmp_path, name, body, *extra):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(body)
    return main([name.split("_")[0], "--config", str(cfg),
                 "--out", str(tmp_path), *extra])


def _read_csv(path):
    meta, header, rows = {}, None, []
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(" = ")
            meta[k] = v
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return meta, header, rows


CONVERGE = """[problem]
name = translate1d

[converge]
degrees = 1
sizes = 4, 8
t_end = 0.1
cfl = 0.3
scheme = rk4
"""

GROWTH = """[problem]
name = translate1d

[growth]
p = 1
n = 8
t_end = 1.0
samples = 4
"""

MU = """[problem]
name = stretch1d

[mu]
gamma0 = 0.5
n_space = 8
n_time = 6
t_max = 2.0
"""


def test_usage_exit_codes(tmp_path):
    assert main([]) == 1
    assert main(["frobnicate", "--config", "x"]) == 1
    assert main(["--help"]) == 0
    assert main(["converge", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_config_parser_rejects_unknown_sections_and_keys():
    with pytest.raises(UsageError) as err:
        parse_config("[bogus]\nx = 1\n")
    assert "bogus" in str(err.value)
    with pytest.raises(UsageError) as err:
        parse_config("[problem]\nwhatever = 1\n")
    assert "whatever" in str(err.value)
    with pytest.raises(UsageError) as err:
        parse_config("[problem]\nname = a\nname = b\n")
    assert "line 3" in str(err.value)
    with pytest.raises(UsageError):
        parse_config("stray = 1\n")


def test_converge_writes_schema_and_echoes_config(tmp_path):
    assert _run(tmp_path, "converge", CONVERGE) == 0
    meta, header, rows = _read_csv(tmp_path / "converge.csv")
    assert header == ["problem", "p", "n", "h", "linf_l2", "l2_l2",
                      "face_int", "eoc_linf", "eoc_l2", "flags"]
    assert len(rows) == 2
    assert meta["problem.name"] == "translate1d"
    assert meta["converge.cfl"] == "0.29999999999999999"
    assert meta["converge.scheme"] == "rk4"
    # metadata keys are sorted
    keys = [ln[2:].split(" = ")[0]
            for ln in (tmp_path / "converge.csv").read_text().splitlines()
            if ln.startswith("# ")]
    assert keys == sorted(keys)
    # second row carries an observed order near 2
    assert 1.5 <= float(rows[1][7]) <= 2.5


def test_converge_is_byte_deterministic(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    for d in (d1, d2):
        d.mkdir()
        cfg = d / "c.cfg"
        cfg.write_text(CONVERGE + "deterministic = true\n")
        assert main(["converge", "--config", str(cfg), "--out", str(d)]) == 0
    assert (d1 / "converge.csv").read_bytes() == (d2 / "converge.csv").read_bytes()


def test_converge_zero_solution_flags_noise_floor(tmp_path):
    body = """[problem]
domain = 0, 1
a = 1
c = 0
u0 = 0
u_D = 0
div_a = 0

[converge]
degrees = 1
sizes = 4, 8
t_end = 0.1
"""
    assert _run(tmp_path, "converge", body) == 0
    meta, header, rows = _read_csv(tmp_path / "converge.csv")
    assert all(float(r[4]) <= 1e-13 for r in rows)
    assert "noise_floor" in rows[1][9]


def test_converge_assert_order_gate(tmp_path):
    assert _run(tmp_path, "converge", CONVERGE + "assert_order = 1.5\n",
                "--assert") == 0
    assert _run(tmp_path, "converge", CONVERGE + "assert_order = 9.0\n",
                "--assert") == 3


def test_converge_instability_exits_two(tmp_path):
    body = """[problem]
domain = 0, 1
a = 1
c = -100
u0 = sin(pi*x)
u_D = 0
div_a = 0

[converge]
degrees = 1
sizes = 4
t_end = 10.0
"""
    assert _run(tmp_path, "converge", body) == 2


def test_growth_reports_ratio_and_gronwall(tmp_path):
    assert _run(tmp_path, "growth", GROWTH) == 0
    meta, header, rows = _read_csv(tmp_path / "growth.csv")
    assert header == ["t", "l2_error", "jump_sq", "boundary_sq",
                      "linf_l2", "l2_l2", "face_int"]
    assert len(rows) == 5  # t = 0 plus 4 samples
    assert float(meta["gronwall_rate"]) == pytest.approx(0.0)
    assert float(meta["growth_ratio"]) > 0.0
    assert "t_hat" in meta
    ts = [float(r[0]) for r in rows]
    assert ts == sorted(ts)


def test_growth_assert_ratio_gate(tmp_path):
    assert _run(tmp_path, "growth", GROWTH + "assert_ratio = 1e-9\n",
                "--assert") == 3


def test_mu_grid_and_diagnostics(tmp_path):
    assert _run(tmp_path, "mu", MU) == 0
    meta, header, rows = _read_csv(tmp_path / "mu.csv")
    assert header == ["x", "t", "mu1", "kind", "t0", "x0", "status"]
    assert len(rows) == 8 * 6
    # a = x + 1 has div a = 1, so c - div(a)/2 dips to -1/2 and the
    # scaling rate is 1/2 + gamma0 = 1
    assert float(meta["lambda"]) == pytest.approx(1.0, abs=1e-12)
    assert float(meta["t_hat"]) == pytest.approx(np.log(2.0), abs=1e-6)
    assert meta["possibly_unbounded"] == "false"
    assert float(meta["margin"]) >= 0.499
    kinds = {r[3] for r in rows}
    assert kinds <= {"initial", "inlet"}
    assert {"initial", "inlet"} <= kinds
    statuses = {r[6] for r in rows}
    assert statuses == {"ok"}


def test_mu_assert_bounded_gate(tmp_path):
    body = """[problem]
domain = 0, 1, 0, 1
a_x = 0.5 - y
a_y = x - 0.5
c = 0
u0 = 0
u_D = 0
div_a = 0

[mu]
gamma0 = 0.5
n_space = 6
n_time = 4
t_max = 3.0
assert_bounded = true
"""
    assert _run(tmp_path, "mu", body, "--assert") == 3


def test_pathline_report(tmp_path, capsys):
    body = """[problem]
name = stretch1d

[pathline]
x = 0.5
t = 10.0
"""
    assert _run(tmp_path, "pathline", body) == 0
    out = capsys.readouterr().out
    assert "inlet" in out
    meta, header, rows = _read_csv(tmp_path / "pathline.csv")
    assert header[0] == "t"
    ts = [float(r[0]) for r in rows]
    assert ts == sorted(ts)
    assert float(meta["mu1"]) == pytest.approx(np.log(1.5), abs=1e-6)


def test_pathline_dimension_mismatch(tmp_path):
    body = """[problem]
name = stretch1d

[pathline]
x = 0.5, 0.5
t = 1.0
"""
    assert _run(tmp_path, "pathline", body) == 1


def test_ellipticity_variants(tmp_path, capsys):
    body = """[problem]
name = negdiv1d

[ellipticity]
gamma0 = 0.5
n_space = 10
n_time = 6
t_max = 2.0
"""
    assert _run(tmp_path, "ellipticity", body) == 0
    out = capsys.readouterr().out
    meta, header, rows = _read_csv(tmp_path / "ellipticity.csv")
    variants = {r[0] for r in rows}
    assert variants == {"zero", "linear_time", "pathline"}
    by = {r[0]: float(r[1]) for r in rows}
    assert by["zero"] == pytest.approx(-0.5, abs=1e-10)
    assert by["linear_time"] == pytest.approx(0.5, abs=1e-8)
    assert by["pathline"] >= 0.499


def test_inline_problem_rejects_y_in_one_dimension(tmp_path):
    body = """[problem]
domain = 0, 1
a = 1 + y
c = 0
u0 = 0
u_D = 0

[converge]
degrees = 1
sizes = 4
t_end = 0.1
"""
    assert _run(tmp_path, "converge", body) == 1


def test_inline_problem_rejects_t_in_initial_data(tmp_path):
    body = """[problem]
domain = 0, 1
a = 1
c = 0
u0 = t
u_D = 0

[converge]
degrees = 1
sizes = 4
t_end = 0.1
"""
    assert _run(tmp_path, "converge", body) == 1


def test_inline_2d_problem_runs(tmp_path):
    body = """[problem]
domain = 0, 1, 0, 1
a_x = 1
a_y = 0
c = 0
u0 = 0
u_D = 0
div_a = 0

[converge]
degrees = 0
sizes = 2
t_end = 0.05
pattern = crisscross
"""
    assert _run(tmp_path, "converge", body) == 0
    meta, header, rows = _read_csv(tmp_path / "converge.csv")
    assert meta["dim"] == "2"
    assert meta["problem.domain"] == "0,1,0,1"
    assert len(rows) == 1
