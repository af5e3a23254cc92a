import json

import pytest

from kground import cli, solver2d
from kground.config import parse_config
from kground.errors import ConfigError

BASE = "N = 3\nm = 2\np = 4\nR = 2\nweight = constant 1\n"


def test_parse_valid_config():
    cfg = parse_config(BASE)
    assert cfg.spec.N == 3 and cfg.spec.r_max == 27.0
    assert cfg.M == 512 and cfg.J == 64 and cfg.tol == 1e-7


def test_parse_defaults_and_ranges():
    cfg = parse_config("N = 3\nm = 2\np = 7  # supercritical in R^3 but fine here\n"
                       "sweep.R = 1:2:3\nsweep.p = 3, 4\n")
    assert cfg.spec.R == 1.0 and cfg.spec.subcritical
    assert cfg.sweep_R == [1.0, 1.5, 2.0] and cfg.sweep_p == [3.0, 4.0]


@pytest.mark.parametrize("text,line", [
    ("N = 3\nm = 1\np = 4\n", 2),
    ("N = 3\nm = 2\np = four\n", 3),
    ("N = 3\nm = 2\np = 4\nbogus = 1\n", 4),
    ("N = 3\nm = 2\np = 4\nweight = separable 1 0 -1\n", 4),
    ("N = 3\nm = 2\np = 4\nN = 4\n", 4),
    ("N = 3\njust words\n", 2),
])
def test_config_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_missing_required():
    with pytest.raises(ConfigError, match="missing"):
        parse_config("N = 3\nm = 2\n")


def test_domain_and_tabulated_weight():
    cfg = parse_config("N = 3\nm = 2\np = 4\nR = 1\ndomain = double-revolution 0.5 1\n"
                       "weight = tabulated-radial 0 1 10 2\n")
    assert cfg.spec.domain.kind == "double-revolution"
    assert cfg.spec.weight(5.0) == pytest.approx(1.5)


def run(tmp_path, sub, text=BASE, extra=()):
    cfgp = tmp_path / "run.cfg"
    cfgp.write_text(text)
    out = tmp_path / "out"
    code = cli.main([sub, "--config", str(cfgp), "--out", str(out), "--grid", "64x8", *extra])
    return code, out


def test_check_conditions(tmp_path, capsys):
    code, out = run(tmp_path, "check-conditions", "N = 3\nm = 2\np = 26\nR = 0.5\n")
    assert code == 0
    data = json.loads((out / "conditions.json").read_text())
    assert data["multiplicity"] == 2 and data["admissible_m"] == [2]
    assert "solutions=2" in capsys.readouterr().out


def test_analyze(tmp_path):
    code, out = run(tmp_path, "analyze")
    data = json.loads((out / "analyze.json").read_text())
    assert code == 0 and data["predicted_nonradial"] is True
    for key in ("config_hash", "grid_M", "grid_J", "solver_tol"):
        assert key in data


def test_radial_command(tmp_path):
    code, out = run(tmp_path, "radial")
    assert code == 0 and (out / "radial_profile.txt").exists()
    assert json.loads((out / "radial_report.json").read_text())["nehari_residual"] < 1e-8


def test_solve2d_deterministic_and_round_trip(tmp_path):
    code, out = run(tmp_path, "solve2d")
    assert code == 0
    first = (out / "field.txt").read_bytes()
    code, out = run(tmp_path, "solve2d")
    assert (out / "field.txt").read_bytes() == first
    fld, header = solver2d.read_field(out / "field.txt")
    assert header["M"] == 64 and header["J"] == 8
    rep = json.loads((out / "solve2d.json").read_text())
    assert rep["grid_M"] == 64 and rep["converged"] is True


def test_solve2d_nonconvergence_exit_code(tmp_path):
    code, out = run(tmp_path, "solve2d", BASE + "solver.max_iter = 1\n")
    assert code == 2
    assert (out / "solve2d.json").exists()


def test_config_error_exit_code(tmp_path):
    code, _ = run(tmp_path, "radial", "N = 3\nm = 1\np = 4\n")
    assert code == 1


def test_family_and_sweep(tmp_path):
    code, out = run(tmp_path, "family", extra=("--seed", "3"))
    assert code == 0
    fam = json.loads((out / "family.json").read_text())
    assert fam["multiplicity"] == 2
    text = BASE + "sweep.R = 1.5, 2\nsweep.p = 4\n"
    code, out = run(tmp_path, "sweep", text, extra=("--jobs", "1"))
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0].split(",") == list(cli.SWEEP_COLUMNS)
    assert len(rows) == 3 and all(r.endswith(",ok") for r in rows[1:])


def test_sweep_help_lists_columns(capsys):
    with pytest.raises(SystemExit):
        cli.main(["sweep", "--help"])
    text = capsys.readouterr().out
    for col in cli.SWEEP_COLUMNS:
        assert col in text
