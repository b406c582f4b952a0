import csv
import io
import subprocess
import sys

import pytest

from hardycorner import __version__
from hardycorner.cli import (EIGEN_COLUMNS, EVOLVE_COLUMNS, HARDY_COLUMNS, SWEEP_COLUMNS, ConfigError,
                             load_config, main)


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_table(path):
    lines = open(path).read().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.DictReader(ln for ln in lines if not ln.startswith("#")))
    return meta, rows


SMALL = "[grid]\nn = 4000\n"


def test_eigen_critical(tmp_path):
    cfg = write(tmp_path, "[params]\ndim = 3\ncorner = 1\nlam = critical\n" + SMALL)
    out = tmp_path / "eigen.csv"
    assert main(["eigen", "--config", cfg, "--out", str(out)]) == 0
    meta, rows = read_table(out)
    assert list(rows[0]) == EIGEN_COLUMNS
    assert float(rows[0]["mu0_exact"]) == 0.5
    assert float(rows[0]["abs_err"]) < 1e-6
    assert any(__version__ in m for m in meta)
    assert "# [params] lam = critical" in meta
    assert "# [grid] n = 4000" in meta


def test_eigen_oscillator_grid_list(tmp_path):
    cfg = write(tmp_path, "[params]\ndim = 3\ncorner = 0\nlam = 0\n[grid]\nn = 2000, 4000\n")
    out = tmp_path / "e.csv"
    assert main(["eigen", "--config", cfg, "--out", str(out)]) == 0
    _, rows = read_table(out)
    assert [int(r["n_grid"]) for r in rows] == [2000, 4000]
    assert all(abs(float(r["mu0"]) - 0.75) < 1e-4 for r in rows)
    # 17 significant digits
    assert len(rows[0]["mu0"].replace(".", "").lstrip("0")) >= 15


def test_eigen_tolerance_exceeded(tmp_path, capsys):
    cfg = write(tmp_path, "[params]\ndim = 3\ncorner = 0\nlam = 0\n[eigen]\ntol = 1e-14\n" + SMALL)
    assert main(["eigen", "--config", cfg]) == 1
    assert "tolerance exceeded" in capsys.readouterr().err


@pytest.mark.parametrize("text,field", [
    ("[params]\ndim = 3\ncorner = 1\nlam = 9.5\n", "params.lam"),
    ("[params]\ndim = three\n", "params.dim"),
    ("[params]\ndim = 3\ncorner = 5\n", "params.dim/params.corner"),
    ("[grid]\nn = 1\n", "grid"),
    ("[hardy]\neps_list = 0.3\n", "hardy.eps_list"),
    ("[evolve]\ninitial = spiky\n", "evolve.initial"),
    ("[evolve]\ns_end = 3\n", "evolve.s_end"),
    ("[evolve]\nds = 0.03\n", "evolve.every"),
    ("[params]\ncolour = red\n", "params.colour"),
    ("[bogus]\nx = 1\n", "[bogus]"),
    ("not an ini file", "--config"),
])
def test_malformed_config_exit_2(tmp_path, capsys, text, field):
    cfg = write(tmp_path, text)
    assert main(["eigen", "--config", cfg]) == 2
    assert field in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["eigen", "--config", str(tmp_path / "absent.ini")]) == 2
    assert "--config" in capsys.readouterr().err


def test_defaults_materialised(tmp_path):
    echo = load_config(write(tmp_path, "[params]\ndim = 3\n")).echo()
    assert "[evolve] ds = 0.001" in echo and "[grid] r_max = 20.0" in echo


def test_hardy_command(tmp_path):
    cfg = write(tmp_path, "[params]\ndim = 3\ncorner = 1\nlam = critical\n[hardy]\neps_list = 1e-2, 1e-3\n")
    out = tmp_path / "h.csv"
    assert main(["hardy", "--config", cfg, "--out", str(out)]) == 0
    meta, rows = read_table(out)
    assert list(rows[0]) == HARDY_COLUMNS
    assert all(float(r["gap_times_log_eps"]) <= 8 for r in rows)
    assert "# monotone = 1" in meta


def test_evolve_eigen_data(tmp_path):
    # default grid: the bound ratio sees (discrete - exact) mu0 times s
    cfg = write(tmp_path, "[params]\ndim = 3\ncorner = 1\nlam = critical\n[evolve]\ninitial = eigen\ns_end = 4\n")
    out = tmp_path / "ev.csv"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    meta, rows = read_table(out)
    assert list(rows[0]) == EVOLVE_COLUMNS
    assert all(abs(float(r["bound_ratio"]) - 1) < 1e-6 for r in rows)
    assert all(float(r["weighted_bound_ratio"]) <= 1 + 1e-8 for r in rows)
    assert any(m.startswith("# fitted_exponent") for m in meta)


def test_evolve_random_seed_reproducible(tmp_path):
    text = "[params]\ndim = 2\ncorner = 1\nlam = 0.5\n" + SMALL + "[evolve]\ninitial = random\nseed = 7\ns_end = 4\n"
    cfg = write(tmp_path, text)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["evolve", "--config", cfg, "--out", str(a)])
    main(["evolve", "--config", cfg, "--out", str(b)])
    assert a.read_text() == b.read_text()
    assert "# seed = 7" in a.read_text()


def test_sweep_sorted_and_monotone(tmp_path):
    cfg = write(tmp_path, "[sweep]\ndims = 4\ncorners = 2, 0, 1\nlams = 0\nworkers = 2\n" + SMALL +
                "[evolve]\ns_end = 5\n")
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    _, rows = read_table(out)
    assert list(rows[0]) == SWEEP_COLUMNS
    assert [int(r["corner"]) for r in rows] == [0, 1, 2]
    exps = [float(r["fitted_exponent"]) for r in rows]
    assert exps[0] > exps[1] > exps[2]


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "[params]\ndim = 3\ncorner = 0\nlam = 0\n" + SMALL)
    res = subprocess.run([sys.executable, "-m", "hardycorner", "eigen", "--config", cfg],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.startswith("# hardycorner")
    rows = list(csv.DictReader(io.StringIO("\n".join(l for l in res.stdout.splitlines() if not l.startswith("#")))))
    assert float(rows[0]["mu0"]) == pytest.approx(0.75, abs=1e-4)


def test_config_error_type():
    assert issubclass(ConfigError, ValueError)
