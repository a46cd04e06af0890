import csv

import pytest

from fracfd.cli import main
from fracfd.config import ConfigError, parse_config

MINIMAL = """
domain.a = 0
domain.b = 1
kernel.s = 0.5      # exponent
physics.m = 0.5
physics.tau = 0.01
physics.n_steps = 4
"""


def test_minimal_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.kernel.constant is None and cfg.make_kernel().constant == 1.0
    assert cfg.solver.quadrature_order == 8
    assert cfg.solver.newton_tol == 1e-10
    assert cfg.kernel.kind == "fractional"


@pytest.mark.parametrize("line,key", [
    ("physics.m = -1", "physics.m"),
    ("kernel.kind = truncated_fractional", "kernel.epsilon"),
    ("physics.bogus = 1", "physics.bogus"),
    ("physics.tau = abc", "physics.tau"),
    ("physics.T = 0.5", "physics.T"),
    ("physics.initial = wave", "physics.initial"),
    ("kernel.s = 1.5", "kernel.s"),
])
def test_rejections_name_the_key(line, key):
    text = MINIMAL.replace(f"{line.split('=')[0].strip()} =", "#") + line + "\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key


def test_T_instead_of_n_steps():
    text = MINIMAL.replace("physics.n_steps = 4", "physics.T = 0.05")
    assert parse_config(text).physics.n_steps == 5


def test_consistent_T_and_n_steps():
    assert parse_config(MINIMAL + "physics.T = 0.04\n").physics.n_steps == 4


def _write(tmp_path, extra=""):
    p = tmp_path / "run.cfg"
    p.write_text(MINIMAL + extra + f"""
output.trajectory = {tmp_path / 'traj.csv'}
output.errors = {tmp_path / 'err.csv'}
output.solution = {tmp_path / 'sol.csv'}
output.matrix = {tmp_path / 'A.txt'}
""")
    return str(p)


def test_simulate_outputs(tmp_path, capsys):
    assert main(["simulate", "--config", _write(tmp_path)]) == 0
    assert "PASS stability" in capsys.readouterr().out
    rows = list(csv.reader(open(tmp_path / "traj.csv")))
    assert rows[0] == ["time", "node_index", "coordinate", "W", "U"]
    assert len(rows) == 1 + 5 * 17
    assert (tmp_path / "A.txt").read_text().startswith("symmetric 15\n")


def test_simulate_zero_steps(tmp_path):
    cfg = _write(tmp_path)
    text = open(cfg).read().replace("physics.n_steps = 4", "physics.n_steps = 0")
    open(cfg, "w").write(text)
    assert main(["simulate", "--config", cfg]) == 0
    rows = list(csv.reader(open(tmp_path / "traj.csv")))
    assert {r[0] for r in rows[1:]} == {"0.0"}


def test_simulate_bit_identical(tmp_path):
    cfg = _write(tmp_path, "physics.initial = random\nphysics.seed = 3\n")
    main(["simulate", "--config", cfg, "--threads", "2"])
    first = (tmp_path / "traj.csv").read_bytes()
    main(["simulate", "--config", cfg])
    assert (tmp_path / "traj.csv").read_bytes() == first


def test_failure_marker(tmp_path):
    cfg = _write(tmp_path, "solver.newton_max_iter = 1\nsolver.newton_tol = 1e-15\n")
    assert main(["simulate", "--config", cfg]) == 2
    assert (tmp_path / "traj.csv").read_text().splitlines()[-1].startswith("FAILED")


def test_elliptic_with_cea(tmp_path, capsys):
    cfg = _write(tmp_path, "domain.n_elements = 8\ndomain.levels = 2\n")
    assert main(["elliptic", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "cea n=8" in out and "PASS" in out
    assert (tmp_path / "sol.csv").read_text().startswith("node_index,coordinate,V,psi_V")


def test_study_space(tmp_path, capsys):
    cfg = _write(tmp_path, "domain.n_elements = 8\ndomain.levels = 2\n"
                           "study.rate_target = 0.5\nstudy.rate_tolerance = 1.0\n")
    assert main(["study", "--config", cfg]) == 0
    lines = (tmp_path / "err.csv").read_text().splitlines()
    assert lines[0] == "level,h,tau,quasi_err,hs_int_err,lmplus1_err,eoc_h,eoc_tau"
    assert len(lines) == 3 and lines[2].split(",")[6] != ""


def test_study_time(tmp_path):
    cfg = _write(tmp_path, "study.kind = time\nstudy.taus = 0.02, 0.01\nstudy.ref_factor = 2\n")
    text = open(cfg).read().replace("physics.tau = 0.01", "physics.tau = 0.02")
    open(cfg, "w").write(text)
    rc = main(["study", "--config", cfg])
    lines = (tmp_path / "err.csv").read_text().splitlines()
    assert rc in (0, 1) and lines[2].split(",")[7] != ""


def test_validate_small(tmp_path, capsys):
    cfg = _write(tmp_path, "validate.sizes = 4\nvalidate.s_values = 0.5\n")
    assert main(["validate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "PASS gradient check" in out and "PASS psi round trip" in out


def test_bad_config_exit(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("physics.m = 0\n")
    assert main(["simulate", "--config", str(p)]) == 2
