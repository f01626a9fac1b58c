import subprocess
import sys

import pytest

from gate_thermo.harness.cli import EXIT_VIOLATION, _strict_violations, main


def test_simulate_prints_report(capsys):
    assert main(["simulate", "--gate", "cz", "--tau", "5", "--steps", "200", "--samples", "20"]) == 0
    out = capsys.readouterr().out
    assert "F_exact" in out and "eq7" in out and "holds" in out


def test_simulate_theta_expression(capsys):
    assert main(["simulate", "--gate", "xtheta", "--theta", "pi/4", "--tau", "5", "--steps", "100",
                 "--samples", "10"]) == 0
    assert "eq8_effective" in capsys.readouterr().out


def test_sweep_requires_config():
    with pytest.raises(SystemExit):
        main(["sweep"])


def test_sweep_from_config(tmp_path, capsys):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("gate:\n  name: cz\nsweep:\n  tau_us: [2, 4]\n  steps: 100\n  samples: 10\n"
                   "  fidelity_samples: 100\noutput:\n  csv: out.csv\n  svg: out.svg\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "9"]) == 0
    text = (tmp_path / "o" / "out.csv").read_text()
    assert text.splitlines()[1].endswith(",9")
    assert (tmp_path / "o" / "out.svg").exists()


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("gate:\n  colour: red\n")
    assert main(["sweep", "--config", str(cfg)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_strict_flags_band_excused_margins():
    from gate_thermo.bounds import BoundResult
    from gate_thermo.harness.sweep import PointResult
    b = BoundResult("eq5", 0.99, 1.0, -0.01, 0.05, 1e-6, "eq5")
    assert b.holds
    res = PointResult({}, {"eq5": b}, "bare")
    assert len(_strict_violations([res])) == 1
    assert EXIT_VIOLATION != 0


def test_module_entry_point_selftest():
    out = subprocess.run([sys.executable, "-m", "gate_thermo", "selftest"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "checks passed" in out.stdout
