import subprocess
import sys
from pathlib import Path

import pytest

from cprojlab.config import (
    ConfigError, parse_config_text, serialize_config,
)
from cprojlab.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "cprojlab.cli", *args],
        capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def test_config_roundtrip():
    text = (CONFIGS / "dini-lift.cfg").read_text()
    cfg = parse_config_text(text)
    assert cfg.kind == "lift"
    assert cfg.opt("grid") == 4
    assert len(cfg.blocks("block")) == 2
    again = parse_config_text(serialize_config(cfg))
    assert again == cfg
    assert parse_config_text(serialize_config(again)) == again


def test_config_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("scenario = lift\nbad line without equals\n")
    with pytest.raises(ConfigError, match="scenario kind"):
        parse_config_text("scenario = nonsense\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("[unterminated\n")


def test_dini_lift_passes(tmp_path):
    code, out, err = run_cli("run", str(CONFIGS / "dini-lift.cfg"),
                             "--report", str(tmp_path / "r.txt"))
    assert code == 0, out + err
    assert "overall=pass" in out
    assert (tmp_path / "r.txt").exists()
    assert out.count("check=") >= 9


def test_seeded_defect_fails_on_domega():
    code, out, err = run_cli("run", str(CONFIGS / "seeded-defect.cfg"))
    assert code == 1
    assert "overall=FAIL" in out
    for line in out.splitlines():
        if "check=domega" in line:
            assert "FAIL" in line
            break
    else:
        pytest.fail("no domega entry in the report")


def test_determinism_byte_identical():
    _, out1, _ = run_cli("run", str(CONFIGS / "dini-pair.cfg"))
    _, out2, _ = run_cli("run", str(CONFIGS / "dini-pair.cfg"))
    strip = lambda s: "\n".join(l for l in s.splitlines()
                                if not l.startswith("# timestamp"))
    assert strip(out1) == strip(out2)


def test_phase_portrait_csv(tmp_path):
    code, out, err = run_cli("run", str(CONFIGS / "phase-portraits.cfg"),
                             "--csv", str(tmp_path))
    assert code == 0, out + err
    files = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert len(files) == 3
    body = (tmp_path / files[0]).read_text().splitlines()
    assert body[0] == "t,re,im"
    assert len(body) > 100
    # floats carry 17 significant digits
    assert any(len(tok) > 12 for tok in body[1].split(","))


def test_only_filter_and_list_checks():
    code, out, _ = run_cli("run", str(CONFIGS / "dini-lift.cfg"),
                           "--only", "J_squared,domega")
    assert code == 0
    names = [l.split()[0] for l in out.splitlines()
             if l.startswith("check=")]
    assert names == ["check=J_squared", "check=domega"]
    code, out, _ = run_cli("run", str(CONFIGS / "dini-lift.cfg"),
                           "--list-checks")
    assert code == 0 and "cproj_compat" in out


def test_tol_scale_flag():
    # scaling tolerances way down turns machine-precision passes into
    # failures, proving the knob reaches the checks
    code, out, _ = run_cli("run", str(CONFIGS / "dini-pair.cfg"),
                           "--tol-scale", "1e-12")
    assert code == 1


def test_grid_and_seed_flags():
    code, out, _ = run_cli("run", str(CONFIGS / "dini-pair.cfg"),
                           "--grid", "3", "--seed", "5")
    assert code == 0
    assert "provenance.seed=5" in out


def test_missing_config_is_reported():
    code, out, err = run_cli("run", "/nonexistent.cfg")
    assert code == 2
    assert "error" in err.lower()


@pytest.mark.parametrize("name", ["complex-pair", "mobility2", "jordan2",
                                  "appendix"])
def test_remaining_scenarios_pass(name):
    code, out, err = run_cli("run", str(CONFIGS / f"{name}.cfg"))
    assert code == 0, out + err
    assert "overall=pass" in out
