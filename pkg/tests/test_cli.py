import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st

from qfi_broadcast import __version__
from qfi_broadcast.cli import main
from qfi_broadcast.errors import ConfigError, NotProductOutput
from qfi_broadcast.experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    RunReport,
    load_config,
    resolve_seed,
    run,
    set_path,
    sweep,
)
from qfi_broadcast.families import builtin_equatorial
from qfi_broadcast.fisher import derivative

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _cfg(**kw):
    base = {"family": "equatorial", "grid": {"start": 0.1, "stop": 3.0, "count": 5}, "checks": ["qfi"]}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def _strip_time(d):
    d = dict(d)
    d.pop("wall_time")
    return d


def _spawn(*args, env=None):
    return subprocess.run([sys.executable, "-m", "qfi_broadcast", *args], capture_output=True, text=True,
                          env={**os.environ, **(env or {})}, timeout=300)


def test_config_errors_carry_field_and_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("family: equatorial\ngrid: {start: 0, stop: 1, count: 0}\nchecks: [qfi]\n")
    with pytest.raises(ConfigError, match=r"grid.count \(line 2\)"):
        load_config(str(p))
    p.write_text("family:\n  name: nosuch\nchecks: [qfi]\n")
    with pytest.raises(ConfigError, match=r"family.name \(line 2\).*nosuch"):
        load_config(str(p))
    with pytest.raises(ConfigError, match="unknown check"):
        _cfg(checks=["bogus"])
    with pytest.raises(ConfigError, match="grid.stop"):
        _cfg(grid={"start": 1.0, "stop": 0.5, "count": 3})
    with pytest.raises(ConfigError, match="unknown config key"):
        _cfg(colour="blue")


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv("QFI_BROADCAST_SEED", "5")
    assert resolve_seed(None, None) == 5
    assert resolve_seed(3, None) == 3
    assert resolve_seed(3, 9) == 9
    monkeypatch.delenv("QFI_BROADCAST_SEED")
    assert resolve_seed(None, None) == 0


def test_run_equatorial_qfi():
    rep = run(_cfg(checks=[{"name": "qfi", "expect_value": 1.0, "atol": 1e-9}]))
    assert rep.passed
    assert rep.checks[0].values["max_error"] < 1e-9
    assert rep.version == __version__


def test_report_round_trip():
    rep = run(_cfg(channel="hadamard_cnot", checks=["broadcast", "sld_lift", "commutativity"]))
    again = RunReport.from_json(rep.to_json())
    assert again == rep
    assert again.to_json() == rep.to_json()


@given(st.integers(0, 2**31))
def test_estimate_reports_deterministic(seed):
    cfg = _cfg(grid=[1.0], checks=[{"name": "estimate", "theta_true": 1.0, "n_samples": 50,
                                    "n_trials": 10, "window": 1.5}])
    a, b = run(cfg, seed=seed), run(cfg, seed=seed)
    assert json.dumps(_strip_time(a.to_dict()), sort_keys=True) == json.dumps(_strip_time(b.to_dict()), sort_keys=True)
    assert a.seed == seed


def test_jobs_do_not_change_results():
    cfg = _cfg(grid={"start": 0.1, "stop": 3.0, "count": 16}, channel="hadamard_cnot",
               checks=["qfi", "sld_lift", "commutativity"])
    assert _strip_time(run(cfg, jobs=4).to_dict()) == _strip_time(run(cfg, jobs=1).to_dict())


def test_in_band_failures_and_strict():
    cfg = _cfg(checks=["no_cloning"], channel="hadamard_cnot")
    rep = run(cfg)
    assert not rep.passed
    assert rep.checks[0].verdict == "NotProductOutput"
    with pytest.raises(NotProductOutput):
        run(cfg, strict=True)


def test_expected_negative_verdict_passes():
    cfg = ExperimentConfig.from_dict({
        "family": "piecewise_xyz",
        "grid": {"start": -np.pi / 2, "stop": np.pi / 2, "count": 25},
        "checks": [{"name": "uniform", "expect": "NotUniform"}],
    })
    rep = run(cfg)
    assert rep.passed
    assert 0.0 in rep.excluded_thetas


def test_sweep_infinite_broadcast():
    cfg = _cfg(grid={"start": 0.1, "stop": 3.0, "count": 10},
               channel={"name": "infinite_broadcast", "n_parties": 2}, checks=["broadcast"])
    reps = sweep(cfg, "channel.n_parties", [2, 3, 4], jobs=3)
    assert [r.checks[0].verdict for r in reps] == ["Broadcast"] * 3
    assert [r.config["channel"]["n_parties"] for r in reps] == [2, 3, 4]


def test_sweep_grid_density_leaves_qfi_unchanged():
    reps = sweep(_cfg(), "grid.count", [5, 9, 17])
    for r in reps:
        assert max(abs(v - 1.0) for v in r.checks[0].values["qfi"]) < 1e-9


def test_set_path_into_lists():
    data = {"checks": [{"name": "estimate", "n_samples": 10}]}
    assert set_path(data, "checks.0.n_samples", 100)["checks"][0]["n_samples"] == 100
    assert data["checks"][0]["n_samples"] == 10
    with pytest.raises(ConfigError):
        set_path(data, "checks.5.n_samples", 1)


def test_file_family(tmp_path):
    f = builtin_equatorial()
    thetas = np.linspace(0.1, 3.0, 7)
    np.savez(tmp_path / "eq.npz", thetas=thetas, states=np.stack([f.state_at(t).mat for t in thetas]),
             derivatives=np.stack([derivative(f, t) for t in thetas]), dims=np.array([2]))
    cfg = ExperimentConfig.from_dict({"family": {"name": "file", "path": str(tmp_path / "eq.npz")},
                                      "grid": thetas.tolist(), "checks": [{"name": "qfi", "expect_value": 1.0}]})
    assert run(cfg).passed


def test_random_family_reproducible():
    cfg = _cfg(family={"name": "random", "seed": 4, "dim": 3}, checks=["qfi"])
    assert run(cfg).checks[0].values == run(cfg).checks[0].values


def test_main_in_process(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(["run", "--config", str(CONFIGS / "hadamard_cnot_broadcast.yaml"), "--format", "csv",
                 "--output", str(out)])
    assert code == 0
    header = out.read_text().splitlines()[0]
    assert header.split(",") == list(CSV_COLUMNS)
    assert main(["list-families"]) == 0
    assert "piecewise_xyz" in capsys.readouterr().out


# exit-code contract, checked on the installed entry point
def test_exit_code_pass():
    r = _spawn("run", "--config", str(CONFIGS / "equatorial_qfi.yaml"))
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["passed"] is True


def test_exit_code_fail():
    r = _spawn("run", "--config", str(CONFIGS / "failing_expectation.yaml"))
    assert r.returncode == 1
    assert json.loads(r.stdout)["passed"] is False
    assert "expected NotUniform" in r.stderr


def test_exit_code_config_error(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("family: nosuch\n")
    r = _spawn("run", "--config", str(p))
    assert r.returncode == 2
    assert "family.name" in r.stderr


def test_exit_code_strict():
    r = _spawn("run", "--config", str(CONFIGS / "hadamard_cnot_broadcast.yaml"), "--strict")
    assert r.returncode == 2


def test_cli_determinism_with_env_seed(tmp_path):
    cfg = {"family": "equatorial", "grid": [1.0],
           "checks": [{"name": "estimate", "theta_true": 1.0, "n_samples": 100, "n_trials": 20, "window": 1.5}]}
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(cfg))
    a = _spawn("run", "--config", str(p), env={"QFI_BROADCAST_SEED": "42"})
    b = _spawn("run", "--config", str(p), env={"QFI_BROADCAST_SEED": "42"})
    ra, rb = json.loads(a.stdout), json.loads(b.stdout)
    assert ra["seed"] == 42
    assert _strip_time(ra) == _strip_time(rb)


def test_version_subcommand():
    r = _spawn("version")
    assert r.returncode == 0 and r.stdout.strip() == __version__
