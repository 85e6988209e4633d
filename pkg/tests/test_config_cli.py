import csv
import math
import subprocess
import sys
from pathlib import Path

import pytest

from bregsub import cli
from bregsub.config import (ConfigError, ExperimentConfig, dumps, effective_prox, loads,
                            parse_config)
from bregsub.experiment import build, run_experiment, sweep
from bregsub.trace import COLUMNS, read_trace, traces_equal

ROOT = Path(__file__).resolve().parents[1]

L1 = """
[problem]
name = l1_regression
m = 50
n = 2
seed = 7
[optimizer]
method = sbg
eta0 = 0.4
budget_epochs = {epochs}
[sampler]
seed = 0
[output]
trace_stride = 25
"""


def read_summary(path):
    pairs = (line.split(":", 1) for line in path.read_text().splitlines())
    return {k.strip(): v.strip() for k, v in pairs}


def cfg_l1(epochs=5):
    return loads(L1.format(epochs=epochs))


# ---- parsing ---------------------------------------------------------------

def test_minimal_config_gets_defaults():
    cfg = loads("")
    assert cfg == ExperimentConfig()
    assert cfg.optimizer.method == "sbg" and cfg.optimizer.nu0 == 1e-3
    assert cfg.kernel.kind == "euclidean" and cfg.sampler.mode == "reshuffle"
    assert cfg.output.trace_stride == 1


def test_all_errors_reported_together():
    text = """
[kernel]
kind = block_poly
sigma = -0.5
colour = red
[optimizer]
method = sbpg
eta0 = fast
[extras]
a = 1
"""
    with pytest.raises(ConfigError) as info:
        loads(text)
    msgs = "\n".join(info.value.errors)
    assert "kernel.colour: unknown key" in msgs
    assert "kernel.sigma" in msgs
    assert "sbpg requires a separable kernel" in msgs
    assert "optimizer.eta0: cannot parse" in msgs
    assert "unknown section [extras]" in msgs
    assert len(info.value.errors) == 5


@pytest.mark.parametrize("text, needle", [
    ("[kernel]\ndegree = 3", "kernel.degree"),
    ("[optimizer]\neta0 = 0", "optimizer.eta0"),
    ("[optimizer]\nmethod = msbg\ntheta0 = 2", "optimizer.theta0"),
    ("[problem]\nname = lasso_lad\n[optimizer]\nmethod = sbg", "use sbpg"),
    ("[problem]\nname = l1_regression\nlambda = 0.1", "problem.lambda: unknown key"),
    ("[problem]\nname = nope", "unknown problem"),
    ("[sampler]\nmode = iid\nbatch_size = 0", "sampler.batch_size"),
    ("[output]\ntrace_stride = 0", "output.trace_stride"),
    ("no section header", "malformed"),
])
def test_validation_errors(text, needle):
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert any(needle in e for e in info.value.errors)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.ini")


@pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.ini")))
def test_shipped_configs_round_trip(path):
    cfg = parse_config(path)
    assert loads(dumps(cfg)) == cfg


def test_round_trip_with_every_section():
    text = """
[problem]
name = lasso_lad
lambda = 0.25
m = 12
[kernel]
kind = coord_poly
sigma = 1e-6
degree = 6
[optimizer]
method = sbpg
schedule = staged_lstm
stage1 = 5
stage2 = 9
[prox]
regularizer = l1
lambda = 0.25
constraint = box
lower = 0
upper = 3.5
[sampler]
mode = iid
batch_size = 4
seed = 11
"""
    cfg = loads(text)
    assert cfg.prox.lam == 0.25 and cfg.problem.params["lambda"] == 0.25
    assert loads(dumps(cfg)) == cfg
    assert effective_prox(cfg) == ("l1", "box")
    exp = build(cfg)
    assert exp.kwargs["constraint"].upper == 3.5


def test_theta_defaults():
    cfg = loads("[optimizer]\nmethod = msbg\neta0 = 0.4\ntau = 0.0025")
    assert cfg.resolved_theta0() == pytest.approx(0.001) and cfg.resolved_tau() == 0.0025
    cfg = loads("[optimizer]\nmethod = imsbg\neta0 = 0.5\ntheta0 = 0.05")
    assert cfg.resolved_tau() == pytest.approx(0.1)
    assert loads("").resolved_theta0() is None


# ---- running ---------------------------------------------------------------

def test_budget_zero(tmp_path):
    assert run_experiment(cfg_l1(0), out_dir=tmp_path) == 0
    assert len(read_trace(tmp_path / "trace.csv")) == 1


def test_outputs_and_trace_format(tmp_path):
    assert run_experiment(cfg_l1(2), out_dir=tmp_path) == 0
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert len(lines) == 1 + 5  # rows at 0, 25, 50, 75, 100
    for row in csv.reader(lines[1:]):
        for cell in row:
            float(cell)
            assert " " not in cell
    eta = lines[1].split(",")[2]
    assert float(eta) == 0.4 and len(eta.replace(".", "").lstrip("0")) == 17
    assert parse_config(tmp_path / "config_echo.ini").output.dir == str(tmp_path)
    summary = read_summary(tmp_path / "summary.txt")
    assert float(summary["best_f"]) <= float(summary["final_f"])
    assert float(summary["oracle_gap"]) >= 0
    assert summary["certificate_status"] == "ok"


def test_rerun_is_identical(tmp_path):
    cfg = loads(L1.format(epochs=3).replace("method = sbg", "method = msbg\ntheta0 = 0.01")
                + "\n[kernel]\nkind = block_poly\n")
    run_experiment(cfg, out_dir=tmp_path / "a")
    run_experiment(cfg, out_dir=tmp_path / "b")
    assert traces_equal(tmp_path / "a" / "trace.csv", tmp_path / "b" / "trace.csv")
    run_experiment(cfg, out_dir=tmp_path / "c", seed=1)
    assert not traces_equal(tmp_path / "a" / "trace.csv", tmp_path / "c" / "trace.csv")


def test_l1_gap_from_summary(tmp_path):
    assert run_experiment(cfg_l1(200), out_dir=tmp_path) == 0
    summary = read_summary(tmp_path / "summary.txt")
    assert float(summary["oracle_gap"]) <= 1e-2


def test_certificate_failure_exit_code(tmp_path, monkeypatch):
    import bregsub.optim as optim
    from bregsub.prox import CertificateError

    def fail(*a, **kw):
        raise CertificateError("forced")

    monkeypatch.setattr(optim, "sbg_update", fail)
    assert run_experiment(cfg_l1(1), out_dir=tmp_path) != 0
    assert len(read_trace(tmp_path / "trace.csv")) == 1
    assert "FAILED (certificate)" in (tmp_path / "summary.txt").read_text()


# ---- sweeps ----------------------------------------------------------------

def test_single_cell_sweep_matches_run(tmp_path):
    cfg = cfg_l1(3)
    sweep(cfg, [4], out_dir=tmp_path / "sw")
    run_experiment(cfg, out_dir=tmp_path / "run", seed=4)
    assert traces_equal(tmp_path / "sw" / "eta0_0.4" / "seed_4" / "trace.csv",
                        tmp_path / "run" / "trace.csv")


def test_grid_sweep_report(tmp_path):
    report = sweep(cfg_l1(2), [0, 1, 2], [0.001, 0.01, 0.1, 1.0], out_dir=tmp_path)
    assert [r["eta0"] for r in report] == [0.001, 0.01, 0.1, 1.0]
    with open(tmp_path / "sweep_runs.csv") as fh:
        runs = list(csv.DictReader(fh))
    assert len(runs) == 12
    for row in report:
        fs = [float(r["final_f"]) for r in runs if float(r["eta0"]) == row["eta0"]]
        assert len(fs) == 3 and row["seeds"] == 3 and row["failed"] == 0
        assert row["final_f_mean"] == pytest.approx(sum(fs) / 3, rel=1e-15)
        assert (row["final_f_min"], row["final_f_max"]) == (min(fs), max(fs))


def test_sweep_continues_past_failed_cells(tmp_path, monkeypatch):
    import bregsub.experiment as experiment
    real = experiment.run_experiment

    def flaky(cfg, out_dir=None, seed=None):
        if cfg.sampler.seed == 1:
            raise RuntimeError("boom")
        return real(cfg, out_dir=out_dir, seed=seed)

    monkeypatch.setattr(experiment, "run_experiment", flaky)
    report = sweep(cfg_l1(1), [0, 1, 2], out_dir=tmp_path)
    assert report[0]["failed"] == 1 and not math.isnan(report[0]["final_f_mean"])
    assert "failed" in (tmp_path / "sweep_runs.csv").read_text()


def test_parallel_sweep_matches_serial(tmp_path):
    a = sweep(cfg_l1(1), [0, 1], [0.1, 0.2], out_dir=tmp_path / "s")
    b = sweep(cfg_l1(1), [0, 1], [0.1, 0.2], out_dir=tmp_path / "p", jobs=2)
    assert a == b


# ---- command line ----------------------------------------------------------

def test_cli_commands(tmp_path, capsys):
    conf = tmp_path / "c.ini"
    conf.write_text(L1.format(epochs=2))
    assert cli.main(["run", str(conf), "--out", str(tmp_path / "r"), "--seed", "3"]) == 0
    assert "seed = 3" in (tmp_path / "r" / "config_echo.ini").read_text()
    assert cli.main(["sweep", str(conf), "--seeds", "0,1", "--eta0-grid", "0.1,0.2",
                     "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "sweep_report.csv").exists()
    assert cli.main(["diagnose", str(tmp_path / "r" / "trace.csv")]) == 0
    assert "final_f" in capsys.readouterr().out
    assert (tmp_path / "r" / "report.txt").exists()
    bad = tmp_path / "bad.ini"
    bad.write_text("[kernel]\nsigma = -1\n")
    assert cli.main(["run", str(bad)]) == 2
    assert "kernel.sigma" in capsys.readouterr().err


def test_module_entry_point_selftest():
    out = subprocess.run([sys.executable, "-m", "bregsub", "selftest"], capture_output=True,
                         text=True, check=False)
    assert out.returncode == 0, out.stdout + out.stderr
    assert out.stdout.count("PASS") == 5
