"""Drive an experiment from a config file, as the command line does.

Equivalent shell commands::

    bregsub run configs/l1_sbg.ini --out /tmp/bregsub_demo
    bregsub diagnose /tmp/bregsub_demo/trace.csv
"""
import sys
import tempfile
from pathlib import Path

from bregsub.config import parse_config
from bregsub.diagnostics import diagnose, format_report
from bregsub.experiment import run_experiment, sweep

root = Path(__file__).resolve().parents[1]
cfg = parse_config(root / "configs" / "l1_sbg.ini")
out = Path(tempfile.mkdtemp(prefix="bregsub_demo_"))

# %% One run: trace.csv, summary.txt and config_echo.ini land in ``out``.
code = run_experiment(cfg, out_dir=out / "run")
print("exit status", code)
print((out / "run" / "summary.txt").read_text())

# %% The diagnostics report reads the trace back.
print(format_report(diagnose(out / "run" / "trace.csv")))

# %% A small stepsize sweep over two seeds.
cfg.optimizer.budget_epochs = 50
for row in sweep(cfg, seeds=[0, 1], eta0_grid=[0.01, 0.1, 1.0], out_dir=out / "sweep"):
    print(row)
print("outputs under", out)
sys.exit(code)
