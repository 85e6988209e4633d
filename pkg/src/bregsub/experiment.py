"""Build a run from an :class:`~bregsub.config.ExperimentConfig` and persist its outputs."""
from __future__ import annotations

import copy
import csv
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig, dumps
from .kernels import make_kernel
from .oracle import Sampler
from .optim import RunAborted, RunResult, run
from .problems import Problem, build_problem
from .prox import CertificateError, make_constraint, make_regularizer
from .schedules import PolyTolerance, make_schedule
from .trace import TraceWriter

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CERTIFICATE = 2
EXIT_ERROR = 3


@dataclass
class Experiment:
    problem: Problem
    kernel: object
    sampler: Sampler
    kwargs: dict


def build(cfg: ExperimentConfig) -> Experiment:
    """Instantiate problem, kernel, sampler and schedules from a validated config."""
    problem = build_problem(cfg.problem.name, **cfg.problem.params)
    ker = cfg.kernel
    kernel = make_kernel(ker.kind, problem.spec.block_sizes, ker.sigma, ker.degree)

    prox = cfg.prox
    regularizer = (problem.regularizer if prox.regularizer == "auto"
                   else make_regularizer(prox.regularizer, prox.lam))
    constraint = (problem.constraint if prox.constraint == "auto"
                  else make_constraint(prox.constraint, prox.lower, prox.upper))

    smp = cfg.sampler
    sampler = Sampler(problem.objective.n_components, smp.mode, smp.seed, smp.batch_size)

    opt = cfg.optimizer
    eta = make_schedule(opt.schedule, opt.eta0, opt.stage1, opt.stage2)
    theta0 = cfg.resolved_theta0()
    theta = None
    if theta0 is not None:
        kind = opt.schedule if opt.theta_schedule == "same" else opt.theta_schedule
        theta = make_schedule(kind, theta0, opt.stage1, opt.stage2)
    kwargs = dict(method=opt.method, x0=problem.x0, eta=eta, theta=theta,
                  tau=cfg.resolved_tau(), epochs=opt.budget_epochs,
                  nu=PolyTolerance(opt.nu0, opt.nu_power), regularizer=regularizer,
                  constraint=constraint, stride=cfg.output.trace_stride,
                  window=opt.window, target=opt.target)
    return Experiment(problem, kernel, sampler, kwargs)


def _summary_lines(cfg, exp, result: RunResult, status, message=""):
    fs = [r.f_value for r in result.trace]
    spec = exp.problem.spec
    lines = [
        f"problem            : {spec.name} seed={spec.seed} {spec.params}",
        f"method             : {cfg.optimizer.method}",
        f"kernel             : {exp.kernel!r}",
        f"iterations         : {result.trace[-1].iter}",
        f"final_f            : {fs[-1]!r}",
        f"best_f             : {min(fs)!r}",
    ]
    if spec.f_star is not None:
        lines.append(f"oracle_f_star      : {spec.f_star!r} ({spec.oracle_method})")
        lines.append(f"oracle_gap         : {fs[-1] - spec.f_star!r}")
    else:
        lines.append("oracle_gap         : unavailable")
    lines.append(f"final_m_norm       : {result.trace[-1].m_norm!r}")
    lines.append(f"stationarity_proxy : {result.trace[-1].stationarity_proxy!r} (proxy only)")
    lines.append(f"certificate_status : {status}")
    if message:
        lines.append(f"error              : {message}")
    for w in result.warnings:
        lines.append(f"warning            : {w}")
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig, out_dir=None, seed=None) -> int:
    """Run ``cfg`` and write ``trace.csv``, ``summary.txt`` and ``config_echo.ini``.

    Returns 0 on success, 2 if a certificate failed, 3 on any other step error.
    The trace is flushed up to the failing step in both failure cases.
    """
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg.sampler.seed = int(seed)
    if out_dir is not None:
        cfg.output.dir = str(out_dir)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.ini").write_text(dumps(cfg))

    exp = build(cfg)
    status, code, message = "ok", EXIT_OK, ""
    with TraceWriter(out / "trace.csv") as writer:
        try:
            result = run(exp.problem.objective, exp.kernel, sampler=exp.sampler,
                         writer=writer, **exp.kwargs)
        except RunAborted as err:
            result = err.partial
            if isinstance(err.__cause__, CertificateError):
                status, code = "FAILED (certificate)", EXIT_CERTIFICATE
            else:
                status, code = "FAILED (error)", EXIT_ERROR
            message = str(err)
            log.error(message)
    (out / "summary.txt").write_text(_summary_lines(cfg, exp, result, status, message))
    return code


def _final_f(trace_path):
    with open(trace_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return float(rows[-1]["f_value"])


def _run_cell(args):
    cfg, out_dir = args
    try:
        code = run_experiment(cfg, out_dir=out_dir)
    except Exception as err:  # a broken cell must not stop the sweep
        return out_dir, EXIT_ERROR, None, str(err)
    return out_dir, code, _final_f(Path(out_dir) / "trace.csv"), ""


def sweep(cfg: ExperimentConfig, seeds, eta0_grid=None, out_dir=None, jobs: int = 1) -> list[dict]:
    """Run every (eta0, seed) cell and aggregate final objective values per eta0.

    Cells write to ``<out>/eta0_<value>/seed_<seed>``. One row per run goes to
    ``<out>/sweep_runs.csv`` and the per-eta0 aggregate to
    ``<out>/sweep_report.csv``. Failed runs are marked, excluded from the
    statistics, and the sweep continues past them.
    """
    root = Path(out_dir or cfg.output.dir)
    grid = list(eta0_grid) if eta0_grid else [cfg.optimizer.eta0]
    cells = []
    for eta0 in grid:
        for seed in seeds:
            c = copy.deepcopy(cfg)
            c.optimizer.eta0 = float(eta0)
            c.sampler.seed = int(seed)
            cells.append((c, str(root / f"eta0_{eta0:g}" / f"seed_{seed}")))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]

    report = []
    for i, eta0 in enumerate(grid):
        chunk = results[i * len(seeds):(i + 1) * len(seeds)]
        ok = [f for _, code, f, _ in chunk if code == EXIT_OK and f is not None]
        row = {"eta0": float(eta0), "seeds": len(chunk), "failed": len(chunk) - len(ok),
               "final_f_mean": statistics.fmean(ok) if ok else float("nan"),
               "final_f_min": min(ok) if ok else float("nan"),
               "final_f_max": max(ok) if ok else float("nan")}
        report.append(row)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "sweep_runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta0", "seed", "status", "final_f", "dir", "error"])
        for (c, _), (d, code, f, msg) in zip(cells, results):
            status = "ok" if code == EXIT_OK else f"failed({code})"
            w.writerow([format(c.optimizer.eta0, ".17g"), c.sampler.seed, status,
                        "" if f is None else format(f, ".17g"), d, msg])
    with open(root / "sweep_report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(report[0]))
        w.writeheader()
        for row in report:
            w.writerow({k: format(v, ".17g") if isinstance(v, float) else v
                        for k, v in row.items()})
    return report
