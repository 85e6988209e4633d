"""Experiment configuration: a sectioned ``key = value`` file.

Grammar (INI, parsed with :mod:`configparser`; ``#`` starts a comment)::

    [problem]    name = l1_regression | lasso_lad | relu_net | nonregular_scalar | quadratic
                 plus that problem's parameters (see PROBLEM_KEYS)
    [kernel]     kind = euclidean | block_poly | coord_poly, sigma, degree
    [optimizer]  method = sbg | sbg_precond | msbg | imsbg | sbpg
                 schedule, eta0, theta_schedule, theta0, tau, nu0, nu_power,
                 budget_epochs, stage1, stage2, window, target
    [prox]       regularizer = auto | none | l1, lambda,
                 constraint = auto | whole_space | nonneg | box, lower, upper
    [sampler]    mode = reshuffle | iid | full, seed, batch_size
    [output]     dir, trace_stride

Every section is optional; missing keys take the defaults below. Unknown
sections or keys are errors, and all errors are reported together.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .kernels import KERNELS
from .oracle import Sampler
from .optim import METHODS, MOMENTUM_METHODS
from .schedules import SCHEDULES

PROBLEM_KEYS = {
    "l1_regression": {"m": int, "n": int, "seed": int, "consistent": bool},
    "lasso_lad": {"m": int, "n": int, "lambda": float, "seed": int},
    "relu_net": {"d_in": int, "d_hidden": int, "d_out": int, "samples": int,
                 "data_seed": int, "seed": int},
    "nonregular_scalar": {"x0": float},
    "quadratic": {"n": int, "components": int, "seed": int},
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass
class ProblemConfig:
    name: str = "l1_regression"
    params: dict = field(default_factory=dict)


@dataclass
class KernelConfig:
    kind: str = "euclidean"
    sigma: float = 0.01
    degree: int = 4


@dataclass
class OptimizerConfig:
    method: str = "sbg"
    schedule: str = "log_decay"
    eta0: float = 0.1
    theta_schedule: str = "same"
    theta0: float | None = None
    tau: float | None = None
    nu0: float = 1e-3
    nu_power: float = 0.6
    budget_epochs: int = 100
    stage1: int = 150
    stage2: int = 300
    window: int = 50
    target: float = 0.0


@dataclass
class ProxConfig:
    regularizer: str = "auto"
    lam: float = 0.0
    constraint: str = "auto"
    lower: float = -math.inf
    upper: float = math.inf


@dataclass
class SamplerConfig:
    mode: str = "reshuffle"
    seed: int = 0
    batch_size: int = 1


@dataclass
class OutputConfig:
    dir: str = "runs/default"
    trace_stride: int = 1


@dataclass
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    prox: ProxConfig = field(default_factory=ProxConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def resolved_theta0(self) -> float | None:
        opt = self.optimizer
        if opt.method not in MOMENTUM_METHODS:
            return None
        if opt.theta0 is not None:
            return opt.theta0
        if opt.tau is not None:
            return opt.tau * opt.eta0
        return 0.1

    def resolved_tau(self) -> float | None:
        theta0 = self.resolved_theta0()
        if theta0 is None:
            return None
        return self.optimizer.tau if self.optimizer.tau is not None else theta0 / self.optimizer.eta0


SECTIONS = {
    "problem": ProblemConfig, "kernel": KernelConfig, "optimizer": OptimizerConfig,
    "prox": ProxConfig, "sampler": SamplerConfig, "output": OutputConfig,
}
# dataclass attribute -> key used in the file, where they differ
_FILE_KEYS = {("prox", "lam"): "lambda"}


def _convert(raw: str, typ, where, errors):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        errors.append(f"{where}: cannot parse {raw!r} as {typ.__name__}")
        return None


def _field_type(dc, name):
    typ = {f.name: f.type for f in fields(dc)}[name]
    if isinstance(typ, str):
        typ = typ.split("|")[0].strip()
        typ = {"str": str, "int": int, "float": float, "bool": bool, "dict": dict}[typ]
    return typ


def loads(text: str) -> ExperimentConfig:
    """Parse and validate config text; raises :class:`ConfigError`."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError([f"malformed config: {err}"]) from err

    errors = []
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in SECTIONS:
            errors.append(f"unknown section [{section}]")
            continue
        dc = SECTIONS[section]
        target = getattr(cfg, section)
        if section == "problem":
            items = dict(parser.items(section))
            name = items.pop("name", cfg.problem.name)
            target.name = name
            allowed = PROBLEM_KEYS.get(name)
            if allowed is None:
                errors.append(f"problem.name: unknown problem {name!r}; "
                              f"choose from {sorted(PROBLEM_KEYS)}")
                continue
            for key, raw in items.items():
                if key not in allowed:
                    errors.append(f"problem.{key}: unknown key for {name} "
                                  f"(allowed: {sorted(allowed)})")
                    continue
                val = _convert(raw, allowed[key], f"problem.{key}", errors)
                if val is not None:
                    target.params[key] = val
            continue
        file_keys = {_FILE_KEYS.get((section, f.name), f.name): f.name for f in fields(dc)}
        for key, raw in parser.items(section):
            attr = file_keys.get(key)
            if attr is None:
                errors.append(f"{section}.{key}: unknown key")
                continue
            val = _convert(raw, _field_type(dc, attr), f"{section}.{key}", errors)
            if val is not None:
                setattr(target, attr, val)
    errors.extend(validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    return loads(path.read_text())


def validate(cfg: ExperimentConfig) -> list[str]:
    """All range and compatibility violations in ``cfg``."""
    errs = []
    opt, ker, prox, smp, out = cfg.optimizer, cfg.kernel, cfg.prox, cfg.sampler, cfg.output
    p = cfg.problem.params

    if ker.kind not in KERNELS:
        errs.append(f"kernel.kind: unknown kernel {ker.kind!r}; choose from {sorted(KERNELS)}")
    if not (math.isfinite(ker.sigma) and ker.sigma >= 0):
        errs.append(f"kernel.sigma: must be finite and >= 0, got {ker.sigma}")
    if ker.degree < 4:
        errs.append(f"kernel.degree: must be an integer >= 4, got {ker.degree}")

    if opt.method not in METHODS:
        errs.append(f"optimizer.method: unknown method {opt.method!r}; choose from {METHODS}")
    if opt.schedule not in SCHEDULES:
        errs.append(f"optimizer.schedule: unknown schedule {opt.schedule!r}")
    if opt.theta_schedule not in SCHEDULES + ("same",):
        errs.append(f"optimizer.theta_schedule: unknown schedule {opt.theta_schedule!r}")
    if not opt.eta0 > 0:
        errs.append(f"optimizer.eta0: must be > 0, got {opt.eta0}")
    if opt.theta0 is not None and not 0 < opt.theta0 <= 1:
        errs.append(f"optimizer.theta0: must be in (0, 1], got {opt.theta0}")
    if opt.tau is not None and not opt.tau > 0:
        errs.append(f"optimizer.tau: must be > 0, got {opt.tau}")
    if opt.nu0 < 0:
        errs.append(f"optimizer.nu0: must be >= 0, got {opt.nu0}")
    if opt.nu_power < 0:
        errs.append(f"optimizer.nu_power: must be >= 0, got {opt.nu_power}")
    if opt.budget_epochs < 0:
        errs.append(f"optimizer.budget_epochs: must be >= 0, got {opt.budget_epochs}")
    if not 0 < opt.stage1 < opt.stage2:
        errs.append("optimizer.stage1/stage2: need 0 < stage1 < stage2")
    if opt.window < 1:
        errs.append(f"optimizer.window: must be >= 1, got {opt.window}")
    if opt.target < 0:
        errs.append(f"optimizer.target: must be >= 0, got {opt.target}")

    if prox.regularizer not in ("auto", "none", "l1"):
        errs.append(f"prox.regularizer: unknown regularizer {prox.regularizer!r}")
    if prox.constraint not in ("auto", "whole_space", "nonneg", "box"):
        errs.append(f"prox.constraint: unknown constraint {prox.constraint!r}")
    if not (math.isfinite(prox.lam) and prox.lam >= 0):
        errs.append(f"prox.lambda: must be finite and >= 0, got {prox.lam}")
    if not prox.lower <= prox.upper:
        errs.append("prox.lower/upper: need lower <= upper")

    if smp.mode not in Sampler.MODES:
        errs.append(f"sampler.mode: unknown mode {smp.mode!r}; choose from {Sampler.MODES}")
    if smp.batch_size < 1:
        errs.append(f"sampler.batch_size: must be >= 1, got {smp.batch_size}")
    if smp.mode == "reshuffle" and smp.batch_size != 1:
        errs.append("sampler.batch_size: reshuffle mode samples one component per step")
    if out.trace_stride < 1:
        errs.append(f"output.trace_stride: must be >= 1, got {out.trace_stride}")

    for key in ("m", "n", "d_in", "d_hidden", "d_out", "samples", "components"):
        if key in p and p[key] < 1:
            errs.append(f"problem.{key}: must be >= 1, got {p[key]}")
    if "lambda" in p and p["lambda"] < 0:
        errs.append(f"problem.lambda: must be >= 0, got {p['lambda']}")
    if cfg.problem.name in ("l1_regression", "lasso_lad") and p.get("m", 1) < p.get("n", 1):
        errs.append("problem.m: need m >= n")

    # compatibility matrix
    composite = effective_prox(cfg)
    if opt.method == "sbpg" and ker.kind == "block_poly":
        errs.append("kernel.kind: sbpg requires a separable kernel (euclidean or coord_poly); "
                    "block_poly subproblems with regularizers have no certified solver")
    if opt.method in METHODS and opt.method != "sbpg" and composite != ("none", "whole_space"):
        errs.append(f"optimizer.method: {opt.method} is unconstrained but the problem uses "
                    f"regularizer={composite[0]}, constraint={composite[1]}; use sbpg")
    return errs


def effective_prox(cfg: ExperimentConfig) -> tuple[str, str]:
    """The (regularizer, constraint) pair after resolving ``auto``."""
    lasso = cfg.problem.name == "lasso_lad"
    reg = cfg.prox.regularizer
    con = cfg.prox.constraint
    if reg == "auto":
        reg = "l1" if lasso else "none"
    if con == "auto":
        con = "nonneg" if lasso else "whole_space"
    return reg, con


def dumps(cfg: ExperimentConfig) -> str:
    """Config text that :func:`loads` parses back to an equal config."""
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        obj = getattr(cfg, section)
        if section == "problem":
            lines.append(f"name = {obj.name}")
            for k, v in obj.params.items():
                lines.append(f"{k} = {_fmt(v)}")
        else:
            for k, v in asdict(obj).items():
                if v is None:
                    continue
                key = _FILE_KEYS.get((section, k), k)
                lines.append(f"{key} = {_fmt(v)}")
        lines.append("")
    return "\n".join(lines)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
