"""Stochastic Bregman subgradient loops: SBG, preconditioned SBG, MSBG, iMSBG, SBPG.

The ``*_update`` functions are the bare update rules on flat arrays given a
sampled element ``g``; the ``*_step`` functions draw ``g`` from a sampler and
advance an :class:`OptimizerState`; :func:`run` drives a whole experiment.
"""
from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .blocked import BlockedVector
from .kernels import ROOT_TOL, Kernel
from .oracle import FiniteSumObjective, Sampler
from .prox import (CertificateError, ConstraintSet, Regularizer, WholeSpace,
                   ZeroRegularizer, forward_backward)
from .schedules import EpochConstant, PolyTolerance, Schedule
from .trace import TraceRecord

log = logging.getLogger(__name__)

METHODS = ("sbg", "sbg_precond", "msbg", "imsbg", "sbpg")
MOMENTUM_METHODS = ("msbg", "imsbg")
_EPS = np.finfo(float).eps


def _norm(v):
    return math.sqrt(np.dot(v, v))


@dataclass
class OptimizerState:
    """Iterate, momentum and counters, plus what the last step measured."""

    x: BlockedVector
    m: BlockedVector
    k: int = 0
    epoch: int = 0
    tau: float | None = None
    g: np.ndarray | None = None
    cert_residual: float = 0.0
    dual_step_norm: float = 0.0

    @classmethod
    def initial(cls, x0: BlockedVector, tau=None) -> "OptimizerState":
        return cls(x=x0.copy(), m=BlockedVector.zeros(x0.sizes), tau=tau)


def _exact_floor(kernel, y, gx, gxp, step, eta):
    # Smallest residual the exact dual step can certify in floating point.
    root = ROOT_TOL * (math.sqrt(kernel.dim) + np.linalg.norm(y))
    rounding = 16 * _EPS * (np.linalg.norm(gx) + np.linalg.norm(step) + np.linalg.norm(gxp))
    return (root + rounding) / eta


def sbg_update(kernel: Kernel, x, g, eta, nu=None):
    """Exact mirror step ``x+ = grad_conj(grad(x) - eta g)``.

    Returns ``(x_plus, residual, dual_step_norm)`` with
    ``residual = ||g + (grad(x+) - grad(x)) / eta||``. Raises
    :class:`CertificateError` if ``nu`` is given and the residual exceeds
    ``max(nu, floating-point floor)``.
    """
    gx = kernel._grad(x)
    step = eta * g
    y = gx - step
    xp = kernel._grad_conj(y, ROOT_TOL, 100)
    gxp = kernel._grad(xp)
    diff = gxp - gx
    res = _norm(g + diff / eta)
    if nu is not None:
        bound = max(nu, _exact_floor(kernel, y, gx, gxp, step, eta))
        if res > bound:
            raise CertificateError(f"SBG residual {res:.3e} exceeds {bound:.3e}")
    return xp, res, _norm(diff) / eta


def sbg_precond_update(kernel: Kernel, x, g, eta):
    """``x+ = x - eta (hess phi(x))^{-1} g``; the residual is only recorded."""
    xp = x - eta * kernel._inv_hess(x, g)
    diff = kernel._grad(xp) - kernel._grad(x)
    res = _norm(g + diff / eta)
    return xp, res, _norm(diff) / eta


def msbg_update(kernel: Kernel, x, m, g, eta, theta, nu=None):
    """Momentum step: x moves with the current ``m``, then ``m`` absorbs ``g``.

    ``x+ = grad_conj(grad(x) - eta m)`` and
    ``m+ = m - theta (hess phi(x))^{-1} (m - g)``, both at the old ``x``.
    """
    xp, res, dsn = sbg_update(kernel, x, m, eta, nu)
    mp = m - theta * kernel._inv_hess(x, m - g)
    return xp, mp, res, dsn


def imsbg_update(kernel: Kernel, x, m, g, eta, theta):
    """Inexact momentum step; no root solve."""
    xp = x - eta * kernel._inv_hess(x, m)
    mp = m - theta * kernel._inv_hess(x, m - g)
    diff = kernel._grad(xp) - kernel._grad(x)
    res = _norm(m + diff / eta)
    return xp, mp, res, _norm(diff) / eta


def sbpg_update(kernel: Kernel, R: Regularizer, X: ConstraintSet, x, g, eta, nu):
    """Certified proximal step; returns ``(x_plus, certificate, dual_step_norm)``."""
    xp, cert = forward_backward(kernel, R, X, x, g, eta, nu)
    dsn = _norm(kernel._grad(xp) - kernel._grad(x)) / eta
    return xp, cert, dsn


def _advance(state, x, m, g, res, dsn, epoch):
    return replace(state, x=state.x.like(x), m=state.m.like(m) if m is not None else state.m,
                   k=state.k + 1, epoch=epoch, g=g, cert_residual=res, dual_step_norm=dsn)


def _draw(oracle, sampler, state):
    _, g = sampler.sample(oracle, state.x.data)
    return g


def _epoch_after(sampler, k):
    return (k + 1) // sampler.steps_per_epoch


def sbg_step(state, kernel, oracle, sampler, eta, nu=None):
    g = _draw(oracle, sampler, state)
    xp, res, dsn = sbg_update(kernel, state.x.data, g, eta, nu)
    return _advance(state, xp, None, g, res, dsn, _epoch_after(sampler, state.k))


def sbg_precond_step(state, kernel, oracle, sampler, eta):
    g = _draw(oracle, sampler, state)
    xp, res, dsn = sbg_precond_update(kernel, state.x.data, g, eta)
    return _advance(state, xp, None, g, res, dsn, _epoch_after(sampler, state.k))


def msbg_step(state, kernel, oracle, sampler, eta, theta, nu=None):
    g = _draw(oracle, sampler, state)
    xp, mp, res, dsn = msbg_update(kernel, state.x.data, state.m.data, g, eta, theta, nu)
    return _advance(state, xp, mp, g, res, dsn, _epoch_after(sampler, state.k))


def imsbg_step(state, kernel, oracle, sampler, eta, theta):
    g = _draw(oracle, sampler, state)
    xp, mp, res, dsn = imsbg_update(kernel, state.x.data, state.m.data, g, eta, theta)
    return _advance(state, xp, mp, g, res, dsn, _epoch_after(sampler, state.k))


def sbpg_step(state, kernel, oracle, sampler, regularizer, constraint, eta, nu):
    g = _draw(oracle, sampler, state)
    xp, cert, dsn = sbpg_update(kernel, regularizer, constraint, state.x.data, g, eta, nu)
    return _advance(state, xp, None, g, cert.stationarity_residual, dsn,
                    _epoch_after(sampler, state.k))


@dataclass
class RunResult:
    state: OptimizerState
    trace: list[TraceRecord]
    duals: list[np.ndarray] | None = None
    etas: list[float] | None = None
    warnings: list[str] = field(default_factory=list)
    stopped_early: bool = False


class RunAborted(RuntimeError):
    """A step failed; ``partial`` holds the trace up to the failure."""

    def __init__(self, message, partial: RunResult):
        super().__init__(message)
        self.partial = partial


def _as_epoch_schedule(s):
    if s is None or isinstance(s, (Schedule, EpochConstant)):
        return s
    if callable(s):
        return s
    raise TypeError(f"expected a schedule, got {s!r}")


def check_tau(eta, theta, tau, epochs, tol=0.01):
    """Warning message if ``theta_s / eta_s`` ends more than ``tol`` away from ``tau``."""
    if tau is None or theta is None:
        return None
    last = max(epochs - 1, 0)
    ratio = theta(last) / eta(last)
    drift = abs(ratio - tau) / tau
    if drift > tol:
        return (f"theta/eta ratio {ratio:.6g} at epoch {last} drifts {100 * drift:.2f}% "
                f"from tau={tau:.6g}")
    return None


def run(objective: FiniteSumObjective, kernel: Kernel, method: str = "sbg", *,
        x0, eta, epochs: int, sampler: Sampler, theta=None, tau=None,
        nu: PolyTolerance | None = None, regularizer: Regularizer | None = None,
        constraint: ConstraintSet | None = None, stride: int = 1, window: int = 50,
        target: float = 0.0, writer=None, record_dual: bool = False) -> RunResult:
    """Run ``epochs`` epochs of ``method`` and return the final state and trace.

    ``eta`` and ``theta`` are per-epoch schedules held constant inside each
    epoch. Trace rows are emitted for the initial point and every ``stride``
    steps; ``f_value`` is the full objective (plus ``R`` for ``sbpg``). The
    run stops early once ``target > 0`` and the window-averaged element norm
    drops below it.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method in MOMENTUM_METHODS and theta is None:
        raise ValueError(f"{method} needs a theta schedule")
    if stride < 1 or window < 1:
        raise ValueError("stride and window must be >= 1")
    eta = _as_epoch_schedule(eta)
    theta = _as_epoch_schedule(theta)
    R = regularizer or ZeroRegularizer()
    X = constraint or WholeSpace()
    if method != "sbpg" and (not isinstance(R, ZeroRegularizer) or not X.is_whole_space):
        raise ValueError(f"{method} is unconstrained; use sbpg for regularizers/constraints")

    x0 = x0 if isinstance(x0, BlockedVector) else BlockedVector(x0, kernel.sizes)
    if method == "sbpg" and not X.contains(x0):
        x0 = X.project(x0)
    state = OptimizerState.initial(x0, tau=tau)
    result = RunResult(state=state, trace=[],
                       duals=[] if record_dual else None, etas=[] if record_dual else None)
    warn = check_tau(eta, theta, tau, epochs)
    if warn:
        log.warning(warn)
        result.warnings.append(warn)

    def composite(x):
        f, d = objective.eval_full(x)
        return f + R.value(x), d

    t0 = time.perf_counter_ns()
    spe = sampler.steps_per_epoch
    total = epochs * spe
    theta0 = theta(0) if theta is not None else 0.0
    f0, d0 = composite(state.x.data)

    def emit(rec):
        result.trace.append(rec)
        if writer is not None:
            writer(rec)

    emit(TraceRecord(0, 0, eta(0), theta0, f0, 0.0, 0.0, 0.0,
                     _norm(d0), time.perf_counter_ns() - t0))
    if record_dual:
        result.duals.append(kernel._grad(state.x.data))

    recent = deque(maxlen=window)
    running = np.zeros(kernel.dim)
    for k in range(total):
        e = k // spe
        eta_k = eta(e)
        theta_k = theta(e) if theta is not None else 0.0
        nu_k = nu(k) if nu is not None else None
        try:
            if method == "sbg":
                state = sbg_step(state, kernel, objective, sampler, eta_k, nu_k)
            elif method == "sbg_precond":
                state = sbg_precond_step(state, kernel, objective, sampler, eta_k)
            elif method == "msbg":
                state = msbg_step(state, kernel, objective, sampler, eta_k, theta_k, nu_k)
            elif method == "imsbg":
                state = imsbg_step(state, kernel, objective, sampler, eta_k, theta_k)
            else:
                state = sbpg_step(state, kernel, objective, sampler, R, X, eta_k,
                                  nu_k if nu_k is not None else math.inf)
        except Exception as err:
            result.state = state
            raise RunAborted(f"step {k} of {method} failed: {err}", result) from err

        if len(recent) == window:
            running -= recent[0]
        recent.append(state.g)
        running += state.g
        proxy = _norm(running / len(recent))
        if record_dual:
            result.duals.append(kernel._grad(state.x.data))
            result.etas.append(eta_k)

        done = target > 0 and len(recent) == window and proxy < target
        if (k + 1) % stride == 0 or k + 1 == total or done:
            f, _ = composite(state.x.data)
            emit(TraceRecord(k + 1, e, eta_k, theta_k, f, state.m.norm(),
                             state.dual_step_norm, state.cert_residual, proxy,
                             time.perf_counter_ns() - t0))
        if done:
            result.stopped_early = True
            break

    result.state = state
    return result
