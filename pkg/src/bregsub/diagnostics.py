"""Measurements on runs and traces: time axis, dual interpolation, Lyapunov
values and stationarity proxies.

No exact certificate of ``0 in D_f(x)`` exists for set-valued fields, so the
stationarity numbers reported here are proxies.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .kernels import Kernel
from .trace import TraceRecord, read_trace


class TimeAxis:
    """Elapsed "time" ``lambda(k) = sum_{i<k} eta_i`` and its inverse ``Lambda``."""

    def __init__(self, etas):
        etas = np.asarray(etas, dtype=float)
        if np.any(etas <= 0):
            raise ValueError("stepsizes must be positive")
        self.etas = etas
        self.lambdas = np.concatenate(([0.0], np.cumsum(etas)))

    def __len__(self):
        return len(self.etas)

    def lam(self, k: int) -> float:
        return float(self.lambdas[k])

    def index(self, t: float) -> int:
        """``Lambda(t) = sup{k : lambda(k) <= t}``."""
        if t < 0:
            raise ValueError("time must be nonnegative")
        return int(np.searchsorted(self.lambdas, t, side="right") - 1)


class DualPath:
    """Dual iterates ``y_k = grad phi(x_k)`` with linear interpolation in time.

    ``duals`` has one more entry than ``etas``. Paths sampled at a stride
    greater than one refuse interpolation.
    """

    def __init__(self, kernel: Kernel, duals, etas, stride: int = 1):
        self.kernel = kernel
        self.duals = np.asarray(duals, dtype=float)
        self.axis = TimeAxis(etas)
        self.stride = int(stride)
        if len(self.duals) != len(self.axis) + 1:
            raise ValueError("need exactly one more dual iterate than stepsizes")

    @classmethod
    def from_iterates(cls, kernel, xs, etas):
        return cls(kernel, [kernel.grad(np.asarray(x, float)) for x in xs], etas)

    @property
    def horizon(self) -> float:
        return float(self.axis.lambdas[-1])

    def interpolate(self, t: float, left: bool = False):
        """``x(t) = grad_conj(y_k + (t - lambda(k)) / eta_k (y_{k+1} - y_k))``.

        With ``left=True`` at a knot ``t = lambda(k+1)`` the value is taken
        from segment ``k`` (the left limit).
        """
        if self.stride != 1:
            raise ValueError(f"path recorded at stride {self.stride}; interpolation refused")
        if not 0.0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside the recorded horizon [0, {self.horizon}]")
        k = self.axis.index(t)
        if left and k > 0 and t == self.axis.lambdas[k]:
            k -= 1
        if k >= len(self.axis):
            return self.kernel.grad_conj(self.duals[-1])
        frac = (t - self.axis.lambdas[k]) / self.axis.etas[k]
        y = self.duals[k] + frac * (self.duals[k + 1] - self.duals[k])
        return self.kernel.grad_conj(y)


def interpolate(path: DualPath, kernel: Kernel, t: float):
    if kernel is not path.kernel:
        path = DualPath(kernel, path.duals, path.axis.etas, path.stride)
    return path.interpolate(t)


def lyapunov_msbg(f_value: float, m, tau: float) -> float:
    """``f + ||m||^2 / (2 tau)``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    m = np.asarray(m, dtype=float)
    return float(f_value + m @ m / (2.0 * tau))


def stationarity_proxy(recent_elements) -> float:
    """Norm of the average of the most recent conservative elements."""
    if len(recent_elements) == 0:
        raise ValueError("empty window")
    return float(np.linalg.norm(np.mean([np.asarray(e, float) for e in recent_elements],
                                        axis=0)))


def dual_increment_norms(trace) -> list[float]:
    """``||grad phi(x_{k+1}) - grad phi(x_k)||`` per row (``eta * dual_step_norm``)."""
    return [r.eta * r.dual_step_norm for r in trace[1:]]


def tail(values, fraction=0.1):
    values = list(values)
    n = max(1, int(math.ceil(fraction * len(values))))
    return values[-n:]


def oscillation(values, fraction=0.1) -> float:
    """``max - min`` over the trailing ``fraction`` of ``values``."""
    w = tail(values, fraction)
    return float(max(w) - min(w))


def summarize(trace: list[TraceRecord], tau: float | None = None,
              increment_threshold: float = 1e-3, tail_fraction: float = 0.1) -> dict:
    """Summary statistics of a trace, as a flat dict."""
    fs = [r.f_value for r in trace]
    incs = dual_increment_norms(trace)
    out = {
        "records": len(trace),
        "iterations": trace[-1].iter,
        "final_f": fs[-1],
        "best_f": min(fs),
        "tail_f_oscillation": oscillation(fs, tail_fraction),
        "final_m_norm": trace[-1].m_norm,
        "final_stationarity_proxy (proxy only)": trace[-1].stationarity_proxy,
        "max_cert_residual": max(r.cert_residual for r in trace),
        "tail_max_dual_increment": max(tail(incs, tail_fraction)) if incs else 0.0,
    }
    out["dual_increments_below_threshold"] = out["tail_max_dual_increment"] <= increment_threshold
    with_theta = [r for r in trace if r.theta > 0]
    if with_theta:
        ratio = with_theta[-1].theta / with_theta[-1].eta
        out["final_theta_eta_ratio"] = ratio
        if tau is not None:
            out["ratio_drift_from_tau"] = abs(ratio - tau) / tau
            out["tail_lyapunov_oscillation"] = oscillation(
                [r.f_value + r.m_norm ** 2 / (2 * tau) for r in trace], tail_fraction)
    return out


def format_report(summary: dict) -> str:
    width = max(len(k) for k in summary)
    lines = []
    for k, v in summary.items():
        if isinstance(v, float):
            v = format(v, ".10g")
        lines.append(f"{k.ljust(width)} : {v}")
    return "\n".join(lines) + "\n"


def diagnose(trace_path, tau=None, out_path=None) -> dict:
    """Summarize a trace CSV and write the report next to it (``report.txt``)."""
    trace = read_trace(trace_path)
    summary = summarize(trace, tau=tau)
    out_path = Path(out_path) if out_path else Path(trace_path).with_name("report.txt")
    out_path.write_text(format_report(summary))
    return summary
