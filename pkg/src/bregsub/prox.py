"""Bregman proximal maps and the certified forward-backward step.

Supported subproblems are separable: Euclidean or coordinate polynomial
kernels, zero or L1 regularizers, and axis-aligned boxes. For those the
minimizer is ``clip(grad_conj(soft(z, eta*lam)), lower, upper)`` with ``z``
the dual point, because a one-dimensional convex problem restricted to an
interval is solved by clamping its unconstrained minimizer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocked import BlockedVector, DimensionError
from .kernels import (ROOT_TOL, BlockPolynomialKernel, CoordPolynomialKernel,
                      EuclideanKernel, Kernel)


class CertificateError(RuntimeError):
    """A subproblem solution failed its optimality or decrease certificate."""


class UnsupportedCombination(ValueError):
    """The kernel/regularizer/constraint combination has no certified solver."""


def _arr(x):
    return x.data if isinstance(x, BlockedVector) else np.asarray(x, dtype=float)


def _wrap(template, arr):
    return template.like(arr) if isinstance(template, BlockedVector) else arr


class Regularizer:
    lam = 0.0

    def value(self, x) -> float:
        raise NotImplementedError

    def subgradient_element(self, x):
        raise NotImplementedError

    def interval(self, x):
        """Per-coordinate bounds ``[lo, hi]`` of the (separable) subdifferential."""
        raise NotImplementedError


class ZeroRegularizer(Regularizer):
    name = "none"

    def value(self, x) -> float:
        return 0.0

    def subgradient_element(self, x):
        return _wrap(x, np.zeros_like(_arr(x)))

    def interval(self, x):
        z = np.zeros_like(_arr(x))
        return z, z.copy()

    def __repr__(self):
        return "ZeroRegularizer()"


class L1Regularizer(Regularizer):
    """``R(x) = lam * ||x||_1``."""

    name = "l1"

    def __init__(self, lam: float):
        if not np.isfinite(lam) or lam < 0:
            raise ValueError(f"lambda must be finite and nonnegative, got {lam}")
        self.lam = float(lam)

    def value(self, x) -> float:
        return self.lam * float(np.sum(np.abs(_arr(x))))

    def subgradient_element(self, x):
        return _wrap(x, self.lam * np.sign(_arr(x)))

    def interval(self, x):
        s = self.lam * np.sign(_arr(x))
        zero = s == 0
        return np.where(zero, -self.lam, s), np.where(zero, self.lam, s)

    def __repr__(self):
        return f"L1Regularizer(lam={self.lam})"


class ConstraintSet:
    """Axis-aligned box ``{x : lower <= x <= upper}`` (possibly unbounded)."""

    name = "box"

    def __init__(self, lower=-np.inf, upper=np.inf):
        self.lower = float(lower)
        self.upper = float(upper)
        if not self.lower <= self.upper:
            raise ValueError(f"empty box [{lower}, {upper}]")

    @property
    def is_whole_space(self) -> bool:
        return self.lower == -np.inf and self.upper == np.inf

    def project(self, x):
        return _wrap(x, np.clip(_arr(x), self.lower, self.upper))

    def contains(self, x) -> bool:
        a = _arr(x)
        return bool(np.all(a >= self.lower) and np.all(a <= self.upper))

    def normal_interval(self, x):
        """Per-coordinate normal cone bounds at a feasible ``x``."""
        a = _arr(x)
        at_lo = a == self.lower
        at_hi = a == self.upper
        lo = np.where(at_lo, -np.inf, 0.0)
        hi = np.where(at_hi, np.inf, 0.0)
        return lo, hi

    def __repr__(self):
        return f"{type(self).__name__}(lower={self.lower}, upper={self.upper})"


class WholeSpace(ConstraintSet):
    name = "whole_space"

    def __init__(self):
        super().__init__(-np.inf, np.inf)


class NonNegative(ConstraintSet):
    name = "nonneg"

    def __init__(self):
        super().__init__(0.0, np.inf)


class Box(ConstraintSet):
    name = "box"


@dataclass(frozen=True)
class Certificate:
    stationarity_residual: float
    decrease_ok: bool
    nu: float

    @property
    def ok(self) -> bool:
        return self.decrease_ok and self.stationarity_residual <= self.nu


def subgradient_element(R: Regularizer, x):
    return R.subgradient_element(x)


def min_norm_residual(g, dual_step, R: Regularizer, X: ConstraintSet, x_plus) -> float:
    """Exact ``dist(0, g + dual_step + dR(x_plus) + N_X(x_plus))``.

    For separable ``R`` and boxes the set is a product of intervals, so each
    coordinate of ``r = g + dual_step`` is clipped into ``-[lo, hi]``.
    """
    r = _arr(g) + _arr(dual_step)
    xp = _arr(x_plus)
    r_lo, r_hi = R.interval(xp)
    n_lo, n_hi = X.normal_interval(xp)
    lo, hi = r_lo + n_lo, r_hi + n_hi
    gap = np.maximum(0.0, np.maximum(lo + r, -(hi + r)))
    return float(np.linalg.norm(gap))


def _check_supported(kernel, R, X):
    if isinstance(kernel, (EuclideanKernel, CoordPolynomialKernel)):
        return
    if isinstance(kernel, BlockPolynomialKernel) and isinstance(R, ZeroRegularizer) \
            and X.is_whole_space:
        return
    raise UnsupportedCombination(
        f"no certified subproblem solver for {type(kernel).__name__} with "
        f"{type(R).__name__} on {type(X).__name__}; use euclidean or coord_poly")


def _solve(kernel: Kernel, R: Regularizer, X: ConstraintSet, z, eta, tol):
    if isinstance(R, L1Regularizer) and R.lam > 0:
        thr = eta * R.lam
        z = np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
    u = kernel._grad_conj(z, tol, 200)
    if not X.is_whole_space:
        u = np.clip(u, X.lower, X.upper)
    return u


def _sufficient_decrease(kernel, R, g, x, x_plus, eta):
    lin = float(np.dot(g, x_plus - x))
    breg = float(kernel._bregman(x_plus, x))
    lhs = lin + breg / eta + R.value(x_plus)
    rhs = R.value(x)
    scale = abs(lin) + abs(breg) / eta + abs(rhs) + \
        (abs(kernel._value(x)) + abs(kernel._value(x_plus))) / eta
    return lhs <= rhs + 1e-12 * (1.0 + scale), lhs - rhs


def forward_backward(kernel: Kernel, R: Regularizer, X: ConstraintSet, x, g, eta: float,
                     nu: float, refinements: int = 3):
    """Certified Bregman forward-backward step.

    Minimizes ``<g, u - x> + D(u, x)/eta + R(u)`` over ``u in X`` and checks
    both the sufficient-decrease inequality and the stationarity residual
    against ``nu``. The root tolerance is tightened ``refinements`` times
    before giving up.

    Returns
    -------
    (x_plus, Certificate)

    Raises
    ------
    CertificateError
        If the certificates cannot be met.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    _check_supported(kernel, R, X)
    xa, ga = _arr(x), _arr(g)
    if xa.size != kernel.dim or ga.size != kernel.dim:
        raise DimensionError("x and g must match the kernel dimension")
    gx = kernel._grad(xa)
    z = gx - eta * ga
    tol = ROOT_TOL
    for _ in range(refinements + 1):
        u = _solve(kernel, R, X, z, eta, tol)
        dual_step = (kernel._grad(u) - gx) / eta
        res = min_norm_residual(ga, dual_step, R, X, u)
        ok, _ = _sufficient_decrease(kernel, R, ga, xa, u, eta)
        cert = Certificate(res, ok, float(nu))
        if cert.ok:
            return _wrap(x, u), cert
        tol *= 0.01
    raise CertificateError(
        f"forward-backward step failed: residual {res:.3e} vs nu {nu:.3e}, "
        f"decrease {'ok' if ok else 'violated'}")


def bregman_prox(kernel: Kernel, R: Regularizer, x, eta: float, nu: float):
    """``argmin_u eta R(u) + D(u, x)`` with ``dist(0, eta dR(u) + grad(u) - grad(x)) <= nu``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    _check_supported(kernel, R, WholeSpace())
    xa = _arr(x)
    gx = kernel._grad(xa)
    tol = ROOT_TOL
    X = WholeSpace()
    zero = np.zeros_like(xa)
    for _ in range(4):
        u = _solve(kernel, R, X, gx, eta, tol)
        res = eta * min_norm_residual(zero, (kernel._grad(u) - gx) / eta, R, X, u)
        if res <= nu:
            return _wrap(x, u), Certificate(res, True, float(nu))
        tol *= 0.01
    raise CertificateError(f"prox residual {res:.3e} exceeds nu {nu:.3e}")


REGULARIZERS = {"none": ZeroRegularizer, "l1": L1Regularizer}


def make_regularizer(name: str, lam: float = 0.0) -> Regularizer:
    if name == "none":
        return ZeroRegularizer()
    if name == "l1":
        return L1Regularizer(lam)
    raise ValueError(f"unknown regularizer {name!r}")


def make_constraint(name: str, lower=-np.inf, upper=np.inf) -> ConstraintSet:
    if name == "whole_space":
        return WholeSpace()
    if name == "nonneg":
        return NonNegative()
    if name == "box":
        return Box(lower, upper)
    raise ValueError(f"unknown constraint set {name!r}")
