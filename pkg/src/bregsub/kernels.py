"""Legendre kernels on R^n and their Bregman geometry.

Each kernel exposes the value ``phi(x)``, the mirror map ``grad`` and its
inverse ``grad_conj``, the Bregman distance, and Hessian / inverse-Hessian
products. Methods accept a :class:`~bregsub.blocked.BlockedVector` or a flat
array and return the same kind of object.
"""
from __future__ import annotations

import numpy as np

from .blocked import BlockedVector, DimensionError, _as_sizes

ROOT_TOL = 1e-12
ROOT_MAX_ITER = 100
ZERO_BLOCK = 1e-300
SCALAR_PATH_MAX = 8


class RootFindingError(RuntimeError):
    """The scalar inverse of the mirror map did not reach tolerance."""


def _solve_scalar(s, sigma, p, tol, max_iter):
    # Same iteration as the vectorized path, on Python floats.
    lo, hi = 0.0, s
    t = min(s, (s / sigma) ** (1.0 / p)) if sigma > 0 else s
    thresh = tol * (1.0 + s)
    for _ in range(max_iter):
        tp = t ** (p - 1.0)
        h = t + sigma * tp * t - s
        if abs(h) <= thresh:
            return t
        if h < 0:
            lo = t
        else:
            hi = t
        t_newton = t - h / (1.0 + sigma * p * tp)
        t = t_newton if lo < t_newton < hi else 0.5 * (lo + hi)
    h = t + sigma * t ** p - s
    if abs(h) > thresh:
        raise RootFindingError(
            f"mirror-map inverse did not converge in {max_iter} iterations "
            f"(residual excess {abs(h) - thresh:.3e})")
    return t


def solve_radial(s, sigma, degree, tol=ROOT_TOL, max_iter=ROOT_MAX_ITER):
    """Solve ``t + sigma * t**(degree - 1) = s`` for ``t >= 0``, elementwise.

    Newton's method safeguarded by bisection on the bracket ``[0, s]``. The
    left-hand side is increasing and ``>= t``, so the bracket always holds the
    root. Converged entries satisfy ``|residual| <= tol * (1 + s)``.

    Parameters
    ----------
    s : array_like
        Nonnegative right-hand sides.
    sigma, degree : array_like
        Broadcastable against ``s``; ``degree >= 2``.

    Returns
    -------
    ndarray
        The roots ``t``.
    """
    s = np.asarray(s, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), s.shape)
    p = np.broadcast_to(np.asarray(degree, dtype=float) - 1.0, s.shape)
    if np.any(s < 0):
        raise ValueError("right-hand side must be nonnegative")
    if s.size <= SCALAR_PATH_MAX:
        out = [_solve_scalar(si, sg, pi, tol, max_iter)
               for si, sg, pi in zip(s.ravel().tolist(), sigma.ravel().tolist(),
                                     p.ravel().tolist())]
        return np.array(out).reshape(s.shape)

    lo = np.zeros_like(s)
    hi = s.copy()
    # Both candidates lie at or above the root, so Newton descends monotonically.
    with np.errstate(divide="ignore"):
        cap = np.where(sigma > 0, (s / np.where(sigma > 0, sigma, 1.0)) ** (1.0 / p), np.inf)
    t = np.minimum(s, cap)
    thresh = tol * (1.0 + s)

    active = np.ones(s.shape, dtype=bool)
    for _ in range(max_iter):
        tp = t ** (p - 1.0)
        h = t + sigma * tp * t - s
        active = np.abs(h) > thresh
        if not active.any():
            return t
        lo = np.where(active & (h < 0), t, lo)
        hi = np.where(active & (h > 0), t, hi)
        dh = 1.0 + sigma * p * tp
        t_newton = t - h / dh
        inside = (t_newton > lo) & (t_newton < hi)
        t_next = np.where(inside, t_newton, 0.5 * (lo + hi))
        t = np.where(active, t_next, t)
    h = t + sigma * t ** p - s
    if np.any(np.abs(h) > thresh):
        worst = float(np.max(np.abs(h) - thresh))
        raise RootFindingError(
            f"mirror-map inverse did not converge in {max_iter} iterations "
            f"(residual excess {worst:.3e})")
    return t


def _unwrap(x, dim, sizes=None):
    if isinstance(x, BlockedVector):
        if sizes is not None and x.sizes != sizes:
            raise DimensionError(f"block layout {x.sizes} does not match kernel layout {sizes}")
        arr = x.data
    else:
        arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size != dim:
        raise DimensionError(f"expected a vector of dimension {dim}, got shape {arr.shape}")
    return arr


def _wrap(template, arr):
    if isinstance(template, BlockedVector):
        return template.like(arr)
    return arr


class Kernel:
    """Base class: a supercoercive Legendre function on all of R^n.

    Subclasses implement the ``_value``/``_grad``/``_grad_conj``/``_hess``/
    ``_inv_hess`` hooks on flat float arrays.
    """

    name = "kernel"

    def __init__(self, sizes):
        self.sizes = _as_sizes(sizes)
        self.dim = sum(self.sizes)
        self._offsets = np.concatenate(([0], np.cumsum(self.sizes)[:-1]))

    def value(self, x) -> float:
        return float(self._value(_unwrap(x, self.dim, self.sizes)))

    def grad(self, x):
        return _wrap(x, self._grad(_unwrap(x, self.dim, self.sizes)))

    def grad_conj(self, y, tol=ROOT_TOL, max_iter=ROOT_MAX_ITER):
        """Inverse mirror map: the unique ``x`` with ``grad(x) == y``."""
        return _wrap(y, self._grad_conj(_unwrap(y, self.dim, self.sizes), tol, max_iter))

    def bregman(self, x, y) -> float:
        """``phi(x) - phi(y) - <grad phi(y), x - y>``."""
        xa, ya = _unwrap(x, self.dim, self.sizes), _unwrap(y, self.dim, self.sizes)
        return float(self._bregman(xa, ya))

    def hessian_apply(self, x, v):
        xa, va = _unwrap(x, self.dim, self.sizes), _unwrap(v, self.dim, self.sizes)
        return _wrap(v, self._hess(xa, va))

    def inv_hessian_apply(self, x, v):
        xa, va = _unwrap(x, self.dim, self.sizes), _unwrap(v, self.dim, self.sizes)
        return _wrap(v, self._inv_hess(xa, va))

    def _bregman(self, x, y):
        return self._value(x) - self._value(y) - np.dot(self._grad(y), x - y)

    def __repr__(self):
        return f"{type(self).__name__}(sizes={list(self.sizes)})"


class EuclideanKernel(Kernel):
    """``phi(x) = ||x||^2 / 2``; every map is the identity."""

    name = "euclidean"

    def __init__(self, sizes):
        super().__init__(sizes)

    def _value(self, x):
        return 0.5 * np.dot(x, x)

    def _grad(self, x):
        return x.copy()

    def _grad_conj(self, y, tol, max_iter):
        return y.copy()

    def _bregman(self, x, y):
        d = x - y
        return 0.5 * np.dot(d, d)

    def _hess(self, x, v):
        return v.copy()

    def _inv_hess(self, x, v):
        return v.copy()


def _check_poly_params(sigma, degree, count):
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (count,)).copy()
    degree_arr = np.broadcast_to(np.asarray(degree), (count,))
    if np.any(~np.isfinite(sigma)) or np.any(sigma < 0):
        raise ValueError(f"sigma must be finite and nonnegative, got {sigma}")
    if not all(float(r).is_integer() for r in degree_arr):
        raise ValueError(f"degree must be an integer, got {degree}")
    degree_arr = degree_arr.astype(int)
    if np.any(degree_arr < 4):
        raise ValueError(f"degree must be >= 4, got {degree}")
    return sigma, degree_arr


class BlockPolynomialKernel(Kernel):
    """Blockwise polynomial kernel ``sum_i p_i(||x_i||)``.

    ``p_i(t) = t^2/2 + (sigma_i / r_i) t^{r_i}`` with integer ``r_i >= 4``, so
    ``grad phi(x)_i = (1 + sigma_i ||x_i||^{r_i - 2}) x_i``.

    Parameters
    ----------
    sizes : sequence of int
        Block lengths (one block per layer).
    sigma : float or sequence of float
        Shared or per-block coefficient; 0 recovers the Euclidean kernel.
    degree : int or sequence of int
        Shared or per-block degree ``r``.
    """

    name = "block_poly"

    def __init__(self, sizes, sigma=0.01, degree=4):
        super().__init__(sizes)
        self.sigma, self.degree = _check_poly_params(sigma, degree, len(self.sizes))
        self._sig = np.repeat(self.sigma, self.sizes)
        self._deg = np.repeat(self.degree, self.sizes)
        self._sig_list = self.sigma.tolist()
        self._deg_list = [float(r) for r in self.degree]

    def __repr__(self):
        return (f"BlockPolynomialKernel(sizes={list(self.sizes)}, "
                f"sigma={self.sigma.tolist()}, degree={self.degree.tolist()})")

    def _norms(self, x):
        return np.sqrt(np.add.reduceat(x * x, self._offsets))

    def _value(self, x):
        t = self._norms(x)
        return np.sum(0.5 * t * t + self.sigma / self.degree * t ** self.degree)

    def _scale(self, x):
        t = self._norms(x)
        return 1.0 + self.sigma * t ** (self.degree - 2)

    def _grad(self, x):
        return np.repeat(self._scale(x), self.sizes) * x

    def _grad_conj(self, y, tol, max_iter):
        s = self._norms(y)
        if len(self.sizes) <= SCALAR_PATH_MAX:
            t = np.array([_solve_scalar(si, sg, r - 1.0, tol, max_iter)
                          for si, sg, r in zip(s.tolist(), self._sig_list, self._deg_list)])
        else:
            t = solve_radial(s, self.sigma, self.degree, tol, max_iter)
        ratio = np.where(s < ZERO_BLOCK, 0.0, t / np.where(s < ZERO_BLOCK, 1.0, s))
        return np.repeat(ratio, self.sizes) * y

    def _rank_one(self, x):
        t = self._norms(x)
        a = 1.0 + self.sigma * t ** (self.degree - 2)
        b = self.sigma * (self.degree - 2) * t ** (self.degree - 4)
        return t, a, b

    def _hess(self, x, v):
        # Block Hessian: a I + b x x^T.
        _, a, b = self._rank_one(x)
        xv = np.add.reduceat(x * v, self._offsets)
        return np.repeat(a, self.sizes) * v + np.repeat(b * xv, self.sizes) * x

    def _inv_hess(self, x, v):
        # Sherman-Morrison: (a I + b x x^T)^{-1} = I/a - b x x^T / (a (a + b t^2)).
        t, a, b = self._rank_one(x)
        xv = np.add.reduceat(x * v, self._offsets)
        c = b / (a * (a + b * t * t))
        return v / np.repeat(a, self.sizes) - np.repeat(c * xv, self.sizes) * x


class CoordPolynomialKernel(Kernel):
    """Separable kernel ``sum_j u_j^2/2 + (sigma/r)|u_j|^r``."""

    name = "coord_poly"

    def __init__(self, sizes, sigma=0.01, degree=4):
        super().__init__(sizes)
        sig, deg = _check_poly_params(sigma, degree, 1)
        self.sigma, self.degree = float(sig[0]), int(deg[0])

    def __repr__(self):
        return (f"CoordPolynomialKernel(sizes={list(self.sizes)}, "
                f"sigma={self.sigma}, degree={self.degree})")

    def _value(self, x):
        u = np.abs(x)
        return np.sum(0.5 * u * u + self.sigma / self.degree * u ** self.degree)

    def _grad(self, x):
        return (1.0 + self.sigma * np.abs(x) ** (self.degree - 2)) * x

    def _grad_conj(self, y, tol, max_iter):
        t = solve_radial(np.abs(y), self.sigma, self.degree, tol, max_iter)
        return np.sign(y) * t

    def diag_hessian(self, x):
        return 1.0 + self.sigma * (self.degree - 1) * np.abs(x) ** (self.degree - 2)

    def _hess(self, x, v):
        return self.diag_hessian(x) * v

    def _inv_hess(self, x, v):
        return v / self.diag_hessian(x)


KERNELS = {
    "euclidean": EuclideanKernel,
    "block_poly": BlockPolynomialKernel,
    "coord_poly": CoordPolynomialKernel,
}


def make_kernel(kind: str, sizes, sigma=0.01, degree=4) -> Kernel:
    """Build a kernel by config name."""
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel kind {kind!r}; choose from {sorted(KERNELS)}")
    if kind == "euclidean":
        return EuclideanKernel(sizes)
    return KERNELS[kind](sizes, sigma=sigma, degree=degree)
