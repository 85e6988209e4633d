"""Desk-scale test problems, each with an independent ground-truth oracle."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .oracle import ConservativeOracle, FiniteSumObjective
from .prox import (ConstraintSet, L1Regularizer, NonNegative, Regularizer,
                   WholeSpace, ZeroRegularizer)


@dataclass
class ProblemSpec:
    name: str
    dim: int
    n_components: int
    seed: int | None
    params: dict[str, Any] = field(default_factory=dict)
    f_star: float | None = None
    x_star: np.ndarray | None = None
    oracle_method: str | None = None
    block_sizes: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.block_sizes:
            self.block_sizes = (self.dim,)


@dataclass
class Problem:
    """Everything a run needs: objective, composite parts, start point, spec."""

    objective: FiniteSumObjective
    spec: ProblemSpec
    x0: np.ndarray
    regularizer: Regularizer = field(default_factory=ZeroRegularizer)
    constraint: ConstraintSet = field(default_factory=WholeSpace)


class AbsResidualSum(FiniteSumObjective):
    """``f(x) = (1/m) sum_i |a_i^T x - b_i|`` with element ``sign(r_i) a_i``."""

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ValueError("A and b disagree on the number of rows")
        super().__init__(dim=A.shape[1])
        self.A, self.b = A, b

    @property
    def n_components(self):
        return self.A.shape[0]

    @property
    def components(self):
        return [AbsResidualSum(self.A[i:i + 1], self.b[i:i + 1]) for i in range(len(self.b))]

    def _component(self, i, x):
        a = self.A[i]
        r = float(a @ x) - self.b[i]
        return abs(r), np.sign(r) * a

    def _full(self, x):
        r = self.A @ x - self.b
        return float(np.mean(np.abs(r))), np.sign(r) @ self.A / len(r)

    def values(self, X):
        """Objective at each row of ``X`` (vectorized oracle helper)."""
        return np.mean(np.abs(np.atleast_2d(X) @ self.A.T - self.b), axis=1)


def lad_vertex_oracle(A, b):
    """Global minimum of ``mean|A x - b|`` by enumerating hyperplane intersections.

    Some optimum of a least-absolute-deviations problem interpolates ``n`` of
    the data points when ``A`` has full column rank, so the minimum over all
    nonsingular ``n``-row subsystems is the global optimum.
    """
    A, b = np.asarray(A, float), np.asarray(b, float)
    m, n = A.shape
    if n > 3:
        raise ValueError("vertex enumeration is limited to n <= 3")
    cands = []
    for rows in itertools.combinations(range(m), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        cands.append(np.linalg.solve(sub, b[list(rows)]))
    cands = np.array(cands)
    vals = np.mean(np.abs(cands @ A.T - b), axis=1)
    j = int(np.argmin(vals))
    return float(vals[j]), cands[j]


def make_l1_regression(m: int, n: int, seed: int = 0, consistent: bool = False,
                       oracle: bool = True):
    """Seeded least-absolute-deviations instance with standard normal data.

    With ``consistent=True`` the targets are ``b = A x_bar`` so ``f* = 0``.
    Returns ``(objective, spec)``; ``spec.f_star`` is filled by vertex
    enumeration when ``oracle`` is set (needs ``n <= 3``).
    """
    if not m >= n >= 1:
        raise ValueError("need m >= n >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    if consistent:
        x_bar = rng.standard_normal(n)
        b = A @ x_bar
    else:
        b = rng.standard_normal(m)
    obj = AbsResidualSum(A, b)
    spec = ProblemSpec("l1_regression", n, m, seed,
                       {"m": m, "n": n, "consistent": consistent})
    if oracle:
        spec.f_star, spec.x_star = lad_vertex_oracle(A, b)
        spec.oracle_method = "vertex_enumeration"
    return obj, spec


class ReluNetLoss(ConservativeOracle):
    """``f(W1, W2) = ||W2 relu(W1 x)||^2 / 2`` for one fixed input ``x``.

    Parameters are packed as ``concat(W1.ravel(), W2.ravel())`` with ``W1`` of
    shape ``(d_hidden, d_in)`` and ``W2`` of shape ``(d_out, d_hidden)``. The
    element is the one automatic differentiation returns with ``relu'(0) = 0``.
    """

    def __init__(self, d_in, d_hidden, d_out, x):
        self.shapes = ((d_hidden, d_in), (d_out, d_hidden))
        super().__init__(d_hidden * d_in + d_out * d_hidden)
        self.x = np.asarray(x, dtype=float).ravel()
        if self.x.size != d_in:
            raise ValueError(f"input has length {self.x.size}, expected {d_in}")

    @property
    def block_sizes(self):
        return tuple(r * c for r, c in self.shapes)

    def unpack(self, w):
        k = self.block_sizes[0]
        return w[:k].reshape(self.shapes[0]), w[k:].reshape(self.shapes[1])

    def _eval(self, w):
        W1, W2 = self.unpack(w)
        pre = W1 @ self.x
        h = np.maximum(pre, 0.0)
        out = W2 @ h
        back = (pre > 0) * (W2.T @ out)
        dW1 = np.outer(back, self.x)
        dW2 = np.outer(out, h)
        return 0.5 * float(out @ out), np.concatenate([dW1.ravel(), dW2.ravel()])


def make_relu_net(d_in, d_hidden, d_out, x_data, seed: int = 0):
    """Two-layer ReLU loss summed over the rows of ``x_data``.

    Returns ``(objective, spec, w0)`` where ``w0`` is a seeded initial weight
    vector. The global minimum 0 is attained at ``W2 = 0``.
    """
    X = np.atleast_2d(np.asarray(x_data, dtype=float))
    comps = [ReluNetLoss(d_in, d_hidden, d_out, row) for row in X]
    obj = FiniteSumObjective(comps)
    rng = np.random.default_rng(seed)
    w0 = rng.standard_normal(obj.dim) / np.sqrt(max(d_in, d_hidden))
    spec = ProblemSpec("relu_net", obj.dim, len(comps), seed,
                       {"d_in": d_in, "d_hidden": d_hidden, "d_out": d_out},
                       f_star=0.0, oracle_method="zero_output_layer",
                       block_sizes=comps[0].block_sizes)
    return obj, spec, w0


class NonRegularScalar(ConservativeOracle):
    """``f(x) = x^2 - |x| + 1`` with selection ``d(x) = 2x - sign(x)``, ``d(0) = 0``.

    The origin is stationary for this selection although it is a local
    maximum; the minima are ``x = +-1/2`` with ``f = 3/4``.
    """

    def __init__(self):
        super().__init__(1)

    def _eval(self, x):
        u = x[0]
        return u * u - abs(u) + 1.0, np.array([2.0 * u - np.sign(u)])


def make_nonregular_scalar():
    obj = FiniteSumObjective([NonRegularScalar()])
    spec = ProblemSpec("nonregular_scalar", 1, 1, None, f_star=0.75,
                       x_star=np.array([0.5]), oracle_method="closed_form")
    return obj, spec


class ShiftedQuadratic(ConservativeOracle):
    def __init__(self, center):
        self.center = np.asarray(center, dtype=float).ravel()
        super().__init__(self.center.size)

    def _eval(self, x):
        r = x - self.center
        return 0.5 * float(r @ r), r


def make_quadratic(n: int = 2, n_components: int = 1, seed: int = 0):
    """``f(x) = (1/N) sum_i ||x - c_i||^2 / 2``; a single component is centered at 0."""
    if n_components == 1:
        centers = np.zeros((1, n))
    else:
        centers = np.random.default_rng(seed).standard_normal((n_components, n))
    obj = FiniteSumObjective([ShiftedQuadratic(c) for c in centers])
    mean = centers.mean(axis=0)
    f_star = 0.5 * float(np.mean(np.sum((centers - mean) ** 2, axis=1)))
    spec = ProblemSpec("quadratic", n, n_components, seed, {"n": n},
                       f_star=f_star, x_star=mean, oracle_method="closed_form")
    return obj, spec


def grid_oracle(fun, lower, upper, n_dim, points=401, zoom_points=101, resolution=1e-6):
    """Minimize ``fun`` over a box by a coarse grid followed by zoomed refinements.

    Each refinement re-grids a window of three coarse steps around the current
    best point until the spacing reaches ``resolution``. ``fun`` takes an
    ``(k, n_dim)`` array and returns ``k`` values.
    """
    if n_dim > 2:
        raise ValueError("grid oracle is limited to n <= 2")
    lo = np.full(n_dim, float(lower))
    hi = np.full(n_dim, float(upper))
    count = points
    best_x, best_f = None, np.inf
    while True:
        axes = [np.linspace(l, h, count) for l, h in zip(lo, hi)]
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = fun(grid)
        j = int(np.argmin(vals))
        if vals[j] <= best_f:
            best_f, best_x = float(vals[j]), grid[j].copy()
        step = (hi - lo) / (count - 1)
        if np.all(step <= resolution):
            return best_f, best_x
        lo = np.maximum(best_x - 3 * step, float(lower))
        hi = np.minimum(best_x + 3 * step, float(upper))
        count = zoom_points


def make_lasso_lad(m: int, n: int, lam: float, seed: int = 0, oracle: bool = True,
                   x_max: float | None = None):
    """``(1/m) sum |a_i^T x - b_i| + lam ||x||_1`` over ``x >= 0``.

    Returns ``(objective, regularizer, constraint, spec)``; ``spec.f_star``
    (of ``f + R``) comes from grid refinement over ``[0, x_max]^n`` with
    ``x_max = f(0) / lam`` by default, which contains every minimizer because
    ``lam ||x||_1 <= f(0)`` there.
    """
    obj, _ = make_l1_regression(m, n, seed, oracle=False)
    R = L1Regularizer(lam)
    X = NonNegative()
    spec = ProblemSpec("lasso_lad", n, m, seed, {"m": m, "n": n, "lambda": lam})
    if oracle:
        if x_max is None:
            f0 = obj.value(np.zeros(n))
            x_max = f0 / lam if lam > 0 else 10.0
        spec.f_star, spec.x_star = grid_oracle(
            lambda P: obj.values(P) + lam * np.sum(np.abs(P), axis=1), 0.0, x_max, n)
        spec.oracle_method = "grid_refinement"
        spec.params["x_max"] = float(x_max)
    return obj, R, X, spec


PROBLEMS = ("l1_regression", "relu_net", "nonregular_scalar", "lasso_lad", "quadratic")


def build_problem(name: str, **params) -> Problem:
    """Construct a named problem from config parameters."""
    if name == "l1_regression":
        obj, spec = make_l1_regression(int(params.get("m", 50)), int(params.get("n", 2)),
                                       int(params.get("seed", 0)),
                                       bool(params.get("consistent", False)),
                                       oracle=int(params.get("n", 2)) <= 3)
        return Problem(obj, spec, np.zeros(obj.dim))
    if name == "lasso_lad":
        n = int(params.get("n", 2))
        obj, R, X, spec = make_lasso_lad(int(params.get("m", 20)), n,
                                         float(params.get("lambda", 0.1)),
                                         int(params.get("seed", 0)), oracle=n <= 2)
        return Problem(obj, spec, np.zeros(obj.dim), R, X)
    if name == "relu_net":
        d_in = int(params.get("d_in", 3))
        rng = np.random.default_rng(int(params.get("data_seed", 1)))
        data = rng.standard_normal((int(params.get("samples", 8)), d_in))
        obj, spec, w0 = make_relu_net(d_in, int(params.get("d_hidden", 4)),
                                      int(params.get("d_out", 1)), data,
                                      int(params.get("seed", 0)))
        return Problem(obj, spec, w0)
    if name == "nonregular_scalar":
        obj, spec = make_nonregular_scalar()
        return Problem(obj, spec, np.array([float(params.get("x0", 2.0))]))
    if name == "quadratic":
        n = int(params.get("n", 2))
        obj, spec = make_quadratic(n, int(params.get("components", 1)),
                                   int(params.get("seed", 0)))
        return Problem(obj, spec, np.ones(n))
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEMS}")
