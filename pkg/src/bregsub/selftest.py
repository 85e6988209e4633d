"""Fast property checks runnable without pytest (``bregsub selftest``).

Each check draws seeded random inputs, evaluates an invariant and prints one
``PASS``/``FAIL`` line. The pytest suite covers the same ground in more depth.
"""
from __future__ import annotations

import numpy as np

from .blocked import BlockedVector
from .kernels import BlockPolynomialKernel, CoordPolynomialKernel, EuclideanKernel
from .oracle import Sampler, noise_sequence
from .problems import make_l1_regression
from .optim import sbg_update


def _kernels(sizes):
    return [EuclideanKernel(sizes), BlockPolynomialKernel(sizes, 0.01, 4),
            BlockPolynomialKernel(sizes, 1e-6, 6), CoordPolynomialKernel(sizes, 0.01, 4)]


def _random_blocked(rng):
    sizes = tuple(rng.integers(1, 6, size=rng.integers(1, 4)))
    scale = 10.0 ** rng.uniform(-3, 2)
    return BlockedVector(scale * rng.standard_normal(sum(sizes)), sizes)


def check_round_trip(rng, trials=200):
    worst = 0.0
    for _ in range(trials):
        x = _random_blocked(rng)
        for k in _kernels(x.sizes):
            err = (k.grad_conj(k.grad(x)) - x).norm() / (1 + x.norm())
            worst = max(worst, err)
    return worst <= 1e-9, f"max relative round-trip error {worst:.2e}"


def check_bregman(rng, trials=200):
    worst = 0.0
    for _ in range(trials):
        x = _random_blocked(rng)
        y = x.like(x.data + rng.standard_normal(x.total_dim))
        for k in _kernels(x.sizes):
            worst = min(worst, k.bregman(x, y), k.bregman(y, x))
    return worst >= -1e-12, f"min Bregman distance {worst:.2e}"


def check_inverse_hessian(rng, trials=200):
    worst = 0.0
    for _ in range(trials):
        x = _random_blocked(rng)
        v = x.like(rng.standard_normal(x.total_dim))
        for k in _kernels(x.sizes):
            back = k.hessian_apply(x, k.inv_hessian_apply(x, v))
            worst = max(worst, (back - v).norm() / v.norm())
    return worst <= 1e-9, f"max relative H (H^-1 v) - v error {worst:.2e}"


def check_reshuffle_zero_sum(rng):
    worst = 0.0
    for n in (3, 10, 100):
        obj, _ = make_l1_regression(max(n, 2), 2, seed=int(rng.integers(1000)), oracle=False)
        sampler = Sampler(obj.n_components, "reshuffle", seed=int(rng.integers(1000)))
        x = rng.standard_normal(2)
        xis = noise_sequence(obj, sampler, x, obj.n_components)
        worst = max(worst, float(np.linalg.norm(np.sum(xis, axis=0))))
    return worst <= 1e-12, f"max epoch noise sum {worst:.2e}"


def check_euclidean_sbg(rng, trials=100):
    k = EuclideanKernel(3)
    for _ in range(trials):
        x, g = rng.standard_normal(3), rng.standard_normal(3)
        eta = float(rng.uniform(1e-4, 1))
        xp, _, _ = sbg_update(k, x, g, eta)
        if not np.array_equal(xp, x - eta * g):
            return False, "Euclidean mirror step differs from x - eta g"
    return True, "Euclidean mirror step equals x - eta g bitwise"


CHECKS = [
    ("kernel round trip", check_round_trip),
    ("bregman nonnegative", check_bregman),
    ("inverse hessian", check_inverse_hessian),
    ("reshuffle zero-sum noise", check_reshuffle_zero_sum),
    ("euclidean reduction", check_euclidean_sbg),
]


def selftest(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    ok_all = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn(rng)
        except Exception as err:  # report, keep going
            ok, detail = False, f"raised {type(err).__name__}: {err}"
        ok_all &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all
