import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("pkg", deadline=None, max_examples=100)
settings.load_profile("pkg")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def bisect_root(fun, lo, hi, tol=1e-14):
    """Plain bisection for an increasing scalar function; an oracle independent of the package."""
    flo = fun(lo)
    assert flo <= 0 <= fun(hi)
    while hi - lo > tol * (1 + abs(hi)):
        mid = 0.5 * (lo + hi)
        if fun(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fd_grad(f, x, h=1e-5):
    """Central finite differences."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def dense_block_hessian(x, sizes, sigma, degree):
    """Assemble the block polynomial Hessian from its closed form, block by block."""
    n = sum(sizes)
    H = np.zeros((n, n))
    o = 0
    for s in sizes:
        xb = x[o:o + s]
        t = np.linalg.norm(xb)
        a = 1 + sigma * t ** (degree - 2)
        b = sigma * (degree - 2) * t ** (degree - 4)
        H[o:o + s, o:o + s] = a * np.eye(s) + b * np.outer(xb, xb)
        o += s
    return H
