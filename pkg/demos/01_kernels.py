"""Legendre kernels: mirror maps, their inverses and Bregman distances.

Run with ``python3 demos/01_kernels.py``.
"""
import numpy as np

from bregsub import BlockedVector, BlockPolynomialKernel, CoordPolynomialKernel, EuclideanKernel

# %% A parameter vector with two blocks, as if it held two layers.
x = BlockedVector.from_blocks([[3.0, 4.0], [0.5]])
print("x          :", x.data, "blocks", x.sizes)

kernels = [EuclideanKernel(x.sizes),
           BlockPolynomialKernel(x.sizes, sigma=0.01, degree=4),
           CoordPolynomialKernel(x.sizes, sigma=0.01, degree=4)]

# %% grad maps the primal point to the dual space; grad_conj maps it back.
for k in kernels:
    y = k.grad(x)
    back = k.grad_conj(y)
    print(f"{k!r:60s} grad={np.round(y.data, 4)} round-trip error={(back - x).norm():.1e}")

# %% The block kernel rescales each block by 1 + sigma |x_l|^2, so the first
# block (norm 5) is stretched by 1.25 and the second barely at all.
k = kernels[1]
print("scaling per block:", k.grad(x).block_norms() / x.block_norms())

# %% Bregman distances are asymmetric, and grow faster than the squared
# distance once blocks are large.
z = BlockedVector.from_blocks([[0.0, 0.0], [0.0]])
for k in kernels:
    print(f"{type(k).__name__:24s} D(x,0)={k.bregman(x, z):8.4f}  D(0,x)={k.bregman(z, x):8.4f}")

# %% The block Hessian is a*I + b*x x^T, so a linear solve costs O(n).
v = BlockedVector(np.ones(3), x.sizes)
w = k.inv_hessian_apply(x, v)
print("H^-1 v     :", w.data, " check H w =", k.hessian_apply(x, w).data)
