"""Conservative fields on a two-layer ReLU loss, and a weaker stationarity.

Automatic differentiation uses relu'(0) = 0. At points where a hidden unit
sits exactly at its kink the returned element ignores that unit, so zero
elements can appear at points that are not local minima.
"""
import numpy as np

from bregsub.problems import make_nonregular_scalar, make_relu_net

# %% A scalar network: f(W1, W2) = (W2 relu(W1 x))^2 / 2 with x = 1.
obj, spec, _ = make_relu_net(1, 1, 1, [[1.0]])
for w in ([1.0, 1.0], [0.0, 1.0], [-1.0, 1.0], [1.0, 0.0]):
    f, d = obj.eval_full(np.array(w))
    print(f"W1={w[0]:5.1f} W2={w[1]:4.1f}  f={f:.2f}  element={d}")

# %% x^2 - |x| + 1 has minima at +-1/2, but the selection 2x - sign(x) is 0 at
# the origin, a local maximum.
obj, spec = make_nonregular_scalar()
for x in (-0.5, 0.0, 0.5, 1.0):
    f, d = obj.eval_full(np.array([x]))
    print(f"x={x:5.2f}  f={f:.3f}  d={d[0]:+.2f}")
print("true minimum:", spec.f_star, "at", spec.x_star)
