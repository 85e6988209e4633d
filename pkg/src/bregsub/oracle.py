"""Finite-sum objectives, conservative-field oracles and index samplers.

Every oracle returns a deterministic selection from its conservative field.
Kinks are resolved with ``sign(0) = 0`` and ``relu'(0) = 0``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .blocked import BlockedVector, DimensionError


def _flat(x, dim):
    arr = x.data if isinstance(x, BlockedVector) else np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size != dim:
        raise DimensionError(f"expected a vector of dimension {dim}, got shape {arr.shape}")
    return arr


class ConservativeOracle:
    """A path-differentiable function with a fixed selection ``d(x) in D_f(x)``.

    Subclasses implement ``_eval(x) -> (value, element)`` on flat arrays.
    """

    def __init__(self, dim: int):
        self.dim = int(dim)

    def eval(self, x):
        """Return ``(f(x), d)``; ``d`` has the same type as ``x``."""
        f, d = self._eval(_flat(x, self.dim))
        if isinstance(x, BlockedVector):
            d = x.like(d)
        return float(f), d

    def value(self, x) -> float:
        return self.eval(x)[0]

    def _eval(self, x):
        raise NotImplementedError


class FiniteSumObjective(ConservativeOracle):
    """``f = (1/N) sum_i f_i`` with element ``(1/N) sum_i d_i`` (sum rule).

    The generic implementation loops over ``components``; problem classes
    override ``_component`` and ``_full`` with vectorized versions.
    """

    def __init__(self, components: Sequence[ConservativeOracle] | None = None, dim=None):
        if components is not None:
            components = list(components)
            if not components:
                raise ValueError("need at least one component")
            dims = {c.dim for c in components}
            if len(dims) != 1:
                raise DimensionError(f"components disagree on dimension: {sorted(dims)}")
            dim = dims.pop()
        super().__init__(dim)
        self._components = components

    @property
    def n_components(self) -> int:
        return len(self._components)

    @property
    def components(self) -> list[ConservativeOracle]:
        return list(self._components)

    def eval_component(self, i: int, x):
        if not 0 <= i < self.n_components:
            raise IndexError(f"component {i} out of range [0, {self.n_components})")
        f, d = self._component(int(i), _flat(x, self.dim))
        if isinstance(x, BlockedVector):
            d = x.like(d)
        return float(f), d

    def eval_full(self, x):
        return self.eval(x)

    def eval_batch(self, idx, x):
        """Average value and element over the component indices ``idx``."""
        xa = _flat(x, self.dim)
        fs, ds = zip(*(self._component(int(i), xa) for i in idx))
        d = np.mean(ds, axis=0)
        if isinstance(x, BlockedVector):
            d = x.like(d)
        return float(np.mean(fs)), d

    def _component(self, i, x):
        return self._components[i]._eval(x)

    def _full(self, x):
        total_f, total_d = 0.0, np.zeros(self.dim)
        for c in self._components:
            f, d = c._eval(x)
            total_f += f
            total_d = total_d + d
        n = self.n_components
        return total_f / n, total_d / n

    def _eval(self, x):
        return self._full(x)


class Sampler:
    """Component index stream for a finite sum with ``n`` terms.

    Modes
    -----
    ``reshuffle``
        Each epoch visits a fresh permutation of ``range(n)``.
    ``iid``
        Indices drawn uniformly with replacement, ``batch_size`` per step.
    ``full``
        Deterministic full-batch evaluation, one step per epoch.

    Randomness comes from numpy's PCG64 bit generator seeded with ``seed``.
    """

    MODES = ("reshuffle", "iid", "full")

    def __init__(self, n: int, mode: str = "reshuffle", seed: int = 0, batch_size: int = 1):
        if n < 1:
            raise ValueError("sampler needs n >= 1")
        if mode not in self.MODES:
            raise ValueError(f"unknown sampler mode {mode!r}; choose from {self.MODES}")
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.n = int(n)
        self.mode = mode
        self.seed = int(seed)
        self.batch_size = int(batch_size)
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        self._perm = None
        self._pos = 0
        self.epoch = 0
        self.draws = 0

    @property
    def steps_per_epoch(self) -> int:
        if self.mode == "full":
            return 1
        if self.mode == "iid":
            return -(-self.n // self.batch_size)
        return self.n

    def next_index(self) -> int:
        """Next component index (``reshuffle`` and ``iid`` modes)."""
        if self.mode == "reshuffle":
            if self._perm is None or self._pos == self.n:
                if self._perm is not None:
                    self.epoch += 1
                self._perm = self.rng.permutation(self.n)
                self._pos = 0
            i = int(self._perm[self._pos])
            self._pos += 1
        elif self.mode == "iid":
            i = int(self.rng.integers(self.n))
            self.epoch = self.draws // self.n
        else:
            raise ValueError("full-batch sampler has no per-component index")
        self.draws += 1
        return i

    def next_batch(self) -> np.ndarray:
        if self.mode == "iid":
            idx = self.rng.integers(self.n, size=self.batch_size)
            self.epoch = self.draws // self.n
            self.draws += self.batch_size
            return idx
        return np.array([self.next_index()])

    def sample(self, objective: FiniteSumObjective, x):
        """Sampled ``(value, element)`` at ``x`` according to the mode."""
        if self.mode == "full":
            self.draws += 1
            self.epoch = self.draws - 1
            return objective.eval_full(x)
        if self.mode == "iid" and self.batch_size > 1:
            return objective.eval_batch(self.next_batch(), x)
        return objective.eval_component(self.next_index(), x)


def noise_sequence(objective: FiniteSumObjective, sampler: Sampler, x, count: int) -> list:
    """``xi_k = d_{i_k}(x) - full_element(x)`` for ``count`` draws at a frozen ``x``."""
    _, full = objective.eval_full(x)
    full = np.asarray(full, dtype=float)
    out = []
    for _ in range(count):
        _, d = sampler.sample(objective, x)
        out.append(np.asarray(d, dtype=float) - full)
    return out


def noise_partial_sum_check(etas, xis, T: float, start_fraction: float = 0.5) -> float:
    """Largest windowed partial-sum norm ``||sum_{k=s}^{i} eta_k xi_k||``.

    For every start ``s`` in the trailing part of the run (from
    ``start_fraction`` of its length onward) the window extends to the last
    index ``i`` whose elapsed time ``sum_{s<=k<i} eta_k`` is at most ``T``.
    A diagnostic for the vanishing-noise condition, not a proof of it.
    """
    etas = np.asarray(etas, dtype=float)
    if len(etas) == 0:
        raise ValueError("empty noise sequence")
    xis = np.asarray([np.asarray(x, dtype=float).ravel() for x in xis])
    if len(xis) != len(etas):
        raise ValueError(f"{len(etas)} stepsizes but {len(xis)} noise vectors")
    # S[i] = sum_{k<i} eta_k xi_k, lam[i] = sum_{k<i} eta_k
    S = np.vstack([np.zeros(xis.shape[1]), np.cumsum(etas[:, None] * xis, axis=0)])
    lam = np.concatenate(([0.0], np.cumsum(etas)))
    n = len(etas)
    worst = 0.0
    for s in range(int(start_fraction * n), n):
        last = np.searchsorted(lam, lam[s] + T, side="right") - 1
        last = min(max(last, s), n - 1)
        sums = S[s + 1:last + 2] - S[s]
        worst = max(worst, float(np.max(np.linalg.norm(sums, axis=1))))
    return worst


def epoch_drift_radius(iterates, n: int) -> list[float]:
    """Per-step perturbation radius ``2 n sum ||x_{l+1} - x_l||`` within each epoch.

    ``iterates`` holds ``x_0, x_1, ...``; the sum runs over the steps of the
    current reshuffling epoch taken so far.
    """
    xs = np.asarray([np.asarray(x, dtype=float) for x in iterates])
    steps = np.linalg.norm(np.diff(xs, axis=0), axis=1)
    out = []
    acc = 0.0
    for k, step in enumerate(steps):
        if k % n == 0:
            acc = 0.0
        acc += step
        out.append(2.0 * n * acc)
    return out
