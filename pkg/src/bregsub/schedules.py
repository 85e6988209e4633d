"""Stepsize, momentum and tolerance schedules indexed by epoch."""
from __future__ import annotations

import math

DECAY_EXPONENT = 1.1


class Schedule:
    """Maps an epoch counter ``s >= 0`` to a positive value."""

    kind = "schedule"

    def __call__(self, epoch: int) -> float:
        if epoch < 0:
            raise ValueError("epoch must be nonnegative")
        return self._eval(int(epoch))

    def _eval(self, epoch: int) -> float:
        raise NotImplementedError


class Constant(Schedule):
    kind = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    def _eval(self, epoch):
        return self.value

    def __repr__(self):
        return f"Constant({self.value})"


class LogDecay(Schedule):
    """``v_s = v0 / (1 + log(s + 1)^1.1)``."""

    kind = "log_decay"

    def __init__(self, initial: float):
        self.initial = float(initial)

    def _eval(self, epoch):
        return self.initial / (1.0 + math.log(epoch + 1) ** DECAY_EXPONENT)

    def __repr__(self):
        return f"LogDecay({self.initial})"


class StagedDecay(Schedule):
    """Constant, then x0.1 at ``stage1`` and again at ``stage2``, then log decay.

    After ``stage2`` the value is ``0.01 v0 / (1 + log(s - stage2)^1.1)``; at
    ``s == stage2`` itself the logarithm is undefined and ``0.01 v0`` is used.
    """

    kind = "staged_lstm"

    def __init__(self, initial: float, stage1: int = 150, stage2: int = 300):
        if not 0 < stage1 < stage2:
            raise ValueError("need 0 < stage1 < stage2")
        self.initial = float(initial)
        self.stage1 = int(stage1)
        self.stage2 = int(stage2)

    def _eval(self, epoch):
        if epoch < self.stage1:
            return self.initial
        if epoch < self.stage2:
            return 0.1 * self.initial
        if epoch == self.stage2:
            return 0.01 * self.initial
        return 0.01 * self.initial / (1.0 + math.log(epoch - self.stage2) ** DECAY_EXPONENT)

    def __repr__(self):
        return f"StagedDecay({self.initial}, {self.stage1}, {self.stage2})"


class EpochConstant:
    """Holds a per-epoch schedule fixed across the ``epoch_len`` steps of each epoch."""

    def __init__(self, inner: Schedule, epoch_len: int):
        if epoch_len < 1:
            raise ValueError("epoch_len must be >= 1")
        self.inner = inner
        self.epoch_len = int(epoch_len)

    def at_iteration(self, k: int) -> float:
        return self.inner(k // self.epoch_len)

    def __call__(self, epoch: int) -> float:
        return self.inner(epoch)


class PolyTolerance:
    """Subproblem tolerance ``nu_k = nu0 / (1 + k)^power``."""

    def __init__(self, nu0: float, power: float = 0.6):
        if nu0 < 0:
            raise ValueError("nu0 must be nonnegative")
        self.nu0 = float(nu0)
        self.power = float(power)

    def __call__(self, k: int) -> float:
        return self.nu0 / (1.0 + k) ** self.power


SCHEDULES = ("constant", "log_decay", "staged_lstm")


def make_schedule(kind: str, initial: float, stage1: int = 150, stage2: int = 300) -> Schedule:
    if initial <= 0:
        raise ValueError(f"initial value must be positive, got {initial}")
    if kind == "constant":
        return Constant(initial)
    if kind == "log_decay":
        return LogDecay(initial)
    if kind == "staged_lstm":
        return StagedDecay(initial, stage1, stage2)
    raise ValueError(f"unknown schedule {kind!r}; choose from {SCHEDULES}")


def schedule_eval(schedule: Schedule, epoch: int) -> float:
    return schedule(epoch)
