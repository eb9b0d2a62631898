"""Simulation of the discrete inclusion x(m+1) = f_m(x(m)) under switching policies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .family import Family


@dataclass(frozen=True)
class PeriodicWord:
    word: tuple

    def __post_init__(self):
        if not self.word:
            raise ValueError("periodic word must be nonempty")


@dataclass(frozen=True)
class RandomUniform:
    seed: int


@dataclass(frozen=True)
class GreedyMaxNorm:
    pass


@dataclass(frozen=True)
class GreedyMinNorm:
    pass


@dataclass
class Trajectory:
    states: np.ndarray          # normalized states, row m is x(m) / ||x(m)||
    log_norms: np.ndarray       # log ||F_m(1)||, entry 0 is log ||1|| = 0
    choices: list
    absorbed_at_zero: bool = False
    absorbed_step: int = -1

    @property
    def exponents(self) -> np.ndarray:
        """``log ||F_m(1)|| / m`` for m = 1..steps."""
        m = np.arange(1, len(self.log_norms))
        return self.log_norms[1:] / m


@dataclass
class LyapunovEstimate:
    estimate: float
    series: list = field(repr=False)


def _greedy_pick(Y: np.ndarray, largest: bool) -> int:
    """Compare by sup-norm, then by coordinate sum; lowest index wins full ties."""
    keys = list(zip(Y.max(axis=1), Y.sum(axis=1)))
    best = 0
    for k in range(1, len(keys)):
        if (keys[k] > keys[best]) if largest else (keys[k] < keys[best]):
            best = k
    return best


def simulate(family: Family, policy, steps: int, start=None) -> Trajectory:
    """Run ``steps`` switching steps from the all-ones vector with log-space normalization."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    prog = family.program
    n, k = family.n, len(family)
    x = np.ones(n) if start is None else np.asarray(start, dtype=float)
    s0 = float(x.max())
    if s0 <= 0:
        raise ValueError("start state must be nonzero")
    x = x / s0
    states = np.zeros((steps + 1, n))
    states[0] = x
    logs = np.full(steps + 1, -math.inf)
    logs[0] = math.log(s0)
    choices: list = []
    rng = np.random.default_rng(policy.seed) if isinstance(policy, RandomUniform) else None
    if isinstance(policy, PeriodicWord) and any(not 0 <= j < k for j in policy.word):
        raise ValueError("policy word uses an unknown map index")
    absorbed = -1
    for m in range(steps):
        if isinstance(policy, PeriodicWord):
            j = policy.word[m % len(policy.word)]
            y = kernels.eval_batch(prog, j, x)[0]
        elif rng is not None:
            j = int(rng.integers(k))
            y = kernels.eval_batch(prog, j, x)[0]
        else:
            Y = np.stack([kernels.eval_batch(prog, i, x)[0] for i in range(k)])
            j = _greedy_pick(Y, isinstance(policy, GreedyMaxNorm))
            y = Y[j]
        choices.append(j)
        s = float(y.max())
        if s == 0.0:
            absorbed = m + 1
            break
        x = y / s
        states[m + 1] = x
        logs[m + 1] = logs[m] + math.log(s)
    if absorbed > 0:
        states = states[: absorbed + 1]
        logs = logs[: absorbed + 1]
        states[absorbed] = 0.0
    return Trajectory(states, logs, choices, absorbed > 0, absorbed)


def lyapunov_exponent(family: Family, policy, steps: int) -> LyapunovEstimate:
    """``exp`` of the minimum of ``log ||F_m|| / m`` over the last quarter of steps.

    A trajectory absorbed at zero has exponent 0.
    """
    traj = simulate(family, policy, steps)
    series = traj.exponents
    if traj.absorbed_at_zero:
        return LyapunovEstimate(0.0, [float(v) for v in series])
    lo = len(series) - max(1, len(series) // 4)
    return LyapunovEstimate(float(math.exp(series[lo:].min())), [float(v) for v in series])
