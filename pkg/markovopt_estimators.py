# -*- coding: utf-8 -*-
"""
markovopt_estimators.py
-----------------------
Gradient estimators over Markovian streams.

Key entry points:
- minibatch_gradient(oracle, w, stream, n)          average over the next n emissions
- LevelDistribution.full(horizon) / .truncated(K)   level laws for the MLMC estimator
- draw_level(dist, rng)                             J ~ Geom(1/2), possibly truncated
- mlmc_gradient(oracle, w, stream, dist, rng)       g0 + c_J (g^J - g^{J-1})
- expected_sample_count(dist)                       analytic mean of samples consumed
- level_decomposition(oracle, w, samples)           prefix averages g^0..g^j
- mlmc_conditional_mean(dist, levels)               exact mean of the estimator given a sample block

Levels are nested: g^{J-1} averages the first half of the same 2^J-sample block
used for g^J, so the correction terms telescope sample-for-sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Protocol, Sequence

import numpy as np

from markovopt_errors import InvalidParams, NotPowerOfTwo

DEFAULT_K = 5


class GradientOracle(Protocol):
    """What the estimators and optimizers need from a problem instance."""

    dim: int

    def gradients(self, w: np.ndarray, observations: Sequence[Any]) -> np.ndarray:
        """Row i is the gradient of the loss at w for observations[i]."""
        ...


class Stream(Protocol):
    samples_emitted: int

    def take(self, n: int) -> List[Any]:
        ...


class LevelKind(str, Enum):
    FULL = "full"
    TRUNCATED = "truncated"


class Compensation(str, Enum):
    EXACT = "exact"                  # c_j = 1 / P(J = j)
    POWER_OF_TWO = "power_of_two"    # c_j = 2^j


@dataclass(frozen=True)
class LevelDistribution:
    kind: LevelKind
    j_max: int
    horizon: int = 0
    compensation: Compensation = Compensation.EXACT

    @classmethod
    def full(cls, horizon: int) -> "LevelDistribution":
        if horizon < 1:
            raise InvalidParams(f"MLMC horizon must be >= 1, got {horizon}")
        return cls(LevelKind.FULL, int(math.floor(math.log2(horizon))), int(horizon))

    @classmethod
    def truncated(cls, levels: int = DEFAULT_K,
                  compensation: Compensation = Compensation.EXACT) -> "LevelDistribution":
        if levels < 1:
            raise InvalidParams(f"truncated geometric needs K >= 1, got {levels}")
        return cls(LevelKind.TRUNCATED, int(levels), 2 ** int(levels), Compensation(compensation))

    def probability(self, j: int) -> float:
        if j < 1:
            return 0.0
        if self.kind is LevelKind.FULL:
            return 2.0 ** -j
        if j > self.j_max:
            return 0.0
        return 2.0 ** -j / (1.0 - 2.0 ** -self.j_max)

    def compensator(self, j: int) -> float:
        if self.kind is LevelKind.FULL or self.compensation is Compensation.POWER_OF_TWO:
            return 2.0 ** j
        return 2.0 ** j * (1.0 - 2.0 ** -self.j_max)

    def overflows(self, j: int) -> bool:
        return self.kind is LevelKind.FULL and 2 ** j > self.horizon


@dataclass
class GradientEstimate:
    gradient: np.ndarray
    samples_consumed: int
    level: int = 0


def minibatch_gradient(oracle: GradientOracle, w: np.ndarray, stream: Stream, n: int) -> GradientEstimate:
    if n < 1:
        raise InvalidParams(f"minibatch size must be >= 1, got {n}")
    grads = oracle.gradients(w, stream.take(n))
    return GradientEstimate(grads.mean(axis=0), n, 0)


def draw_level(dist: LevelDistribution, rng: np.random.Generator) -> int:
    if dist.kind is LevelKind.FULL:
        # trials of a fair coin until the first success
        return int(rng.geometric(0.5))
    if dist.j_max == 1:
        return 1
    weights = np.array([dist.probability(j) for j in range(1, dist.j_max + 1)])
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return int(np.searchsorted(cum, rng.random(), side="right")) + 1


def _prefix_means(grads: np.ndarray) -> List[np.ndarray]:
    m = grads.shape[0]
    top = int(math.log2(m))
    cum = np.cumsum(grads, axis=0)
    return [cum[2 ** j - 1] / 2 ** j for j in range(top + 1)]


def mlmc_gradient(oracle: GradientOracle, w: np.ndarray, stream: Stream,
                  dist: LevelDistribution, rng: np.random.Generator) -> GradientEstimate:
    J = draw_level(dist, rng)
    if dist.overflows(J):
        g0 = oracle.gradients(w, stream.take(1))[0]
        return GradientEstimate(g0, 1, J)
    m = 2 ** J
    levels = _prefix_means(oracle.gradients(w, stream.take(m)))
    g = levels[0] + dist.compensator(J) * (levels[J] - levels[J - 1])
    return GradientEstimate(g, m, J)


def expected_sample_count(dist: LevelDistribution) -> float:
    """Mean samples per MLMC draw.

    Full law: 1 + sum_{j<=j_max} 2^-j (2^j - 1), which equals j_max + 2^-j_max.
    """
    if dist.kind is LevelKind.FULL:
        return dist.j_max + 2.0 ** -dist.j_max
    return sum(dist.probability(j) * 2.0 ** j for j in range(1, dist.j_max + 1))


def level_decomposition(oracle: GradientOracle, w: np.ndarray, fixed_samples: Sequence[Any]) -> List[np.ndarray]:
    m = len(fixed_samples)
    if m < 1 or m & (m - 1):
        raise NotPowerOfTwo(f"level decomposition needs a power-of-two sample count, got {m}")
    return _prefix_means(oracle.gradients(w, list(fixed_samples)))


def mlmc_conditional_mean(dist: LevelDistribution, levels: Sequence[np.ndarray]) -> np.ndarray:
    """E_J of the estimator for a fixed block whose prefix averages are `levels`.

    Levels past the block (or past the horizon) contribute nothing, matching the
    overflow branch.
    """
    top = len(levels) - 1
    out = np.array(levels[0], dtype=float)
    for j in range(1, top + 1):
        if dist.overflows(j):
            break
        out = out + dist.probability(j) * dist.compensator(j) * (levels[j] - levels[j - 1])
    return out
