# -*- coding: utf-8 -*-
"""
markovopt_optim.py
------------------
Optimizer loops over Markovian streams: MAG (MLMC + AdaGrad-Norm), AdaGrad-Norm,
SGD with c/sqrt(t) steps, SGD-MLMC and SGD-DD (one update per `gap` samples).

Key entry points:
- Domain(radius=None|R) / project(domain, w)
- AdaGradState(alpha) / adagrad_step(state, w, g, domain)
- run_method(method, oracle, stream, params, rng, metric=None) -> RunTrace
- average_iterate(trace) / random_iterate(trace, rng)

Iterates start at w_1 = project(0). The reported average is over w_1..w_T, the
points at which gradients were evaluated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional

import numpy as np

from markovopt_errors import EmptyTrace, InvalidParams
from markovopt_estimators import (
    GradientEstimate,
    GradientOracle,
    LevelDistribution,
    Stream,
    minibatch_gradient,
    mlmc_gradient,
)

Metric = Callable[[np.ndarray], Dict[str, float]]


class Method(str, Enum):
    MAG = "MAG"
    ADAGRAD = "AdaGrad"
    SGD = "SGD"
    SGD_MLMC = "SGD_MLMC"
    SGD_DD = "SGD_DD"

    @property
    def ordinal(self) -> int:
        return list(Method).index(self)

    @property
    def uses_mlmc(self) -> bool:
        return self in (Method.MAG, Method.SGD_MLMC)

    @property
    def adaptive(self) -> bool:
        return self in (Method.MAG, Method.ADAGRAD)


# ----------------------------
# Domain and projection
# ----------------------------
@dataclass(frozen=True)
class Domain:
    """Unconstrained when radius is None, else the L2 ball of that radius."""

    radius: Optional[float] = None

    def __post_init__(self) -> None:
        if self.radius is not None and not self.radius > 0:
            raise InvalidParams(f"ball radius must be positive, got {self.radius!r}")

    @property
    def bounded(self) -> bool:
        return self.radius is not None

    @property
    def diameter(self) -> float:
        return math.inf if self.radius is None else 2.0 * self.radius

    def project(self, w: np.ndarray) -> np.ndarray:
        return project(self, w)


def project(domain: Domain, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if domain.radius is None:
        return w
    norm = float(np.linalg.norm(w))
    if norm <= domain.radius:
        return w
    return w * (domain.radius / norm)


# ----------------------------
# AdaGrad-Norm
# ----------------------------
@dataclass
class AdaGradState:
    alpha: float
    sum_sq: float = 0.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise InvalidParams(f"AdaGrad scale alpha must be positive, got {self.alpha!r}")

    @property
    def eta(self) -> float:
        return math.inf if self.sum_sq == 0 else self.alpha / math.sqrt(self.sum_sq)


def adagrad_step(state: AdaGradState, w: np.ndarray, g: np.ndarray, domain: Domain) -> np.ndarray:
    state.sum_sq += float(np.dot(g, g))
    if state.sum_sq == 0:
        return w
    return project(domain, w - state.eta * g)


def default_alpha(domain: Domain) -> float:
    return domain.diameter / math.sqrt(2.0) if domain.bounded else 1.0


# ----------------------------
# Traces
# ----------------------------
@dataclass
class TraceRecord:
    step: int
    samples_cum: int
    level: int
    metrics: Dict[str, float] = field(default_factory=dict)


@dataclass
class RunTrace:
    method: str
    records: List[TraceRecord] = field(default_factory=list)
    average: Optional[np.ndarray] = None
    random_choice: Optional[np.ndarray] = None
    iterates: Optional[List[np.ndarray]] = None
    iterations: int = 0
    samples_total: int = 0
    gap: Optional[int] = None


def average_iterate(trace: RunTrace) -> np.ndarray:
    if trace.iterates:
        return np.mean(np.stack(trace.iterates), axis=0)
    if trace.average is None or trace.iterations == 0:
        raise EmptyTrace(f"trace for {trace.method} holds no iterates")
    return trace.average


def random_iterate(trace: RunTrace, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw among the stored iterates w_1..w_T."""
    if not trace.iterates:
        if trace.random_choice is not None:
            return trace.random_choice
        raise EmptyTrace(f"trace for {trace.method} stored no iterates (run with keep_iterates=True)")
    return trace.iterates[int(rng.integers(len(trace.iterates)))]


# ----------------------------
# Runner
# ----------------------------
@dataclass
class RunParams:
    budget: int
    budget_unit: str = "samples"          # or "iterations"
    record_every: Optional[int] = None    # same unit as budget; None records the end only
    alpha: Optional[float] = None         # AdaGrad scale; D/sqrt(2) bounded, 1 unbounded
    c: float = 1.0                        # SGD family: eta_t = c / sqrt(t)
    gap: Optional[int] = None             # SGD_DD samples per update
    level_dist: Optional[LevelDistribution] = None
    domain: Domain = field(default_factory=Domain)
    keep_iterates: bool = False
    select_random: bool = False

    def validate(self, method: Method) -> None:
        if self.budget <= 0:
            raise InvalidParams(f"budget must be positive, got {self.budget}")
        if self.budget_unit not in ("samples", "iterations"):
            raise InvalidParams(f"unknown budget unit {self.budget_unit!r}")
        if self.record_every is not None and self.record_every <= 0:
            raise InvalidParams(f"record_every must be positive, got {self.record_every}")
        if self.alpha is not None and not self.alpha > 0:
            raise InvalidParams(f"alpha must be positive, got {self.alpha!r}")
        if not self.c > 0:
            raise InvalidParams(f"SGD constant c must be positive, got {self.c!r}")
        if method is Method.SGD_DD and (self.gap is None or self.gap < 1):
            raise InvalidParams(f"SGD_DD needs an explicit gap >= 1, got {self.gap!r}")


def run_method(method: Method, oracle: GradientOracle, stream: Stream, params: RunParams,
               rng: np.random.Generator, metric: Optional[Metric] = None) -> RunTrace:
    method = Method(method)
    params.validate(method)
    domain = params.domain
    level_dist = params.level_dist or LevelDistribution.full(params.budget)
    state = AdaGradState(params.alpha if params.alpha is not None else default_alpha(domain))
    by_samples = params.budget_unit == "samples"
    select_rng = np.random.default_rng(rng.integers(2**63)) if params.select_random else None

    trace = RunTrace(method=method.value, gap=params.gap if method is Method.SGD_DD else None)
    if params.keep_iterates:
        trace.iterates = []
    w = project(domain, np.zeros(oracle.dim))
    avg = np.zeros_like(w)
    t = 0
    samples = 0
    checkpoint = params.record_every

    while (samples if by_samples else t) < params.budget:
        t += 1
        est = _estimate(method, oracle, w, stream, params, level_dist, rng)
        samples += est.samples_consumed
        avg += (w - avg) / t
        if trace.iterates is not None:
            trace.iterates.append(w.copy())
        if select_rng is not None and int(select_rng.integers(t)) == 0:
            trace.random_choice = w.copy()

        if method.adaptive:
            w = adagrad_step(state, w, est.gradient, domain)
        else:
            w = project(domain, w - params.c / math.sqrt(t) * est.gradient)

        if checkpoint is None:
            continue
        if by_samples:
            values = None
            while checkpoint <= min(samples, params.budget):
                values = values if values is not None else (metric(avg) if metric else {})
                trace.records.append(TraceRecord(t, checkpoint, est.level, dict(values)))
                checkpoint += params.record_every
        elif t % params.record_every == 0:
            trace.records.append(TraceRecord(t, samples, est.level, metric(avg) if metric else {}))

    if params.record_every is None and t > 0:
        trace.records.append(TraceRecord(t, samples, est.level, metric(avg) if metric else {}))
    trace.average = avg
    trace.iterations = t
    trace.samples_total = samples
    return trace


def _estimate(method: Method, oracle: GradientOracle, w: np.ndarray, stream: Stream,
              params: RunParams, level_dist: LevelDistribution,
              rng: np.random.Generator) -> GradientEstimate:
    if method.uses_mlmc:
        return mlmc_gradient(oracle, w, stream, level_dist, rng)
    if method is Method.SGD_DD:
        gap = int(params.gap)
        last = stream.take(gap)[-1]
        return GradientEstimate(oracle.gradients(w, [last])[0], gap, 0)
    return minibatch_gradient(oracle, w, stream, 1)
