# -*- coding: utf-8 -*-
"""
markovopt_harness.py
--------------------
Experiment presets and the seeded run loop behind `markovopt_cli.py run`.

- fig1      two-state regression, suboptimality F(w_bar_t) - F* against samples
- fig2      fig1 swept over p, final suboptimality only (experiment label fig2:p=<p>)
- nonconvex sigmoid regression over a RandBiMod AR(1) stream; Monte Carlo objective and
            squared norm of the Monte Carlo gradient at w_bar_t
- td        projected TD with MLMC semi-gradients; value_error(theta_bar_t)
- custom    regression over a chain read from chain_file (or two-state p)

Entry points:
- plan_runs(config) -> [RunSpec]
- execute_run(config, spec) -> [Row]
- run_experiment(config, log=...) -> Path   (CSV; rows in plan order whatever the completion order)

Seeds: the problem instance depends on (base_seed, seed index) only, so every method
sees the same instance; streams and level draws use
run_seed = base_seed XOR (1000003 * seed_index + 7919 * method_ordinal).
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from markovopt_chains import FiniteChain, MarkovStream, load_chain, mixing_time, stationary_distribution, two_state_chain
from markovopt_config import U64_MASK, ExperimentConfig
from markovopt_csv_utils import Row, write_rows
from markovopt_errors import ConfigError
from markovopt_estimators import LevelDistribution
from markovopt_optim import Domain, Method, RunParams, RunTrace, run_method
from markovopt_problems import (
    LabeledArProcess,
    RegressionOracle,
    SigmoidOracle,
    TdOracle,
    TransitionStream,
    make_random_mrp,
    make_regression,
    make_sigmoid_ar,
)

Log = Callable[[str], None]


@dataclass(frozen=True)
class RunSpec:
    experiment: str          # label written to the CSV
    method: Method
    seed_index: int
    p: Optional[float] = None


def run_seed(base_seed: int, seed_index: int, method: Method) -> int:
    return (base_seed ^ (1000003 * seed_index + 7919 * method.ordinal)) & U64_MASK


def instance_rng(config: ExperimentConfig, seed_index: int) -> np.random.Generator:
    return np.random.default_rng([config.base_seed, seed_index])


def plan_runs(config: ExperimentConfig) -> List[RunSpec]:
    methods = list(dict.fromkeys(config.methods))
    if config.experiment == "fig2":
        return [RunSpec(f"fig2:p={p:g}", m, s, p)
                for p in config.p_sweep for m in methods for s in range(config.seeds)]
    return [RunSpec(config.experiment, m, s, config.p) for m in methods for s in range(config.seeds)]


def level_distribution(config: ExperimentConfig) -> LevelDistribution:
    if config.levels == "full":
        return LevelDistribution.full(config.sample_budget)
    return LevelDistribution.truncated(config.K, config.compensation)


def _gap(config: ExperimentConfig, method: Method, chain: Optional[FiniteChain]) -> Optional[int]:
    if method is not Method.SGD_DD:
        return None
    if config.gap is not None:
        return config.gap
    if chain is None:
        raise ConfigError("SGD_DD over a continuous process needs an explicit gap=")
    return max(1, mixing_time(chain))


def _regression_chain(config: ExperimentConfig, p: Optional[float]) -> FiniteChain:
    if config.experiment == "custom" and config.chain_file is not None:
        return load_chain(config.chain_file)
    return two_state_chain(float(p))


def execute_run(config: ExperimentConfig, spec: RunSpec) -> List[Row]:
    """Build instance, stream and oracle for one (method, seed) and return its CSV rows."""
    method = spec.method
    inst_rng = instance_rng(config, spec.seed_index)
    rng = np.random.default_rng(run_seed(config.base_seed, spec.seed_index, method))
    params = RunParams(
        budget=config.sample_budget,
        budget_unit="samples",
        record_every=config.record_every,
        alpha=config.alpha,
        c=config.c,
        level_dist=level_distribution(config),
    )

    if config.experiment in ("fig1", "fig2", "custom"):
        chain = _regression_chain(config, spec.p)
        weights = stationary_distribution(chain).weights
        inst = make_regression(config.n, config.d, inst_rng, weights=weights)
        oracle = RegressionOracle(inst)
        stream = MarkovStream(chain, rng)
        params.domain = Domain(inst.radius)
        params.alpha = 1.0 if config.alpha is None else config.alpha
        params.gap = _gap(config, method, chain)
        trace = run_method(method, oracle, stream, params, rng, metric=oracle.suboptimality)
    elif config.experiment == "nonconvex":
        params.gap = _gap(config, method, None)
        inst = make_sigmoid_ar(config.d, config.rho, inst_rng)
        oracle = SigmoidOracle(inst, eval_seed=int(inst_rng.integers(2**63)))
        stream = MarkovStream(LabeledArProcess(inst), rng)
        params.alpha = 1.0 if config.alpha is None else config.alpha
        trace = run_method(method, oracle, stream, params, rng, metric=oracle.metrics)
    elif config.experiment == "td":
        mrp = make_random_mrp(inst_rng, n_states=config.n_states, d=config.n_features, gamma=config.gamma)
        oracle = TdOracle(mrp)
        stream = TransitionStream(mrp, rng)
        params.domain = Domain(mrp.radius)
        params.alpha = math.sqrt(2.0) * mrp.radius if config.alpha is None else config.alpha
        params.gap = _gap(config, method, mrp.chain)
        trace = run_method(method, oracle, stream, params, rng, metric=oracle.metrics)
    else:
        raise ConfigError(f"unknown experiment {config.experiment!r}")
    return trace_rows(spec, trace)


def trace_rows(spec: RunSpec, trace: RunTrace) -> List[Row]:
    label = trace.method if trace.gap is None else f"{trace.method}(gap={trace.gap})"
    rows: List[Row] = []
    for rec in trace.records:
        for name, value in rec.metrics.items():
            rows.append((spec.experiment, label, int(spec.seed_index), int(rec.step),
                         int(rec.samples_cum), int(rec.level), name, float(value)))
    return rows


def _execute_indexed(args: Tuple[ExperimentConfig, RunSpec]) -> List[Row]:
    return execute_run(*args)


def run_experiment(config: ExperimentConfig, *, log: Optional[Log] = None) -> Path:
    log = log or (lambda _msg: None)
    specs = plan_runs(config)
    log(f"[run] experiment={config.experiment} scale={config.scale} runs={len(specs)} "
        f"budget={config.sample_budget} levels={config.level_label()} jobs={config.jobs}")
    results: Dict[int, List[Row]] = {}
    if config.jobs == 1:
        for i, spec in enumerate(specs):
            results[i] = execute_run(config, spec)
            log(f"[run] done experiment={spec.experiment} method={spec.method.value} seed={spec.seed_index}")
    else:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for i, rows in enumerate(pool.map(_execute_indexed, [(config, s) for s in specs])):
                results[i] = rows
                log(f"[run] done experiment={specs[i].experiment} method={specs[i].method.value} "
                    f"seed={specs[i].seed_index}")
    if config.experiment == "nonconvex" and Method.SGD_DD in config.methods:
        warnings.warn(f"SGD_DD on the AR(1) stream uses the supplied gap={config.gap}, not a mixing time")
    out = write_rows(config.out, (row for i in range(len(specs)) for row in results[i]))
    log(f"[run] wrote {out}")
    return out
