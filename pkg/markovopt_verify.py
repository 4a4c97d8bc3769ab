# -*- coding: utf-8 -*-
"""
markovopt_verify.py
-------------------
Property suites behind `markovopt_cli.py verify --suite <name>`.

Each check measures a quantity against a bound and reports the slack
(bound - measured, or measured - bound for lower bounds); a check passes when
its slack is non-negative. All suites use fixed seeds.

- verify(suite, log=print) -> bool
- SUITES: chains, estimators, optim, problems (plus "all")
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from markovopt_chains import (
    Ar1Process,
    MarkovStream,
    d_mix,
    eigen_mixing_bounds,
    mixing_time,
    random_ergodic_chain,
    stationary_distribution,
    two_state_chain,
    winning_streak_reversal,
    winning_streak_stationary,
)
from markovopt_estimators import (
    LevelDistribution,
    draw_level,
    expected_sample_count,
    level_decomposition,
    mlmc_conditional_mean,
    mlmc_gradient,
)
from markovopt_optim import AdaGradState, Domain, adagrad_step, project
from markovopt_problems import (
    RegressionOracle,
    ar_label,
    bar_g,
    make_random_mrp,
    make_regression,
    make_sigmoid_ar,
    randbimod,
    regression_loss_gradient,
    semi_gradient,
    sigmoid_loss_gradient,
    theta_star,
    value_error,
)

VERIFY_SEED = 20220717
FD_STEP = 1e-6


@dataclass
class Check:
    suite: str
    name: str
    measured: float
    slack: float

    @property
    def passed(self) -> bool:
        return bool(self.slack >= 0)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[verify] {status} {self.suite}: {self.name} measured={self.measured:.6g} slack={self.slack:.3g}"


def _upper(suite: str, name: str, measured: float, bound: float) -> Check:
    return Check(suite, name, float(measured), float(bound - measured))


def _lower(suite: str, name: str, measured: float, bound: float) -> Check:
    return Check(suite, name, float(measured), float(measured - bound))


# ----------------------------
# Inequalities shared with the tests
# ----------------------------
def adagrad_regret_slack(rng: np.random.Generator, *, d: int = 5, T: int = 50,
                         radius: float = 1.0, n_u: int = 20) -> float:
    """min over u of D sqrt(2 sum ||g||^2) - sum g_t^T (w_t - u) for one random gradient sequence."""
    domain = Domain(radius)
    D = domain.diameter
    state = AdaGradState(D / math.sqrt(2.0))
    scale = rng.uniform(0.1, 10.0)
    grads = scale * rng.standard_normal((T, d))
    w = project(domain, np.zeros(d))
    iterates = []
    for g in grads:
        iterates.append(w)
        w = adagrad_step(state, w, g, domain)
    W = np.stack(iterates)
    bound = D * math.sqrt(2.0 * float(np.sum(grads * grads)))
    worst = math.inf
    for _ in range(n_u):
        u = rng.standard_normal(d)
        u *= radius * rng.random() ** (1.0 / d) / np.linalg.norm(u)
        regret = float(np.sum(grads * (W - u)))
        worst = min(worst, bound - regret)
    return worst


def auer_gentile_slack(a: np.ndarray) -> float:
    """2 sqrt(sum a) - sum_i a_i / sqrt(sum_{j<=i} a_j), skipping zero prefixes."""
    a = np.asarray(a, dtype=float)
    prefix = np.cumsum(a)
    mask = prefix > 0
    lhs = float(np.sum(a[mask] / np.sqrt(prefix[mask])))
    return 2.0 * math.sqrt(float(prefix[-1])) - lhs


def relative_fd_error(f: Callable[[np.ndarray], float], grad: np.ndarray, x: np.ndarray,
                      h: float = FD_STEP) -> float:
    fd = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (f(x + e) - f(x - e)) / (2 * h)
    return float(np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1.0))


# ----------------------------
# Suites
# ----------------------------
def check_chains(rng: np.random.Generator) -> List[Check]:
    s = "chains"
    out: List[Check] = []
    ws = winning_streak_reversal(5)
    out.append(_lower(s, "winning_streak(5) d_mix(3) >= 1/4", d_mix(ws, 3), 0.25 - 1e-12))
    out.append(_upper(s, "winning_streak(5) d_mix(4) = 0", d_mix(ws, 4), 1e-12))
    for n in (3, 5, 8):
        chain = winning_streak_reversal(n)
        Pn = np.linalg.matrix_power(chain.transition, n - 1)
        err = float(np.max(np.abs(Pn - winning_streak_stationary(n))))
        out.append(_upper(s, f"winning_streak({n}) rows of P^(n-1) equal mu", err, 1e-12))
        tau = mixing_time(chain)
        out.append(_upper(s, f"winning_streak({n}) mixing_time = n-1", abs(tau - (n - 1)), 0))

    for p in (0.3, 0.1, 0.01, 0.001):
        chain = two_state_chain(p)
        lo, hi = eigen_mixing_bounds(chain)
        tau = mixing_time(chain)
        out.append(_lower(s, f"two_state({p:g}) tau_mix={tau} >= lower", tau, lo))
        out.append(_upper(s, f"two_state({p:g}) tau_mix={tau} <= upper", tau, hi))
        worst = max(abs(d_mix(chain, t) - 0.5 * abs(1 - 2 * p) ** t) for t in (0, 1, 5, 50))
        out.append(_upper(s, f"two_state({p:g}) d_mix closed form", worst, 1e-9))
    lo, hi = eigen_mixing_bounds(two_state_chain(1e-4))
    out.append(_upper(s, "two_state(1e-4) lower bound ~ 3465.0", abs(lo - 3465.0), 0.1))
    out.append(_upper(s, "two_state(1e-4) upper bound ~ 10397.2", abs(hi - 10397.2), 0.1))

    for k in range(5):
        chain = random_ergodic_chain(6, rng)
        mu = stationary_distribution(chain)
        fixed = float(np.abs(mu.weights @ chain.transition - mu.weights).sum())
        out.append(_upper(s, f"random chain {k} stationary fixed point", fixed, 1e-11))
        series = np.array([d_mix(chain, t, mu=mu) for t in range(51)])
        out.append(_upper(s, f"random chain {k} d_mix non-increasing", float(np.max(np.diff(series))), 1e-12))
        tau = max(mixing_time(chain), 1)
        decay = max(d_mix(chain, ell * tau, mu=mu) - 2.0 ** -ell for ell in (1, 2, 3, 4))
        out.append(_upper(s, f"random chain {k} d_mix(l tau) <= 2^-l", decay, 1e-11))

    ar = Ar1Process(randbimod(4, 0.5, rng))
    stream = MarkovStream(ar, rng)
    stream.take(1000)
    xs = np.stack(stream.take(200_000))
    emp = xs.T @ xs / xs.shape[0]
    sigma = ar.stationary_covariance()
    rel = float(np.linalg.norm(emp - sigma) / np.linalg.norm(sigma))
    out.append(_upper(s, "AR(1) empirical covariance vs Lyapunov solution", rel, 0.1))
    return out


def check_estimators(rng: np.random.Generator) -> List[Check]:
    s = "estimators"
    out: List[Check] = []
    inst = make_regression(20, 5, rng)
    oracle = RegressionOracle(inst)
    chain = two_state_chain(0.1)
    full = LevelDistribution.full(2**6)
    trunc = LevelDistribution.truncated(5)
    worst_full = worst_trunc = 0.0
    for _ in range(100):
        stream = MarkovStream(chain, rng, state=int(rng.integers(2)))
        w = rng.standard_normal(inst.d)
        levels = level_decomposition(oracle, w, stream.take(2**6))
        worst_full = max(worst_full, float(np.max(np.abs(mlmc_conditional_mean(full, levels) - levels[6]))))
        worst_trunc = max(worst_trunc, float(np.max(np.abs(mlmc_conditional_mean(trunc, levels) - levels[5]))))
    out.append(_upper(s, "telescoping residual (full geometric)", worst_full, 1e-10))
    out.append(_upper(s, "telescoping residual (truncated K=5, exact compensation)", worst_trunc, 1e-10))

    dist = LevelDistribution.full(8)
    stream = MarkovStream(chain, rng)
    w = np.zeros(inst.d)
    counts = [mlmc_gradient(oracle, w, stream, dist, rng).samples_consumed for _ in range(100_000)]
    mean = float(np.mean(counts))
    out.append(_upper(s, "mean samples per MLMC draw at T=8 ~ 3.125", abs(mean - 3.125), 0.05))
    out.append(_upper(s, "expected_sample_count(8) = 3.125", abs(expected_sample_count(dist) - 3.125), 0))
    big = expected_sample_count(LevelDistribution.full(2**20))
    out.append(_upper(s, "expected_sample_count(2^20) = 20 + 2^-20", abs(big - (20 + 2.0**-20)), 0))
    out.append(_upper(s, "truncated K=5 P(J=1) = 16/31", abs(trunc.probability(1) - 16 / 31), 1e-15))
    draws = np.array([draw_level(LevelDistribution.full(2**20), rng) for _ in range(200_000)])
    out.append(_upper(s, "full geometric P(J=3) ~ 0.125", abs(float(np.mean(draws == 3)) - 0.125), 0.004))
    return out


def check_optim(rng: np.random.Generator) -> List[Check]:
    s = "optim"
    out: List[Check] = []
    regret = min(adagrad_regret_slack(rng, radius=float(rng.uniform(0.5, 3.0))) for _ in range(200))
    out.append(_lower(s, "AdaGrad-Norm regret <= D sqrt(2 sum ||g||^2)", regret, -1e-9))
    ag = math.inf
    for _ in range(200):
        k = int(rng.integers(1, 200))
        ag = min(ag, auer_gentile_slack(rng.exponential(size=k) * (rng.random(k) < 0.9)))
    out.append(_lower(s, "sum a_i / sqrt(prefix) <= 2 sqrt(sum a)", ag, -1e-9))

    state = AdaGradState(1.0)
    w = np.zeros(3)
    etas = []
    for _ in range(100):
        w = adagrad_step(state, w, rng.standard_normal(3), Domain())
        etas.append(state.eta)
    out.append(_upper(s, "AdaGrad step sizes non-increasing", float(np.max(np.diff(etas))), 0))

    domain = Domain(1.5)
    idem = norm_excess = expand = 0.0
    for _ in range(1000):
        x, y = 3 * rng.standard_normal((2, 4))
        px, py = project(domain, x), project(domain, y)
        idem = max(idem, float(np.max(np.abs(project(domain, px) - px))))
        norm_excess = max(norm_excess, float(np.linalg.norm(px)) - 1.5)
        expand = max(expand, float(np.linalg.norm(px - py) - np.linalg.norm(x - y)))
    out.append(_upper(s, "projection idempotent", idem, 1e-12))
    out.append(_upper(s, "projection stays in the ball", norm_excess, 1e-12))
    out.append(_upper(s, "projection non-expansive", expand, 1e-12))
    return out


def check_problems(rng: np.random.Generator) -> List[Check]:
    s = "problems"
    out: List[Check] = []
    inst = make_regression(10, 4, rng)
    fd_reg = 0.0
    for _ in range(50):
        w = rng.standard_normal(inst.d)
        i = int(rng.integers(2))
        _, g = regression_loss_gradient(inst, w, i)
        fd_reg = max(fd_reg, relative_fd_error(lambda v: regression_loss_gradient(inst, v, i)[0], g, w))
    out.append(_upper(s, "regression gradient vs finite differences", fd_reg, 1e-5))

    fd_sig = 0.0
    for _ in range(50):
        w = rng.standard_normal(6) / 3
        xi1 = rng.standard_normal(6)
        xi2 = int(rng.integers(2))
        _, g = sigmoid_loss_gradient(None, w, xi1, xi2)
        fd_sig = max(fd_sig, relative_fd_error(lambda v: sigmoid_loss_gradient(None, v, xi1, xi2)[0], g, w))
    out.append(_upper(s, "sigmoid gradient vs finite differences", fd_sig, 1e-5))

    mrp = make_random_mrp(rng)
    fd_td = 0.0
    bound_excess = -math.inf
    for _ in range(50):
        theta = rng.standard_normal(mrp.d)
        theta *= mrp.radius * rng.random() / np.linalg.norm(theta)
        s0, s1 = (int(v) for v in rng.integers(mrp.n_states, size=2))
        r = float(mrp.rewards[s0, s1])
        g = semi_gradient(mrp, theta, (s0, r, s1))
        target = r + mrp.gamma * mrp.features[s1] @ theta
        frozen = lambda v: 0.5 * float(target - mrp.features[s0] @ v) ** 2  # noqa: E731
        fd_td = max(fd_td, relative_fd_error(frozen, -g, theta))
        bound_excess = max(bound_excess, float(np.linalg.norm(g)) - (mrp.r_max + 2 * mrp.radius))
    out.append(_upper(s, "semi-gradient vs frozen-target finite differences", fd_td, 1e-5))
    out.append(_upper(s, "||semi-gradient|| <= r_max + 2R", bound_excess, 1e-12))

    worst_fixed = 0.0
    worst_monotone = math.inf
    for _ in range(100):
        m = make_random_mrp(rng)
        star = theta_star(m)
        worst_fixed = max(worst_fixed, float(np.max(np.abs(bar_g(m, star)))))
        for _ in range(10):
            theta = star + rng.standard_normal(m.d) * rng.uniform(0.1, 5.0)
            lhs = float(bar_g(m, theta) @ (star - theta))
            worst_monotone = min(worst_monotone, lhs - (1 - m.gamma) * value_error(m, theta, target=star))
    out.append(_upper(s, "bar_g(theta*) = 0", worst_fixed, 1e-10))
    out.append(_lower(s, "bar_g(theta)^T (theta* - theta) >= (1-gamma) value_error", worst_monotone, -1e-9))

    d, rho = 10, 0.99
    A = randbimod(d, rho, rng)
    eig = np.sort(np.linalg.eigvalsh(A))
    expected = np.sort(np.concatenate([np.full(d // 2, rho), np.full(d // 2, rho / 3)]))
    out.append(_upper(s, "RandBiMod spectrum", float(np.max(np.abs(eig - expected))), 1e-9))
    out.append(_upper(s, "RandBiMod symmetric", float(np.max(np.abs(A - A.T))), 1e-12))
    sig = make_sigmoid_ar(d, rho, rng)
    xi1 = sig.u.copy()
    freq = float(np.mean([ar_label(sig, xi1, rng) for _ in range(100_000)]))
    out.append(_upper(s, "label kept with probability 0.8", abs(freq - 0.8), 0.005))
    return out


SUITES: Dict[str, Callable[[np.random.Generator], List[Check]]] = {
    "chains": check_chains,
    "estimators": check_estimators,
    "optim": check_optim,
    "problems": check_problems,
}


def run_checks(suite: str) -> List[Check]:
    names = list(SUITES) if suite == "all" else [suite]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite {unknown[0]!r}; choose from {sorted(SUITES)} or 'all'")
    checks: List[Check] = []
    for name in names:
        checks.extend(SUITES[name](np.random.default_rng([VERIFY_SEED, list(SUITES).index(name)])))
    return checks


def verify(suite: str = "all", *, log: Optional[Callable[[str], None]] = print) -> bool:
    checks = run_checks(suite)
    for c in checks:
        if log:
            log(c.line())
    failed = sum(not c.passed for c in checks)
    if log:
        log(f"[verify] suite={suite} checks={len(checks)} failed={failed}")
    return failed == 0
