# -*- coding: utf-8 -*-
"""
markovopt_problems.py
---------------------
The three problem families driven by Markovian data.

1) Two-state linear regression: the chain state picks which design (X_i, y_i)
   is observed; per-state loss f(w; i) = (1/2n)||X_i w - y_i||^2.
   - make_regression(n, d, rng), regression_loss_gradient, regression_optimum, RegressionOracle
2) Sigmoid regression on an AR(1) process driven by a RandBiMod matrix.
   - randbimod(d, rho, rng), make_sigmoid_ar(d, rho, rng), ar_label, sigmoid_loss_gradient,
     LabeledArProcess, SigmoidOracle (Monte Carlo population objective)
3) TD(0) with linear features over a finite MRP.
   - make_random_mrp(rng), semi_gradient, bar_g, theta_star, value_error,
     TransitionStream, TdOracle, run_td_mag

State indices are 0-based. Instances are immutable once built and are
regenerated from (preset, seed) rather than stored.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import expit

from markovopt_chains import (
    Ar1Process,
    FiniteChain,
    MarkovStream,
    random_ergodic_chain,
    stationary_distribution,
)
from markovopt_errors import BadState, DimensionMismatch, InvalidParams, OddDimension, SingularSystem
from markovopt_estimators import DEFAULT_K, LevelDistribution
from markovopt_optim import Domain, Method, RunParams, RunTrace, run_method

# ----------------------------
# Config (overridable)
# ----------------------------
REGRESSION_NOISE_VAR = 1e-3
RADIUS_FACTOR = 1.1
RIDGE = 1e-12
GRADIENT_MAP_TOL = 1e-10
PGD_MAX_ITERS = 10**6
FLIP_PROB = 0.2
MC_BURN_IN = 10**5
MC_SAMPLES = 10**5
MRP_STATES = 5
MRP_FEATURES = 3
MRP_GAMMA = 0.9


# ============================================================
# 1) Two-state linear regression
# ============================================================
@dataclass(frozen=True)
class RegressionInstance:
    X: np.ndarray                 # (states, n, d)
    y: np.ndarray                 # (states, n)
    w_true: np.ndarray            # (states, d)
    radius: float
    weights: np.ndarray           # stationary weights over states
    w_star: np.ndarray = field(default=None)  # type: ignore[assignment]
    f_star: float = 0.0

    @property
    def n(self) -> int:
        return int(self.X.shape[1])

    @property
    def d(self) -> int:
        return int(self.X.shape[2])

    @property
    def n_states(self) -> int:
        return int(self.X.shape[0])


def _check_state(inst: RegressionInstance, state: int) -> int:
    if int(state) != state or not 0 <= state < inst.n_states:
        raise BadState(f"state {state!r} outside 0..{inst.n_states - 1}")
    return int(state)


def regression_loss_gradient(inst: RegressionInstance, w: np.ndarray, state: int) -> Tuple[float, np.ndarray]:
    i = _check_state(inst, state)
    resid = inst.X[i] @ w - inst.y[i]
    return float(resid @ resid) / (2 * inst.n), inst.X[i].T @ resid / inst.n


def regression_objective(inst: RegressionInstance, w: np.ndarray) -> float:
    """sum_i mu_i f(w; i); with uniform mu this is (1/4n)||[X1;X2] w - [y1;y2]||^2."""
    resid = np.einsum("snd,d->sn", inst.X, w) - inst.y
    per_state = np.einsum("sn,sn->s", resid, resid) / (2 * inst.n)
    return float(inst.weights @ per_state)


def _normal_system(inst: RegressionInstance) -> Tuple[np.ndarray, np.ndarray]:
    H = np.einsum("s,snd,sne->de", inst.weights, inst.X, inst.X) / inst.n
    b = np.einsum("s,snd,sn->d", inst.weights, inst.X, inst.y) / inst.n
    return H, b


def _least_squares(H: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return linalg.solve(H, b, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        warnings.warn(f"singular normal system; regularizing by {RIDGE:g}*I", RuntimeWarning)
        return linalg.solve(H + RIDGE * np.eye(H.shape[0]), b)


def regression_optimum(inst: RegressionInstance, radius: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """Minimizer over ||w|| <= radius: normal equations, else projected gradient."""
    r = inst.radius if radius is None else radius
    H, b = _normal_system(inst)
    w = _least_squares(H, b)
    if np.linalg.norm(w) > r:
        domain = Domain(r)
        step = 1.0 / float(linalg.eigvalsh(H)[-1])
        w = domain.project(np.zeros_like(b))
        for _ in range(PGD_MAX_ITERS):
            nxt = domain.project(w - step * (H @ w - b))
            if np.linalg.norm(nxt - w) / step < GRADIENT_MAP_TOL:
                w = nxt
                break
            w = nxt
        else:
            warnings.warn(f"projected gradient stopped after {PGD_MAX_ITERS} iterations "
                          f"above gradient-map tolerance {GRADIENT_MAP_TOL:g}", RuntimeWarning)
    return w, regression_objective(inst, w)


def make_regression(n: int, d: int, rng: np.random.Generator, *,
                    noise_var: float = REGRESSION_NOISE_VAR,
                    weights: Sequence[float] = (0.5, 0.5)) -> RegressionInstance:
    """X_i ~ N(0, I) entries, y_i = X_i w_i + eps, radius 1.1 ||w_ls||."""
    weights = np.asarray(weights, dtype=float)
    k = weights.size
    X = rng.standard_normal((k, n, d))
    w_true = rng.standard_normal((k, d))
    y = np.einsum("snd,sd->sn", X, w_true) + math.sqrt(noise_var) * rng.standard_normal((k, n))
    return build_regression(X, y, w_true, weights=weights)


def build_regression(X: np.ndarray, y: np.ndarray, w_true: Optional[np.ndarray] = None, *,
                     weights: Sequence[float] = (0.5, 0.5),
                     radius: Optional[float] = None) -> RegressionInstance:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if X.ndim != 3 or y.shape != X.shape[:2] or weights.size != X.shape[0]:
        raise DimensionMismatch(f"designs {X.shape}, targets {y.shape}, weights {weights.shape} disagree")
    w_true = np.zeros(X.shape[::2]) if w_true is None else np.asarray(w_true, dtype=float)
    draft = RegressionInstance(X, y, w_true, math.inf, weights)
    w_ls, _ = regression_optimum(draft, math.inf)
    if radius is None:
        radius = max(RADIUS_FACTOR * float(np.linalg.norm(w_ls)), 1e-12)
    draft = RegressionInstance(X, y, w_true, float(radius), weights)
    w_star, f_star = regression_optimum(draft)
    return RegressionInstance(X, y, w_true, float(radius), weights, w_star, f_star)


class RegressionOracle:
    """Observations are chain states; gradients are looked up per state."""

    def __init__(self, inst: RegressionInstance) -> None:
        self.inst = inst
        self.dim = inst.d

    def gradients(self, w: np.ndarray, observations: Sequence[Any]) -> np.ndarray:
        states = np.asarray(observations, dtype=np.int64)
        resid = np.einsum("snd,d->sn", self.inst.X, w) - self.inst.y
        per_state = np.einsum("snd,sn->sd", self.inst.X, resid) / self.inst.n
        return per_state[states]

    def objective(self, w: np.ndarray) -> float:
        return regression_objective(self.inst, w)

    def suboptimality(self, w: np.ndarray) -> Dict[str, float]:
        return {"suboptimality": self.objective(w) - self.inst.f_star}


# ============================================================
# 2) Sigmoid regression over an AR(1) process
# ============================================================
def randbimod(d: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """A = U diag(rho x d/2, rho/3 x d/2) U^T with U Haar-orthogonal."""
    if d < 2 or d % 2:
        raise OddDimension(f"RandBiMod needs an even dimension, got {d}")
    if not 0.0 < rho < 1.0:
        raise InvalidParams(f"rho must lie in (0, 1), got {rho!r}")
    Q, R = linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    lam = np.concatenate([np.full(d // 2, rho), np.full(d // 2, rho / 3.0)])
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class SigmoidArInstance:
    A: np.ndarray
    u: np.ndarray
    rho: float
    flip_prob: float = FLIP_PROB
    radius: float = 1.0

    @property
    def d(self) -> int:
        return int(self.u.size)


def make_sigmoid_ar(d: int, rho: float, rng: np.random.Generator) -> SigmoidArInstance:
    A = randbimod(d, rho, rng)
    u = rng.standard_normal(d)
    return SigmoidArInstance(A, u / np.linalg.norm(u), float(rho))


def ar_label(inst: SigmoidArInstance, xi1: np.ndarray, rng: np.random.Generator) -> int:
    bit = 1 if float(inst.u @ xi1) > 0 else 0
    return 1 - bit if rng.random() < inst.flip_prob else bit


def sigmoid_loss_gradient(inst: Optional[SigmoidArInstance], w: np.ndarray, xi1: np.ndarray,
                          xi2: int) -> Tuple[float, np.ndarray]:
    # inst is unused: the loss depends only on w and the sample
    s = float(expit(w @ xi1))
    err = s - xi2
    return 0.5 * err * err, err * s * (1.0 - s) * np.asarray(xi1, dtype=float)


class LabeledArProcess:
    """AR(1) features paired with noisy threshold labels: emits (xi1, xi2)."""

    def __init__(self, inst: SigmoidArInstance) -> None:
        self.inst = inst
        self.ar = Ar1Process(inst.A)

    def advance(self, rng: np.random.Generator) -> Tuple[np.ndarray, int]:
        xi1 = self.ar.advance(rng)
        return xi1, ar_label(self.inst, xi1, rng)


class SigmoidOracle:
    """Per-observation sigmoid loss; population quantities by Monte Carlo.

    The evaluation set is a single long trajectory after burn-in, drawn once
    from `eval_seed` and reused for every evaluation.
    """

    def __init__(self, inst: SigmoidArInstance, *, eval_seed: int = 0,
                 burn_in: int = MC_BURN_IN, n_eval: int = MC_SAMPLES) -> None:
        self.inst = inst
        self.dim = inst.d
        rng = np.random.default_rng(eval_seed)
        stream = MarkovStream(LabeledArProcess(inst), rng)
        if burn_in:
            stream.take(burn_in)
        obs = stream.take(n_eval)
        self._xi1 = np.stack([o[0] for o in obs])
        self._xi2 = np.array([o[1] for o in obs], dtype=float)

    def gradients(self, w: np.ndarray, observations: Sequence[Any]) -> np.ndarray:
        xi1 = np.stack([o[0] for o in observations])
        xi2 = np.array([o[1] for o in observations], dtype=float)
        return _sigmoid_grads(w, xi1, xi2)

    def objective(self, w: np.ndarray) -> float:
        s = expit(self._xi1 @ w)
        return float(0.5 * np.mean((s - self._xi2) ** 2))

    def gradient_norm_sq(self, w: np.ndarray) -> float:
        g = _sigmoid_grads(w, self._xi1, self._xi2).mean(axis=0)
        return float(g @ g)

    def metrics(self, w: np.ndarray) -> Dict[str, float]:
        return {"mc_objective": self.objective(w), "grad_norm_sq": self.gradient_norm_sq(w)}


def _sigmoid_grads(w: np.ndarray, xi1: np.ndarray, xi2: np.ndarray) -> np.ndarray:
    s = expit(xi1 @ w)
    return ((s - xi2) * s * (1.0 - s))[:, None] * xi1


# ============================================================
# 3) TD(0) with linear function approximation
# ============================================================
@dataclass(frozen=True)
class Mrp:
    chain: FiniteChain
    rewards: np.ndarray           # (n, n) reward for transition s -> s'
    features: np.ndarray          # (n, d), rows of norm <= 1
    gamma: float
    radius: float = 1.0

    def __post_init__(self) -> None:
        n = self.chain.n_states
        if self.rewards.shape != (n, n) or self.features.shape[0] != n:
            raise DimensionMismatch(
                f"rewards {self.rewards.shape} / features {self.features.shape} do not match {n} states")
        if np.any(np.linalg.norm(self.features, axis=1) > 1.0 + 1e-12):
            raise InvalidParams("feature rows must have norm <= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidParams(f"discount must lie in [0, 1), got {self.gamma!r}")
        object.__setattr__(self, "_mu", stationary_distribution(self.chain).weights)

    @property
    def n_states(self) -> int:
        return self.chain.n_states

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    @property
    def r_max(self) -> float:
        return float(np.max(np.abs(self.rewards)))

    @property
    def mu(self) -> np.ndarray:
        return self._mu  # type: ignore[attr-defined]


def _check_transition(mrp: Mrp, s: int, s_next: int) -> None:
    for state in (s, s_next):
        if int(state) != state or not 0 <= state < mrp.n_states:
            raise BadState(f"state {state!r} outside 0..{mrp.n_states - 1}")


def semi_gradient(mrp: Mrp, theta: np.ndarray, z: Tuple[int, float, int]) -> np.ndarray:
    s, r, s_next = z
    _check_transition(mrp, s, s_next)
    phi = mrp.features
    delta = r + mrp.gamma * phi[s_next] @ theta - phi[s] @ theta
    return delta * phi[s]


def _td_system(mrp: Mrp) -> Tuple[np.ndarray, np.ndarray]:
    """A = Phi^T D (I - gamma P) Phi, b = Phi^T D rbar, so that bar_g(theta) = b - A theta."""
    P = mrp.chain.transition
    Phi = mrp.features
    D = np.diag(mrp.mu)
    A = Phi.T @ D @ (Phi - mrp.gamma * P @ Phi)
    r_bar = np.einsum("ij,ij->i", P, mrp.rewards)
    b = Phi.T @ D @ r_bar
    return A, b


def bar_g(mrp: Mrp, theta: np.ndarray) -> np.ndarray:
    A, b = _td_system(mrp)
    return b - A @ theta


def theta_star(mrp: Mrp) -> np.ndarray:
    A, b = _td_system(mrp)
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise SingularSystem("features are not full rank under the stationary weighting")
    return linalg.solve(A, b)


def value_error(mrp: Mrp, theta: np.ndarray, *, target: Optional[np.ndarray] = None) -> float:
    """sum_s mu(s) (V_theta*(s) - V_theta(s))^2."""
    target = theta_star(mrp) if target is None else target
    gap = mrp.features @ (target - np.asarray(theta, dtype=float))
    return float(mrp.mu @ (gap * gap))


def make_random_mrp(rng: np.random.Generator, *, n_states: int = MRP_STATES, d: int = MRP_FEATURES,
                    gamma: float = MRP_GAMMA, r_max: float = 1.0,
                    features: Optional[np.ndarray] = None) -> Mrp:
    chain = random_ergodic_chain(n_states, rng)
    rewards = rng.uniform(-r_max, r_max, size=(n_states, n_states))
    if features is None:
        features = rng.standard_normal((n_states, d))
        features /= np.linalg.norm(features, axis=1, keepdims=True)
    draft = Mrp(chain, rewards, np.asarray(features, dtype=float), gamma)
    norm = float(np.linalg.norm(theta_star(draft)))
    return Mrp(chain, rewards, draft.features, gamma, radius=2.0 * norm if norm > 0 else 1.0)


class TransitionStream:
    """Emits transitions (s, r, s') along one trajectory of the MRP's chain."""

    def __init__(self, mrp: Mrp, rng: np.random.Generator, *, state: int = 0) -> None:
        self.mrp = mrp
        self.states = MarkovStream(mrp.chain, rng, state=state)
        self.samples_emitted = 0

    def take(self, n: int) -> List[Tuple[int, float, int]]:
        s = self.states.state
        out = []
        for s_next in self.states.take(n):
            out.append((s, float(self.mrp.rewards[s, s_next]), s_next))
            s = s_next
        self.samples_emitted += n
        return out

    def next(self) -> Tuple[int, float, int]:
        return self.take(1)[0]


class TdOracle:
    """Negated semi-gradients, so a descent step on them is the TD ascent step."""

    def __init__(self, mrp: Mrp) -> None:
        self.mrp = mrp
        self.dim = mrp.d
        self._target = theta_star(mrp)

    def gradients(self, theta: np.ndarray, observations: Sequence[Tuple[int, float, int]]) -> np.ndarray:
        s = np.array([o[0] for o in observations], dtype=np.int64)
        r = np.array([o[1] for o in observations], dtype=float)
        s_next = np.array([o[2] for o in observations], dtype=np.int64)
        phi = self.mrp.features
        delta = r + self.mrp.gamma * phi[s_next] @ theta - phi[s] @ theta
        return -delta[:, None] * phi[s]

    def metrics(self, theta: np.ndarray) -> Dict[str, float]:
        return {"value_error": value_error(self.mrp, theta, target=self._target)}


def run_td_mag(mrp: Mrp, T: int, rng: np.random.Generator, *,
               level_dist: Optional[LevelDistribution] = None, record_every: int = 1,
               method: Method = Method.MAG) -> RunTrace:
    """Projected TD with MLMC semi-gradients and AdaGrad-Norm, alpha = sqrt(2) R.

    Records value_error of the running average theta_bar_t every `record_every` iterations.
    """
    oracle = TdOracle(mrp)
    stream = TransitionStream(mrp, rng)
    params = RunParams(
        budget=T,
        budget_unit="iterations",
        record_every=record_every,
        alpha=math.sqrt(2.0) * mrp.radius,
        level_dist=level_dist or LevelDistribution.truncated(DEFAULT_K),
        domain=Domain(mrp.radius),
    )
    return run_method(method, oracle, stream, params, rng, metric=oracle.metrics)
