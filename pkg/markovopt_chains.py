# -*- coding: utf-8 -*-
"""
markovopt_chains.py
-------------------
Finite Markov chains, the AR(1) vector process and exact mixing-time analysis.

Key entry points:
- FiniteChain(transition)                 immutable row-stochastic chain (ergodicity computed once)
- stationary_distribution(chain)          mu with mu P = mu
- total_variation(p, q) / d_mix(chain, t) / mixing_time(chain, eps)
- eigen_mixing_bounds(chain)              (lower, upper) spectral bounds, reversible chains only
- two_state_chain(p), winning_streak_reversal(n), random_ergodic_chain(n, rng)
- Ar1Process(A)                           xi_t = A xi_{t-1} + n_t, n_t ~ N(0, I/d)
- MarkovStream(process, seed=...)         stateful sampler; stream_next(stream)
- load_chain(path) / save_chain(chain, path)

Total variation over a finite space is computed as half the L1 distance, which
equals the sup-over-events definition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from markovopt_errors import (
    CapExceeded,
    DimensionMismatch,
    InvalidParams,
    InvalidProbability,
    InvalidSize,
    NonErgodic,
    NotReversible,
)

# ----------------------------
# Config (overridable)
# ----------------------------
DEFAULT_CAP = 10**6
ROW_SUM_TOL = 1e-12
SUPPORT_EPS = 1e-15
STATIONARY_STEP_TOL = 1e-14
REVERSIBILITY_TOL = 1e-9
SPECTRAL_RADIUS_SLACK = 1e-9
TV_SLACK = 1e-12


# ----------------------------
# Data structures
# ----------------------------
@dataclass(frozen=True)
class Distribution:
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InvalidSize(f"distribution must be a non-empty vector, got shape {w.shape}")
        if np.any(w < 0):
            raise InvalidProbability(f"negative probability mass: min={w.min()!r}")
        if abs(w.sum() - 1.0) > ROW_SUM_TOL:
            raise InvalidProbability(f"distribution sums to {w.sum()!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True)
class FiniteChain:
    """Row-stochastic transition matrix with optional state labels."""

    transition: np.ndarray
    labels: Tuple[str, ...] = ()
    ergodic: bool = field(init=False)
    _cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        P = np.array(self.transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise InvalidSize(f"transition matrix must be square and non-empty, got shape {P.shape}")
        if np.any(P < 0) or np.any(P > 1):
            raise InvalidProbability("transition entries must lie in [0, 1]")
        row_err = np.abs(P.sum(axis=1) - 1.0)
        if np.any(row_err > ROW_SUM_TOL):
            bad = int(np.argmax(row_err))
            raise InvalidProbability(f"row {bad} sums to {P[bad].sum()!r}, expected 1")
        if self.labels and len(self.labels) != P.shape[0]:
            raise DimensionMismatch(f"{len(self.labels)} labels for {P.shape[0]} states")
        P.setflags(write=False)
        cum = np.cumsum(P, axis=1)
        cum[:, -1] = 1.0
        cum.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "_cumulative", cum)
        object.__setattr__(self, "ergodic", _is_irreducible(P) and _period(P) == 1)

    @property
    def n_states(self) -> int:
        return int(self.transition.shape[0])

    def next_state(self, state: int, u: float) -> int:
        """Inverse-CDF transition from `state` given a uniform draw `u`."""
        nxt = int(np.searchsorted(self._cumulative[state], u, side="right"))
        return min(nxt, self.n_states - 1)


def _is_irreducible(P: np.ndarray) -> bool:
    n_comp, _ = connected_components(csr_matrix(P > SUPPORT_EPS), directed=True, connection="strong")
    return n_comp == 1


def _period(P: np.ndarray) -> int:
    """gcd of cycle lengths through state 0, from BFS levels on the support graph."""
    support = P > SUPPORT_EPS
    n = P.shape[0]
    level = np.full(n, -1, dtype=np.int64)
    level[0] = 0
    queue = [0]
    while queue:
        u = queue.pop(0)
        for v in np.flatnonzero(support[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(int(v))
    g = 0
    for u in range(n):
        if level[u] < 0:
            continue
        for v in np.flatnonzero(support[u]):
            if level[v] >= 0:
                g = math.gcd(g, abs(int(level[u]) + 1 - int(level[v])))
    return g


def _require_ergodic(chain: FiniteChain) -> None:
    if not chain.ergodic:
        raise NonErgodic(f"chain with {chain.n_states} states is not irreducible and aperiodic")


def _as_weights(p: Union[Distribution, Sequence[float], np.ndarray]) -> np.ndarray:
    if isinstance(p, Distribution):
        return p.weights
    return np.asarray(p, dtype=float)


# ----------------------------
# Analysis
# ----------------------------
def stationary_distribution(chain: FiniteChain, *, cap: int = DEFAULT_CAP) -> Distribution:
    """Direct solve of mu (P - I) = 0, sum(mu) = 1, polished by power iteration."""
    _require_ergodic(chain)
    P = chain.transition
    n = chain.n_states
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    mu = np.linalg.solve(A, b)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    for _ in range(cap):
        nxt = mu @ P
        if np.max(np.abs(nxt - mu)) < STATIONARY_STEP_TOL:
            mu = nxt
            break
        mu = nxt
    mu = np.clip(mu, 0.0, None)
    return Distribution(mu / mu.sum())


def total_variation(p: Union[Distribution, Sequence[float], np.ndarray],
                    q: Union[Distribution, Sequence[float], np.ndarray]) -> float:
    a = _as_weights(p)
    b = _as_weights(q)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare distributions of shapes {a.shape} and {b.shape}")
    return float(0.5 * np.abs(a - b).sum())


def d_mix(chain: FiniteChain, t: int, *, cap: int = DEFAULT_CAP,
          mu: Optional[Distribution] = None) -> float:
    """Worst-case TV distance between row z of P^t and mu (numpy matrix_power squares repeatedly)."""
    _require_ergodic(chain)
    if t < 0:
        raise InvalidSize(f"t must be non-negative, got {t}")
    if t > cap:
        raise CapExceeded(f"t={t} exceeds the cap {cap}")
    mu = mu if mu is not None else stationary_distribution(chain)
    Pt = np.linalg.matrix_power(chain.transition, int(t))
    return float(np.max(0.5 * np.abs(Pt - mu.weights).sum(axis=1)))


def mixing_time(chain: FiniteChain, eps: float = 0.25, *, cap: int = DEFAULT_CAP) -> int:
    """Smallest t with d_mix(t) <= eps: doubling to bracket, then bisection."""
    if not 0.0 < eps <= 1.0:
        raise InvalidProbability(f"eps must lie in (0, 1), got {eps!r}")
    _require_ergodic(chain)
    mu = stationary_distribution(chain)

    def ok(t: int) -> bool:
        return d_mix(chain, t, cap=cap, mu=mu) <= eps + TV_SLACK

    if ok(0):
        return 0
    hi = 1
    while not ok(hi):
        if hi >= cap:
            raise CapExceeded(f"no t <= {cap} reaches d_mix <= {eps}")
        hi = min(2 * hi, cap)
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def is_reversible(chain: FiniteChain, mu: Optional[Distribution] = None) -> bool:
    mu = mu if mu is not None else stationary_distribution(chain)
    flow = mu.weights[:, None] * chain.transition
    return bool(np.max(np.abs(flow - flow.T)) <= REVERSIBILITY_TOL)


def eigen_mixing_bounds(chain: FiniteChain) -> Tuple[float, float]:
    """Spectral (lower, upper) bounds on tau_mix for reversible chains.

    Eigenvalues come from the symmetrized D^{1/2} P D^{-1/2}, sorted descending.
    """
    mu = stationary_distribution(chain)
    if not is_reversible(chain, mu):
        raise NotReversible("detailed balance fails; spectral bounds need a reversible chain")
    w = mu.weights
    upper_log = math.log(4.0 / float(w.min()))
    if chain.n_states == 1:
        return 0.0, upper_log
    root = np.sqrt(w)
    S = root[:, None] * chain.transition / root[None, :]
    eig = np.sort(linalg.eigvalsh(0.5 * (S + S.T)))[::-1]
    lam2 = abs(float(eig[1]))
    lam_star = max(lam2, abs(float(eig[-1])))
    gap = 1.0 - lam_star
    return lam2 / gap * math.log(2.0), upper_log / gap


# ----------------------------
# Named chains
# ----------------------------
def two_state_chain(p: float) -> FiniteChain:
    if not 0.0 < p < 1.0:
        raise InvalidProbability(f"two-state switching probability must lie in (0, 1), got {p!r}")
    return FiniteChain(np.array([[1.0 - p, p], [p, 1.0 - p]]))


def winning_streak_stationary(n: int) -> np.ndarray:
    mu = np.array([2.0 ** -(i + 1) for i in range(n - 1)] + [2.0 ** -(n - 1)])
    return mu


def winning_streak_reversal(n: int) -> FiniteChain:
    """Time reversal of the winning-streak chain; mixes in exactly n-1 steps."""
    if int(n) != n or n < 3:
        raise InvalidSize(f"winning-streak reversal needs an integer n >= 3, got {n!r}")
    n = int(n)
    mu = winning_streak_stationary(n)
    P = np.zeros((n, n))
    P[0, :] = mu
    for i in range(1, n - 1):
        P[i, i - 1] = 1.0
    P[n - 1, n - 1] = 0.5
    P[n - 1, n - 2] = 0.5
    return FiniteChain(P)


def random_ergodic_chain(n: int, rng: np.random.Generator, *, concentration: float = 1.0,
                         max_tries: int = 1000) -> FiniteChain:
    """Dirichlet rows, rejected until the chain is ergodic."""
    for _ in range(max_tries):
        P = rng.dirichlet(np.full(n, concentration), size=n)
        P /= P.sum(axis=1, keepdims=True)
        chain = FiniteChain(P)
        if chain.ergodic:
            return chain
    raise NonErgodic(f"no ergodic {n}-state chain after {max_tries} Dirichlet draws")


# ----------------------------
# Chain files
# ----------------------------
def load_chain(path: Path) -> FiniteChain:
    """Plain-text format: first line n, then n rows of n whitespace-separated probabilities."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise InvalidSize(f"empty chain file: {path}")
    try:
        n = int(lines[0])
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except ValueError as e:
        raise InvalidSize(f"could not parse chain file {path}: {e}") from e
    if len(rows) != n or any(len(r) != n for r in rows):
        raise InvalidSize(f"chain file {path} declares n={n} but holds a {len(rows)}-row matrix")
    return FiniteChain(np.array(rows))


def save_chain(chain: FiniteChain, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as f:
        f.write(f"{chain.n_states}\n")
        for row in chain.transition:
            f.write(" ".join(format(float(x), ".17g") for x in row) + "\n")
    return path


# ----------------------------
# AR(1) process
# ----------------------------
class Ar1Process:
    """xi_t = A xi_{t-1} + n_t with n_t ~ N(0, noise_scale * I); noise_scale defaults to 1/d."""

    def __init__(self, A: np.ndarray, *, noise_scale: Optional[float] = None,
                 state: Optional[np.ndarray] = None) -> None:
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise InvalidSize(f"AR(1) matrix must be square and non-empty, got shape {A.shape}")
        radius = float(np.max(np.abs(np.linalg.eigvals(A))))
        if radius >= 1.0 - SPECTRAL_RADIUS_SLACK:
            raise InvalidParams(f"spectral radius {radius!r} is not below 1")
        self.A = A
        self.dim = int(A.shape[0])
        self.noise_scale = float(noise_scale) if noise_scale is not None else 1.0 / self.dim
        self.state = np.zeros(self.dim) if state is None else np.array(state, dtype=float)
        if self.state.shape != (self.dim,):
            raise DimensionMismatch(f"initial state shape {self.state.shape} != ({self.dim},)")
        self._noise_std = math.sqrt(self.noise_scale)

    def advance(self, rng: np.random.Generator) -> np.ndarray:
        self.state = self.A @ self.state + self._noise_std * rng.standard_normal(self.dim)
        return self.state.copy()

    def stationary_covariance(self) -> np.ndarray:
        """Solution of Sigma = A Sigma A^T + noise_scale * I."""
        return linalg.solve_discrete_lyapunov(self.A, self.noise_scale * np.eye(self.dim))


# ----------------------------
# Streams
# ----------------------------
class MarkovStream:
    """Correlated observation stream over a FiniteChain or any process with `advance(rng)`.

    The stream is never rewound: consecutive calls continue the same trajectory.
    """

    def __init__(self, process: Any, rng: Optional[np.random.Generator] = None, *,
                 seed: Optional[int] = None, state: int = 0) -> None:
        self.process = process
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.samples_emitted = 0
        self._finite = isinstance(process, FiniteChain)
        if self._finite:
            if not 0 <= state < process.n_states:
                raise InvalidSize(f"initial state {state} outside 0..{process.n_states - 1}")
            self.state: Any = int(state)
        else:
            self.state = None

    def take(self, n: int) -> List[Any]:
        if n < 1:
            raise InvalidSize(f"must take at least one sample, got {n}")
        out: List[Any] = []
        if self._finite:
            chain: FiniteChain = self.process
            s = self.state
            for u in self.rng.random(n):
                s = chain.next_state(s, u)
                out.append(s)
            self.state = s
        else:
            for _ in range(n):
                out.append(self.process.advance(self.rng))
            self.state = out[-1]
        self.samples_emitted += n
        return out

    def next(self) -> Any:
        return self.take(1)[0]


def stream_next(stream: MarkovStream) -> Any:
    return stream.next()
