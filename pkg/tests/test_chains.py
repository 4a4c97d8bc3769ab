import math

import numpy as np
import pytest

from markovopt_chains import (
    Ar1Process,
    FiniteChain,
    MarkovStream,
    d_mix,
    eigen_mixing_bounds,
    is_reversible,
    load_chain,
    mixing_time,
    random_ergodic_chain,
    save_chain,
    stationary_distribution,
    stream_next,
    total_variation,
    two_state_chain,
    winning_streak_reversal,
    winning_streak_stationary,
)
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
# Construction
# ----------------------------
def test_two_state_chain_entries():
    P = two_state_chain(1e-4).transition
    assert P[0, 1] == pytest.approx(1e-4)
    assert P[1, 0] == pytest.approx(1e-4)
    np.testing.assert_allclose(two_state_chain(0.5).transition, [[0.5, 0.5], [0.5, 0.5]])


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_two_state_chain_rejects_boundary(p):
    with pytest.raises(InvalidProbability):
        two_state_chain(p)


def test_winning_streak_rows_n3():
    P = winning_streak_reversal(3).transition
    np.testing.assert_allclose(P, [[0.5, 0.25, 0.25], [1.0, 0.0, 0.0], [0.0, 0.5, 0.5]])


def test_winning_streak_rejects_small_n():
    with pytest.raises(InvalidSize):
        winning_streak_reversal(2)


def test_finite_chain_validation():
    with pytest.raises(InvalidProbability):
        FiniteChain(np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(InvalidSize):
        FiniteChain(np.ones((2, 3)) / 3)
    with pytest.raises(DimensionMismatch):
        FiniteChain(np.eye(2), labels=("a",))


def test_ergodicity_flags():
    assert two_state_chain(0.3).ergodic
    assert not FiniteChain(np.array([[0.0, 1.0], [1.0, 0.0]])).ergodic   # period 2
    assert not FiniteChain(np.eye(2)).ergodic                             # reducible


# ----------------------------
# Stationary distribution and TV
# ----------------------------
def test_stationary_two_state_uniform():
    np.testing.assert_allclose(stationary_distribution(two_state_chain(0.3)).weights, [0.5, 0.5], atol=1e-12)


def test_stationary_winning_streak():
    np.testing.assert_allclose(stationary_distribution(winning_streak_reversal(3)).weights,
                               [0.5, 0.25, 0.25], atol=1e-12)
    for n in (5, 8):
        np.testing.assert_allclose(stationary_distribution(winning_streak_reversal(n)).weights,
                                   winning_streak_stationary(n), atol=1e-12)


def test_stationary_doubly_stochastic_is_uniform():
    P = np.array([[0.2, 0.3, 0.5], [0.5, 0.2, 0.3], [0.3, 0.5, 0.2]])
    np.testing.assert_allclose(stationary_distribution(FiniteChain(P)).weights, np.full(3, 1 / 3), atol=1e-12)


def test_stationary_fixed_point_random_chains():
    rng = np.random.default_rng(7)
    for _ in range(20):
        chain = random_ergodic_chain(6, rng)
        mu = stationary_distribution(chain).weights
        assert np.abs(mu @ chain.transition - mu).sum() < 1e-11


def test_stationary_rejects_periodic_chain():
    with pytest.raises(NonErgodic):
        stationary_distribution(FiniteChain(np.array([[0.0, 1.0], [1.0, 0.0]])))


def test_total_variation_examples():
    assert total_variation([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert total_variation([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert total_variation([0.75, 0.25], [0.5, 0.5]) == pytest.approx(0.25)
    with pytest.raises(DimensionMismatch):
        total_variation([1.0], [0.5, 0.5])


# ----------------------------
# Mixing
# ----------------------------
@pytest.mark.parametrize("p", [0.3, 0.1, 0.01])
def test_d_mix_two_state_closed_form(p):
    chain = two_state_chain(p)
    for t in range(0, 30):
        assert d_mix(chain, t) == pytest.approx(0.5 * (1 - 2 * p) ** t, abs=1e-12)


@pytest.mark.parametrize("n", [3, 5, 8])
def test_winning_streak_mixes_in_n_minus_1_steps(n):
    chain = winning_streak_reversal(n)
    Pn = np.linalg.matrix_power(chain.transition, n - 1)
    np.testing.assert_allclose(Pn, np.tile(winning_streak_stationary(n), (n, 1)), atol=1e-12)
    assert d_mix(chain, n - 2) >= 0.25 - 1e-12
    assert d_mix(chain, n - 1) < 1e-12
    assert mixing_time(chain) == n - 1


def test_d_mix_non_increasing():
    rng = np.random.default_rng(11)
    for _ in range(10):
        chain = random_ergodic_chain(5, rng, concentration=0.3)
        values = [d_mix(chain, t) for t in range(51)]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_d_mix_cap():
    with pytest.raises(CapExceeded):
        d_mix(two_state_chain(0.3), 11, cap=10)
    with pytest.raises(InvalidSize):
        d_mix(two_state_chain(0.3), -1)


def test_mixing_time_examples():
    assert mixing_time(two_state_chain(0.25)) == 1
    assert mixing_time(two_state_chain(0.25), eps=1.0) == 0
    with pytest.raises(InvalidProbability):
        mixing_time(two_state_chain(0.25), eps=0.0)


def test_mixing_time_cap_exceeded():
    with pytest.raises(CapExceeded):
        mixing_time(two_state_chain(1e-4), cap=100)


def test_mixing_time_decay():
    rng = np.random.default_rng(3)
    for _ in range(5):
        chain = random_ergodic_chain(4, rng, concentration=0.5)
        tau = mixing_time(chain)
        for ell in (1, 2, 3, 4):
            assert d_mix(chain, ell * tau) <= 2.0 ** -ell + 1e-11


@pytest.mark.parametrize("p", [0.3, 0.1, 0.01, 0.001])
def test_eigen_bounds_sandwich_mixing_time(p):
    chain = two_state_chain(p)
    lower, upper = eigen_mixing_bounds(chain)
    assert lower <= mixing_time(chain) <= upper


def test_eigen_bounds_small_p_values():
    p = 1e-4
    lower, upper = eigen_mixing_bounds(two_state_chain(p))
    assert lower == pytest.approx((1 - 2 * p) / (2 * p) * math.log(2), rel=1e-6)
    assert upper == pytest.approx(math.log(8) / (2 * p), rel=1e-6)
    assert lower == pytest.approx(3465.0, abs=0.1)
    assert upper == pytest.approx(10397.2, abs=0.1)


def test_eigen_bounds_zero_second_eigenvalue():
    lower, _ = eigen_mixing_bounds(two_state_chain(0.5))
    assert lower == pytest.approx(0.0, abs=1e-12)


def test_eigen_bounds_need_reversibility():
    cyclic = FiniteChain(np.array([[0.1, 0.8, 0.1], [0.1, 0.1, 0.8], [0.8, 0.1, 0.1]]))
    assert not is_reversible(cyclic)
    with pytest.raises(NotReversible):
        eigen_mixing_bounds(cyclic)


# ----------------------------
# Chain files
# ----------------------------
def test_chain_file_round_trip(tmp_path):
    chain = winning_streak_reversal(4)
    path = save_chain(chain, tmp_path / "chain.txt")
    np.testing.assert_array_equal(load_chain(path).transition, chain.transition)


def test_chain_file_shape_mismatch(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3\n0.5 0.5\n0.5 0.5\n", encoding="utf-8")
    with pytest.raises(InvalidSize):
        load_chain(path)


# ----------------------------
# Streams
# ----------------------------
def test_stream_deterministic_row():
    chain = FiniteChain(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.0, 0.5]]))
    stream = MarkovStream(chain, seed=0, state=0)
    assert stream_next(stream) == 1
    assert stream_next(stream) == 2
    assert stream.samples_emitted == 2


def test_stream_same_seed_same_sequence():
    chain = two_state_chain(0.3)
    a = MarkovStream(chain, seed=42).take(500)
    b = MarkovStream(chain, seed=42)
    assert a == b.take(200) + b.take(300)


def test_stream_transition_frequency():
    stream = MarkovStream(two_state_chain(0.3), seed=1, state=1)
    n = 200_000
    states = np.array([1] + stream.take(n))
    switches = np.count_nonzero(np.diff(states))
    assert switches / n == pytest.approx(0.3, abs=0.005)
    assert stream.samples_emitted == n


def test_stream_rejects_bad_initial_state():
    with pytest.raises(InvalidSize):
        MarkovStream(two_state_chain(0.3), seed=0, state=2)


# ----------------------------
# AR(1)
# ----------------------------
def test_ar1_rejects_unstable_matrix():
    with pytest.raises(InvalidParams):
        Ar1Process(np.diag([1.0, 0.5]))


def test_ar1_stationary_covariance_solves_lyapunov():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((4, 4))
    A = 0.8 * M / np.max(np.abs(np.linalg.eigvals(M)))
    proc = Ar1Process(A)
    S = proc.stationary_covariance()
    np.testing.assert_allclose(S, A @ S @ A.T + 0.25 * np.eye(4), atol=1e-12)


def test_ar1_empirical_covariance():
    A = np.diag([0.5, 0.3, -0.2, 0.1])
    proc = Ar1Process(A)
    stream = MarkovStream(proc, seed=9)
    stream.take(1000)
    xs = np.stack(stream.take(200_000))
    emp = xs.T @ xs / xs.shape[0]
    S = proc.stationary_covariance()
    assert np.linalg.norm(emp - S) / np.linalg.norm(S) < 0.1
