import numpy as np
import pytest

from markovopt_chains import FiniteChain, MarkovStream, stationary_distribution, two_state_chain
from markovopt_errors import InvalidParams, NotPowerOfTwo
from markovopt_estimators import (
    Compensation,
    LevelDistribution,
    LevelKind,
    draw_level,
    expected_sample_count,
    level_decomposition,
    minibatch_gradient,
    mlmc_conditional_mean,
    mlmc_gradient,
)
from markovopt_problems import RegressionOracle, make_regression


class ScriptedStream:
    """Replays a fixed list of observations."""

    def __init__(self, observations):
        self.observations = list(observations)
        self.samples_emitted = 0

    def take(self, n):
        out = self.observations[self.samples_emitted:self.samples_emitted + n]
        assert len(out) == n, "scripted stream exhausted"
        self.samples_emitted += n
        return out


class TableOracle:
    """Gradient of observation k is row k of `table`, independent of w."""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=float)
        self.dim = self.table.shape[1]

    def gradients(self, w, observations):
        return self.table[np.asarray(observations, dtype=np.int64)]


class FixedLevel:
    """Stands in for the rng so a full-law draw returns a chosen level."""

    def __init__(self, level):
        self.level = level

    def geometric(self, p):
        return self.level


def _constant_oracle(g):
    return TableOracle([g])


def _single_state_stream(seed=0):
    return MarkovStream(FiniteChain(np.array([[1.0]])), seed=seed)


# ----------------------------
# Level laws
# ----------------------------
def test_full_law_levels():
    dist = LevelDistribution.full(8)
    assert dist.kind is LevelKind.FULL
    assert dist.j_max == 3
    assert dist.probability(3) == 0.125
    assert dist.compensator(3) == 8.0
    assert dist.overflows(4) and not dist.overflows(3)


def test_truncated_law_probabilities():
    dist = LevelDistribution.truncated(5)
    assert dist.probability(1) == pytest.approx(16 / 31)
    assert dist.probability(6) == 0.0
    assert abs(sum(dist.probability(j) for j in range(1, 6)) - 1.0) <= 1e-15
    assert dist.compensator(2) * dist.probability(2) == pytest.approx(1.0)
    doubled = LevelDistribution.truncated(5, Compensation.POWER_OF_TWO)
    assert doubled.compensator(2) == 4.0


def test_level_laws_reject_bad_parameters():
    with pytest.raises(InvalidParams):
        LevelDistribution.full(0)
    with pytest.raises(InvalidParams):
        LevelDistribution.truncated(0)


def test_draw_level_full_frequency():
    rng = np.random.default_rng(0)
    dist = LevelDistribution.full(2**20)
    draws = np.array([draw_level(dist, rng) for _ in range(200_000)])
    assert draws.min() >= 1
    assert np.mean(draws == 3) == pytest.approx(0.125, abs=0.005)


def test_draw_level_truncated_frequency():
    rng = np.random.default_rng(1)
    dist = LevelDistribution.truncated(5)
    draws = np.array([draw_level(dist, rng) for _ in range(100_000)])
    assert set(np.unique(draws)) <= {1, 2, 3, 4, 5}
    assert np.mean(draws == 1) == pytest.approx(16 / 31, abs=0.01)


def test_draw_level_single_level():
    rng = np.random.default_rng(2)
    dist = LevelDistribution.truncated(1)
    assert {draw_level(dist, rng) for _ in range(100)} == {1}


# ----------------------------
# Estimators
# ----------------------------
def test_minibatch_constant_field():
    g = np.array([1.0, -2.0])
    for n in (1, 3, 8):
        est = minibatch_gradient(_constant_oracle(g), np.zeros(2), _single_state_stream(), n)
        np.testing.assert_array_equal(est.gradient, g)
        assert est.samples_consumed == n
        assert est.level == 0


def test_minibatch_regression_hand_average():
    inst = make_regression(6, 3, np.random.default_rng(4))
    oracle = RegressionOracle(inst)
    w = np.array([0.3, -0.1, 0.2])
    sequence = [0, 1, 1, 0]
    est = minibatch_gradient(oracle, w, ScriptedStream(sequence), 4)
    g0 = inst.X[0].T @ (inst.X[0] @ w - inst.y[0]) / inst.n
    g1 = inst.X[1].T @ (inst.X[1] @ w - inst.y[1]) / inst.n
    np.testing.assert_allclose(est.gradient, (g0 + g1 + g1 + g0) / 4, atol=1e-12)


def test_minibatch_rejects_empty_batch():
    with pytest.raises(InvalidParams):
        minibatch_gradient(_constant_oracle([1.0]), np.zeros(1), _single_state_stream(), 0)


def test_mlmc_hand_evaluation_level_two():
    table = [[1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [-1.0, 5.0]]
    a, b, c, d = (np.array(r) for r in table)
    stream = ScriptedStream([0, 1, 2, 3])
    est = mlmc_gradient(TableOracle(table), np.zeros(2), stream, LevelDistribution.full(8), FixedLevel(2))
    g1 = (a + b) / 2
    g2 = (a + b + c + d) / 4
    np.testing.assert_allclose(est.gradient, a + 4 * (g2 - g1))
    assert est.samples_consumed == 4
    assert est.level == 2


def test_mlmc_overflow_uses_one_sample():
    table = [[1.0], [7.0]]
    stream = ScriptedStream([0, 1])
    est = mlmc_gradient(TableOracle(table), np.zeros(1), stream, LevelDistribution.full(8), FixedLevel(4))
    np.testing.assert_array_equal(est.gradient, [1.0])
    assert est.samples_consumed == 1
    assert stream.samples_emitted == 1


def test_mlmc_constant_field_any_level():
    g = np.array([0.5, 0.25, -1.0])
    rng = np.random.default_rng(6)
    stream = _single_state_stream()
    for dist in (LevelDistribution.full(64), LevelDistribution.truncated(5)):
        for _ in range(50):
            est = mlmc_gradient(_constant_oracle(g), np.zeros(3), stream, dist, rng)
            np.testing.assert_allclose(est.gradient, g, atol=1e-12)


def test_mlmc_mean_sample_count():
    rng = np.random.default_rng(8)
    stream = _single_state_stream()
    dist = LevelDistribution.full(8)
    oracle = _constant_oracle([1.0])
    total = sum(mlmc_gradient(oracle, np.zeros(1), stream, dist, rng).samples_consumed
                for _ in range(50_000))
    assert total / 50_000 == pytest.approx(3.125, abs=0.05)
    assert stream.samples_emitted == total


# ----------------------------
# Sample counts and level structure
# ----------------------------
def test_expected_sample_count_examples():
    assert expected_sample_count(LevelDistribution.full(8)) == 3.125
    assert expected_sample_count(LevelDistribution.full(1)) == 1.0
    assert expected_sample_count(LevelDistribution.full(2**20)) == 20 + 2.0**-20
    assert expected_sample_count(LevelDistribution.truncated(5)) == pytest.approx(160 / 31)


def test_level_decomposition_prefix_averages():
    table = [[4.0], [0.0], [2.0], [6.0]]
    levels = level_decomposition(TableOracle(table), np.zeros(1), [0, 1, 2, 3])
    np.testing.assert_allclose(np.concatenate(levels), [4.0, 2.0, 3.0])
    single = level_decomposition(TableOracle(table), np.zeros(1), [3])
    np.testing.assert_allclose(single[0], [6.0])


def test_level_decomposition_identical_samples():
    levels = level_decomposition(TableOracle([[1.0, 2.0]]), np.zeros(2), [0] * 8)
    for g in levels:
        np.testing.assert_array_equal(g, [1.0, 2.0])


def test_level_decomposition_rejects_non_power_of_two():
    with pytest.raises(NotPowerOfTwo):
        level_decomposition(TableOracle([[1.0]]), np.zeros(1), [0, 0, 0])


@pytest.mark.parametrize("dist,top", [
    (LevelDistribution.full(32), 5),
    (LevelDistribution.truncated(5), 5),
    (LevelDistribution.truncated(3), 3),
])
def test_conditional_mean_telescopes(dist, top):
    rng = np.random.default_rng(12)
    inst = make_regression(8, 4, rng)
    oracle = RegressionOracle(inst)
    for _ in range(100):
        w = rng.standard_normal(4)
        block = list(rng.integers(0, 2, size=2**top))
        levels = level_decomposition(oracle, w, block)
        np.testing.assert_allclose(mlmc_conditional_mean(dist, levels), levels[top], rtol=0, atol=1e-10)


# ----------------------------
# Mixing-time behaviour on the two-state regression problem
# ----------------------------
def _two_state_problem(p):
    chain = two_state_chain(p)
    pi = stationary_distribution(chain).weights
    inst = make_regression(10, 3, np.random.default_rng(30), weights=pi)
    oracle = RegressionOracle(inst)
    w = inst.w_star
    full_gradient = pi @ oracle.gradients(w, [0, 1])
    return chain, pi, oracle, w, full_gradient


@pytest.mark.slow
def test_mlmc_second_moment_grows_with_mixing_time():
    dist = LevelDistribution.full(2**12)
    moments = []
    for p in (0.1, 0.01, 0.001):
        chain, pi, oracle, w, _ = _two_state_problem(p)
        total, draws = 0.0, 0
        for seed in range(16):
            rng = np.random.default_rng(seed)
            stream = MarkovStream(chain, rng, state=int(rng.choice(2, p=pi)))
            for _ in range(10_000):
                g = mlmc_gradient(oracle, w, stream, dist, rng).gradient
                total += float(g @ g)
                draws += 1
        moments.append(total / draws)
    assert moments[0] <= moments[1] <= moments[2]


@pytest.mark.slow
def test_mlmc_bias_shrinks_with_horizon():
    # the level is averaged out exactly per block; blocks restart from state 0
    chain, _, oracle, w, full_gradient = _two_state_problem(0.01)
    rng = np.random.default_rng(31)
    biases = []
    for T in (2**4, 2**8, 2**12):
        dist = LevelDistribution.full(T)
        mean = np.zeros_like(full_gradient)
        blocks = 1_000
        for _ in range(blocks):
            stream = MarkovStream(chain, rng, state=0)
            mean += mlmc_conditional_mean(dist, level_decomposition(oracle, w, stream.take(T)))
        biases.append(float(np.linalg.norm(mean / blocks - full_gradient)))
    assert biases[0] > biases[1] > biases[2]
