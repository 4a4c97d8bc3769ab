import numpy as np
import pytest

from markovopt_cli import main
from markovopt_verify import SUITES, Check, adagrad_regret_slack, auer_gentile_slack, run_checks, verify


@pytest.mark.parametrize("suite", sorted(SUITES))
def test_suite_passes(suite):
    checks = run_checks(suite)
    assert checks
    failed = [c.line() for c in checks if not c.passed]
    assert failed == []


def test_winning_streak_checks_reported():
    names = [c.name for c in run_checks("chains")]
    assert "winning_streak(5) d_mix(3) >= 1/4" in names
    assert "winning_streak(5) d_mix(4) = 0" in names


def test_check_line_format():
    ok = Check("optim", "bound", measured=1.0, slack=0.5)
    bad = Check("optim", "bound", measured=2.0, slack=-0.5)
    assert ok.passed and not bad.passed
    assert ok.line().startswith("[verify] PASS optim: bound")
    assert "FAIL" in bad.line()


def test_auer_gentile_examples():
    # a single term gives sqrt(a) on the left and 2 sqrt(a) on the right
    assert auer_gentile_slack(np.array([4.0])) == pytest.approx(2.0)
    assert auer_gentile_slack(np.array([0.0, 0.0, 1.0])) == pytest.approx(1.0)
    assert auer_gentile_slack(np.zeros(3)) == 0.0


def test_auer_gentile_random_sequences():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(1, 100))
        assert auer_gentile_slack(rng.exponential(size=k) * (rng.random(k) < 0.8)) >= -1e-9


def test_regret_slack_random_sequences():
    rng = np.random.default_rng(1)
    assert min(adagrad_regret_slack(rng) for _ in range(200)) >= -1e-9


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_checks("bogus")


def test_verify_logs_summary():
    lines = []
    assert verify("optim", log=lines.append)
    assert lines[-1].startswith("[verify] suite=optim")


def test_cli_verify_exit_code(capsys):
    assert main(["verify", "--suite", "optim"]) == 0
    assert "failed=0" in capsys.readouterr().out
