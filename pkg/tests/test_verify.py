import pytest

from ecdkit import truncate
from ecdkit.verify import CHECKS, SUITES, CheckResult, run_check, run_suite, selected


def test_selection():
    assert selected("all") == [n for s in SUITES for n in CHECKS[s]]
    assert all(n.startswith("truncate.") for n in selected("truncate"))
    with pytest.raises(ValueError):
        selected("nope")


def test_result_line():
    r = CheckResult("enorm.duality_gap", True, 20, 1.5e-9)
    assert r.line() == "PASS enorm.duality_gap trials=20 worst_margin=1.500e-09"


@pytest.mark.parametrize("name", selected("all"))
def test_every_check_passes(name):
    r = run_check(name, seed=1, trials=5)
    assert r.passed, r.instance
    assert r.trials >= 1


def test_child_seed_ignores_suite_selection():
    alone = run_check("channel.pinch", 4, 6)
    within = {r.name: r for r in run_suite("channel", 4, 6)}["channel.pinch"]
    assert alone == within


def test_crash_becomes_failure(monkeypatch):
    def boom(t, rng, trials):
        raise RuntimeError("broken")

    monkeypatch.setitem(CHECKS["enorm"], "enorm.duality_gap", (boom, False))
    r = run_check("enorm.duality_gap", 0, 3)
    assert not r.passed
    assert "RuntimeError" in r.instance["error"]


def test_sabotage_reports_instance(monkeypatch):
    monkeypatch.setattr(truncate, "_RHS30_SIGN", -1.0)
    r = run_check("truncate.bound30", 0, 5)
    assert not r.passed
    assert r.instance["check"] == "truncate.bound30"
    assert r.worst < 0


def test_threads_preserve_order():
    assert run_suite("enorm", 2, 3, threads=1) == run_suite("enorm", 2, 3, threads=4)


def test_zero_trials():
    with pytest.raises(ValueError):
        run_suite("enorm", 0, 0)
