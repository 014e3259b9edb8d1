import pytest

from activenewton import verify


@pytest.mark.parametrize("suite", verify.SUITES)
def test_suite_passes(suite):
    checks = verify.run(suite, seed=7)
    assert checks
    assert all(c.suite == suite for c in checks)
    assert [c.name for c in checks if not c.passed] == []


def test_single_suite_matches_full_run():
    full = [(c.name, c.passed, c.detail) for c in verify.run("all", seed=3) if c.suite == "geneq"]
    alone = [(c.name, c.passed, c.detail) for c in verify.run("geneq", seed=3)]
    assert full == alone


def test_other_seed_passes():
    assert all(c.passed for c in verify.run("all", seed=12345))


def test_injected_fault_is_caught():
    failed = [c for c in verify.run("varcalc", fault="coderivative") if not c.passed]
    assert failed and all("coderivative" in c.name for c in failed)
