"""Acceptance gate: every criterion runs at its pinned tolerance.

Each check prints one PASS/FAIL line (run pytest with -s or check the CLI
``blackhats verify`` for the same output).
"""

import pytest

from blackhats import verification


@pytest.mark.parametrize("check", verification.ALL_CHECKS,
                         ids=[fn.check_name for fn in verification.ALL_CHECKS])
def test_acceptance(check):
    result = verification.run_check(check)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status} {result.name} [{result.elapsed:.1f}s] {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"
