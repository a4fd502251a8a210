"""Acceptance criteria 1-9 at their stated tolerances (several minutes).

Each criterion prints one PASS/FAIL line (collected in the terminal summary)
and fails the test if any of its checks misses its tolerance.
"""

import pytest

from qhf.verify import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("key", sorted(CRITERIA))
def test_criterion(key, acceptance_report):
    checks = CRITERIA[key]()
    failed = [c for c in checks if not c.passed]
    verdict = "PASS" if not failed else "FAIL"
    acceptance_report.append(f"criterion {key}: {verdict}")
    for c in checks:
        line = c.line()
        acceptance_report.append("    " + line)
        print(line)
    assert not failed, "\n".join(c.line() for c in failed)
