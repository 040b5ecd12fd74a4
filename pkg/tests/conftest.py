import numpy as np
import pytest


@pytest.fixture
def cazac4():
    """N=4 unit-modulus sequence whose four circular shifts are orthogonal."""
    return np.array([1.0, 1.0, 1.0, -1.0], dtype=complex) / 2.0


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    seen = {}
    for outcome, flag in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion" not in nodeid:
                continue
            if getattr(rep, "when", "call") != "call" and flag == "PASS":
                continue
            name = nodeid.split("::", 1)[1]
            if flag == "FAIL" or name not in seen:
                seen[name] = flag
    if seen:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name in sorted(seen):
            terminalreporter.write_line(f"{seen[name]}  {name}")
