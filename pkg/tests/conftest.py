"""Shared test configuration.

Prints one PASS/FAIL line per acceptance criterion at the end of a run so
the gate can be read at a glance.
"""

from __future__ import annotations


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results: dict[str, str] = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if getattr(report, "when", "call") == "call" or status == "error":
                name = nodeid.split("::")[-1]
                outcome = "PASS" if status == "passed" else "FAIL"
                # a later failure report for the same test wins
                if results.get(name) != "FAIL":
                    results[name] = outcome
    if results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name in sorted(results):
            terminalreporter.write_line(f"{name}: {results[name]}")
