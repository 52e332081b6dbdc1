"""Shared test plumbing: collects acceptance-criterion verdicts so the
run ends with one pass/fail line per criterion."""

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for index, name, ok, detail in sorted(ACCEPTANCE_RESULTS):
        line = f"criterion {index} ({name}): {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
