# filled by test_acceptance.criterion(); printed once at the end of the run
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {number}. {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
