RESULTS = {}  # criterion number -> (passed, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        ok, title, detail = RESULTS[k]
        terminalreporter.write_line(f"C{k:<2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
