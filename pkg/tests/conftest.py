def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ORDER, RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in ORDER:
        if name in RESULTS:
            terminalreporter.write_line(RESULTS[name])
