def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    res = test_acceptance.RESULTS
    if not res:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(res):
        terminalreporter.write_line(test_acceptance.line(n, *res[n]))
