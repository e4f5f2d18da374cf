import acceptance_lines as lines


def pytest_terminal_summary(terminalreporter):
    if lines.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in lines.RESULTS:
            terminalreporter.write_line(line)
