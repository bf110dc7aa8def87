"""Collects acceptance-test outcomes and prints one PASS/FAIL line per criterion."""

from collections import defaultdict

_outcomes = defaultdict(list)
_titles = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _titles[m.args[0]] = m.args[1]
            item.user_properties.append(("acceptance", m.args[0]))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("acceptance")
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes[crit].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_titles):
        got = _outcomes.get(n, [])
        if not got:
            verdict = "NOT RUN"
        elif all(o == "passed" for o in got):
            verdict = "PASS"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {n:2d} {_titles[n]}: {verdict}")
