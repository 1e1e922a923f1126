"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

_RESULTS = {}


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _RESULTS.setdefault(number, (title, []))[1].append((report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, runs = _RESULTS[number]
        status = "PASS" if all(outcome == "passed" for outcome, _ in runs) else "FAIL"
        line = f"criterion {number:2d} {status}  {title}"
        details = "; ".join(d for _, d in runs if d)
        if details:
            line += f"  [{details}]"
        terminalreporter.write_line(line)
