import pytest

_outcomes: dict[int, tuple[str, str]] = {}
_notes: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    status = "PASS" if report.passed else "FAIL"
    previous = _outcomes.get(number)
    if previous is None or previous[0] == "PASS":
        _outcomes[number] = (status, title)


@pytest.fixture
def note(request):
    """Attach an informational line to the acceptance summary."""
    marker = request.node.get_closest_marker("criterion")
    prefix = f"[{marker.args[0]}] " if marker else ""
    return lambda line: _notes.append(prefix + line)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status, title = _outcomes[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
    for line in _notes:
        terminalreporter.write_line(f"  note: {line}")
