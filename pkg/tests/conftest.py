from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> (title, passed, details)
_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by a test")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when == "teardown" or (call.when == "setup" and call.excinfo is None):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True, []])
    skipped = call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception)
    entry[1] = entry[1] and (call.excinfo is None or skipped)
    for key, value in item.user_properties if call.when == "call" else ():
        if key == "detail":
            entry[2].append(str(value))
    if skipped:
        entry[2].append(f"{item.name} skipped: {call.excinfo.value.msg}")
    elif call.excinfo is not None:
        entry[2].append(f"{item.name}: {call.excinfo.exconly().splitlines()[0][:300]}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, details = _CRITERIA[number]
        tr.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {title}")
        for d in details:
            tr.write_line(f"    {d}")
