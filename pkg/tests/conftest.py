import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    number, title = marker.args
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    _CRITERIA[number] = f"{status} criterion {number:>2}: {title}" + (f" [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
