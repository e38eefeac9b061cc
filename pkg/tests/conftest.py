import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, name = marker.args
    if report.passed:
        status = "PASS"
    elif report.skipped:
        status = "SKIP (gated on local dataset)"
    else:
        status = "FAIL"
    capman = item.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print(f"\n[criterion {number:>2}] {name}: {status}")
