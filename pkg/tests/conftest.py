import pytest

from stocknews.synth import SynthParams, synth

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, text): exit criterion n")


def pytest_runtest_logreport(report):
    marker = getattr(report, "_acceptance", None)
    if marker is None:
        return
    n, text = marker
    if report.when == "call" or report.outcome != "passed":
        prev = _ACCEPTANCE.get(n, (text, "PASS"))[1]
        status = "PASS" if report.outcome == "passed" and prev == "PASS" else "FAIL"
        _ACCEPTANCE[n] = (text, status)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        report._acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        text, status = _ACCEPTANCE[n]
        terminalreporter.write_line(f"[{status}] criterion {n}: {text}")


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """Four stocks, 120 days; enough for the whole pipeline in about a second."""
    params = SynthParams(days=120, stocks=4, signal=0.4, persistence=2, n_pos=8, n_neg=8, n_neutral=12, seed=3)
    data = synth(params)
    paths = data.write(tmp_path_factory.mktemp("synth"))
    return data, paths
