import numpy as np
import pytest

_criteria = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    ok = report.passed if report.when == "call" else not report.failed
    prev = _criteria.get(crit, (True, []))
    _criteria[crit] = (prev[0] and ok, prev[1] + ([report.nodeid] if not ok else []))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_criteria):
        ok, failed = _criteria[crit]
        line = f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += "  (" + ", ".join(failed) + ")"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def jitter(params, rng, scale=0.5):
    """Push every parameter away from its initial value (biases start at zero)."""
    for v in params.values():
        v += rng.normal(0.0, scale, v.shape)
    return params
