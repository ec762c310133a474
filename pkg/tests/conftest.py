import numpy as np
import pytest

from cohortclust import kernels

FOUR = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]])

_results = []


@pytest.fixture
def four_points():
    return FOUR.copy()


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    impl = kernels.backends()[request.param]
    for name in ("pairwise_euclidean", "lloyd", "pam_build", "pam_swap", "agglomerate"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


@pytest.fixture
def criterion(request):
    """Record a one-line acceptance verdict: ``criterion(detail)`` before asserting."""
    marker = request.node.get_closest_marker("criterion")
    entry = {"id": marker.args[0] if marker else request.node.name, "detail": ""}
    _results.append(entry)

    def note(detail: str):
        entry["detail"] = detail

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and rep.when == "call":
        for entry in _results:
            if entry["id"] == marker.args[0]:
                entry["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    done = [e for e in _results if "passed" in e]
    if not done:
        return
    terminalreporter.section("acceptance criteria")
    for e in sorted(done, key=lambda e: e["id"]):
        verdict = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {e['id']}: {e['detail']}")
