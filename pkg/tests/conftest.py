import importlib

import pytest

from servorig import kernels
from servorig.reference import FLIGHT_SCHEDULE, reconstructed_matrix
from servorig.testbed import WearModel, run_campaign

_BACKENDS = ["python"]
try:
    importlib.import_module("servorig._ckernels")
    _BACKENDS.append("cython")
except ImportError:
    pass

_NAMES = ("edge_index", "channel_levels", "drive_path", "drive_linear", "campaign")


@pytest.fixture(params=_BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel implementation."""
    mod = importlib.import_module(
        "servorig._pykernels" if request.param == "python" else "servorig._ckernels")
    for name in _NAMES:
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    monkeypatch.setattr(kernels, "IMPLEMENTATION", request.param)
    return request.param


@pytest.fixture(scope="session")
def reconstructed():
    return reconstructed_matrix()


@pytest.fixture(scope="session")
def mini_wear_log():
    return run_campaign(FLIGHT_SCHEDULE, 39_300, WearModel(seed=7))


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it.

    ``checks`` is a list of ``(label, ok, detail)`` triples.
    """
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, title, checks):
        ok = all(c[1] for c in checks)
        failed = [f"{label}: {detail}" for label, good, detail in checks if not good]
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}"
        if failed:
            line += "  [" + "; ".join(failed) + "]"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
