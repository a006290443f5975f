import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from modemix.emd import decompose
from modemix.signal import ToneSpec, synthesize

settings.register_profile(
    "modemix",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("modemix")

CASE_TONES = (ToneSpec(0.7, 8.0), ToneSpec(0.7, 24.0), ToneSpec(1.4, 30.0))

_criteria: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    _criteria[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="session")
def case_signal():
    return synthesize(CASE_TONES, 2.0, 1000.0)


@pytest.fixture(scope="session")
def case_imfs(case_signal):
    return decompose(case_signal)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


def corr(a, b, guard=100):
    a = np.asarray(a)[guard:-guard]
    b = np.asarray(b)[guard:-guard]
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
