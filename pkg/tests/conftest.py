import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def fig1_source():
    from shiftlab.spectra import SpikedParams, make_spiked

    return make_spiked(SpikedParams(10, 1.0, 1e-6, 1000))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


CRITERIA: dict[str, tuple[bool, str]] = {}


def record_criterion(key: str, ok: bool, detail: str) -> None:
    CRITERIA[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: (int(k.rstrip("ab")), k)):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} | {detail}")
