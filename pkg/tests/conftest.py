import numpy as np
import pytest

from ptav.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def short_sequence():
    """40-frame textured square drifting over noise; cheap to track."""
    return generate_synthetic(SyntheticSpec(name="short", seed=3, n_frames=40, frame_width=160, frame_height=160))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ------------------------------------------------------

_CRITERIA: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by this test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    detail = dict(item.user_properties).get("measured", "")
    _CRITERIA.append((marker.args[0], "PASS" if call.excinfo is None else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, detail in _CRITERIA:
        terminalreporter.write_line(f"{verdict}  {name}" + (f"  [{detail}]" if detail else ""))
