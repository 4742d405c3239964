import pytest

from mecavity.config import ExperimentConfig

# Short runs: 4 gate periods of 20 s at 4 kHz keep every test under a second.
FAST = {"sampling": {"rate": 4000.0}, "estimator": {"n_periods": 4}}


def make_config(**sections):
    doc = {k: dict(v) for k, v in FAST.items()}
    for key, value in sections.items():
        if isinstance(value, dict):
            doc.setdefault(key, {}).update(value)
        else:
            doc[key] = value
    return ExperimentConfig(doc)


@pytest.fixture
def quiet_config():
    return make_config(noise={"enabled": False})


@pytest.fixture
def noisy_config():
    return make_config()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
