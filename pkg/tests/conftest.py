import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dualvd.synth import SynthConfig, generate_dataset, write_generated

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

TINY = SynthConfig(
    n_objects=4, n_dense=2, n_cand=5, rounds=3, dialogues=4, val_dialogues=2,
    d_obj=16, d_rel=8, n_types=8, n_colors=6, n_moods=6, n_scenes=6,
)


@pytest.fixture(scope="session")
def tiny_cfg():
    return TINY


@pytest.fixture(scope="session")
def tiny_data():
    return generate_dataset(TINY, seed=5)


@pytest.fixture(scope="session")
def tiny_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny")
    write_generated(out, TINY, seed=5)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
