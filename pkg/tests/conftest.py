import pytest

from hecsim.signals import synth_bee_buzz


@pytest.fixture(scope="session")
def bee_clip():
    return synth_bee_buzz(duration_s=2.0, seed=0)
