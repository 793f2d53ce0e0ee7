import numpy as np
import pytest
from hypothesis import settings

from scenewarp.config import Config
from scenewarp.pipeline import camera_for
from scenewarp.scenesim import generate_scene, make_triplets, render_sequence

# Property tests must behave identically on every run.
settings.register_profile("deterministic", derandomize=True, deadline=None)
settings.load_profile("deterministic")


@pytest.fixture(scope="session")
def small_config():
    return Config(resolution=32, seed=0)


@pytest.fixture(scope="session")
def small_triplets(small_config):
    """A handful of 32x32 oracle triplets shared across tests."""
    out = []
    seed = 0
    while len(out) < 6 and seed < 20:
        spec = generate_scene(small_config, seed)
        frames = render_sequence(spec, camera_for(small_config))
        out.extend(make_triplets(spec, frames, small_config))
        seed += 1
    assert len(out) >= 6
    return out[:6]


def make_oracle_triplet(config, seed):
    """First valid triplet at or after the given scene seed."""
    for offset in range(25):
        spec = generate_scene(config, seed + offset)
        frames = render_sequence(spec, camera_for(config))
        triplets = make_triplets(spec, frames, config)
        if triplets:
            return triplets[0]
    raise AssertionError(f"no valid triplets near seed {seed}")


@pytest.fixture()
def rng():
    # Function-scoped so no test's draws depend on which tests ran before it.
    return np.random.default_rng(12345)
