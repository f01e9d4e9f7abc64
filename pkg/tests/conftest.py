import numpy as np
import pytest

from tlrids.synth import default_profile, synth_dataset


@pytest.fixture(scope="session")
def tiny_profile():
    """Small universe and short sessions for fast unit tests."""
    return default_profile(
        universe_size=40,
        normal_vocab=tuple(range(2, 26, 2)),
        attack_extra_vocab=tuple(range(30, 38)),
        events_per_session=(40, 80),
        duration_s=(4, 7),
        attack_events_per_session=(150, 250),
        attack_duration_s=(8, 12),
        n_rare_vocab=3,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tiny_profile):
    return synth_dataset(np.random.default_rng(5), tiny_profile, n_normal=10)
