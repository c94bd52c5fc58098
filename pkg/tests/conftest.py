import numpy as np
import pytest

from mmrl import synth


@pytest.fixture(scope="session")
def market_small():
    """12-minute liquid synthetic market shared by env/bench tests."""
    return synth.generate(synth.SynthConfig(seed=7, duration_minutes=12,
                                            trade_rate=1.5, noise_sigma=0.15))


@pytest.fixture(scope="session")
def timeline_small(market_small):
    return market_small.timeline()


@pytest.fixture(scope="session")
def bars_small(market_small):
    return market_small.ticks()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
