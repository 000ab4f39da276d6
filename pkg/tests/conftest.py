"""Shared fixtures for the gsn-shaper test suite."""
from pathlib import Path

import numpy as np
import pytest

from gsn_shaper.config import get_settings
from gsn_shaper.core.nets import ParamStore
from gsn_shaper.models.config import TrainConfig
from gsn_shaper.services.sgsn import SimpleGsn
from gsn_shaper.services.shaping import Guide
from gsn_shaper.utils.rng import make_rng

SMALL_OVERRIDES = [
    "steps=2", "n_data=200", "batch_size=8", "unroll=2",
    "hidden=[4]", "guide_hidden=[4]", "checkpoint_interval=1", "log_interval=1",
]


def zero_params(store: ParamStore) -> ParamStore:
    for name, value in store.items():
        store.set(name, np.zeros_like(value))
    return store


def small_config(**overrides) -> TrainConfig:
    values = dict(steps=3, n_data=200, batch_size=8, unroll=2, hidden=[4], guide_hidden=[4],
                  checkpoint_interval=2, log_interval=1)
    values.update(overrides)
    return TrainConfig(**values)


def single_run_dir(root: Path) -> Path:
    dirs = [p for p in Path(root).iterdir() if p.is_dir()]
    assert len(dirs) == 1, dirs
    return dirs[0]


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def tiny_gsn() -> SimpleGsn:
    return SimpleGsn.create(2, 2, hidden=(3,), seed=0)


@pytest.fixture
def zero_gsn() -> SimpleGsn:
    g = SimpleGsn.create(2, 2, hidden=(4,), seed=0)
    zero_params(g.store)
    return g


@pytest.fixture
def tiny_guide() -> Guide:
    return Guide.create(2, hidden=(3,), seed=1)


@pytest.fixture
def out_root(tmp_path, monkeypatch) -> Path:
    root = tmp_path / "runs"
    monkeypatch.setenv("GSN_SHAPER_OUT", str(root))
    get_settings.cache_clear()
    return root
