"""Shared fixtures: tiny configs that integrate in well under a second"""
import pytest

from src.network.parameters import SimConfig


@pytest.fixture
def tiny_cfg() -> SimConfig:
    return SimConfig(
        n_nodes=8, degree=3,
        n_classes=2, n_instances=2, n_challenges=3, n_repeats=2,
        t_int=3.0, discard=0.5, sample_interval=0.5,
        master_seed=11
    ).validate()
