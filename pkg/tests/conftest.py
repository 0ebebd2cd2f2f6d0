"""Shared fixtures: a tiny synthetic scene and a toy training
configuration."""

import dataclasses

import numpy as np
import pytest

from headrecon.config import NetworkConfig, StageSchedule, \
    SyntheticConfig, TrainConfig
from headrecon.synthetic import generate_synthetic_scene

TINY = SyntheticConfig(views=2, width=16, height=16, morphable=False)


@pytest.fixture(scope='session')
def tiny_scene():
    """Two 16x16 views of the sphere-and-torus head, with the ground truth
    mesh standing in for the proxy mesh."""

    scene = generate_synthetic_scene(TINY, seed=0)
    return dataclasses.replace(scene, proxy_mesh=scene.ground_truth)


@pytest.fixture
def toy_config():
    return TrainConfig(network=NetworkConfig.toy(), head_rays=8,
                       hair_rays=4, proxy_samples=16, eikonal_samples=16,
                       schedule=StageSchedule(epochs=3), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
