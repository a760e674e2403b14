"""Shared fixtures: a tiny untrained victim and small clouds it classifies."""

import numpy as np
import pytest
from pointcloud_region_attack.helpers.classifier import (
    ClassifierArchitecture,
    PointClassifier,
    forward,
)
from pointcloud_region_attack.helpers.geometry import PointCloud, gen_synthetic


@pytest.fixture
def tiny_architecture() -> ClassifierArchitecture:
    """A three-class classifier small enough for exhaustive checks."""
    return ClassifierArchitecture(point_widths=(3, 16, 32), head_widths=(32, 16), num_classes=3)


@pytest.fixture
def tiny_model(tiny_architecture) -> PointClassifier:
    """Untrained, deterministically initialised victim in eval mode."""
    model = PointClassifier(tiny_architecture, seed=7)
    model.eval()
    return model


@pytest.fixture
def sphere_cloud() -> PointCloud:
    """64 normalized points on a sphere, labeled with the sphere class index."""
    return gen_synthetic('sphere', 64, seed=3)


@pytest.fixture
def labeled_cloud(tiny_model, sphere_cloud) -> PointCloud:
    """The sphere cloud labeled with the tiny model's own prediction."""
    predicted = forward(tiny_model, sphere_cloud).predicted
    return PointCloud(sphere_cloud.points, label=predicted, name='sphere-labeled')


@pytest.fixture
def two_clusters() -> PointCloud:
    """Two well separated clusters of 50 points each, around x = -5 and x = +5."""
    rng = np.random.default_rng(11)
    left = rng.normal(0.0, 0.1, size=(50, 3)) + np.array([-5.0, 0.0, 0.0])
    right = rng.normal(0.0, 0.1, size=(50, 3)) + np.array([5.0, 0.0, 0.0])
    return PointCloud(np.concatenate([left, right]), name='clusters')
