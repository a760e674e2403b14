"""Helper Functions for spatial region partitions and the region occlusion game."""

import numpy as np
import threading
import torch
from dataclasses import dataclass
from loguru import logger
from pathlib import Path
from pointcloud_region_attack.helpers.classifier import DTYPE, PointClassifier
from pointcloud_region_attack.helpers.geometry import PointCloud
from scipy.spatial.distance import cdist
from typing import Dict, FrozenSet, Iterable, Literal


SeedingMethod = Literal['fps', 'random']
OcclusionMode = Literal['remove', 'centroid']
Readout = Literal['logit', 'probability']


@dataclass(frozen=True)
class RegionPartition:
    """Assignment of every point of a cloud to one of ``m`` regions."""

    m: int
    assignment: np.ndarray
    seeds: np.ndarray

    def __post_init__(self):
        """Check that every point carries a valid region index."""
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.ndim != 1 or assignment.size == 0:
            raise ValueError('Partition assignment must be a non-empty 1-D array.')
        if assignment.min() < 0 or assignment.max() >= self.m:
            raise ValueError(f'Region indices must lie in [0, {self.m}).')
        assignment.setflags(write=False)
        object.__setattr__(self, 'assignment', assignment)

    @property
    def sizes(self) -> np.ndarray:
        """Number of points per region."""
        return np.bincount(self.assignment, minlength=self.m)

    def mask(self, regions: Iterable[int]) -> np.ndarray:
        """Boolean per-point mask of the points belonging to ``regions``."""
        return np.isin(self.assignment, np.fromiter(regions, dtype=np.int64))


def _check_subset(subset: Iterable[int], m: int) -> FrozenSet[int]:
    members = frozenset(int(i) for i in subset)
    if any(i < 0 or i >= m for i in members):
        raise ValueError(f'Region subset {sorted(members)} has indices outside [0, {m}).')
    return members


def farthest_point_seeds(points: np.ndarray, m: int) -> np.ndarray:
    """Greedy farthest point sampling starting from the point of largest norm.

    Args:
        points (np.ndarray): ``(n, 3)`` coordinates.
        m (int): Number of seeds to select.

    Returns:
        np.ndarray: Indices of the ``m`` selected points, in selection order.
    """
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = int(np.argmax(np.linalg.norm(points, axis=1)))
    nearest = np.linalg.norm(points - points[chosen[0]], axis=1)
    nearest[chosen[0]] = -np.inf
    for i in range(1, m):
        chosen[i] = int(np.argmax(nearest))
        nearest = np.minimum(nearest, np.linalg.norm(points - points[chosen[i]], axis=1))
        nearest[chosen[i]] = -np.inf
    return chosen


def partition(
    cloud: PointCloud, m: int, seed: int = 0, method: SeedingMethod = 'fps'
) -> RegionPartition:
    """Split a cloud into ``m`` spatially compact regions.

    Seeds come from farthest point sampling (deterministic, ``seed`` unused) or a
    seeded uniform draw; every point joins its nearest seed, ties to the lower
    seed index.

    Args:
        cloud (PointCloud): Cloud to partition.
        m (int): Region count, ``1 <= m <= n``.
        seed (int): Generator seed for the ``random`` method.
        method (SeedingMethod): ``fps`` or ``random``.

    Returns:
        RegionPartition: Assignment and seed coordinates.
    """
    if m < 1 or m > cloud.n:
        raise ValueError(f'Region count must satisfy 1 <= m <= n={cloud.n}, got {m}.')
    if method == 'fps':
        seed_index = farthest_point_seeds(cloud.points, m)
    elif method == 'random':
        seed_index = np.random.default_rng(seed).choice(cloud.n, size=m, replace=False)
    else:
        raise ValueError(f'Unknown seeding method {method!r}.')
    seeds = cloud.points[seed_index]
    assignment = np.argmin(cdist(cloud.points, seeds), axis=1)
    logger.debug(f'Partitioned {cloud.n} points into {m} regions ({method})')
    return RegionPartition(m=m, assignment=assignment, seeds=seeds)


def subset_cloud(
    cloud: PointCloud, region_partition: RegionPartition, subset: Iterable[int]
) -> PointCloud:
    """Keep only the points whose region is in ``subset``, in original order."""
    members = _check_subset(subset, region_partition.m)
    return cloud.with_points(cloud.points[region_partition.mask(members)])


def save_partition(region_partition: RegionPartition, path: str | Path) -> None:
    """Write one "point_index region_index" line per point."""
    with open(path, 'w') as handle:
        for index, region in enumerate(region_partition.assignment):
            handle.write(f'{index} {region}\n')


class RegionGame:
    """Cooperative game whose players are regions and whose value is a model readout.

    ``g(S)`` evaluates the model on the cloud restricted to the regions in ``S``.
    Values are memoised by subset bitmask; the game is safe to call from many
    threads since the model and cloud are only read.
    """

    def __init__(
        self,
        model: PointClassifier,
        cloud: PointCloud,
        region_partition: RegionPartition,
        label: int,
        occlusion: OcclusionMode = 'remove',
        readout: Readout = 'logit',
    ):
        """Bind the model, cloud, partition and true label."""
        if not 0 <= label < model.num_classes:
            raise ValueError(f'Label {label} is outside [0, {model.num_classes}).')
        self.model = model
        self.cloud = cloud
        self.partition = region_partition
        self.label = label
        self.occlusion = occlusion
        self.readout = readout
        self._points = torch.tensor(cloud.points, dtype=DTYPE)
        self._centroid = self._points.mean(dim=0)
        self._assignment = torch.as_tensor(region_partition.assignment)
        self._cache: Dict[int, float] = {}
        self._lock = threading.Lock()

    @property
    def m(self) -> int:
        """Number of players."""
        return self.partition.m

    def evaluations(self) -> int:
        """Number of distinct coalitions evaluated so far."""
        return len(self._cache)

    def _input(self, members: FrozenSet[int]) -> torch.Tensor:
        present = torch.isin(self._assignment, torch.tensor(sorted(members), dtype=torch.long))
        if self.occlusion == 'centroid':
            return torch.where(present[:, None], self._points, self._centroid)
        if not bool(present.any()):
            # empty coalition: a single point at the origin
            return torch.zeros((1, 3), dtype=DTYPE)
        return self._points[present]

    def __call__(self, subset: Iterable[int]) -> float:
        """Return g(subset)."""
        members = _check_subset(subset, self.m)
        key = sum(1 << i for i in members)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        with torch.no_grad():
            logits = self.model(self._input(members))
        if self.readout == 'probability':
            value = float(torch.softmax(logits, dim=-1)[self.label])
        else:
            value = float(logits[self.label])
        with self._lock:
            self._cache[key] = value
        return value


def value_function(
    model: PointClassifier,
    cloud: PointCloud,
    region_partition: RegionPartition,
    subset: Iterable[int],
    label: int,
    occlusion: OcclusionMode = 'remove',
    readout: Readout = 'logit',
) -> float:
    """One-shot evaluation of g(subset); prefer RegionGame for repeated queries."""
    return RegionGame(model, cloud, region_partition, label, occlusion, readout)(subset)
