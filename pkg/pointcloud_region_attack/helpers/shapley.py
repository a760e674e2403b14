"""Helper Functions for region Shapley values, saliency maps and top-k selection."""

import json
import math
import numpy as np
from dataclasses import dataclass
from joblib import Parallel, delayed
from loguru import logger
from pathlib import Path
from pointcloud_region_attack.helpers.classifier import PointClassifier
from pointcloud_region_attack.helpers.geometry import PointCloud
from pointcloud_region_attack.helpers.regions import (
    OcclusionMode,
    Readout,
    RegionGame,
    RegionPartition,
    SeedingMethod,
)
from pydantic import BaseModel, Field
from typing import Callable, FrozenSet, Iterable, List, Literal, Optional, Sequence, Tuple, TypeVar


ValueFunction = Callable[[FrozenSet[int]], float]
SelectionStrategy = Literal['top', 'bottom', 'random']

T = TypeVar('T')
R = TypeVar('R')


class ShapleyConfig(BaseModel):
    """Region count, estimator choice and the semantics of the region game."""

    m: int = Field(default=32, ge=1, description='Number of regions')
    estimator: Literal['auto', 'exact', 'monte-carlo'] = 'auto'
    exact_threshold: int = Field(default=12, ge=1, le=20)
    permutations: int = Field(default=200, ge=1)
    seeding: SeedingMethod = 'fps'
    occlusion: OcclusionMode = 'remove'
    readout: Readout = 'logit'


@dataclass(frozen=True)
class SaliencyMap:
    """Per-region Shapley values with their descending rank order."""

    phi: np.ndarray
    rank: np.ndarray
    estimator: Literal['exact', 'monte-carlo']
    permutations: Optional[int] = None
    standard_errors: Optional[np.ndarray] = None
    full_value: Optional[float] = None
    empty_value: Optional[float] = None

    @property
    def m(self) -> int:
        """Number of regions."""
        return int(self.phi.shape[0])


def rank_regions(phi: np.ndarray) -> np.ndarray:
    """Region indices by descending value; equal values keep the lower index first."""
    return np.argsort(-np.asarray(phi), kind='stable')


def _ordered_map(function: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    if workers <= 1:
        return [function(item) for item in items]
    return Parallel(n_jobs=workers, prefer='threads')(delayed(function)(item) for item in items)


def _members(mask: int, m: int) -> FrozenSet[int]:
    return frozenset(i for i in range(m) if mask >> i & 1)


def shapley_exact(
    game: ValueFunction, m: int, exact_threshold: int = 12, workers: int = 1
) -> SaliencyMap:
    """Exact Shapley values by enumerating all ``2**m`` coalitions once.

    Args:
        game (ValueFunction): Maps a set of region indices to a real value.
        m (int): Number of players.
        exact_threshold (int): Largest ``m`` accepted.
        workers (int): Threads used to evaluate coalitions.

    Returns:
        SaliencyMap: Exact values with ``full_value = g(M)`` and ``empty_value = g({})``.
    """
    if m < 1:
        raise ValueError(f'Need at least one player, got m={m}.')
    if m > exact_threshold:
        raise ValueError(
            f'm={m} exceeds the exact threshold {exact_threshold}; use shapley_monte_carlo.'
        )
    logger.debug(f'Exact Shapley over {2**m} coalitions of {m} regions')
    masks = np.arange(2**m)
    values = np.asarray(_ordered_map(lambda k: game(_members(int(k), m)), masks, workers))
    sizes = np.array([bin(int(k)).count('1') for k in masks])
    weights = np.array(
        [math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m) for s in range(m)]
    )
    phi = np.empty(m)
    for i in range(m):
        without = masks[(masks >> i & 1) == 0]
        gains = values[without | 1 << i] - values[without]
        phi[i] = float(np.sum(weights[sizes[without]] * gains))
    return SaliencyMap(
        phi=phi,
        rank=rank_regions(phi),
        estimator='exact',
        full_value=float(values[-1]),
        empty_value=float(values[0]),
    )


def shapley_monte_carlo(
    game: ValueFunction, m: int, permutations: int, seed: int, workers: int = 1
) -> SaliencyMap:
    """Permutation-sampling estimate of the Shapley values.

    Each sampled order grows the coalition one region at a time, so one order
    costs ``m + 1`` evaluations. Marginals are combined in permutation order.

    Args:
        game (ValueFunction): Maps a set of region indices to a real value.
        m (int): Number of players.
        permutations (int): Number of sampled orders.
        seed (int): Seed of the permutation generator.
        workers (int): Threads used to process permutations.

    Returns:
        SaliencyMap: Mean marginals with their standard errors.
    """
    if permutations < 1:
        raise ValueError(f'Need at least one permutation, got {permutations}.')
    rng = np.random.default_rng(seed)
    orders = [rng.permutation(m) for _ in range(permutations)]

    def marginals(order: np.ndarray) -> np.ndarray:
        coalition: set = set()
        previous = game(frozenset())
        row = np.empty(m)
        for region in order:
            coalition.add(int(region))
            current = game(frozenset(coalition))
            row[region] = current - previous
            previous = current
        return row

    logger.debug(f'Monte Carlo Shapley: {permutations} permutations of {m} regions')
    matrix = np.stack(_ordered_map(marginals, orders, workers))
    phi = matrix.mean(axis=0)
    if permutations > 1:
        errors = matrix.std(axis=0, ddof=1) / math.sqrt(permutations)
    else:
        errors = np.zeros(m)
    return SaliencyMap(
        phi=phi,
        rank=rank_regions(phi),
        estimator='monte-carlo',
        permutations=permutations,
        standard_errors=errors,
        full_value=game(frozenset(range(m))),
        empty_value=game(frozenset()),
    )


def compute_saliency(
    game: ValueFunction, config: ShapleyConfig, seed: int = 0, workers: int = 1
) -> SaliencyMap:
    """Pick the estimator from the config (``auto`` is exact up to the threshold)."""
    estimator = config.estimator
    if estimator == 'auto':
        estimator = 'exact' if config.m <= config.exact_threshold else 'monte-carlo'
    if estimator == 'exact':
        return shapley_exact(game, config.m, config.exact_threshold, workers)
    return shapley_monte_carlo(game, config.m, config.permutations, seed, workers)


def top_k_regions(
    saliency: SaliencyMap,
    k: int,
    region_partition: RegionPartition,
    strategy: SelectionStrategy = 'top',
    seed: int = 0,
) -> Tuple[List[int], np.ndarray]:
    """Choose ``k`` regions to attack and the mask of their points.

    Args:
        saliency (SaliencyMap): Ranked region values.
        k (int): Number of regions, ``1 <= k <= m``.
        region_partition (RegionPartition): Partition the saliency was computed on.
        strategy (SelectionStrategy): ``top`` takes the highest values, ``bottom``
            the lowest, ``random`` a seeded uniform draw.
        seed (int): Seed for the ``random`` strategy.

    Returns:
        Tuple[List[int], np.ndarray]: Region indices and the per-point boolean mask.
    """
    if not 1 <= k <= saliency.m:
        raise ValueError(f'k must satisfy 1 <= k <= m={saliency.m}, got {k}.')
    if region_partition.m != saliency.m:
        raise ValueError('Saliency map and partition disagree on the region count.')
    if strategy == 'top':
        regions = saliency.rank[:k]
    elif strategy == 'bottom':
        regions = saliency.rank[::-1][:k]
    elif strategy == 'random':
        regions = np.random.default_rng(seed).choice(saliency.m, size=k, replace=False)
    else:
        raise ValueError(f'Unknown selection strategy {strategy!r}.')
    regions = [int(r) for r in regions]
    return regions, region_partition.mask(regions)


def top_k_overlap(first: SaliencyMap, second: SaliencyMap, k: int) -> int:
    """Number of regions shared by the top-k sets of two maps."""
    return len(set(first.rank[:k].tolist()) & set(second.rank[:k].tolist()))


def saliency_payload(saliency: SaliencyMap) -> dict:
    """JSON-ready description of a saliency map."""
    position = np.empty(saliency.m, dtype=np.int64)
    position[saliency.rank] = np.arange(saliency.m)
    errors: Iterable[Optional[float]] = (
        saliency.standard_errors.tolist()
        if saliency.standard_errors is not None
        else [None] * saliency.m
    )
    return {
        'estimator': saliency.estimator,
        'permutations': saliency.permutations,
        'full_value': saliency.full_value,
        'empty_value': saliency.empty_value,
        'regions': [
            {'region': i, 'phi': float(phi), 'standard_error': error, 'rank': int(position[i])}
            for i, (phi, error) in enumerate(zip(saliency.phi, errors))
        ],
    }


def save_saliency(saliency: SaliencyMap, path: str | Path) -> None:
    """Write a saliency map as sorted-key JSON."""
    Path(path).write_text(json.dumps(saliency_payload(saliency), indent=2, sort_keys=True) + '\n')


def cloud_saliency(
    model: PointClassifier,
    cloud: PointCloud,
    region_partition: RegionPartition,
    label: int,
    config: ShapleyConfig,
    seed: int = 0,
    workers: int = 1,
) -> SaliencyMap:
    """Saliency of every region of one cloud for its true-class readout.

    Args:
        model (PointClassifier): Victim model, only read.
        cloud (PointCloud): Cloud whose regions are scored.
        region_partition (RegionPartition): Partition with ``config.m`` regions.
        label (int): True class of the cloud.
        config (ShapleyConfig): Estimator and game settings.
        seed (int): Permutation seed for the Monte Carlo estimator.
        workers (int): Threads evaluating coalitions.

    Returns:
        SaliencyMap: Values and ranking of the regions.
    """
    if region_partition.m != config.m:
        raise ValueError(f'Partition has {region_partition.m} regions, config expects {config.m}.')
    game = RegionGame(model, cloud, region_partition, label, config.occlusion, config.readout)
    saliency = compute_saliency(game, config, seed=seed, workers=workers)
    logger.debug(
        f'{cloud.name}: {game.evaluations()} coalitions evaluated, '
        f'top regions {saliency.rank[:5].tolist()}'
    )
    return saliency
