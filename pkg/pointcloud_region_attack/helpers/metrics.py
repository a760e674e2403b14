"""Helper Functions for point set distances.

The numpy versions use a k-d tree and serve reporting; the torch versions are
differentiable and feed the attack objective.
"""

import numpy as np
import torch
from pointcloud_region_attack.helpers.geometry import PointCloud
from scipy.spatial import cKDTree
from typing import Tuple


def _nonempty(first: PointCloud, second: PointCloud) -> None:
    if first.n == 0 or second.n == 0:
        raise ValueError('Distances are undefined for an empty cloud.')


def _directed_nearest(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Euclidean distance from every source point to its nearest target point."""
    distances, _ = cKDTree(target).query(source, k=1)
    return np.asarray(distances, dtype=np.float64)


def chamfer_distance(first: PointCloud, second: PointCloud) -> float:
    """Max of the two direction-averaged squared nearest-neighbour distances.

    Args:
        first (PointCloud): Non-empty cloud.
        second (PointCloud): Non-empty cloud, possibly of another size.

    Returns:
        float: Symmetric, non-negative distance; 0 for equal point sets.
    """
    _nonempty(first, second)
    forward = np.mean(_directed_nearest(first.points, second.points) ** 2)
    backward = np.mean(_directed_nearest(second.points, first.points) ** 2)
    return float(max(forward, backward))


def hausdorff_distance(first: PointCloud, second: PointCloud) -> float:
    """Largest nearest-neighbour distance over both directions."""
    _nonempty(first, second)
    forward = np.max(_directed_nearest(first.points, second.points))
    backward = np.max(_directed_nearest(second.points, first.points))
    return float(max(forward, backward))


def _squared_pairwise(first: torch.Tensor, second: torch.Tensor) -> torch.Tensor:
    # explicit differences; torch.cdist's matmul path loses precision near zero
    return ((first[:, None, :] - second[None, :, :]) ** 2).sum(dim=-1)


def _safe_sqrt(value: torch.Tensor) -> torch.Tensor:
    tiny = torch.finfo(value.dtype).tiny
    return torch.where(value > 0, torch.sqrt(value.clamp_min(tiny)), torch.zeros_like(value))


def distance_terms(
    original: torch.Tensor, adversarial: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Differentiable chamfer and hausdorff distances between two ``(n, 3)`` tensors.

    Gradients flow into both arguments. The hausdorff gradient is zero where the
    sets coincide.
    """
    squared = _squared_pairwise(original, adversarial)
    to_adversarial = squared.min(dim=1).values
    to_original = squared.min(dim=0).values
    chamfer = torch.maximum(to_adversarial.mean(), to_original.mean())
    hausdorff = _safe_sqrt(torch.maximum(to_adversarial.max(), to_original.max()))
    return chamfer, hausdorff


def points_modified(original: np.ndarray, adversarial: np.ndarray, tau: float) -> int:
    """Number of points displaced by more than ``tau`` in Euclidean norm."""
    if original.shape != adversarial.shape:
        raise ValueError(f'Shape mismatch: {original.shape} vs {adversarial.shape}.')
    return int(np.count_nonzero(np.linalg.norm(adversarial - original, axis=1) > tau))
