"""Helper Functions for the adaptive region-masked adversarial attack.

The attack optimises a per-point 3-vector ``offset``. Each iteration the input
gradient of the objective fixes a modulation ``epsilon * ratio * sign(grad) * mask``
and the adversarial cloud is rebuilt from the original one as
``x + modulation * offset``. An outer bisection tunes the weight of the distance
penalty.
"""

import math
import numpy as np
import torch
from dataclasses import dataclass, field
from loguru import logger
from pointcloud_region_attack.helpers.classifier import (
    DTYPE,
    LogitsRecord,
    PointClassifier,
    ScalarObjective,
    points_tensor,
)
from pointcloud_region_attack.helpers.geometry import PointCloud
from pointcloud_region_attack.helpers.metrics import (
    chamfer_distance,
    distance_terms,
    hausdorff_distance,
    points_modified,
)
from pointcloud_region_attack.helpers.regions import RegionPartition
from pointcloud_region_attack.helpers.shapley import (
    SaliencyMap,
    SelectionStrategy,
    top_k_regions,
)
from pydantic import BaseModel, Field, model_validator
from typing import List, Literal, Optional, Sequence, TypeVar


RatioMode = Literal['per-point', 'global', 'uniform']
ArrayLike = TypeVar('ArrayLike', np.ndarray, torch.Tensor)


class MisclassifiedInputError(ValueError):
    """Raised when the model already gets the benign cloud wrong."""


class AttackConfig(BaseModel):
    """Hyperparameters of one attack run."""

    epsilon: float = Field(default=0.6, ge=0, description='Perturbation scale')
    lambda2: float = Field(default=0.15, ge=0, description='Weight of the modified-point count')
    k: int = Field(default=5, ge=1, description='Regions attacked')
    m: int = Field(default=32, ge=1, description='Region count')
    iterations: int = Field(default=200, ge=1)
    learning_rate: float = Field(default=0.01, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    search_rounds: int = Field(default=6, ge=1)
    lambda1_min: float = Field(default=0.01, gt=0)
    lambda1_max: float = Field(default=100.0, gt=0)
    lambda1_initial: float = Field(default=1.0, gt=0)
    tau: float = Field(default=1e-4, gt=0)
    seed: int = 0
    ratio_mode: RatioMode = 'per-point'
    region_selection: SelectionStrategy = 'top'

    @model_validator(mode='after')
    def _check_ranges(self) -> 'AttackConfig':
        if self.k > self.m:
            raise ValueError(f'k={self.k} must not exceed m={self.m}.')
        if not self.lambda1_min < self.lambda1_max:
            raise ValueError(
                f'Empty lambda1 range [{self.lambda1_min}, {self.lambda1_max}].'
            )
        if not self.lambda1_min <= self.lambda1_initial <= self.lambda1_max:
            raise ValueError(f'lambda1_initial={self.lambda1_initial} lies outside its range.')
        return self


@dataclass
class ObjectiveTerms:
    """The components of the region objective for one adversarial cloud."""

    loss: float
    chamfer: float
    hausdorff: float
    points_modified: int
    total: float

    @property
    def distance(self) -> float:
        """Chamfer plus hausdorff."""
        return self.chamfer + self.hausdorff


@dataclass
class RoundLog:
    """Outcome of one lambda1 round."""

    lambda1: float
    success: bool
    best_distance: Optional[float] = None


@dataclass
class AttackResult:
    """Adversarial cloud and its metrics.

    ``adversarial`` equals ``original + modulation * offsets`` bit for bit.
    """

    adversarial: PointCloud
    success: bool
    label: int
    adversarial_class: int
    chamfer: float
    hausdorff: float
    points_modified: int
    masked_points: int
    lambda1: float
    attacked_regions: List[int]
    offsets: np.ndarray
    modulation: np.ndarray
    objective_trace: List[float] = field(default_factory=list)
    rounds: List[RoundLog] = field(default_factory=list)

    @property
    def distance(self) -> float:
        """Chamfer plus hausdorff."""
        return self.chamfer + self.hausdorff


def margin_loss(logits: torch.Tensor, label: int) -> torch.Tensor:
    """Differentiable ``max(f_y - max_{c != y} f_c, 0)``."""
    others = torch.cat([logits[:label], logits[label + 1 :]])
    return torch.clamp(logits[label] - others.max(), min=0.0)


def adversarial_loss(logits: LogitsRecord | Sequence[float] | np.ndarray, label: int) -> float:
    """Margin of the true class over the best other class, floored at zero.

    Args:
        logits (LogitsRecord | array-like): Logits of one cloud, at least two classes.
        label (int): True class index.

    Returns:
        float: Zero exactly when some other class scores at least as high.
    """
    values = np.asarray(logits.logits if isinstance(logits, LogitsRecord) else logits, float)
    if values.shape[0] < 2:
        raise ValueError('The margin loss needs at least two classes.')
    return float(margin_loss(torch.tensor(values, dtype=DTYPE), label))


def _objective_tensor(
    original: torch.Tensor,
    adversarial: torch.Tensor,
    logits: torch.Tensor,
    label: int,
    lambda1: float,
) -> torch.Tensor:
    chamfer, hausdorff = distance_terms(original, adversarial)
    return margin_loss(logits, label) + lambda1 * (chamfer + hausdorff)


def region_objective(
    model: PointClassifier,
    original: PointCloud,
    adversarial: PointCloud,
    label: int,
    lambda1: float,
    lambda2: float,
    tau: float,
) -> ObjectiveTerms:
    """Evaluate ``l(x') + lambda1 * D(x, x') + lambda2 * P(x, x')``.

    ``D`` is chamfer plus hausdorff and ``P`` counts points displaced beyond ``tau``.
    """
    if original.n != adversarial.n:
        raise ValueError(f'Clouds differ in size: {original.n} vs {adversarial.n}.')
    with torch.no_grad():
        loss = float(margin_loss(model(points_tensor(adversarial)), label))
    chamfer = chamfer_distance(original, adversarial)
    hausdorff = hausdorff_distance(original, adversarial)
    moved = points_modified(original.points, adversarial.points, tau)
    total = loss + lambda1 * (chamfer + hausdorff) + lambda2 * moved
    return ObjectiveTerms(loss, chamfer, hausdorff, moved, total)


def region_objective_function(original: PointCloud, label: int, lambda1: float) -> ScalarObjective:
    """The differentiable part of the region objective, for ``input_gradient``."""
    reference = points_tensor(original)

    def objective(points: torch.Tensor, logits: torch.Tensor) -> torch.Tensor:
        return _objective_tensor(reference, points, logits, label, lambda1)

    return objective


def _as_tensor(value: np.ndarray | torch.Tensor) -> torch.Tensor:
    return torch.as_tensor(np.asarray(value) if not torch.is_tensor(value) else value, dtype=DTYPE)


def _like(result: torch.Tensor, reference: ArrayLike) -> ArrayLike:
    return result if torch.is_tensor(reference) else result.numpy()


def _ratio(gradient: torch.Tensor, mode: RatioMode, mask: Optional[torch.Tensor]) -> torch.Tensor:
    magnitude = gradient.abs()
    active = magnitude.sum(dim=1, keepdim=True) > 0
    if mode == 'per-point':
        totals = magnitude.sum(dim=1, keepdim=True)
        return torch.where(active, magnitude / torch.where(active, totals, 1.0), 0.0)
    if mode == 'global':
        selected = magnitude if mask is None else magnitude[mask]
        per_axis = selected.sum(dim=0)
        total = per_axis.sum()
        if total == 0:
            return torch.zeros_like(gradient)
        return torch.where(active, (per_axis / total).expand_as(gradient), 0.0)
    if mode == 'uniform':
        return torch.where(active, torch.full_like(gradient, 1.0 / 3.0), 0.0)
    raise ValueError(f'Unknown ratio mode {mode!r}.')


def adaptive_ratio(
    gradient: ArrayLike, mode: RatioMode = 'per-point', mask: Optional[np.ndarray] = None
) -> ArrayLike:
    """Share of the perturbation budget given to each axis of each point.

    Args:
        gradient (ArrayLike): ``(n, 3)`` input gradient.
        mode (RatioMode): ``per-point`` normalises ``|grad|`` per point,
            ``global`` aggregates ``|grad|`` per axis over the masked points and
            ``uniform`` gives every axis one third.
        mask (np.ndarray): Points that ``global`` aggregates over. Defaults to all.

    Returns:
        ArrayLike: Non-negative ratios, rows summing to 1; rows of points with an
        exactly zero gradient are zero.
    """
    tensor = _as_tensor(gradient)
    mask_tensor = None if mask is None else torch.as_tensor(np.asarray(mask, dtype=bool))
    return _like(_ratio(tensor, mode, mask_tensor), gradient)


def _modulation(
    gradient: torch.Tensor, ratio: torch.Tensor, mask: torch.Tensor, epsilon: float
) -> torch.Tensor:
    return epsilon * ratio * torch.sign(gradient) * mask[:, None].to(DTYPE)


def apply_update(
    cloud: PointCloud,
    offset: np.ndarray,
    gradient: np.ndarray,
    ratio: np.ndarray,
    mask: np.ndarray,
    epsilon: float,
) -> PointCloud:
    """Rebuild the adversarial cloud from the original one.

    Masked points move by ``epsilon * ratio * sign(grad) * offset`` (elementwise);
    the others are returned unchanged.
    """
    n = cloud.n
    for name, array, shape in (
        ('offset', offset, (n, 3)),
        ('gradient', gradient, (n, 3)),
        ('ratio', ratio, (n, 3)),
        ('mask', mask, (n,)),
    ):
        if np.shape(array) != shape:
            raise ValueError(f'{name} has shape {np.shape(array)}, expected {shape}.')
    modulation = _modulation(
        _as_tensor(gradient), _as_tensor(ratio), torch.as_tensor(np.asarray(mask, bool)), epsilon
    )
    adversarial = points_tensor(cloud) + modulation * _as_tensor(offset)
    return cloud.with_points(adversarial.numpy())


@dataclass
class _Candidate:
    points: torch.Tensor
    offset: torch.Tensor
    modulation: torch.Tensor
    lambda1: float
    predicted: int
    distance: float
    moved: int


def _better(candidate: _Candidate, best: Optional[_Candidate]) -> bool:
    if best is None:
        return True
    return (candidate.distance, candidate.moved) < (best.distance, best.moved)


class _AttackRun:
    """State of one attack on one cloud: the offset carried across lambda1 rounds."""

    def __init__(
        self,
        model: PointClassifier,
        cloud: PointCloud,
        label: int,
        mask: np.ndarray,
        config: AttackConfig,
    ):
        self.model = model
        self.label = label
        self.config = config
        self.original = points_tensor(cloud)
        self.mask = torch.as_tensor(np.asarray(mask, dtype=bool))
        self.offset = torch.zeros_like(self.original)
        self.modulation = torch.zeros_like(self.original)
        self.best: Optional[_Candidate] = None
        self.last: Optional[_Candidate] = None
        self.trace: List[float] = []

    def _current(self) -> torch.Tensor:
        return self.original + self.modulation * self.offset

    def _record(self, points: torch.Tensor, logits: torch.Tensor, lambda1: float) -> bool:
        """Track the candidate at ``points``; return whether it fools the model."""
        predicted = int(torch.argmax(logits.detach()))
        with torch.no_grad():
            chamfer, hausdorff = distance_terms(self.original, points)
        moved = int(
            torch.count_nonzero(torch.linalg.norm(points - self.original, dim=1) > self.config.tau)
        )
        candidate = _Candidate(
            points=points.detach().clone(),
            offset=self.offset.detach().clone(),
            modulation=self.modulation.clone(),
            lambda1=lambda1,
            predicted=predicted,
            distance=float(chamfer + hausdorff),
            moved=moved,
        )
        self.last = candidate
        success = predicted != self.label
        if success and _better(candidate, self.best):
            self.best = candidate
        return success

    def run_round(self, lambda1: float) -> bool:
        """Run the inner optimisation at one lambda1; warm-starts from the current offset.

        Only iterates produced under this lambda1 count towards its success. The
        inherited start was already recorded at the end of the previous round.
        """
        config = self.config
        offset = self.offset.detach().clone().requires_grad_(True)
        self.offset = offset
        optimizer = torch.optim.Adam(
            [offset], lr=config.learning_rate, betas=(config.beta1, config.beta2)
        )
        success = False
        for step in range(config.iterations):
            points = self._current().detach().requires_grad_(True)
            logits = self.model(points)
            value = _objective_tensor(self.original, points, logits, self.label, lambda1)
            if step:
                success |= self._record(points, logits, lambda1)
            (gradient,) = torch.autograd.grad(value, points)
            self.trace.append(value.item())
            ratio = _ratio(gradient, config.ratio_mode, self.mask)
            modulation = _modulation(gradient, ratio, self.mask, config.epsilon)
            optimizer.zero_grad()
            offset.grad = gradient * modulation
            optimizer.step()
            self.modulation = modulation
        points = self._current().detach()
        with torch.no_grad():
            logits = self.model(points)
        success |= self._record(points, logits, lambda1)
        return success


def _check_correct(model: PointClassifier, cloud: PointCloud, label: int) -> None:
    if cloud.n < 1:
        raise ValueError('Cannot attack an empty cloud.')
    if not 0 <= label < model.num_classes:
        raise ValueError(f'Label {label} is outside [0, {model.num_classes}).')
    with torch.no_grad():
        predicted = int(torch.argmax(model(points_tensor(cloud))))
    if predicted != label:
        raise MisclassifiedInputError(
            f'{cloud.name}: model predicts {predicted} for true class {label}; nothing to attack.'
        )


def _result(
    cloud: PointCloud,
    label: int,
    run: _AttackRun,
    candidate: _Candidate,
    regions: List[int],
    rounds: List[RoundLog],
) -> AttackResult:
    adversarial = cloud.with_points(candidate.points.numpy())
    return AttackResult(
        adversarial=adversarial,
        success=candidate.predicted != label,
        label=label,
        adversarial_class=candidate.predicted,
        chamfer=chamfer_distance(cloud, adversarial),
        hausdorff=hausdorff_distance(cloud, adversarial),
        points_modified=points_modified(cloud.points, adversarial.points, run.config.tau),
        masked_points=int(run.mask.sum()),
        lambda1=candidate.lambda1,
        attacked_regions=regions,
        offsets=candidate.offset.numpy(),
        modulation=candidate.modulation.numpy(),
        objective_trace=run.trace,
        rounds=rounds,
    )


def masked_attack(
    model: PointClassifier,
    cloud: PointCloud,
    label: int,
    mask: np.ndarray,
    config: AttackConfig,
    attacked_regions: Optional[List[int]] = None,
) -> AttackResult:
    """Run the lambda1 search around the inner optimisation on the masked points.

    Args:
        model (PointClassifier): Victim model, only read.
        cloud (PointCloud): Correctly classified benign cloud.
        label (int): Its true class.
        mask (np.ndarray): Boolean per-point mask of the points allowed to move.
        config (AttackConfig): Attack hyperparameters.
        attacked_regions (List[int]): Regions behind ``mask``, for reporting.

    Returns:
        AttackResult: The successful candidate with the smallest distance, or the
        final candidate flagged unsuccessful.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (cloud.n,):
        raise ValueError(f'Mask has shape {mask.shape}, expected ({cloud.n},).')
    _check_correct(model, cloud, label)

    run = _AttackRun(model, cloud, label, mask, config)
    lower, upper = config.lambda1_min, config.lambda1_max
    lambda1 = config.lambda1_initial
    rounds: List[RoundLog] = []
    for index in range(config.search_rounds):
        success = run.run_round(lambda1)
        best_distance = run.best.distance if success and run.best is not None else None
        rounds.append(RoundLog(lambda1=lambda1, success=success, best_distance=best_distance))
        logger.debug(
            f'{cloud.name}: round {index + 1}/{config.search_rounds} lambda1={lambda1:.4g} '
            f'success={success}'
        )
        if success:
            lower = lambda1
        else:
            upper = lambda1
        lambda1 = math.sqrt(lower * upper)

    candidate = run.best if run.best is not None else run.last
    assert candidate is not None
    result = _result(cloud, label, run, candidate, attacked_regions or [], rounds)
    logger.info(
        f'{cloud.name}: success={result.success} class {label}->{result.adversarial_class} '
        f'D={result.distance:.4g} moved={result.points_modified}/{result.masked_points}'
    )
    return result


def adaptive_local_attack(
    model: PointClassifier,
    cloud: PointCloud,
    label: int,
    saliency: SaliencyMap,
    region_partition: RegionPartition,
    config: AttackConfig,
) -> AttackResult:
    """Attack only the ``k`` regions chosen from the saliency map.

    Args:
        model (PointClassifier): Victim model.
        cloud (PointCloud): Correctly classified benign cloud.
        label (int): Its true class.
        saliency (SaliencyMap): Region values computed on ``region_partition``.
        region_partition (RegionPartition): Partition of ``cloud`` into ``config.m`` regions.
        config (AttackConfig): Attack hyperparameters; ``region_selection`` picks
            the regions.

    Returns:
        AttackResult: See ``masked_attack``.
    """
    if region_partition.m != config.m:
        raise ValueError(f'Partition has {region_partition.m} regions, config expects {config.m}.')
    regions, mask = top_k_regions(
        saliency, config.k, region_partition, config.region_selection, config.seed
    )
    return masked_attack(model, cloud, label, mask, config, regions)


def global_baseline_attack(
    model: PointClassifier, cloud: PointCloud, label: int, config: AttackConfig
) -> AttackResult:
    """The same optimisation with every point allowed to move."""
    return masked_attack(
        model, cloud, label, np.ones(cloud.n, dtype=bool), config, list(range(config.m))
    )
