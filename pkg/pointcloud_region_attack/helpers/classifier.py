"""Helper Functions for the permutation-invariant point cloud classifier.

The victim is a shared per-point MLP, a max pool over points and a dense head.
Everything runs in float64 on the CPU so that input gradients can be checked
against finite differences.
"""

import numpy as np
import struct
import torch
import torch.nn.functional as F
from dataclasses import dataclass
from loguru import logger
from pathlib import Path
from pointcloud_region_attack.helpers.geometry import DatasetManifest, PointCloud, load_cloud
from pointcloud_region_attack.helpers.utils import file_sha256
from pydantic import BaseModel, Field, model_validator
from torch import nn
from typing import Callable, List, Optional, Sequence, Tuple


DTYPE = torch.float64
MODEL_MAGIC = b'PMDL'
MODEL_VERSION = 1

ScalarObjective = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


class ModelFormatError(ValueError):
    """Raised when a model file is corrupt, truncated or of another architecture."""


class ClassifierArchitecture(BaseModel):
    """Layer widths of the classifier; the head ends in ``num_classes`` logits."""

    point_widths: Tuple[int, ...] = (3, 64, 128, 256)
    head_widths: Tuple[int, ...] = (256, 128)
    num_classes: int = Field(default=8, ge=2)

    @model_validator(mode='after')
    def _check_widths(self) -> 'ClassifierArchitecture':
        if len(self.point_widths) < 2 or self.point_widths[0] != 3:
            raise ValueError('point_widths must start at 3 and contain at least one layer.')
        if not self.head_widths or self.head_widths[0] != self.point_widths[-1]:
            raise ValueError('head_widths must start at the pooled feature width.')
        if min(self.point_widths + self.head_widths) < 1:
            raise ValueError('Layer widths must be positive.')
        return self


class PointClassifier(nn.Module):
    """Shared per-point MLP, first-index max pool and a dense classification head."""

    def __init__(self, architecture: ClassifierArchitecture, seed: int = 0):
        """Create the layers and initialise them uniformly, scaled by fan-in."""
        super().__init__()
        self.architecture = architecture
        widths = architecture.point_widths
        self.point_layers = nn.ModuleList(
            nn.Linear(a, b, dtype=DTYPE) for a, b in zip(widths[:-1], widths[1:])
        )
        head = architecture.head_widths + (architecture.num_classes,)
        self.head_layers = nn.ModuleList(
            nn.Linear(a, b, dtype=DTYPE) for a, b in zip(head[:-1], head[1:])
        )
        self.reset_parameters(seed)

    @property
    def num_classes(self) -> int:
        """Number of output logits."""
        return self.architecture.num_classes

    @torch.no_grad()
    def reset_parameters(self, seed: int) -> None:
        """Draw every weight and bias from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        generator = torch.Generator().manual_seed(seed)
        for layer in list(self.point_layers) + list(self.head_layers):
            bound = 1.0 / float(np.sqrt(layer.in_features))
            for parameter in (layer.weight, layer.bias):
                sample = torch.rand(parameter.shape, generator=generator, dtype=DTYPE)
                parameter.copy_((2.0 * sample - 1.0) * bound)

    def point_features(self, points: torch.Tensor) -> torch.Tensor:
        """Map ``(..., n, 3)`` coordinates to ``(..., n, F)`` per-point features."""
        h = points
        for layer in self.point_layers:
            h = F.relu(layer(h))
        return h

    @staticmethod
    def max_pool(features: torch.Tensor) -> torch.Tensor:
        """Max over the point axis; ties go to the lowest point index."""
        winners = features.argmax(dim=-2, keepdim=True)
        return features.gather(-2, winners).squeeze(-2)

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        """Return logits for ``(n, 3)`` or batched ``(B, n, 3)`` inputs."""
        if points.shape[-2] == 0:
            raise ValueError('The classifier needs at least one point.')
        h = self.max_pool(self.point_features(points))
        for layer in self.head_layers[:-1]:
            h = F.relu(layer(h))
        return self.head_layers[-1](h)


@dataclass(frozen=True)
class LogitsRecord:
    """Logits of one cloud with their softmax and arg-max class."""

    logits: np.ndarray
    probabilities: np.ndarray
    predicted: int


def points_tensor(cloud: PointCloud) -> torch.Tensor:
    """Return a cloud's coordinates as a float64 tensor (a copy)."""
    return torch.tensor(cloud.points, dtype=DTYPE)


def logits_record(logits: torch.Tensor) -> LogitsRecord:
    """Wrap a 1-D logit tensor into a LogitsRecord."""
    values = logits.detach().cpu().numpy().astype(np.float64)
    probabilities = torch.softmax(logits.detach(), dim=-1).cpu().numpy()
    return LogitsRecord(values, probabilities, int(np.argmax(values)))


def forward(model: PointClassifier, cloud: PointCloud) -> LogitsRecord:
    """Evaluate the classifier on one cloud.

    Args:
        model (PointClassifier): The victim model; it is not modified.
        cloud (PointCloud): Input cloud with at least one point.

    Returns:
        LogitsRecord: Logits, probabilities and predicted class.
    """
    if cloud.n < 1:
        raise ValueError('forward needs a cloud with at least one point.')
    with torch.no_grad():
        return logits_record(model(points_tensor(cloud)))


def logit_objective(class_index: int, scale: float = 1.0) -> ScalarObjective:
    """Objective returning ``scale`` times one class logit."""

    def objective(points: torch.Tensor, logits: torch.Tensor) -> torch.Tensor:
        return scale * logits[class_index]

    return objective


def input_gradient(
    model: PointClassifier, cloud: PointCloud, objective: ScalarObjective
) -> np.ndarray:
    """Gradient of a scalar objective of the logits with respect to point coordinates.

    Args:
        model (PointClassifier): The victim model.
        cloud (PointCloud): Point at which the gradient is taken.
        objective (ScalarObjective): Maps ``(points, logits)`` to a scalar tensor.

    Returns:
        np.ndarray: ``(n, 3)`` gradient, same shape as the cloud.
    """
    points = points_tensor(cloud).requires_grad_(True)
    value = objective(points, model(points))
    (grad,) = torch.autograd.grad(value, points, allow_unused=True)
    if grad is None:
        return np.zeros_like(cloud.points)
    return grad.detach().numpy()


class TrainConfig(BaseModel):
    """Hyperparameters of victim training."""

    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    seed: int = 0
    augment_rotation: bool = False
    augment_jitter: float = Field(default=0.0, ge=0)


class EpochStats(BaseModel):
    """Loss and accuracies after one training epoch."""

    epoch: int
    loss: float
    train_accuracy: float
    test_accuracy: float


class TrainingReport(BaseModel):
    """Per-epoch history of a training run."""

    epochs: List[EpochStats] = Field(default_factory=list)

    @property
    def final_test_accuracy(self) -> float:
        """Test accuracy after the last epoch."""
        return self.epochs[-1].test_accuracy if self.epochs else 0.0


def _stack(clouds: Sequence[PointCloud]) -> Tuple[torch.Tensor, torch.Tensor]:
    sizes = {cloud.n for cloud in clouds}
    if len(sizes) != 1:
        raise ValueError(f'Training clouds must share one point count, found {sorted(sizes)}.')
    points = torch.tensor(np.stack([cloud.points for cloud in clouds]), dtype=DTYPE)
    labels = torch.tensor([cloud.label for cloud in clouds], dtype=torch.long)
    return points, labels


def evaluate_accuracy(
    model: PointClassifier, clouds: Sequence[PointCloud], batch_size: int = 64
) -> float:
    """Fraction of labeled clouds the model classifies correctly."""
    if not clouds:
        raise ValueError('Cannot evaluate accuracy on an empty set of clouds.')
    correct = 0
    with torch.no_grad():
        for start in range(0, len(clouds), batch_size):
            points, labels = _stack(clouds[start : start + batch_size])
            correct += int((model(points).argmax(dim=-1) == labels).sum())
    return correct / len(clouds)


def _augment(points: torch.Tensor, config: TrainConfig, rng: np.random.Generator) -> torch.Tensor:
    if config.augment_rotation:
        angles = rng.uniform(0.0, 2.0 * np.pi, size=points.shape[0])
        cos, sin = np.cos(angles), np.sin(angles)
        rotation = np.zeros((points.shape[0], 3, 3))
        rotation[:, 0, 0], rotation[:, 0, 1] = cos, -sin
        rotation[:, 1, 0], rotation[:, 1, 1] = sin, cos
        rotation[:, 2, 2] = 1.0
        points = points @ torch.tensor(rotation, dtype=DTYPE).transpose(1, 2)
    if config.augment_jitter > 0:
        noise = rng.normal(0.0, config.augment_jitter, size=tuple(points.shape))
        points = points + torch.tensor(noise, dtype=DTYPE)
    return points


def load_split(manifest: DatasetManifest, split: str) -> List[PointCloud]:
    """Load every cloud of a manifest split, labels taken from the manifest."""
    clouds = []
    for entry in manifest.split(split):
        cloud = load_cloud(manifest.resolve(entry))
        clouds.append(PointCloud(cloud.points, label=entry.label, name=cloud.name))
    return clouds


def train(
    model: PointClassifier, manifest: DatasetManifest, config: TrainConfig
) -> Tuple[PointClassifier, TrainingReport]:
    """Train the classifier in place with Adam and cross-entropy.

    Args:
        model (PointClassifier): Freshly initialised model; re-seeded from ``config.seed``.
        manifest (DatasetManifest): Dataset with non-empty train and test splits.
        config (TrainConfig): Training hyperparameters.

    Returns:
        Tuple[PointClassifier, TrainingReport]: The trained model and per-epoch stats.
    """
    if len(manifest.classes) < 2:
        raise ValueError(f'Training needs at least 2 classes, got {len(manifest.classes)}.')
    if len(manifest.classes) != model.num_classes:
        raise ValueError(
            f'Manifest declares {len(manifest.classes)} classes, model has {model.num_classes}.'
        )
    train_clouds = load_split(manifest, 'train')
    test_clouds = load_split(manifest, 'test')
    if not train_clouds or not test_clouds:
        raise ValueError('Both train and test splits must be non-empty.')

    logger.info(
        f'Training on {len(train_clouds)} clouds ({len(test_clouds)} test) for '
        f'{config.epochs} epochs, batch {config.batch_size}, lr {config.learning_rate}'
    )
    model.reset_parameters(config.seed)
    rng = np.random.default_rng(config.seed)
    points, labels = _stack(train_clouds)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    report = TrainingReport()

    for epoch in range(1, config.epochs + 1):
        model.train()
        order = rng.permutation(len(train_clouds))
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = torch.as_tensor(order[start : start + config.batch_size])
            inputs = _augment(points[batch], config, rng)
            loss = F.cross_entropy(model(inputs), labels[batch])
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f'Training diverged at epoch {epoch}, batch starting {start}: '
                    f'loss={loss.item()}'
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(batch)
        model.eval()
        stats = EpochStats(
            epoch=epoch,
            loss=total_loss / len(order),
            train_accuracy=evaluate_accuracy(model, train_clouds),
            test_accuracy=evaluate_accuracy(model, test_clouds),
        )
        report.epochs.append(stats)
        logger.info(
            f'Epoch {epoch}: loss {stats.loss:.4f}, train {stats.train_accuracy:.3f}, '
            f'test {stats.test_accuracy:.3f}'
        )
    return model, report


def _pack_widths(widths: Sequence[int]) -> bytes:
    return struct.pack(f'<I{len(widths)}I', len(widths), *widths)


def save_model(model: PointClassifier, path: str | Path) -> None:
    """Write the model as "PMDL" header, architecture descriptor and float64 weights."""
    arch = model.architecture
    payload = struct.pack('<4sB', MODEL_MAGIC, MODEL_VERSION)
    payload += _pack_widths(arch.point_widths) + _pack_widths(arch.head_widths)
    payload += struct.pack('<I', arch.num_classes)
    for tensor in model.state_dict().values():
        payload += tensor.detach().numpy().astype('<f8').tobytes()
    Path(path).write_bytes(payload)
    logger.info(f'Saved model ({arch.num_classes} classes) to {path}')


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data, self.path, self.offset = data, path, 0

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise ModelFormatError(f'{self.path}: truncated at byte {self.offset}')
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def array(self, count: int) -> np.ndarray:
        size = 8 * count
        if self.offset + size > len(self.data):
            raise ModelFormatError(f'{self.path}: truncated at byte {self.offset}')
        values = np.frombuffer(self.data, dtype='<f8', count=count, offset=self.offset)
        self.offset += size
        return values.astype(np.float64)

    def widths(self) -> Tuple[int, ...]:
        (count,) = self.take('<I')
        if count > 64:
            raise ModelFormatError(f'{self.path}: implausible layer count {count}')
        return tuple(self.take(f'<{count}I'))


def load_model(
    path: str | Path, expected: Optional[ClassifierArchitecture] = None
) -> PointClassifier:
    """Read a model file written by ``save_model``.

    Args:
        path (str | Path): Model file.
        expected (ClassifierArchitecture, optional): Architecture the caller requires;
            a different descriptor in the file is an error.

    Returns:
        PointClassifier: The restored model in eval mode.
    """
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    magic, version = reader.take('<4sB')
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f'{path}: bad magic {magic!r}')
    if version != MODEL_VERSION:
        raise ModelFormatError(f'{path}: unsupported model version {version}')
    point_widths, head_widths = reader.widths(), reader.widths()
    (num_classes,) = reader.take('<I')
    try:
        arch = ClassifierArchitecture(
            point_widths=point_widths, head_widths=head_widths, num_classes=num_classes
        )
    except ValueError as e:
        raise ModelFormatError(f'{path}: invalid architecture descriptor: {e}')
    if expected is not None and arch != expected:
        raise ModelFormatError(f'{path}: architecture {arch} does not match expected {expected}')

    model = PointClassifier(arch)
    state = model.state_dict()
    for name, tensor in state.items():
        values = reader.array(tensor.numel())
        state[name] = torch.from_numpy(values).reshape(tensor.shape)
    if reader.offset != len(reader.data):
        raise ModelFormatError(f'{path}: {len(reader.data) - reader.offset} trailing bytes')
    model.load_state_dict(state)
    model.eval()
    return model


def model_hash(path: str | Path) -> str:
    """Content hash identifying a victim model file."""
    return file_sha256(path)
