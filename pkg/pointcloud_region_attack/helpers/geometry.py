"""Helper Functions for loading, generating, normalizing and saving point clouds."""

import json
import numpy as np
import struct
from dataclasses import dataclass, replace
from loguru import logger
from pathlib import Path
from pydantic import BaseModel, Field, PrivateAttr, model_validator
from typing import List, Literal, Optional, Tuple


CloudFormat = Literal['xyz', 'off', 'pcad']

SHAPE_CLASSES: Tuple[str, ...] = (
    'sphere',
    'cube',
    'cylinder',
    'cone',
    'torus',
    'plane',
    'pyramid',
    'helix',
)

PCAD_MAGIC = b'PCAD'
PCAD_VERSION = 1
PCAD_FLAG_MAGIC = b'FLAG'
_PCAD_HEADER = struct.Struct('<4sBIi')

_SUFFIX_FORMATS = {'.xyz': 'xyz', '.txt': 'xyz', '.off': 'off', '.pcad': 'pcad'}


class PointCloudParseError(ValueError):
    """Raised when a point cloud or mesh file does not parse under its format."""

    def __init__(
        self,
        message: str,
        path: str | Path,
        line: Optional[int] = None,
        offset: Optional[int] = None,
    ):
        """Build the error, prefixing the location of the problem to the message."""
        location = str(path)
        if line is not None:
            location += f':{line}'
        if offset is not None:
            location += f' (byte {offset})'
        super().__init__(f'{location}: {message}')
        self.path = str(path)
        self.line = line
        self.offset = offset


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ordered set of 3D points with an optional class label.

    Coordinates are stored as a read-only ``(n, 3)`` float64 array. An empty
    cloud is representable (region subsets may be empty) but most operations
    require ``n >= 1``.
    """

    points: np.ndarray
    label: Optional[int] = None
    name: str = 'cloud'

    def __post_init__(self):
        """Validate the coordinate array and freeze a private copy."""
        points = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError(f'Point cloud {self.name!r} contains non-finite coordinates.')
        points.setflags(write=False)
        object.__setattr__(self, 'points', points)

    @property
    def n(self) -> int:
        """Number of points."""
        return int(self.points.shape[0])

    def with_points(self, points: np.ndarray) -> 'PointCloud':
        """Return a copy of this cloud carrying new coordinates."""
        return replace(self, points=points)

    def __eq__(self, other: object) -> bool:
        """Compare coordinates bit-exactly together with the label; names are ignored."""
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (
            self.label == other.label
            and self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
        )


class ManifestEntry(BaseModel):
    """A single cloud file referenced by a dataset manifest."""

    path: str = Field(description='Cloud file path, relative to the manifest directory')
    label: int = Field(ge=0, description='Class index')
    split: Literal['train', 'test']


class DatasetManifest(BaseModel):
    """Class names plus the list of cloud files forming a dataset."""

    classes: List[str]
    entries: List[ManifestEntry] = Field(default_factory=list)
    _root: Path = PrivateAttr(default_factory=Path)

    @model_validator(mode='after')
    def _check_labels(self) -> 'DatasetManifest':
        for entry in self.entries:
            if entry.label >= len(self.classes):
                raise ValueError(
                    f'Entry {entry.path!r} has class index {entry.label} but only '
                    f'{len(self.classes)} classes are declared.'
                )
        return self

    @property
    def root(self) -> Path:
        """Directory that entry paths are relative to."""
        return self._root

    def split(self, tag: Literal['train', 'test']) -> List[ManifestEntry]:
        """Return the entries of one split, in manifest order."""
        return [entry for entry in self.entries if entry.split == tag]

    def resolve(self, entry: ManifestEntry) -> Path:
        """Return the absolute location of an entry's cloud file."""
        return self._root / entry.path


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load a JSON dataset manifest and check that every referenced file exists.

    Args:
        path (str | Path): Location of the manifest file.

    Returns:
        DatasetManifest: The validated manifest, rooted at the manifest's directory.
    """
    path = Path(path)
    logger.info(f'Loading dataset manifest: {path}')
    manifest = DatasetManifest.model_validate_json(path.read_text())
    manifest._root = path.parent
    missing = [entry.path for entry in manifest.entries if not manifest.resolve(entry).exists()]
    if missing:
        raise FileNotFoundError(
            f'Manifest {path} references {len(missing)} missing file(s), first: {missing[0]}'
        )
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest as indented JSON with a trailing newline."""
    path = Path(path)
    path.write_text(json.dumps(manifest.model_dump(), indent=2) + '\n')
    manifest._root = path.parent


def _infer_format(path: Path, fmt: Optional[CloudFormat]) -> CloudFormat:
    if fmt is not None:
        return fmt
    try:
        return _SUFFIX_FORMATS[path.suffix.lower()]
    except KeyError:
        raise ValueError(f'Cannot infer point cloud format from suffix {path.suffix!r}.')


def _parse_floats(tokens: List[str], path: Path, line_no: int) -> List[float]:
    try:
        return [float(token) for token in tokens]
    except ValueError:
        raise PointCloudParseError(f'non-numeric token in {" ".join(tokens)!r}', path, line_no)


def _read_xyz(path: Path) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    rows: List[List[float]] = []
    flags: List[float] = []
    width = None
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        tokens = raw.split('#', 1)[0].split()
        if not tokens:
            continue
        if len(tokens) not in (3, 4):
            raise PointCloudParseError(
                f'expected 3 or 4 columns, found {len(tokens)}', path, line_no
            )
        if width is None:
            width = len(tokens)
        elif width != len(tokens):
            raise PointCloudParseError(
                f'column count changed from {width} to {len(tokens)}', path, line_no
            )
        values = _parse_floats(tokens, path, line_no)
        rows.append(values[:3])
        if width == 4:
            flags.append(values[3])
    if not rows:
        raise PointCloudParseError('file contains no points', path)
    return np.asarray(rows, dtype=np.float64), (
        np.asarray(flags, dtype=np.int64) if width == 4 else None
    )


def _read_off(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    lines = [
        (line_no, raw.split('#', 1)[0].strip())
        for line_no, raw in enumerate(path.read_text().splitlines(), start=1)
    ]
    lines = [(line_no, text) for line_no, text in lines if text]
    if not lines:
        raise PointCloudParseError('file is empty', path)
    header_no, header = lines[0]
    if not header.startswith('OFF'):
        raise PointCloudParseError(f'expected "OFF" header, found {header!r}', path, header_no)
    cursor = 1
    count_tokens = header[3:].split()
    counts_no = header_no
    if not count_tokens:
        if len(lines) < 2:
            raise PointCloudParseError('missing counts line', path, header_no)
        counts_no, counts_text = lines[1]
        count_tokens = counts_text.split()
        cursor = 2
    try:
        num_vertices, num_faces = int(count_tokens[0]), int(count_tokens[1])
    except (ValueError, IndexError):
        raise PointCloudParseError(f'malformed counts {count_tokens!r}', path, counts_no)
    if len(lines) - cursor < num_vertices + num_faces:
        raise PointCloudParseError(
            f'declared {num_vertices} vertices and {num_faces} faces but only '
            f'{len(lines) - cursor} data lines follow',
            path,
            counts_no,
        )
    vertices = np.empty((num_vertices, 3), dtype=np.float64)
    for i in range(num_vertices):
        line_no, text = lines[cursor + i]
        values = _parse_floats(text.split(), path, line_no)
        if len(values) < 3:
            raise PointCloudParseError('vertex line needs 3 coordinates', path, line_no)
        vertices[i] = values[:3]
    cursor += num_vertices
    triangles: List[Tuple[int, int, int]] = []
    for i in range(num_faces):
        line_no, text = lines[cursor + i]
        try:
            indices = [int(token) for token in text.split()]
        except ValueError:
            raise PointCloudParseError(f'non-integer face token in {text!r}', path, line_no)
        if not indices or len(indices) < indices[0] + 1 or indices[0] < 3:
            raise PointCloudParseError(f'malformed face {text!r}', path, line_no)
        polygon = indices[1 : indices[0] + 1]
        if min(polygon) < 0 or max(polygon) >= num_vertices:
            raise PointCloudParseError('face references a missing vertex', path, line_no)
        # fan triangulation
        for j in range(1, len(polygon) - 1):
            triangles.append((polygon[0], polygon[j], polygon[j + 1]))
    if num_vertices == 0:
        raise PointCloudParseError('mesh declares no vertices', path, counts_no)
    return vertices, np.asarray(triangles, dtype=np.int64).reshape(-1, 3)


def _read_pcad(path: Path) -> Tuple[np.ndarray, Optional[int], Optional[np.ndarray]]:
    data = path.read_bytes()
    if len(data) < _PCAD_HEADER.size:
        raise PointCloudParseError('truncated header', path, offset=len(data))
    magic, version, count, label = _PCAD_HEADER.unpack_from(data, 0)
    if magic != PCAD_MAGIC:
        raise PointCloudParseError(f'bad magic {magic!r}', path, offset=0)
    if version != PCAD_VERSION:
        raise PointCloudParseError(f'unsupported version {version}', path, offset=4)
    if count < 1:
        raise PointCloudParseError('point count must be at least 1', path, offset=5)
    start = _PCAD_HEADER.size
    end = start + 24 * count
    if len(data) < end:
        raise PointCloudParseError(
            f'point count mismatch: header declares {count} points, '
            f'payload holds {(len(data) - start) // 24}',
            path,
            offset=len(data),
        )
    points = np.frombuffer(data, dtype='<f8', count=3 * count, offset=start).reshape(count, 3)
    flags = None
    if len(data) > end:
        if data[end : end + 4] != PCAD_FLAG_MAGIC or len(data) != end + 4 + 4 * count:
            raise PointCloudParseError('malformed flag trailer', path, offset=end)
        flags = np.frombuffer(data, dtype='<i4', count=count, offset=end + 4).astype(np.int64)
    return points.astype(np.float64), (None if label < 0 else int(label)), flags


def load_cloud(path: str | Path, fmt: Optional[CloudFormat] = None) -> PointCloud:
    """Load a point cloud from an xyz-text, OFF or native-binary file.

    Args:
        path (str | Path): File to read.
        fmt (CloudFormat, optional): Declared format. Defaults to None, which infers
            the format from the file suffix.

    Returns:
        PointCloud: The loaded cloud. OFF files yield the raw vertex set.
    """
    path = Path(path)
    fmt = _infer_format(path, fmt)
    logger.debug(f'Loading {fmt} point cloud: {path}')
    label = None
    if fmt == 'xyz':
        points, _ = _read_xyz(path)
    elif fmt == 'off':
        points, _ = _read_off(path)
    else:
        points, label, _ = _read_pcad(path)
    try:
        return PointCloud(points, label=label, name=path.stem)
    except ValueError as e:
        raise PointCloudParseError(str(e), path)


def load_cloud_flags(path: str | Path, fmt: Optional[CloudFormat] = None) -> Optional[np.ndarray]:
    """Return the per-point flag column of an xyz or native-binary file, if present."""
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if fmt == 'xyz':
        return _read_xyz(path)[1]
    if fmt == 'pcad':
        return _read_pcad(path)[2]
    return None


def load_mesh(path: str | Path) -> Tuple[np.ndarray, np.ndarray]:
    """Load an OFF mesh as vertices and fan-triangulated faces.

    Args:
        path (str | Path): OFF file to read.

    Returns:
        Tuple[np.ndarray, np.ndarray]: ``(V, 3)`` vertices and ``(F, 3)`` triangle indices.
    """
    logger.debug(f'Loading OFF mesh: {path}')
    return _read_off(Path(path))


def save_cloud(
    cloud: PointCloud,
    path: str | Path,
    fmt: Optional[CloudFormat] = None,
    perturbed_mask: Optional[np.ndarray] = None,
    flags: Optional[np.ndarray] = None,
) -> None:
    """Write a point cloud as xyz-text or native-binary.

    Args:
        cloud (PointCloud): The cloud to persist.
        path (str | Path): Destination file.
        fmt (CloudFormat, optional): Output format, inferred from the suffix when None.
        perturbed_mask (np.ndarray, optional): Per-point booleans written as a 0/1 flag column.
        flags (np.ndarray, optional): Per-point integer flags (e.g. region indices).
            Mutually exclusive with ``perturbed_mask``.
    """
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if perturbed_mask is not None and flags is not None:
        raise ValueError('Pass either perturbed_mask or flags, not both.')
    if perturbed_mask is not None:
        flags = np.asarray(perturbed_mask, dtype=bool).astype(np.int64)
    if flags is not None:
        flags = np.asarray(flags, dtype=np.int64)
        if flags.shape != (cloud.n,):
            raise ValueError(f'Expected {cloud.n} flags, got shape {flags.shape}.')
    if cloud.n < 1:
        raise ValueError('Refusing to save an empty point cloud.')

    if fmt == 'xyz':
        with open(path, 'w') as handle:
            for i, (x, y, z) in enumerate(cloud.points):
                row = f'{x:.9g} {y:.9g} {z:.9g}'
                if flags is not None:
                    row += f' {flags[i]:d}'
                handle.write(row + '\n')
    elif fmt == 'pcad':
        label = -1 if cloud.label is None else int(cloud.label)
        payload = _PCAD_HEADER.pack(PCAD_MAGIC, PCAD_VERSION, cloud.n, label)
        payload += cloud.points.astype('<f8').tobytes()
        if flags is not None:
            payload += PCAD_FLAG_MAGIC + flags.astype('<i4').tobytes()
        with open(path, 'wb') as handle:
            handle.write(payload)
    else:
        raise ValueError('Saving to OFF is not supported; use xyz or pcad.')
    logger.debug(f'Saved {cloud.n} points to {path}')


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center a cloud at the origin and scale its farthest point to norm 1.

    A cloud whose points all coincide is only centered.
    """
    if cloud.n < 1:
        raise ValueError('Cannot normalize an empty point cloud.')
    centered = cloud.points - cloud.points.mean(axis=0)
    scale = float(np.max(np.linalg.norm(centered, axis=1)))
    if scale > 0.0:
        centered = centered / scale
    return cloud.with_points(centered)


def _triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _sample_triangles(
    vertices: np.ndarray, faces: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    areas = _triangle_areas(vertices, faces)
    total = float(areas.sum())
    if total <= 0.0:
        raise ValueError('Degenerate mesh: all faces have zero area.')
    chosen = rng.choice(len(faces), size=n, p=areas / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    w0 = 1.0 - r1
    w1 = r1 * (1.0 - r2)
    w2 = r1 * r2
    tri = faces[chosen]
    return (
        w0[:, None] * vertices[tri[:, 0]]
        + w1[:, None] * vertices[tri[:, 1]]
        + w2[:, None] * vertices[tri[:, 2]]
    )


def sample_mesh(vertices: np.ndarray, faces: np.ndarray, n: int, seed: int) -> PointCloud:
    """Sample points uniformly over a triangle mesh surface (area-weighted).

    Args:
        vertices (np.ndarray): ``(V, 3)`` vertex coordinates.
        faces (np.ndarray): ``(F, 3)`` vertex indices per triangle.
        n (int): Number of points to draw.
        seed (int): Seed of the generator; equal seeds give equal clouds.

    Returns:
        PointCloud: ``n`` points lying on the mesh triangles.
    """
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if n < 1:
        raise ValueError(f'Sample count must be >= 1, got {n}.')
    if len(faces) == 0:
        raise ValueError('Mesh has no faces.')
    if faces.min() < 0 or faces.max() >= len(vertices):
        raise ValueError('Faces reference vertices that do not exist.')
    rng = np.random.default_rng(seed)
    return PointCloud(_sample_triangles(vertices, faces, n, rng), name='mesh-sample')


_CUBE_VERTICES = np.array(
    [[x, y, z] for x in (-1.0, 1.0) for y in (-1.0, 1.0) for z in (-1.0, 1.0)]
)
_CUBE_FACES = np.array(
    [
        [0, 1, 3], [0, 3, 2],  # x = -1
        [4, 6, 7], [4, 7, 5],  # x = +1
        [0, 4, 5], [0, 5, 1],  # y = -1
        [2, 3, 7], [2, 7, 6],  # y = +1
        [0, 2, 6], [0, 6, 4],  # z = -1
        [1, 5, 7], [1, 7, 3],  # z = +1
    ]
)  # fmt: skip
_PYRAMID_VERTICES = np.array(
    [[-1.0, -1.0, -1.0], [1.0, -1.0, -1.0], [1.0, 1.0, -1.0], [-1.0, 1.0, -1.0], [0.0, 0.0, 1.0]]
)
_PYRAMID_FACES = np.array([[0, 2, 1], [0, 3, 2], [0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])

_TORUS_MAJOR = 1.0
_TORUS_MINOR = 0.4
_HELIX_TURNS = 2.0
_HELIX_TUBE = 0.08


def _sample_disc(n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    radius = np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return radius * np.cos(theta), radius * np.sin(theta)


def _unit_directions(n: int, rng: np.random.Generator) -> np.ndarray:
    directions = rng.standard_normal((n, 3))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def _sample_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    """Antipodal pairs, plus three points 120 degrees apart on a great circle when n is odd."""
    if n == 1:
        return _unit_directions(1, rng)
    pairs = _unit_directions((n - 3) // 2 if n % 2 else n // 2, rng)
    parts = [pairs, -pairs]
    if n % 2:
        axis = _unit_directions(1, rng)[0]
        u = rng.standard_normal(3)
        u -= (u @ axis) * axis
        u /= np.linalg.norm(u)
        v = np.cross(axis, u)
        angles = np.array([0.0, 2.0, 4.0]) * np.pi / 3.0
        parts.append(np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * v)
    return np.concatenate(parts, axis=0)


def _sample_cylinder(n: int, rng: np.random.Generator) -> np.ndarray:
    # radius 1, z in [-1, 1]: lateral area 4*pi, each cap pi
    part = rng.choice(3, size=n, p=[4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0])
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    points = np.stack([np.cos(theta), np.sin(theta), rng.uniform(-1.0, 1.0, n)], axis=1)
    caps = part > 0
    dx, dy = _sample_disc(int(caps.sum()), rng)
    points[caps] = np.stack([dx, dy, np.where(part[caps] == 1, -1.0, 1.0)], axis=1)
    return points


def _sample_cone(n: int, rng: np.random.Generator) -> np.ndarray:
    # base radius 1 at z = -1, apex at z = +1
    slant = np.sqrt(5.0)
    lateral, base = np.pi * slant, np.pi
    on_base = rng.random(n) < base / (lateral + base)
    s = np.sqrt(rng.random(n))  # fraction of slant from the apex, density proportional to s
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    points = np.stack([s * np.cos(theta), s * np.sin(theta), 1.0 - 2.0 * s], axis=1)
    dx, dy = _sample_disc(int(on_base.sum()), rng)
    points[on_base] = np.stack([dx, dy, np.full(dx.shape, -1.0)], axis=1)
    return points


def _sample_torus(n: int, rng: np.random.Generator) -> np.ndarray:
    accepted: List[np.ndarray] = []
    remaining = n
    while remaining > 0:
        batch = 2 * remaining + 16
        theta = rng.uniform(0.0, 2.0 * np.pi, batch)
        phi = rng.uniform(0.0, 2.0 * np.pi, batch)
        keep = rng.random(batch) < (_TORUS_MAJOR + _TORUS_MINOR * np.cos(phi)) / (
            _TORUS_MAJOR + _TORUS_MINOR
        )
        theta, phi = theta[keep][:remaining], phi[keep][:remaining]
        ring = _TORUS_MAJOR + _TORUS_MINOR * np.cos(phi)
        accepted.append(
            np.stack([ring * np.cos(theta), ring * np.sin(theta), _TORUS_MINOR * np.sin(phi)], 1)
        )
        remaining -= len(theta)
    return np.concatenate(accepted, axis=0)


def _sample_helix(n: int, rng: np.random.Generator) -> np.ndarray:
    # thin tube around a constant-pitch helix; tube curvature weighting is ignored
    t_max = 2.0 * np.pi * _HELIX_TURNS
    pitch = 2.0 / t_max
    t = rng.uniform(0.0, t_max, n)
    psi = rng.uniform(0.0, 2.0 * np.pi, n)
    centre = np.stack([np.cos(t), np.sin(t), -1.0 + pitch * t], axis=1)
    normal = np.stack([-np.cos(t), -np.sin(t), np.zeros(n)], axis=1)
    tangent = np.stack([-np.sin(t), np.cos(t), np.full(n, pitch)], axis=1)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    binormal = np.cross(tangent, normal)
    return centre + _HELIX_TUBE * (
        np.cos(psi)[:, None] * normal + np.sin(psi)[:, None] * binormal
    )


def sample_shape_surface(class_name: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` raw (unnormalized) points from a named parametric surface.

    The sphere centroid is the origin for every n except 1.
    Cube and pyramid have half-width 1 and are sampled through their meshes.
    """
    if class_name == 'sphere':
        return _sample_sphere(n, rng)
    if class_name == 'cube':
        return _sample_triangles(_CUBE_VERTICES, _CUBE_FACES, n, rng)
    if class_name == 'cylinder':
        return _sample_cylinder(n, rng)
    if class_name == 'cone':
        return _sample_cone(n, rng)
    if class_name == 'torus':
        return _sample_torus(n, rng)
    if class_name == 'plane':
        return np.stack([rng.uniform(-1.0, 1.0, n), rng.uniform(-1.0, 1.0, n), np.zeros(n)], 1)
    if class_name == 'pyramid':
        return _sample_triangles(_PYRAMID_VERTICES, _PYRAMID_FACES, n, rng)
    if class_name == 'helix':
        return _sample_helix(n, rng)
    raise ValueError(f'Unknown shape class {class_name!r}; expected one of {SHAPE_CLASSES}.')


def gen_synthetic(class_name: str, n: int, seed: int, jitter: float = 0.0) -> PointCloud:
    """Generate a labeled, normalized synthetic cloud of one shape class.

    Args:
        class_name (str): One of ``SHAPE_CLASSES``.
        n (int): Number of points.
        seed (int): Generator seed.
        jitter (float): Standard deviation of Gaussian coordinate noise. Defaults to 0.

    Returns:
        PointCloud: Normalized cloud labeled with the class index.
    """
    if class_name not in SHAPE_CLASSES:
        raise ValueError(f'Unknown shape class {class_name!r}; expected one of {SHAPE_CLASSES}.')
    if n < 1:
        raise ValueError(f'Point count must be >= 1, got {n}.')
    if jitter < 0:
        raise ValueError(f'Jitter must be >= 0, got {jitter}.')
    rng = np.random.default_rng(seed)
    points = sample_shape_surface(class_name, n, rng)
    if jitter > 0:
        points = points + rng.normal(0.0, jitter, size=points.shape)
    cloud = PointCloud(points, label=SHAPE_CLASSES.index(class_name), name=f'{class_name}-{seed}')
    return normalize_unit_sphere(cloud)
