"""Tests for point cloud I/O, mesh sampling, normalization and the synthetic dataset."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from pointcloud_region_attack.helpers.geometry import (
    SHAPE_CLASSES,
    DatasetManifest,
    ManifestEntry,
    PointCloud,
    PointCloudParseError,
    gen_synthetic,
    load_cloud,
    load_cloud_flags,
    load_manifest,
    load_mesh,
    normalize_unit_sphere,
    sample_mesh,
    sample_shape_surface,
    save_cloud,
    save_manifest,
)
from pydantic import ValidationError


CUBE_OFF = """OFF
8 12 0
-1 -1 -1
-1 -1 1
-1 1 -1
-1 1 1
1 -1 -1
1 -1 1
1 1 -1
1 1 1
3 0 1 3
3 0 3 2
3 4 6 7
3 4 7 5
3 0 4 5
3 0 5 1
3 2 3 7
3 2 7 6
3 0 2 6
3 0 6 4
3 1 5 7
3 1 7 3
"""


@pytest.fixture
def cube_off(tmp_path):
    """A unit cube mesh written as an OFF file."""
    path = tmp_path / 'cube.off'
    path.write_text(CUBE_OFF)
    return path


class TestLoadCloud:
    """Tests for load_cloud and its parsers."""

    def test_xyz_two_points(self, tmp_path):
        """Test that an xyz file with two lines yields two points in order."""
        path = tmp_path / 'two.xyz'
        path.write_text('0 0 0\n1 0 0\n')

        cloud = load_cloud(path)

        assert cloud.n == 2
        np.testing.assert_array_equal(cloud.points, [[0, 0, 0], [1, 0, 0]])
        assert cloud.name == 'two'
        assert cloud.label is None

    def test_xyz_ignores_comments_and_blank_lines(self, tmp_path):
        """Test that comments and blank lines are skipped."""
        path = tmp_path / 'commented.xyz'
        path.write_text('# header\n\n0.5 0 0  # first\n0 0.5 0\n')

        assert load_cloud(path).n == 2

    def test_empty_file(self, tmp_path):
        """Test that an empty file is a parse error."""
        path = tmp_path / 'empty.xyz'
        path.write_text('')

        with pytest.raises(PointCloudParseError, match='no points'):
            load_cloud(path)

    def test_non_numeric_token_names_line(self, tmp_path):
        """Test that a bad token reports the offending line number."""
        path = tmp_path / 'bad.xyz'
        path.write_text('0 0 0\n1 x 0\n')

        with pytest.raises(PointCloudParseError) as excinfo:
            load_cloud(path)
        assert excinfo.value.line == 2
        assert 'bad.xyz:2' in str(excinfo.value)

    def test_column_count_change(self, tmp_path):
        """Test that mixing 3 and 4 column rows is rejected."""
        path = tmp_path / 'mixed.xyz'
        path.write_text('0 0 0\n1 0 0 1\n')

        with pytest.raises(PointCloudParseError, match='column count changed'):
            load_cloud(path)

    def test_off_cube_vertices(self, cube_off):
        """Test that an OFF cube yields its 8 raw vertices."""
        cloud = load_cloud(cube_off)

        assert cloud.n == 8
        np.testing.assert_array_equal(np.abs(cloud.points), np.ones((8, 3)))

    def test_off_inline_counts_and_quads(self, tmp_path):
        """Test the OFF header with counts on the same line and fan triangulation."""
        path = tmp_path / 'quad.off'
        path.write_text('OFF 4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n')

        vertices, faces = load_mesh(path)

        assert vertices.shape == (4, 3)
        np.testing.assert_array_equal(faces, [[0, 1, 2], [0, 2, 3]])

    def test_off_count_mismatch(self, tmp_path):
        """Test that fewer data lines than declared is a parse error."""
        path = tmp_path / 'short.off'
        path.write_text('OFF\n3 1 0\n0 0 0\n1 0 0\n')

        with pytest.raises(PointCloudParseError, match='declared 3 vertices'):
            load_cloud(path)

    def test_off_missing_vertex(self, tmp_path):
        """Test that faces must reference existing vertices."""
        path = tmp_path / 'dangling.off'
        path.write_text('OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n')

        with pytest.raises(PointCloudParseError, match='missing vertex'):
            load_mesh(path)

    def test_off_bad_header(self, tmp_path):
        """Test that a file without the OFF header is rejected."""
        path = tmp_path / 'nohead.off'
        path.write_text('3 1 0\n')

        with pytest.raises(PointCloudParseError, match='OFF'):
            load_cloud(path)

    def test_pcad_bad_magic(self, tmp_path):
        """Test that the binary reader checks its magic bytes at offset 0."""
        path = tmp_path / 'bad.pcad'
        path.write_bytes(b'XXXX' + bytes(9) + bytes(24))

        with pytest.raises(PointCloudParseError) as excinfo:
            load_cloud(path)
        assert excinfo.value.offset == 0

    def test_pcad_truncated_payload(self, tmp_path, sphere_cloud):
        """Test that a binary file shorter than its declared count is rejected."""
        path = tmp_path / 'cut.pcad'
        save_cloud(sphere_cloud, path)
        path.write_bytes(path.read_bytes()[:-10])

        with pytest.raises(PointCloudParseError, match='point count mismatch'):
            load_cloud(path)

    def test_unknown_suffix(self, tmp_path):
        """Test that the format cannot be inferred from an unknown suffix."""
        with pytest.raises(ValueError, match='suffix'):
            load_cloud(tmp_path / 'cloud.ply')


class TestSaveCloud:
    """Tests for save_cloud."""

    def test_pcad_round_trip_is_bit_exact(self, tmp_path, sphere_cloud):
        """Test that the binary format preserves coordinates and label exactly."""
        cloud = PointCloud(sphere_cloud.points, label=5, name='query')
        path = tmp_path / 'query.pcad'

        save_cloud(cloud, path)
        loaded = load_cloud(path)

        assert loaded == cloud
        assert loaded.points.tobytes() == cloud.points.tobytes()
        assert loaded.label == 5

    def test_pcad_without_label(self, tmp_path, sphere_cloud):
        """Test that a missing label survives the binary round trip as None."""
        path = tmp_path / 'unlabeled.pcad'
        save_cloud(PointCloud(sphere_cloud.points), path)

        assert load_cloud(path).label is None

    def test_xyz_round_trip_precision(self, tmp_path, sphere_cloud):
        """Test that text coordinates come back within 1e-7."""
        path = tmp_path / 'query.xyz'

        save_cloud(sphere_cloud, path)

        np.testing.assert_allclose(load_cloud(path).points, sphere_cloud.points, atol=1e-7)

    def test_xyz_with_mask_has_flag_column(self, tmp_path):
        """Test that a perturbed mask adds a fourth 0/1 column."""
        cloud = PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
        path = tmp_path / 'flagged.xyz'

        save_cloud(cloud, path, perturbed_mask=np.array([True, False, True]))

        rows = [line.split() for line in path.read_text().splitlines()]
        assert all(len(row) == 4 for row in rows)
        assert [row[3] for row in rows] == ['1', '0', '1']
        np.testing.assert_array_equal(load_cloud_flags(path), [1, 0, 1])
        np.testing.assert_array_equal(load_cloud(path).points, cloud.points)

    def test_pcad_flags_trailer(self, tmp_path):
        """Test that integer flags are stored after the binary payload."""
        cloud = PointCloud([[0, 0, 0], [1, 0, 0]], label=1)
        path = tmp_path / 'regions.pcad'

        save_cloud(cloud, path, flags=np.array([3, 7]))

        np.testing.assert_array_equal(load_cloud_flags(path), [3, 7])
        assert load_cloud(path) == cloud

    def test_mask_and_flags_are_exclusive(self, tmp_path):
        """Test that perturbed_mask and flags cannot both be given."""
        cloud = PointCloud([[0, 0, 0]])
        with pytest.raises(ValueError, match='either'):
            save_cloud(cloud, tmp_path / 'c.xyz', perturbed_mask=[True], flags=[1])

    def test_off_output_is_refused(self, tmp_path):
        """Test that writing OFF is not supported."""
        with pytest.raises(ValueError, match='OFF'):
            save_cloud(PointCloud([[0, 0, 0]]), tmp_path / 'c.off')

    def test_unwritable_path(self, tmp_path):
        """Test that saving into a missing directory raises an I/O error."""
        with pytest.raises(OSError):
            save_cloud(PointCloud([[0, 0, 0]]), tmp_path / 'missing' / 'c.pcad')


class TestPointCloud:
    """Tests for the PointCloud value type."""

    def test_rejects_non_finite(self):
        """Test that NaN coordinates are rejected."""
        with pytest.raises(ValueError, match='non-finite'):
            PointCloud([[0.0, np.nan, 0.0]])

    def test_points_are_read_only(self):
        """Test that the coordinate array cannot be mutated."""
        cloud = PointCloud([[0.0, 0.0, 0.0]])
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 1.0

    def test_equality_ignores_name(self):
        """Test that equality compares coordinates and label only."""
        assert PointCloud([[1, 2, 3]], label=0, name='a') == PointCloud([[1, 2, 3]], label=0)
        assert PointCloud([[1, 2, 3]], label=0) != PointCloud([[1, 2, 3]], label=1)


class TestSampleMesh:
    """Tests for area-weighted mesh sampling."""

    def test_samples_lie_on_triangle(self):
        """Test that samples of a unit right triangle satisfy its plane and bounds."""
        vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

        cloud = sample_mesh(vertices, [[0, 1, 2]], 1000, seed=0)

        assert cloud.n == 1000
        assert np.all(np.abs(cloud.points[:, 2]) <= 1e-9)
        assert np.all(cloud.points[:, :2] >= -1e-9)
        assert np.all(cloud.points[:, 0] + cloud.points[:, 1] <= 1.0 + 1e-9)

    def test_cube_faces_are_area_weighted(self, cube_off):
        """Test that each cube face receives a binomially plausible share of samples."""
        vertices, faces = load_mesh(cube_off)

        points = sample_mesh(vertices, faces, 6000, seed=1).points

        axis = np.argmax(np.abs(points), axis=1)
        sign = np.sign(points[np.arange(len(points)), axis]).astype(int)
        sigma = np.sqrt(6000 * (1 / 6) * (5 / 6))
        for a in range(3):
            for s in (-1, 1):
                count = int(np.sum((axis == a) & (sign == s)))
                assert abs(count - 1000) <= 3 * sigma, (a, s, count)

    def test_same_seed_same_cloud(self, cube_off):
        """Test that sampling is a pure function of the seed."""
        vertices, faces = load_mesh(cube_off)

        assert sample_mesh(vertices, faces, 100, 5) == sample_mesh(vertices, faces, 100, 5)
        assert sample_mesh(vertices, faces, 100, 5) != sample_mesh(vertices, faces, 100, 6)

    def test_degenerate_mesh(self):
        """Test that a mesh of zero-area faces is rejected."""
        vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        with pytest.raises(ValueError, match='Degenerate'):
            sample_mesh(vertices, [[0, 1, 2]], 10, seed=0)

    def test_invalid_face_index(self):
        """Test that faces must index existing vertices."""
        with pytest.raises(ValueError, match='do not exist'):
            sample_mesh(np.zeros((3, 3)), [[0, 1, 3]], 10, seed=0)


class TestNormalize:
    """Tests for normalize_unit_sphere."""

    def test_two_points(self):
        """Test centering and scaling of a two-point cloud."""
        cloud = normalize_unit_sphere(PointCloud([[2, 0, 0], [4, 0, 0]]))

        np.testing.assert_allclose(cloud.points, [[-1, 0, 0], [1, 0, 0]], atol=1e-12)

    def test_single_point_is_only_centered(self):
        """Test that a single point moves to the origin without scaling."""
        cloud = normalize_unit_sphere(PointCloud([[5, 5, 5]]))

        np.testing.assert_array_equal(cloud.points, [[0, 0, 0]])

    def test_keeps_label_and_name(self):
        """Test that normalization only changes coordinates."""
        cloud = normalize_unit_sphere(PointCloud([[1, 0, 0], [3, 0, 0]], label=2, name='x'))

        assert (cloud.label, cloud.name) == (2, 'x')

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(
            np.float64,
            st.tuples(st.integers(2, 30), st.just(3)),
            elements=st.integers(-50, 50).map(float),
        )
    )
    def test_idempotent(self, points):
        """Test that normalizing twice equals normalizing once."""
        once = normalize_unit_sphere(PointCloud(points))
        twice = normalize_unit_sphere(once)

        np.testing.assert_allclose(twice.points, once.points, atol=1e-12)
        np.testing.assert_allclose(once.points.mean(axis=0), 0.0, atol=1e-9)
        if np.ptp(points, axis=0).any():
            assert abs(np.linalg.norm(once.points, axis=1).max() - 1.0) <= 1e-9


class TestSynthetic:
    """Tests for the synthetic shape generator."""

    def test_sphere_points_have_unit_norm(self):
        """Test that a jitter-free sphere lies on the unit sphere."""
        cloud = gen_synthetic('sphere', 1024, seed=0)

        np.testing.assert_allclose(np.linalg.norm(cloud.points, axis=1), 1.0, atol=1e-9)
        assert cloud.label == SHAPE_CLASSES.index('sphere')

    @pytest.mark.parametrize('n', [3, 65, 1023])
    def test_odd_sphere_is_centred(self, n):
        """Test that odd point counts still give a zero centroid and unit norms."""
        raw = sample_shape_surface('sphere', n, np.random.default_rng(n))
        cloud = gen_synthetic('sphere', n, seed=1)

        assert raw.shape == (n, 3)
        np.testing.assert_allclose(raw.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(cloud.points, axis=1), 1.0, atol=1e-9)

    def test_cube_surface_before_normalization(self):
        """Test that every raw cube sample has a coordinate at the half-width."""
        points = sample_shape_surface('cube', 1024, np.random.default_rng(0))

        assert np.all(np.abs(np.abs(points).max(axis=1) - 1.0) <= 1e-9)

    def test_torus_is_deterministic(self):
        """Test that a jittered torus depends only on its seed."""
        first = gen_synthetic('torus', 1024, seed=4, jitter=0.01)

        assert first == gen_synthetic('torus', 1024, seed=4, jitter=0.01)
        assert first != gen_synthetic('torus', 1024, seed=5, jitter=0.01)

    @pytest.mark.parametrize('class_name', SHAPE_CLASSES)
    def test_every_class_is_normalized(self, class_name):
        """Test shape, label and normalization of every class."""
        cloud = gen_synthetic(class_name, 257, seed=2, jitter=0.005)

        assert cloud.points.shape == (257, 3)
        assert cloud.label == SHAPE_CLASSES.index(class_name)
        assert cloud.name == f'{class_name}-2'
        np.testing.assert_allclose(cloud.points.mean(axis=0), 0.0, atol=1e-9)
        assert abs(np.linalg.norm(cloud.points, axis=1).max() - 1.0) <= 1e-9

    def test_unknown_class(self):
        """Test that an unknown class name is rejected."""
        with pytest.raises(ValueError, match='Unknown shape class'):
            gen_synthetic('teapot', 10, seed=0)

    @pytest.mark.parametrize('n, jitter', [(0, 0.0), (10, -0.1)])
    def test_invalid_arguments(self, n, jitter):
        """Test the point count and jitter preconditions."""
        with pytest.raises(ValueError):
            gen_synthetic('cube', n, seed=0, jitter=jitter)


class TestManifest:
    """Tests for DatasetManifest persistence."""

    def test_round_trip(self, tmp_path, sphere_cloud):
        """Test that a saved manifest loads back with resolvable entries."""
        save_cloud(sphere_cloud, tmp_path / 'a.pcad')
        manifest = DatasetManifest(
            classes=['sphere', 'cube'],
            entries=[ManifestEntry(path='a.pcad', label=0, split='test')],
        )
        save_manifest(manifest, tmp_path / 'manifest.json')

        loaded = load_manifest(tmp_path / 'manifest.json')

        assert loaded.classes == ['sphere', 'cube']
        assert loaded.split('train') == []
        assert loaded.resolve(loaded.split('test')[0]) == tmp_path / 'a.pcad'

    def test_label_out_of_range(self):
        """Test that class indices must be below the class count."""
        with pytest.raises(ValidationError, match='class index 2'):
            DatasetManifest(
                classes=['a', 'b'], entries=[ManifestEntry(path='x', label=2, split='train')]
            )

    def test_missing_file(self, tmp_path):
        """Test that every referenced file must exist at load time."""
        manifest = DatasetManifest(
            classes=['a'], entries=[ManifestEntry(path='gone.pcad', label=0, split='train')]
        )
        save_manifest(manifest, tmp_path / 'manifest.json')

        with pytest.raises(FileNotFoundError, match='gone.pcad'):
            load_manifest(tmp_path / 'manifest.json')
