"""File format round trips and parse error reporting."""

import numpy as np
import numpy.testing as npt
import pytest

from patchfit import (
    ExperimentSpec,
    FileFormatError,
    FitSettings,
    PointCloud,
    VoxelGrid,
    fit_surface,
    sigma2_hat,
)
from patchfit.io import (
    load_study_config,
    parse_study_config,
    read_point_cloud,
    read_surface_model,
    read_voxel_grid,
    write_point_cloud,
    write_study_long,
    write_study_table,
    write_surface_model,
    write_voxel_grid,
)
from patchfit.simulate import StudyRow, TrialRecord


class TestVoxelGridFormat:
    def test_round_trip_binary(self, tmp_path):
        rng = np.random.default_rng(0)
        grid = VoxelGrid(rng.integers(0, 2, (4, 5, 6)), (0.5, 1.0, 2.0), (-1.0, 0.0, 3.5))
        path = tmp_path / "grid.vox"
        write_voxel_grid(grid, path)
        back = read_voxel_grid(path)
        npt.assert_array_equal(back.data, grid.data)
        npt.assert_array_equal(back.spacing, grid.spacing)
        npt.assert_array_equal(back.origin, grid.origin)
        assert np.issubdtype(back.data.dtype, np.integer)

    def test_round_trip_real_weights(self, tmp_path):
        rng = np.random.default_rng(1)
        grid = VoxelGrid(rng.uniform(0.1, 1.0, (3, 3, 3)), (1, 1, 1), (0, 0, 0))
        path = tmp_path / "weights.vox"
        write_voxel_grid(grid, path)
        back = read_voxel_grid(path)
        npt.assert_array_equal(back.data, grid.data)

    def test_x_fastest_ordering(self, tmp_path):
        data = np.arange(8).reshape(2, 2, 2)
        path = tmp_path / "order.vox"
        write_voxel_grid(VoxelGrid(data, (1, 1, 1), (0, 0, 0)), path)
        tokens = path.read_text().split("\n")[1:]
        flat = [int(t) for line in tokens for t in line.split()]
        # value at (i, j, k) sits at index i + 2j + 4k
        expected = [data[i, j, k] for k in range(2) for j in range(2) for i in range(2)]
        assert flat == expected

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.vox"
        path.write_text("VOX2 1 1 1 1 1 1 0 0 0\n1\n")
        with pytest.raises(FileFormatError, match="bad.vox:1"):
            read_voxel_grid(path)

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "bad.vox"
        path.write_text("VOX1 1 1 2 1 1 1 0 0 0\n1\nx\n")
        with pytest.raises(FileFormatError, match="bad.vox:3"):
            read_voxel_grid(path)

    def test_wrong_count(self, tmp_path):
        path = tmp_path / "bad.vox"
        path.write_text("VOX1 2 2 2 1 1 1 0 0 0\n1 2 3\n")
        with pytest.raises(FileFormatError, match="expected 8 values"):
            read_voxel_grid(path)


class TestPointCloudFormat:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        cloud = PointCloud(rng.normal(size=(7, 3)), rng.uniform(0.1, 2.0, 7))
        path = tmp_path / "cloud.csv"
        write_point_cloud(cloud, path)
        back = read_point_cloud(path)
        npt.assert_array_equal(back.points, cloud.points)
        npt.assert_array_equal(back.weights, cloud.weights)

    def test_header_required(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(FileFormatError, match="cloud.csv:1"):
            read_point_cloud(path)

    def test_bad_row_reports_line(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("x,y,z,w\n1,2,3,1\n1,2,3\n")
        with pytest.raises(FileFormatError, match="cloud.csv:3"):
            read_point_cloud(path)


class TestSurfaceDocument:
    def test_round_trip_and_sigma2_consistency(self, tmp_path):
        rng = np.random.default_rng(3)
        xy = rng.uniform(-1, 1, (60, 2))
        points = np.column_stack([xy, 0.2 * xy[:, 0] * xy[:, 1]])
        points += 0.01 * rng.normal(size=points.shape)
        cloud = PointCloud(points, np.ones(60))
        model, _ = fit_surface(cloud, FitSettings())
        path = tmp_path / "surface.json"
        write_surface_model(model, cloud, path)
        back, residuals = read_surface_model(path)
        npt.assert_array_equal(back.surface.control, model.surface.control)
        npt.assert_array_equal(back.u, model.u)
        npt.assert_array_equal(back.centroid, model.centroid)
        assert back.sigma2 == model.sigma2
        assert back.t == model.t
        recomputed = sigma2_hat(cloud, back.surface, back.u, back.v)
        assert abs(recomputed - back.sigma2) <= 1e-12 * max(1.0, back.sigma2)
        assert residuals.shape == (60,)

    def test_malformed_document(self, tmp_path):
        path = tmp_path / "surface.json"
        path.write_text('{"n_u": 1}')
        with pytest.raises(FileFormatError):
            read_surface_model(path)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "surface.json"
        path.write_text("{\n  broken\n}")
        with pytest.raises(FileFormatError, match="surface.json:2"):
            read_surface_model(path)


class TestStudyConfig:
    def test_parse_minimal(self):
        specs = parse_study_config(
            """
            # comment
            [spec]
            surface = plane
            n_tr = 40
            sigma2_y = 0.01
            seed = 3
            """
        )
        assert len(specs) == 1
        assert specs[0].surface == "plane"
        assert specs[0].n_tr == 40
        assert specs[0].trials == 20

    def test_parse_full_fields(self):
        specs = parse_study_config(
            """
            [spec]
            name = demo
            surface = rosenbrock
            n_tr = 50
            n_te = 25
            sigma2_y = 2.5e-3
            seed = 11
            trials = 4
            mode = fixed
            orders = 2 3
            lam = 1e-4
            """
        )
        spec = specs[0]
        assert spec.name == "demo"
        assert spec.orders == (2, 3)
        assert spec.mode == "fixed"
        assert spec.lam == 1e-4

    def test_unknown_field_named(self):
        with pytest.raises(FileFormatError, match="sigma"):
            parse_study_config("[spec]\nsurface = plane\nsigma = 1\n")

    def test_missing_required_field(self):
        with pytest.raises(FileFormatError, match="sigma2_y"):
            parse_study_config("[spec]\nsurface = plane\nn_tr = 10\nseed = 1\n")

    def test_value_before_section(self):
        with pytest.raises(FileFormatError, match=":1"):
            parse_study_config("surface = plane\n")

    def test_bundled_configs_load(self):
        for name in ("table1_trends", "fig4_plane"):
            specs = load_study_config(name)
            assert len(specs) >= 4
            assert all(isinstance(s, ExperimentSpec) for s in specs)

    def test_missing_config(self):
        with pytest.raises(FileFormatError):
            load_study_config("no_such_config")


class TestStudyOutputs:
    def test_tables_are_deterministic_without_timings(self, tmp_path):
        row = StudyRow("demo", "plane", "auto", 10, 0.1, 2, 0, 3.0, 4.0,
                       1e-3, 2e-3, 123.4, 0)
        rec = TrialRecord("demo", 0, "plane", "auto", 10, 0.1, 3, 4, 1, 1,
                          1e-3, 2e-3, 456.7, 0)
        t1 = tmp_path / "a.csv"
        t2 = tmp_path / "b.csv"
        write_study_table([row], t1)
        write_study_long([rec], t2)
        assert "123.4" not in t1.read_text()
        assert "456.7" not in t2.read_text()
        assert t1.read_text().splitlines()[0].startswith("name,")
