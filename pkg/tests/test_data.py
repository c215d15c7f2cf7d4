import numpy as np
import pytest

from mtgp.data import (
    MultiTaskDataset,
    read_query_csv,
    read_task_csv,
    standardize_targets,
)
from mtgp.errors import ShapeError, ValidationError


class TestMultiTaskDataset:
    def test_basic_properties(self):
        ds = MultiTaskDataset(
            (np.zeros((3, 2)), np.ones((1, 2))), (np.zeros(3), np.ones(1))
        )
        assert ds.num_tasks == 2
        assert ds.input_dim == 2
        assert ds.counts == (3, 1)
        assert ds.total_count == 4
        np.testing.assert_array_equal(ds.task_indices(), [0, 0, 0, 1])
        assert ds.stacked_inputs().shape == (4, 2)

    def test_one_dimensional_inputs_promoted(self):
        ds = MultiTaskDataset((np.array([1.0, 2.0]),), (np.array([0.0, 1.0]),))
        assert ds.inputs[0].shape == (2, 1)

    def test_empty_task_allowed_if_any_nonempty(self):
        ds = MultiTaskDataset(
            (np.zeros((2, 1)), np.zeros((0, 1))), (np.zeros(2), np.zeros(0))
        )
        assert ds.counts == (2, 0)
        with pytest.raises(ShapeError):
            MultiTaskDataset(
                (np.zeros((0, 1)), np.zeros((0, 1))), (np.zeros(0), np.zeros(0))
            )

    def test_dimension_mismatch_between_tasks(self):
        with pytest.raises(ShapeError):
            MultiTaskDataset(
                (np.zeros((2, 1)), np.zeros((2, 2))), (np.zeros(2), np.zeros(2))
            )

    def test_non_finite_targets_rejected(self):
        with pytest.raises(ValueError):
            MultiTaskDataset((np.zeros((2, 1)),), (np.array([1.0, np.nan]),))


class TestStandardizeTargets:
    def test_zero_mean_unit_std(self):
        rng = np.random.default_rng(0)
        ds = MultiTaskDataset(
            (rng.uniform(0, 1, (20, 1)), rng.uniform(0, 1, (10, 1))),
            (5 + 3 * rng.normal(size=20), -2 + 0.1 * rng.normal(size=10)),
        )
        out, means, stds = standardize_targets(ds)
        for Y in out.targets:
            assert abs(np.mean(Y)) < 1e-12
            assert np.std(Y) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(means, [np.mean(t) for t in ds.targets])

    def test_degenerate_tasks_keep_unit_std(self):
        ds = MultiTaskDataset(
            (np.zeros((1, 1)), np.zeros((2, 1)), np.zeros((0, 1))),
            (np.array([7.0]), np.array([4.0, 4.0]), np.zeros(0)),
        )
        out, means, stds = standardize_targets(ds)
        np.testing.assert_array_equal(stds, [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(out.targets[0], [0.0])
        np.testing.assert_array_equal(out.targets[1], [0.0, 0.0])


class TestReadTaskCsv(object):
    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_round_trip(self, tmp_path):
        path = self.write(
            tmp_path,
            "x1,x2,task,y\n0.1,0.2,0,1.5\n0.3,0.4,1,2.5\n0.5,0.6,0,3.5\n",
        )
        ds, xcols = read_task_csv(path)
        assert xcols == ["x1", "x2"]
        assert ds.num_tasks == 2
        assert ds.counts == (2, 1)
        np.testing.assert_array_equal(ds.targets[0], [1.5, 3.5])

    def test_column_order_free(self, tmp_path):
        path = self.write(tmp_path, "y,task,x1\n1.0,0,0.5\n")
        ds, xcols = read_task_csv(path)
        assert xcols == ["x1"]
        np.testing.assert_array_equal(ds.inputs[0], [[0.5]])

    def test_task_gap_named_in_error(self, tmp_path):
        path = self.write(tmp_path, "x1,task,y\n0.1,0,1.0\n0.2,2,2.0\n")
        with pytest.raises(ValidationError, match="missing \\[1\\]"):
            read_task_csv(path)

    def test_unknown_column_rejected(self, tmp_path):
        path = self.write(tmp_path, "x1,task,y,color\n0.1,0,1.0,red\n")
        with pytest.raises(ValidationError, match="color"):
            read_task_csv(path)

    def test_non_contiguous_x_columns_rejected(self, tmp_path):
        path = self.write(tmp_path, "x1,x3,task,y\n0.1,0.2,0,1.0\n")
        with pytest.raises(ValidationError, match="not contiguous"):
            read_task_csv(path)

    def test_bad_number_reports_line(self, tmp_path):
        path = self.write(tmp_path, "x1,task,y\n0.1,0,1.0\nabc,0,2.0\n")
        with pytest.raises(ValidationError, match="line 3"):
            read_task_csv(path)

    def test_fractional_task_rejected(self, tmp_path):
        path = self.write(tmp_path, "x1,task,y\n0.1,0.5,1.0\n")
        with pytest.raises(ValidationError, match="task"):
            read_task_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = self.write(tmp_path, "")
        with pytest.raises(ValidationError):
            read_task_csv(path)

    def test_header_only_rejected(self, tmp_path):
        path = self.write(tmp_path, "x1,task,y\n")
        with pytest.raises(ValidationError, match="no data rows"):
            read_task_csv(path)


class TestReadQueryCsv:
    def test_rows_kept_in_order(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text("x1,task\n0.9,1\n0.1,0\n", encoding="utf-8")
        X, tasks, xcols = read_query_csv(path)
        np.testing.assert_array_equal(X[:, 0], [0.9, 0.1])
        np.testing.assert_array_equal(tasks, [1, 0])

    def test_empty_query_ok(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text("x1,task\n", encoding="utf-8")
        X, tasks, xcols = read_query_csv(path)
        assert X.shape == (0, 1)
        assert tasks.shape == (0,)

    def test_y_column_rejected(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text("x1,task,y\n0.1,0,1.0\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="y"):
            read_query_csv(path)
