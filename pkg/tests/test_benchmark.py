import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtgp.benchmark import (
    BenchmarkScenario,
    ForresterParams,
    PRIMARY_PARAMS,
    StudyConfig,
    achieved_correlation,
    calibrate_auxiliary,
    forrester,
    format_study_table,
    pearson_correlation,
    percent_improvement,
    rmse,
    run_scenario,
    run_study,
)
from mtgp.errors import DomainError, ShapeError, UndefinedCorrelationError
from mtgp.training import MTGPFamily, TrainConfig

TINY = TrainConfig(max_iterations=40, num_restarts=2, seed=0)


class TestForrester:
    def test_midpoint(self):
        assert forrester(0.5) == pytest.approx(math.sin(2.0), abs=1e-12)

    def test_pure_linear_term(self):
        params = ForresterParams(0.0, 1.0)
        for x in (0.0, 0.25, 0.8):
            assert forrester(x, params) == pytest.approx(x - 0.5, abs=1e-15)

    def test_left_endpoint(self):
        assert forrester(0.0) == pytest.approx(4.0 * math.sin(-4.0), abs=1e-12)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            forrester(1.2)
        with pytest.raises(DomainError):
            forrester(np.array([0.1, -0.1]))

    def test_matches_independent_evaluation_on_grid(self):
        # independently coded pointwise evaluation via the math module
        params = ForresterParams(0.7, -3.2)
        grid = np.linspace(0.0, 1.0, 1000)
        ours = forrester(grid, params)
        for i, x in enumerate(grid):
            u = 6.0 * x - 2.0
            expected = 0.7 * u * u * math.sin(12.0 * x - 4.0) + (-3.2) * (x - 0.5)
            assert abs(ours[i] - expected) < 1e-12


class TestPearsonCorrelation:
    def test_perfect_correlation(self):
        y = np.array([1.0, 2.0, 5.0])
        assert pearson_correlation(y, y) == pytest.approx(1.0, abs=1e-15)

    def test_perfect_anticorrelation(self):
        y = np.array([1.0, 2.0, 5.0])
        assert pearson_correlation(y, -y) == pytest.approx(-1.0, abs=1e-15)

    def test_three_point_value(self):
        # hand formula: r = 3 / sqrt(2 * 14/3) ... = 0.98198 for these series
        assert pearson_correlation([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=1e-5)

    def test_zero_variance_rejected(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson_correlation([1.0, 1.0], [0.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            pearson_correlation([1.0], [1.0, 2.0])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_bounded_and_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=5)
        b = rng.normal(size=5)
        r = pearson_correlation(a, b)
        assert -1.0 <= r <= 1.0
        assert r == pytest.approx(pearson_correlation(b, a), abs=1e-14)


class TestRmse:
    def test_identical_vectors(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_three_four_five(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-10, 10), st.integers(1, 20))
    def test_constant_offset(self, c, n):
        base = np.linspace(0, 1, n)
        assert rmse(base + c, base) == pytest.approx(abs(c), abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            rmse([1.0], [1.0, 2.0])


class TestPercentImprovement:
    @pytest.mark.parametrize(
        "gp,mtgp,expected",
        [(4.44, 3.68, 17.1), (1.47, 1.15, 21.77), (1.47, 0.84, 42.86), (4.44, 4.08, 8.10)],
    )
    def test_reported_table_rows(self, gp, mtgp, expected):
        assert percent_improvement(gp, mtgp) == pytest.approx(expected, abs=0.05)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 100))
    def test_invariant_under_common_rescaling(self, gp, mtgp, scale):
        assert percent_improvement(gp, mtgp) == pytest.approx(
            percent_improvement(gp * scale, mtgp * scale), rel=1e-9
        )

    def test_zero_baseline(self):
        assert percent_improvement(0.0, 1.0) == 0.0


class TestCalibration:
    def test_target_one_returns_primary(self):
        params = calibrate_auxiliary(1.0)
        assert (params.a, params.b) == (1.0, 0.0)

    @pytest.mark.parametrize("target", [0.89, 0.53, 0.33])
    def test_targets_within_tolerance(self, target):
        params = calibrate_auxiliary(target)
        achieved = achieved_correlation(params)
        assert abs(achieved - target) <= 0.03

    def test_out_of_range_target(self):
        with pytest.raises(DomainError):
            calibrate_auxiliary(0.0)
        with pytest.raises(DomainError):
            calibrate_auxiliary(1.2)


class TestRunScenario:
    def scenario(self, **kw):
        defaults = dict(
            auxiliary_params=ForresterParams(1.0, 0.0),
            n_primary=4,
            n_auxiliary=4,
            n_test=25,
            seed=5,
        )
        defaults.update(kw)
        return BenchmarkScenario(**defaults)

    def test_deterministic(self):
        a = run_scenario(self.scenario(), TINY)
        b = run_scenario(self.scenario(), TINY)
        assert a == b

    def test_result_fields(self):
        res = run_scenario(self.scenario(), TINY)
        assert res.gp_rmse >= 0 and res.mtgp_rmse >= 0
        assert res.percent_improvement == pytest.approx(
            percent_improvement(res.gp_rmse, res.mtgp_rmse), abs=1e-12
        )
        assert res.n_primary == 4 and res.n_auxiliary == 4
        assert res.correlation_achieved == pytest.approx(1.0, abs=1e-12)

    def test_training_inputs_disjoint_from_test_grid(self):
        from mtgp.benchmark import _scenario_data

        x1, y1, x2, y2, xt, yt = _scenario_data(self.scenario(n_test=50))
        assert not np.any(np.isin(x1[:, 0], xt[:, 0]))
        assert not np.any(np.isin(x2[:, 0], xt[:, 0]))

    def test_observation_noise_applied(self):
        from mtgp.benchmark import _scenario_data

        clean = _scenario_data(self.scenario())
        noisy = _scenario_data(self.scenario(observation_noise=0.5))
        np.testing.assert_array_equal(clean[0], noisy[0])  # same inputs
        assert np.any(clean[1] != noisy[1])  # different targets

    def test_zero_coupling_auxiliary_is_inert_on_average(self):
        # near convergence the two trainers agree; short budgets leave
        # optimizer noise well above the 5% bound
        cfg = TrainConfig(max_iterations=600, num_restarts=3, seed=0)
        rel = []
        aux = calibrate_auxiliary(0.89)
        for seed in range(10):
            res = run_scenario(
                BenchmarkScenario(
                    auxiliary_params=aux, n_primary=6, n_auxiliary=6, n_test=40, seed=seed
                ),
                cfg,
                mtgp_family=MTGPFamily(mode="independent"),
            )
            rel.append(abs(res.mtgp_rmse - res.gp_rmse) / res.gp_rmse)
        assert float(np.mean(rel)) < 0.05


class TestRunStudy:
    def small_study(self, replicates=1):
        return StudyConfig(
            correlations=(0.89, 0.53),
            size_grid=((4, 4), (4, 6)),
            replicates=replicates,
            n_test=20,
            seed=0,
        )

    def test_row_and_aggregate_counts(self):
        res = run_study(self.small_study(replicates=2), TINY)
        assert len(res.rows) == 2 * 2 * 2
        assert len(res.aggregates) == 2 * 2

    def test_single_replicate_std_zero(self):
        res = run_study(self.small_study(), TINY)
        for agg in res.aggregates:
            assert agg["gp_rmse_std"] == 0.0
            assert agg["improvement_per_replicate_std"] == 0.0
            assert agg["replicates"] == 1

    def test_aggregate_improvement_matches_mean_rmses(self):
        res = run_study(self.small_study(replicates=2), TINY)
        for agg in res.aggregates:
            assert agg["improvement"] == pytest.approx(
                percent_improvement(agg["gp_rmse_mean"], agg["mtgp_rmse_mean"]), abs=1e-12
            )

    def test_gp_baseline_shared_within_replicate(self):
        res = run_study(self.small_study(), TINY)
        by_corr = {}
        for row in res.rows:
            key = (row["n_primary"], row["n_auxiliary"], row["replicate"])
            by_corr.setdefault(key, []).append(row["gp_rmse"])
        for values in by_corr.values():
            assert len(set(values)) == 1

    def test_study_matches_standalone_scenario(self):
        from mtgp.benchmark import _scenario_seed

        study = StudyConfig(
            correlations=(0.89,), size_grid=((4, 5),), replicates=1, n_test=20, seed=3
        )
        res = run_study(study, TINY)
        row = res.rows[0]
        scenario = BenchmarkScenario(
            auxiliary_params=res.calibrations[0.89],
            n_primary=4,
            n_auxiliary=5,
            n_test=20,
            seed=_scenario_seed(3, 4, 0),
        )
        standalone = run_scenario(scenario, TINY)
        assert standalone.gp_rmse == row["gp_rmse"]
        assert standalone.mtgp_rmse == row["mtgp_rmse"]

    def test_series_captured_for_first_replicate(self):
        res = run_study(self.small_study(replicates=2), TINY)
        assert set(res.series) == {(0.89, 4, 4), (0.89, 4, 6), (0.53, 4, 4), (0.53, 4, 6)}
        series = res.series[(0.89, 4, 4)]
        assert series["x"].shape == (20,)
        assert np.all(series["gp_stddev"] >= 0)

    def test_table_formatting(self):
        res = run_study(self.small_study(), TINY)
        table = format_study_table(res)
        assert "Task Pair" in table
        assert "MTGP \\ GP RMSE" in table
        assert "% Improvement" in table
        assert "r=0.89" in table

    def test_worker_cap_respected(self, monkeypatch):
        monkeypatch.setenv("MTGP_NUM_THREADS", "1")
        res = run_study(self.small_study(), TINY)
        assert len(res.rows) == 4
