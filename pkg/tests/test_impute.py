import numpy as np
import pytest

from aeroadapt.impute import MiceConfig, fit_linear_regressor, mice_impute
from aeroadapt.ingest import SyntheticConfig, generate_synthetic
from aeroadapt.prep import fit_station_normalizer, normalize_matrix


class TestLinearRegressor:
    def test_exact_line(self):
        coef = fit_linear_regressor(np.array([[1.0], [2.0], [3.0]]),
                                    np.array([2.0, 4.0, 6.0]))
        assert coef[0] == pytest.approx(2.0, abs=1e-9)
        assert coef[1] == pytest.approx(0.0, abs=1e-9)

    def test_constant_target(self):
        coef = fit_linear_regressor(np.array([[1.0], [2.0], [5.0]]),
                                    np.array([7.0, 7.0, 7.0]))
        assert coef[-1] == pytest.approx(7.0, abs=1e-8)
        assert coef[0] == pytest.approx(0.0, abs=1e-8)

    def test_duplicated_column_stays_finite(self):
        X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
        y = np.array([1.0, 2.0, 3.0, 4.0])
        coef = fit_linear_regressor(X, y)
        assert np.all(np.isfinite(coef))

    def test_zero_rows_errors(self):
        with pytest.raises(ValueError):
            fit_linear_regressor(np.empty((0, 2)), np.empty(0))


class TestMice:
    def test_identity_when_complete(self):
        m = np.random.default_rng(0).random((20, 3))
        out, report = mice_impute(m)
        assert np.array_equal(out, m)
        assert report.iterations_run == 0
        assert all(v == 0 for v in report.imputed_per_column.values())

    def test_exact_linear_relation_recovered(self):
        rng = np.random.default_rng(1)
        x = rng.random(60)
        m = np.column_stack([x, 2 * x])
        m[7, 1] = np.nan
        out, _ = mice_impute(m, MiceConfig(n_iterations=20, convergence_tol=1e-10))
        assert out[7, 1] == pytest.approx(2 * x[7], abs=1e-6)

    def test_observed_cells_untouched(self):
        rng = np.random.default_rng(2)
        m = rng.random((40, 4))
        mask = rng.random(m.shape) < 0.2
        m[mask] = np.nan
        out, _ = mice_impute(m)
        assert np.array_equal(out[~mask], m[~mask])

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        m = rng.random((30, 3))
        m[rng.random(m.shape) < 0.25] = np.nan
        a, _ = mice_impute(m)
        b, _ = mice_impute(m)
        assert np.array_equal(a, b)

    def test_imputed_within_padded_range(self):
        rng = np.random.default_rng(4)
        m = rng.random((50, 3))
        mask = rng.random(m.shape) < 0.2
        m[mask] = np.nan
        out, _ = mice_impute(m)
        for j in range(3):
            col = m[~np.isnan(m[:, j]), j]
            pad = 0.1 * (col.max() - col.min())
            assert out[:, j].min() >= col.min() - pad - 1e-12
            assert out[:, j].max() <= col.max() + pad + 1e-12

    def test_fully_missing_column_named(self):
        m = np.ones((5, 2))
        m[:, 1] = np.nan
        with pytest.raises(ValueError, match="no2"):
            mice_impute(m, column_names=["pm25", "no2"])

    def test_counts_match_mask(self):
        m = np.arange(20, dtype=float).reshape(10, 2)
        m[3, 0] = np.nan
        m[5, 1] = np.nan
        m[6, 1] = np.nan
        _, report = mice_impute(m, column_names=["a", "b"])
        assert report.imputed_per_column == {"a": 1, "b": 2}

    def test_beats_mean_fill_on_mar_synthetic(self, synth_pair):
        masked, truth = synth_pair
        raw = masked.to_matrix()
        normalizer = fit_station_normalizer(raw)
        scaled = normalize_matrix(raw, normalizer)
        truth_scaled = normalize_matrix(truth.to_matrix(), normalizer)
        mask = np.isnan(scaled)
        completed, _ = mice_impute(scaled)

        mean_fill = scaled.copy()
        for j in range(scaled.shape[1]):
            col = scaled[:, j]
            mean_fill[np.isnan(col), j] = col[~np.isnan(col)].mean()

        mice_rmse = np.sqrt(np.nanmean((completed[mask] - truth_scaled[mask]) ** 2))
        mean_rmse = np.sqrt(np.nanmean((mean_fill[mask] - truth_scaled[mask]) ** 2))
        assert mice_rmse <= 0.7 * mean_rmse
