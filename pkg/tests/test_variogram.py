import numpy as np
import pytest

from fess import (
    EmpiricalVariogram,
    EstimationError,
    EvalGrid,
    FitError,
    FitOptions,
    LagBins,
    TraceCovModel,
    ValidationError,
    default_lag_bins,
    empirical_trace_covariogram,
    empirical_trace_variogram,
    fit_model,
    model_trace_cov,
    model_trace_variogram,
    pairwise_distances,
    trapz_inner,
)
from fess.rng import derived_rng
from fess.variogram import read_model_json, write_model_json

from conftest import make_dataset, random_dataset

FAMILIES = ("exponential", "spherical", "gaussian")


class TestLagBins:
    def test_validation(self):
        with pytest.raises(ValidationError):
            LagBins([5.0])
        with pytest.raises(ValidationError):
            LagBins([-1.0, 2.0])
        with pytest.raises(ValidationError):
            LagBins([0.0, 0.0, 1.0])

    def test_index_of_conventions(self):
        bins = LagBins([0.0, 1.0, 2.0])
        h = np.array([0.0, 0.5, 1.0, 2.0, 2.5])
        assert list(bins.index_of(h)) == [0, 0, 1, 1, -1]

    def test_default_bins_span_half_max(self):
        D = pairwise_distances(np.array([[0.0, 0.0], [100.0, 0.0]]))
        bins = default_lag_bins(D, n_bins=10)
        assert len(bins) == 10
        assert bins.edges[0] == 0.0 and bins.edges[-1] == 50.0


class TestModelFamilies:
    def test_exponential_at_range(self):
        m = TraceCovModel("exponential", 2.0, 1.0)
        assert model_trace_cov(m, 1.0) == pytest.approx(2.0 * np.exp(-1.0))
        assert model_trace_cov(m, 1.0) == pytest.approx(0.735759, abs=1e-6)

    def test_spherical_vanishes_past_range(self):
        m = TraceCovModel("spherical", 3.0, 10.0)
        assert model_trace_cov(m, 10.0) == 0.0
        assert model_trace_cov(m, 25.0) == 0.0

    @pytest.mark.parametrize("family", FAMILIES)
    def test_sill_at_zero_lag(self, family):
        m = TraceCovModel(family, 1.7, 50.0)
        assert model_trace_cov(m, 0.0) == pytest.approx(1.7)

    def test_nugget_only_at_exact_zero(self):
        m = TraceCovModel("exponential", 1.0, 10.0, nugget=0.5)
        assert model_trace_cov(m, 0.0) == pytest.approx(1.5)
        assert model_trace_cov(m, 1e-12) == pytest.approx(1.0, rel=1e-9)

    def test_variogram_zero_at_origin(self):
        for family in FAMILIES:
            m = TraceCovModel(family, 2.0, 5.0, nugget=0.3)
            assert model_trace_variogram(m, 0.0) == 0.0

    def test_exponential_variogram_reaches_sill(self):
        m = TraceCovModel("exponential", 1.0, 2.0)
        assert model_trace_variogram(m, 1e9) == pytest.approx(1.0)

    def test_spherical_paper_fit_reaches_sill_at_range(self):
        m = TraceCovModel("spherical", 1.769e-10, 186.8)
        assert model_trace_variogram(m, 186.8) == pytest.approx(1.769e-10)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_cov_plus_variogram_identity(self, family):
        m = TraceCovModel(family, 2.3, 40.0, nugget=0.7)
        h = np.linspace(0.1, 200.0, 57)
        total = model_trace_cov(m, h) + model_trace_variogram(m, h)
        assert np.allclose(total, m.sill + m.nugget, rtol=1e-12)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_cov_maximal_at_zero_and_variogram_monotone(self, family):
        rng = derived_rng(21)
        for _ in range(20):
            m = TraceCovModel(
                family,
                float(rng.uniform(0.1, 5.0)),
                float(rng.uniform(1.0, 100.0)),
                float(rng.uniform(0.0, 1.0)),
            )
            h = np.linspace(0.0, 400.0, 301)
            cov = model_trace_cov(m, h)
            assert np.all(cov >= 0.0)
            assert np.all(cov <= model_trace_cov(m, 0.0))
            gamma = model_trace_variogram(m, h)
            assert np.all(np.diff(gamma) >= -1e-15)

    def test_parameter_validation(self):
        with pytest.raises(ValidationError):
            TraceCovModel("exp", 1.0, 1.0)
        with pytest.raises(ValidationError):
            TraceCovModel("exponential", 0.0, 1.0)
        with pytest.raises(ValidationError):
            TraceCovModel("exponential", 1.0, -1.0)
        with pytest.raises(ValidationError):
            TraceCovModel("exponential", 1.0, 1.0, nugget=-0.1)


class TestEmpiricalVariogram:
    def test_identical_curves_give_zero(self):
        X = np.tile(np.array([1.0, 2.0, 3.0]), (4, 1))
        ds = make_dataset(X, xy=[[0, 0], [1, 0], [2, 0], [5, 0]])
        ev = empirical_trace_variogram(ds, LagBins([0.0, 3.0, 6.0]))
        assert np.all(ev.gamma[ev.occupied] == 0.0)
        assert ev.sigma0 == 0.0

    def test_opposite_pair_value(self):
        grid = EvalGrid(np.linspace(0.0, 1.0, 11))
        a = np.sin(np.linspace(0.0, 3.0, 11))
        ds = make_dataset(np.vstack([a, -a]), xy=[[0, 0], [2, 0]], grid=grid)
        ev = empirical_trace_variogram(ds, LagBins([0.0, 4.0]))
        expected = 2.0 * trapz_inner(a, a, grid)
        assert ev.gamma[0] == pytest.approx(expected, rel=1e-12)
        assert ev.counts[0] == 1
        # occupied bin reports the actual pair distance
        assert ev.centers[0] == 2.0

    def test_covariogram_opposite_pair(self):
        grid = EvalGrid(np.linspace(0.0, 1.0, 11))
        a = np.cos(np.linspace(0.0, 2.0, 11))
        ds = make_dataset(np.vstack([a, -a]), xy=[[0, 0], [2, 0]], grid=grid)
        ec = empirical_trace_covariogram(ds, LagBins([0.0, 4.0]))
        assert ec.gamma[0] == pytest.approx(-trapz_inner(a, a, grid), rel=1e-12)

    def test_covariogram_identical_two_curves(self):
        X = np.tile(np.array([1.0, -2.0, 0.5]), (2, 1))
        ds = make_dataset(X, xy=[[0, 0], [1, 0]])
        ec = empirical_trace_covariogram(ds, LagBins([0.0, 2.0]))
        assert ec.gamma[0] == 0.0 and ec.sigma0 == 0.0

    def test_sigma0_matches_between_estimators(self):
        rng = derived_rng(22)
        ds = random_dataset(rng, 12, 7)
        bins = default_lag_bins(pairwise_distances(ds.xy))
        ev = empirical_trace_variogram(ds, bins)
        ec = empirical_trace_covariogram(ds, bins)
        assert ev.sigma0 == ec.sigma0

    def test_gamma_nonnegative(self):
        rng = derived_rng(23)
        for _ in range(20):
            ds = random_dataset(rng, 10, 5)
            ev = empirical_trace_variogram(
                ds, default_lag_bins(pairwise_distances(ds.xy), 5)
            )
            assert np.all(ev.gamma[ev.occupied] >= 0.0)

    def test_permutation_invariance_bitwise(self):
        rng = derived_rng(24)
        ds = random_dataset(rng, 15, 6)
        perm = rng.permutation(15)
        ds_p = ds.subset(perm)
        bins = default_lag_bins(pairwise_distances(ds.xy), 6)
        for estimator in (empirical_trace_variogram, empirical_trace_covariogram):
            a = estimator(ds, bins)
            b = estimator(ds_p, bins)
            assert np.array_equal(a.gamma, b.gamma, equal_nan=True)
            assert np.array_equal(a.counts, b.counts)
            assert np.array_equal(a.centers, b.centers)
            assert a.sigma0 == b.sigma0

    def test_no_pairs_in_any_bin_raises(self):
        ds = make_dataset(np.zeros((3, 2)), xy=[[0, 0], [1, 0], [2, 0]])
        with pytest.raises(EstimationError, match="occupancy"):
            empirical_trace_variogram(ds, LagBins([10.0, 20.0]))

    def test_duplicate_stations_fall_in_first_bin(self):
        ds = make_dataset(
            np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]),
            xy=[[0, 0], [0, 0], [3, 0]],
        )
        ev = empirical_trace_variogram(ds, LagBins([0.0, 1.0, 4.0]))
        assert ev.counts[0] == 1  # the duplicated pair, at h = 0
        assert ev.centers[0] == 0.0

    def test_iid_curves_flatten_near_sigma0(self):
        # Monte Carlo: iid curves with per-level variance v on 22 uniform
        # levels over [10, 220]; the trace-variogram of independent
        # curves is flat at v * span (the trace variance) for every
        # positive lag. 200 replicates, per-bin 3-standard-error bands.
        rng = derived_rng(25)
        v = 0.7
        grid = EvalGrid(np.linspace(10.0, 220.0, 22))
        bins = LagBins(np.linspace(0.0, 50.0, 6))
        n = 24
        reps = 200
        per_bin = np.full((reps, len(bins)), np.nan)
        sigma0s = np.empty(reps)
        for r in range(reps):
            xy = rng.uniform(0.0, 100.0, size=(n, 2))
            curves = np.sqrt(v) * rng.standard_normal((n, 22))
            ds = make_dataset(curves, xy=xy, grid=grid)
            ev = empirical_trace_variogram(ds, bins)
            per_bin[r, ev.occupied] = ev.gamma[ev.occupied]
            sigma0s[r] = ev.sigma0
        lvl = v * (220.0 - 10.0)
        for l in range(len(bins)):
            vals = per_bin[~np.isnan(per_bin[:, l]), l]
            assert vals.size > 100
            se = vals.std(ddof=1) / np.sqrt(vals.size)
            assert abs(vals.mean() - lvl) < 3.0 * se
        # sigma0 estimates the same level (up to its 1/n mean-removal bias)
        se0 = sigma0s.std(ddof=1) / np.sqrt(reps)
        assert abs(sigma0s.mean() - (1.0 - 1.0 / n) * lvl) < 3.0 * se0

    def test_csv_round_trip(self, tmp_path):
        rng = derived_rng(26)
        ds = random_dataset(rng, 10, 4)
        ev = empirical_trace_variogram(ds, default_lag_bins(pairwise_distances(ds.xy), 5))
        path = tmp_path / "emp.csv"
        ev.to_csv(path)
        back = EmpiricalVariogram.from_csv(path)
        assert np.array_equal(back.centers, ev.centers)
        assert np.array_equal(back.gamma, ev.gamma, equal_nan=True)
        assert np.array_equal(back.counts, ev.counts)
        assert back.sigma0 is None


def exact_variogram_record(family, sill, rng_km, n_bins=15, h_max=300.0, nugget=0.0):
    bins = LagBins.equal_width(h_max, n_bins)
    model = TraceCovModel(family, sill, rng_km, nugget)
    gamma = model_trace_variogram(model, bins.centers)
    return EmpiricalVariogram(
        bins.centers, gamma, np.full(n_bins, 20, dtype=int), sigma0=sill + nugget
    )


class TestFitModel:
    def test_exact_exponential_recovery(self):
        ev = exact_variogram_record("exponential", 1.0, 100.0)
        res = fit_model(ev, "exponential")
        assert res.model.sill == pytest.approx(1.0, rel=1e-6)
        assert res.model.range_km == pytest.approx(100.0, rel=1e-6)
        assert res.model.nugget == 0.0

    @pytest.mark.parametrize(
        "family,sill,rng_km",
        [
            ("exponential", 1.985e-10, 104.4),
            ("spherical", 1.769e-10, 186.8),
            ("gaussian", 1.719e-10, 81.12),
        ],
    )
    def test_tiny_sill_recovery(self, family, sill, rng_km):
        # magnitudes matching real trace-variograms of velocity profiles
        ev = exact_variogram_record(family, sill, rng_km)
        res = fit_model(ev, family)
        assert res.model.sill == pytest.approx(sill, rel=1e-6)
        assert res.model.range_km == pytest.approx(rng_km, rel=1e-6)

    def test_freed_nugget_estimated_zero_on_nugget_free_data(self):
        ev = exact_variogram_record("exponential", 1.0, 100.0)
        res = fit_model(ev, "exponential", FitOptions(nugget="free"))
        assert res.model.nugget == 0.0

    def test_freed_nugget_recovered_when_present(self):
        ev = exact_variogram_record("exponential", 1.0, 100.0, nugget=0.25)
        res = fit_model(ev, "exponential", FitOptions(nugget="free"))
        assert res.model.nugget == pytest.approx(0.25, rel=1e-3)
        assert res.model.sill == pytest.approx(1.0, rel=1e-3)

    def test_objective_never_worse_than_seed(self):
        # monotone acceptance: returned sse cannot exceed the objective at
        # the documented empirical seed
        rng = derived_rng(27)
        for _ in range(10):
            ds = random_dataset(rng, 20, 6)
            ev = empirical_trace_variogram(
                ds, default_lag_bins(pairwise_distances(ds.xy), 8)
            )
            res = fit_model(ev, "exponential")
            occ = ev.occupied
            g = ev.gamma[occ]
            tail = g[-max(1, g.size // 3):]
            sill0 = float(np.mean(tail)) if np.mean(tail) > 0 else float(np.max(g))
            reached = np.flatnonzero(g >= 0.95 * sill0)
            h = ev.centers[occ]
            range0 = float(h[reached[0]]) if reached.size else float(h[-1])
            seed_model = TraceCovModel("exponential", sill0, range0)
            resid = g - model_trace_variogram(seed_model, h)
            f_init = float(np.dot(resid, resid))
            assert res.sse <= f_init * (1.0 + 1e-9) + 1e-300

    def test_flat_input_pins_range_with_warning(self):
        bins = LagBins.equal_width(100.0, 5)
        ev = EmpiricalVariogram(
            bins.centers, np.full(5, 2.0), np.full(5, 8, dtype=int), sigma0=2.0
        )
        res = fit_model(ev, "exponential")
        assert any("flat" in w for w in res.warnings)
        assert res.model.range_km <= 1e-4  # pinned near the lower bound
        assert res.model.sill == pytest.approx(2.0)

    def test_needs_three_occupied_bins(self):
        bins = LagBins.equal_width(10.0, 2)
        ev = EmpiricalVariogram(
            bins.centers, np.array([1.0, 1.1]), np.array([4, 4]), sigma0=1.0
        )
        with pytest.raises(ValidationError, match="3 occupied"):
            fit_model(ev, "exponential")

    def test_nonconvergence_carries_best_so_far(self):
        ev = exact_variogram_record("gaussian", 1.0, 50.0)
        with pytest.raises(FitError) as err:
            fit_model(ev, "gaussian", FitOptions(max_iter=1))
        assert err.value.best is not None
        assert np.isfinite(err.value.sse)

    def test_count_weighting_changes_objective(self):
        rng = derived_rng(28)
        ds = random_dataset(rng, 25, 5)
        ev = empirical_trace_variogram(
            ds, default_lag_bins(pairwise_distances(ds.xy), 8)
        )
        res_eq = fit_model(ev, "exponential")
        res_ct = fit_model(ev, "exponential", FitOptions(weighting="counts"))
        assert res_eq.model.range_km != res_ct.model.range_km

    def test_empty_bins_are_skipped(self):
        bins = LagBins.equal_width(100.0, 6)
        gamma = np.array([0.5, np.nan, 0.8, 0.9, np.nan, 1.0])
        counts = np.array([5, 0, 5, 5, 0, 5])
        ev = EmpiricalVariogram(bins.centers, gamma, counts, sigma0=1.0)
        res = fit_model(ev, "exponential")
        assert np.isfinite(res.sse)

    def test_model_json_round_trip(self, tmp_path):
        ev = exact_variogram_record("spherical", 2.0, 80.0)
        res = fit_model(ev, "spherical")
        path = tmp_path / "model.json"
        write_model_json(res, path)
        model, sse = read_model_json(path)
        assert model == res.model
        assert sse == res.sse
