import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuelspatial.errors import (
    EmptyInputError,
    EmptyWeightsError,
    ZeroVarianceColumnError,
    ZeroVarianceError,
)
from fuelspatial.geo import Bandwidth, GeoPoint, KernelShape, build_weights
from fuelspatial.spatial_stats import (
    MoranResult,
    moran_index,
    moran_sweep,
    pca_variance_explained,
    spearman_rank,
    variance_decomposition,
)

DAY0 = dt.date(2017, 1, 10)


def _random_points(n, seed=0):
    rng = np.random.default_rng(seed)
    return [GeoPoint(float(la), float(lo))
            for la, lo in zip(rng.uniform(30, 47, n), rng.uniform(-120, -75, n))]


def moran_oracle(values, dense):
    """Independent double-loop evaluation of the cross-product formula."""
    x = np.asarray(values, dtype=float)
    n = x.size
    xbar = x.mean()
    num = 0.0
    s0 = 0.0
    for i in range(n):
        for j in range(n):
            num += dense[i, j] * (x[i] - xbar) * (x[j] - xbar)
            s0 += dense[i, j]
    return (n / s0) * num / np.sum((x - xbar) ** 2)


class TestMoranIndex:
    def test_two_point_antisymmetric(self):
        pts = [GeoPoint(40.0, -100.0), GeoPoint(40.5, -100.0)]
        w = build_weights(pts, KernelShape.EXPONENTIAL, Bandwidth.fixed_distance(100.0))
        assert moran_index([1.0, -1.0], w).index == pytest.approx(-1.0, abs=1e-12)

    def test_constant_vector(self):
        pts = _random_points(3)
        w = build_weights(pts, KernelShape.EXPONENTIAL, Bandwidth.fixed_distance(100.0))
        with pytest.raises(ZeroVarianceError):
            moran_index([2.28, 2.28, 2.28], w)

    def test_all_zero_weights(self):
        pts = _random_points(4)
        w = build_weights(pts, KernelShape.STEP, Bandwidth.fixed_distance(0.001))
        with pytest.raises(EmptyWeightsError):
            moran_index([1.0, 2.0, 3.0, 4.0], w)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(11)
        pts = _random_points(6, seed=7)
        w = build_weights(pts, KernelShape.EXPONENTIAL, Bandwidth.fixed_distance(50.0))
        values = rng.normal(2.3, 0.2, 6)
        assert moran_index(values, w).index == pytest.approx(
            moran_oracle(values, w.to_dense()), abs=1e-12)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30)
    def test_affine_invariance(self, seed):
        rng = np.random.default_rng(seed)
        pts = _random_points(5, seed=seed)
        w = build_weights(pts, KernelShape.EXPONENTIAL, Bandwidth.fixed_distance(200.0))
        x = rng.normal(0, 1, 5)
        if np.ptp(x) == 0:
            return
        a, b = float(rng.uniform(0.1, 5)), float(rng.normal(0, 10))
        assert moran_index(a * x + b, w).index == pytest.approx(
            moran_index(x, w).index, abs=1e-9)

    def test_weight_scaling_invariance(self):
        rng = np.random.default_rng(3)
        pts = _random_points(6, seed=3)
        w = build_weights(pts, KernelShape.GAUSSIAN, Bandwidth.fixed_distance(300.0))
        x = rng.normal(0, 1, 6)
        from fuelspatial.geo import SpatialWeights
        scaled = SpatialWeights(w.n, w.rows, w.cols, w.data * 7.3, w.shape, w.bandwidth)
        assert moran_index(x, scaled).index == pytest.approx(
            moran_index(x, w).index, abs=1e-9)

    def test_row_standardized_option(self):
        pts = _random_points(5, seed=2)
        w = build_weights(pts, KernelShape.EXPONENTIAL, Bandwidth.fixed_distance(200.0))
        x = np.random.default_rng(2).normal(0, 1, 5)
        raw = moran_index(x, w).index
        std = moran_index(x, w, row_standardize=True).index
        assert std == pytest.approx(moran_oracle(x, w.row_standardized().to_dense()),
                                    abs=1e-12)
        assert std != raw  # generically different


class TestMoranSweep:
    def _panel(self, values, day=DAY0):
        return [(str(i), day, v) for i, v in enumerate(values)]

    def test_single_window_matches_direct(self):
        pts = _random_points(5, seed=4)
        locations = {str(i): p for i, p in enumerate(pts)}
        values = np.random.default_rng(4).normal(2.3, 0.2, 5)
        sweep = moran_sweep(self._panel(values), locations, "daily", [50.0])
        w = build_weights(pts, KernelShape.EXPONENTIAL, Bandwidth.fixed_distance(50.0))
        assert len(sweep.rows) == 1
        assert sweep.rows[0].result.index == pytest.approx(
            moran_index(values, w).index, abs=1e-12)

    def test_time_constant_panel_same_index(self):
        pts = _random_points(6, seed=5)
        locations = {str(i): p for i, p in enumerate(pts)}
        values = np.random.default_rng(5).normal(2.3, 0.2, 6)
        panel = []
        for d in range(4):
            panel += [(str(i), DAY0 + dt.timedelta(days=d), v)
                      for i, v in enumerate(values)]
        sweep = moran_sweep(panel, locations, "daily", [100.0])
        indices = [r.result.index for r in sweep.rows]
        assert len(indices) == 4
        assert np.ptp(indices) < 1e-12

    def test_smooth_longitude_field_decays(self):
        # values follow longitude smoothly: positive I, decreasing past the
        # pattern scale
        rng = np.random.default_rng(6)
        lon = rng.uniform(-110, -80, 40)
        lat = rng.uniform(35, 45, 40)
        pts = [GeoPoint(float(a), float(b)) for a, b in zip(lat, lon)]
        locations = {str(i): p for i, p in enumerate(pts)}
        values = np.sin((lon + 110) / 30 * np.pi) + rng.normal(0, 0.02, 40)
        panel = self._panel(values)
        sweep = moran_sweep(panel, locations, "daily", [50.0, 3000.0])
        by_d0 = {r.d0_km: r.result.index for r in sweep.rows}
        assert by_d0[50.0] > 0
        assert by_d0[50.0] > by_d0[3000.0]

    def test_small_window_skipped(self):
        pts = _random_points(2, seed=1)
        locations = {str(i): p for i, p in enumerate(pts)}
        sweep = moran_sweep(self._panel([1.0, 2.0]), locations, "daily", [100.0])
        assert not sweep.rows
        assert sweep.skipped and "fewer than 3" in sweep.skipped[0][1]

    def test_weekly_anchoring(self):
        pts = _random_points(4, seed=8)
        locations = {str(i): p for i, p in enumerate(pts)}
        values = np.random.default_rng(8).normal(2.3, 0.2, 4)
        panel = []
        for d in (0, 3, 8):
            panel += [(str(i), DAY0 + dt.timedelta(days=d), v)
                      for i, v in enumerate(values)]
        sweep = moran_sweep(panel, locations, "weekly", [200.0])
        starts = sorted({r.window_start for r in sweep.rows})
        assert starts == [DAY0, DAY0 + dt.timedelta(days=7)]

    def test_empty_panel(self):
        with pytest.raises(EmptyInputError):
            moran_sweep([], {}, "daily", [10.0])

    def test_csv_round_trip(self, tmp_path):
        pts = _random_points(4, seed=9)
        locations = {str(i): p for i, p in enumerate(pts)}
        values = np.random.default_rng(9).normal(2.3, 0.2, 4)
        sweep = moran_sweep(self._panel(values), locations, "daily", [30.0, 100.0])
        path = tmp_path / "sweep.csv"
        sweep.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "window_start,window_kind,d0_km,moran_i,n,sum_weights"
        assert len(lines) == 3


class TestSpearman:
    def test_identical(self):
        assert spearman_rank([1, 2, 3], [1, 2, 3]) == 1.0

    def test_reversed(self):
        assert spearman_rank([1, 2, 3], [3, 2, 1]) == -1.0

    def test_shortcut_value(self):
        # sum d^2 = 2 -> 1 - 12/24 = 0.5
        assert spearman_rank([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)

    def test_constant_vector(self):
        with pytest.raises(ZeroVarianceError):
            spearman_rank([1, 1, 1], [1, 2, 3])

    def test_ties_average_ranks(self):
        from scipy import stats as sps
        x = [1.0, 2.0, 2.0, 3.0]
        y = [4.0, 5.0, 6.0, 6.0]
        assert spearman_rank(x, y) == pytest.approx(sps.spearmanr(x, y).statistic,
                                                    abs=1e-12)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30)
    def test_monotone_transform_invariance(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(0, 1, 12)
        y = rng.normal(0, 1, 12)
        assert spearman_rank(np.exp(x), y) == pytest.approx(spearman_rank(x, y),
                                                            abs=1e-12)
        assert spearman_rank(x, y**3) == pytest.approx(spearman_rank(x, y), abs=1e-12)


class TestVarianceDecomposition:
    def test_constant_within_groups(self):
        vd = variance_decomposition([1.0, 1.0, 3.0, 3.0], ["a", "a", "b", "b"])
        assert vd.within == 0.0
        assert vd.between == pytest.approx(4.0)
        assert vd.total == pytest.approx(4.0)

    def test_single_group(self):
        vd = variance_decomposition([0.0, 2.0], ["a", "a"])
        assert vd.between == 0.0
        assert vd.within == pytest.approx(2.0)

    def test_random_matches_two_pass_oracle(self):
        rng = np.random.default_rng(12)
        x = rng.normal(0, 1, 20)
        g = rng.integers(0, 4, 20)
        vd = variance_decomposition(x, g)
        total = np.sum((x - x.mean()) ** 2)
        within = sum(np.sum((x[g == k] - x[g == k].mean()) ** 2) for k in range(4))
        assert vd.total == pytest.approx(total, rel=1e-10)
        assert vd.within == pytest.approx(within, rel=1e-10)
        assert vd.between == pytest.approx(total - within, rel=1e-10)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30)
    def test_sums_to_total(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(0, 1, 15)
        g = rng.integers(0, 3, 15)
        vd = variance_decomposition(x, g)
        assert vd.between + vd.within == pytest.approx(vd.total, rel=1e-9)
        assert vd.between >= 0 and vd.within >= 0

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            variance_decomposition([], [])


class TestPcaVarianceExplained:
    def test_identical_columns_rank_one(self):
        rng = np.random.default_rng(1)
        col = rng.normal(0, 1, 30)
        fr = pca_variance_explained(np.column_stack([col, col]), normalize=True)
        assert fr[0] == pytest.approx(1.0, abs=1e-12)
        assert fr[1] == pytest.approx(0.0, abs=1e-12)

    def test_independent_columns_isotropic(self):
        rng = np.random.default_rng(2)
        m = rng.normal(0, 1, (20_000, 2))
        fr = pca_variance_explained(m, normalize=True)
        assert fr[0] == pytest.approx(0.5, abs=0.02)
        assert fr[1] == pytest.approx(0.5, abs=0.02)

    def test_matches_eigendecomposition_oracle(self):
        rng = np.random.default_rng(3)
        m = rng.normal(0, 1, (50, 4)) @ rng.normal(0, 1, (4, 4))
        fr = pca_variance_explained(m)
        centered = m - m.mean(axis=0)
        eig = np.sort(np.linalg.eigvals(np.cov(centered, rowvar=False)).real)[::-1]
        assert np.allclose(fr, eig / eig.sum(), atol=1e-8)

    def test_sorted_and_sums_to_one(self):
        rng = np.random.default_rng(4)
        fr = pca_variance_explained(rng.normal(0, 1, (40, 5)), normalize=True)
        assert fr.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(fr) <= 1e-12)
        assert np.all(fr >= 0)

    def test_constant_column_rejected(self):
        m = np.column_stack([np.ones(10), np.arange(10.0)])
        with pytest.raises(ZeroVarianceColumnError) as exc:
            pca_variance_explained(m, normalize=True)
        assert exc.value.column == 0
