"""Region grid, learning progress, distances, and the combined score."""

import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from musel import uncertainty
from musel.encoding import encode_batch, encode_input
from musel.env import InputPoint, WorldConfig
from musel.model import DklModel
from musel.uncertainty import LpGrid, fit_slope, lp_from_slope


def _grid():
    return LpGrid(half_extent=4.0)


class TestRegionOf:
    def test_center_maps_to_middle_bin(self):
        g = _grid()
        assert g.unravel(g.region_of(InputPoint(0.0, (0.0, 0.0)))) == (3, 3, 3)

    def test_lower_bound_is_bin_zero(self):
        g = _grid()
        x = InputPoint(-math.pi / 3, (-4.0, -4.0))
        assert g.unravel(g.region_of(x)) == (0, 0, 0)

    def test_top_edge_inclusive(self):
        g = _grid()
        x = InputPoint(math.pi / 3, (4.0, 4.0))
        assert g.unravel(g.region_of(x)) == (6, 6, 6)

    def test_central_alpha_bin_width(self):
        # the middle angle bin spans [-pi/21, pi/21), i.e. +-8.57 degrees
        g = _grid()
        half_bin = math.pi / 21.0
        eps = 1e-9
        assert g.unravel(g.region_of(InputPoint(-half_bin + eps, (0, 0))))[0] == 3
        assert g.unravel(g.region_of(InputPoint(half_bin - eps, (0, 0))))[0] == 3
        assert g.unravel(g.region_of(InputPoint(half_bin + eps, (0, 0))))[0] == 4
        assert g.unravel(g.region_of(InputPoint(-half_bin - eps, (0, 0))))[0] == 2
        assert abs(math.degrees(half_bin) - 8.5714) < 1e-3

    def test_out_of_range_rejected(self):
        g = _grid()
        with pytest.raises(ValueError):
            g.region_of(InputPoint(0.0, (5.0, 0.0)))

    def test_partition_total_and_exhaustive(self):
        g = _grid()
        rng = np.random.default_rng(0)
        n = 1_000_000
        alphas = rng.uniform(-math.pi / 3, math.pi / 3, n)
        pos = rng.uniform(-4, 4, (n, 2))
        regions = g.region_of_batch(alphas, pos)
        counts = np.bincount(regions, minlength=g.n_regions)
        assert counts.sum() == n
        assert regions.min() >= 0 and regions.max() < 343


class TestMinDistance:
    def test_member_distance_zero(self):
        obs = encode_batch([InputPoint(0.3, (1.0, 2.0))], 4.0)
        x = encode_input(InputPoint(0.3, (1.0, 2.0)), 4.0)
        assert uncertainty.min_distance(x, obs) == 0.0

    def test_quarter_unit_example(self):
        # positions one table unit apart differ by 1/4 after normalization
        obs = encode_batch([InputPoint(0.0, (0.0, 0.0))], 4.0)
        x = encode_input(InputPoint(0.0, (1.0, 0.0)), 4.0)
        assert abs(uncertainty.min_distance(x, obs) - 0.25) < 1e-12

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            uncertainty.min_distance(np.zeros(4), np.zeros((0, 4)))

    def test_matches_kdtree(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1, 1, (2000, 4))
        queries = rng.uniform(-1, 1, (10_000, 4))
        from musel.kernels import min_dist_batch
        brute = min_dist_batch(queries, pts)
        tree_d, _ = cKDTree(pts).query(queries)
        np.testing.assert_allclose(brute, tree_d, atol=1e-12)


class TestLearningProgress:
    def test_cold_start_is_one(self):
        g = _grid()
        assert g.learning_progress(0) == 1.0
        g.buffers[0].append(3.0)
        assert g.learning_progress(0) == 1.0  # still fewer than 2 snapshots

    def test_decreasing_errors_arctan_half(self):
        g = _grid()
        g.buffers[5] = [5.0, 4.0, 3.0, 2.0, 1.0]
        assert abs(g.learning_progress(5) - 0.5) < 1e-12

    def test_increasing_errors_floor(self):
        g = _grid()
        g.buffers[5] = [1.0, 2.0, 3.0]
        assert g.learning_progress(5) == uncertainty.LP_FLOOR

    def test_flat_errors_floor(self):
        assert lp_from_slope(0.0) == uncertainty.LP_FLOOR

    def test_steep_decrease_saturates_below_one(self):
        assert lp_from_slope(-1e12) < 1.0
        assert lp_from_slope(-1e12) > 0.99

    def test_slope_matches_polyfit(self):
        rng = np.random.default_rng(2)
        for n in (2, 3, 7, 10):
            vals = rng.normal(0, 1, n)
            ref = np.polyfit(np.arange(1, n + 1), vals, 1)[0]
            assert abs(fit_slope(vals) - ref) < 1e-12


class TestErrorAccumulation:
    def test_perfect_prediction_contributes_zero(self):
        g = _grid()
        x = InputPoint(0.0, (0.0, 0.0))
        g.record_error(x, (1.0, 2.0), (1.0, 2.0))
        g.snapshot_errors()
        assert g.buffers[g.region_of(x)] == [0.0]

    def test_three_four_five(self):
        g = _grid()
        x = InputPoint(0.0, (0.0, 0.0))
        g.record_error(x, (0.0, 0.0), (3.0, 4.0))
        assert g.pending_sum[g.region_of(x)] == 5.0

    def test_snapshot_takes_mean_and_clears(self):
        g = _grid()
        x = InputPoint(0.0, (0.0, 0.0))
        g.record_error(x, (0.0, 0.0), (2.0, 0.0))
        g.record_error(x, (0.0, 0.0), (4.0, 0.0))
        g.snapshot_errors()
        r = g.region_of(x)
        assert g.buffers[r] == [3.0]
        assert g.pending_cnt[r] == 0

    def test_untouched_regions_frozen(self):
        g = _grid()
        x = InputPoint(0.0, (0.0, 0.0))
        g.buffers[0] = [9.0, 8.0]
        g.record_error(x, (0.0, 0.0), (1.0, 0.0))
        g.snapshot_errors()
        assert g.buffers[0] == [9.0, 8.0]

    def test_window_rolls(self):
        g = LpGrid(half_extent=4.0, window=3)
        x = InputPoint(0.0, (0.0, 0.0))
        r = g.region_of(x)
        for k in range(5):
            g.record_error(x, (0.0, 0.0), (float(k), 0.0))
            g.snapshot_errors()
        assert g.buffers[r] == [2.0, 3.0, 4.0]


class TestCombinedScore:
    def _setup(self):
        world = WorldConfig()
        rng = np.random.default_rng(3)
        from musel import env
        pts = env.sample_input_space(world, rng, 30)
        model = DklModel.init(0)
        grid = LpGrid(world.half_extent)
        obs = encode_batch(pts[:20], world.half_extent)
        return world, model, grid, obs, pts

    def test_duplicate_of_training_point_scores_exactly_zero(self):
        world, model, grid, obs, pts = self._setup()
        cands = [pts[3], pts[25]]
        sigma, md, lp, u = uncertainty.estimate_model_uncertainty(
            model, grid, obs, cands, world.half_extent)
        assert md[0] == 0.0 and u[0] == 0.0
        assert md[1] > 0.0 and u[1] > 0.0

    def test_matches_straight_line_recomputation(self):
        world, model, grid, obs, pts = self._setup()
        grid.buffers[100] = [3.0, 2.0, 1.0]
        grid.lp[100] = grid.learning_progress(100)
        cands = pts[20:]
        sigma, md, lp, u = uncertainty.estimate_model_uncertainty(
            model, grid, obs, cands, world.half_extent)
        for j, cand in enumerate(cands):
            enc = encode_input(cand, world.half_extent)
            _, stds = model.predict(enc[None, :])
            s_ref = math.sqrt(float((stds ** 2).sum()))
            d_ref = math.sqrt(
                (((obs - enc) ** 2).sum(axis=1)).min())
            lp_ref = grid.lp[grid.region_of(cand)]
            assert abs(sigma[j] - s_ref) < 1e-9
            assert abs(md[j] - d_ref) < 1e-9
            assert abs(lp[j] - lp_ref) < 1e-12
            assert abs(u[j] - s_ref * d_ref * lp_ref) < 1e-9

    def test_sigma_rescaling_preserves_ranking(self):
        world, model, grid, obs, pts = self._setup()
        sigma, md, lp, u = uncertainty.estimate_model_uncertainty(
            model, grid, obs, pts[20:], world.half_extent)
        top = np.argmax(u)
        for c in (1e-6, 0.5, 3.0, 1e6):
            assert np.argmax((c * sigma) * md * lp) == top

    def test_lp_always_in_range(self):
        g = _grid()
        rng = np.random.default_rng(4)
        for _ in range(200):
            r = int(rng.integers(0, g.n_regions))
            g.buffers[r] = list(rng.normal(0, 5, int(rng.integers(2, 10))))
            val = g.learning_progress(r)
            assert uncertainty.LP_FLOOR <= val <= uncertainty.LP_CEIL
