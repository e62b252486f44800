"""Placement validity, input sampling, and push-stroke geometry."""

import math

import numpy as np
import pytest
from scipy import stats

from musel import env
from musel.env import InputPoint, WorldConfig


class TestValidity:
    def test_center_is_valid(self, world):
        assert env.is_valid_position(world, (0.0, 0.0))

    def test_outside_table_invalid(self, world):
        assert not env.is_valid_position(world, (5.0, 0.0))
        assert not env.is_valid_position(world, (0.0, -4.2))

    def test_wall_clearance(self, world):
        bound = world.half_extent - world.ball_radius - world.margin
        assert env.is_valid_position(world, (bound - 1e-9, 0.0))
        assert not env.is_valid_position(world, (bound + 1e-6, 0.0))

    def test_cut_corner_invalid(self, world):
        # the diagonal wall removes the +x/+y corner
        assert not env.is_valid_position(world, (3.0, 3.0))
        assert not env.is_valid_position(world, (3.6, 3.6))

    def test_fixed_ball_blocks_placement(self, world2):
        assert not env.is_valid_position(world2, world2.fixed_ball)
        near = (world2.fixed_ball[0] + 0.3, world2.fixed_ball[1])
        assert not env.is_valid_position(world2, near)
        far = (world2.fixed_ball[0] - 2.0, world2.fixed_ball[1])
        assert env.is_valid_position(world2, far)

    def test_same_spot_one_sphere_fine(self, world):
        assert env.is_valid_position(world, (1.5, 1.5))


class TestConfig:
    def test_bad_restitution(self):
        with pytest.raises(env.ConfigError):
            WorldConfig(restitution=0.0)
        with pytest.raises(env.ConfigError):
            WorldConfig(restitution=1.2)

    def test_diag_must_touch_edges(self):
        with pytest.raises(env.ConfigError):
            WorldConfig(diag_start=(1.0, 1.0))

    def test_diag_endpoints_distinct_edges(self):
        with pytest.raises(env.ConfigError):
            WorldConfig(diag_start=(1.0, 4.0), diag_end=(2.0, 4.0))

    def test_fixed_ball_must_be_valid(self):
        with pytest.raises(env.ConfigError):
            WorldConfig(task="two_sphere", fixed_ball=(3.9, 0.0))

    def test_json_roundtrip(self, tmp_path, world2):
        path = tmp_path / "world.json"
        world2.to_json(path)
        again = WorldConfig.from_json(path)
        assert again == world2
        assert "units" in path.read_text()

    def test_json_rejects_unknown_fields(self):
        with pytest.raises(env.ConfigError):
            WorldConfig.from_json('{"half_extent": 4.0, "bogus": 1}')


class TestInputPoint:
    def test_alpha_range_enforced(self):
        with pytest.raises(ValueError):
            InputPoint(2.0, (0.0, 0.0))

    def test_encoding_unit_circle(self, world, rng):
        for p in env.sample_input_space(world, rng, 50):
            enc = p.encoded
            assert abs(enc[0] ** 2 + enc[1] ** 2 - 1.0) < 1e-12
            assert enc[2] == p.pos[0] and enc[3] == p.pos[1]


class TestSampling:
    def test_exact_count_and_validity(self, world2, rng):
        pts = env.sample_input_space(world2, rng, 500)
        assert len(pts) == 500
        assert all(env.is_valid_position(world2, p.pos) for p in pts)

    def test_seeded_determinism(self, world):
        a = env.sample_input_space(world, np.random.default_rng(7), 1)[0]
        b = env.sample_input_space(world, np.random.default_rng(7), 1)[0]
        assert a == b

    def test_m_must_be_positive(self, world, rng):
        with pytest.raises(ValueError):
            env.sample_input_space(world, rng, 0)

    def test_degenerate_world_fails(self):
        # a huge margin leaves no valid placements at all
        cfg = WorldConfig(margin=3.7, sample_attempt_cap=200)
        with pytest.raises(env.SamplingError):
            env.sample_input_space(cfg, np.random.default_rng(0), 1)

    def test_alpha_uniform_chi_square(self, world):
        rng = np.random.default_rng(99)
        alphas = np.array([p.alpha for p in
                           env.sample_input_space(world, rng, 100_000)])
        counts, _ = np.histogram(alphas, bins=12,
                                 range=(env.ALPHA_MIN, env.ALPHA_MAX))
        _, p = stats.chisquare(counts)
        assert p > 0.01


class TestPushEndpoints:
    def test_axis_aligned(self, world):
        cfg = world
        x = InputPoint(0.0, (0.0, 0.0))
        start, end = env.push_endpoints(cfg, x)
        np.testing.assert_allclose(start, [-cfg.push_offset, 0.0], atol=1e-15)
        np.testing.assert_allclose(end, [cfg.push_offset, 0.0], atol=1e-15)

    def test_sixty_degrees(self, world):
        x = InputPoint(math.pi / 3.0, (0.0, 0.0))
        start, _ = env.push_endpoints(world, x)
        r = world.push_offset
        np.testing.assert_allclose(start, [-0.5 * r, -math.sqrt(3) / 2 * r],
                                   atol=1e-12)

    def test_midpoint_is_position(self, world, rng):
        for p in env.sample_input_space(world, rng, 100):
            start, end = env.push_endpoints(world, p)
            np.testing.assert_allclose((start + end) / 2.0, p.pos, atol=1e-12)
            assert abs(np.linalg.norm(end - start) -
                       2 * world.push_offset) < 1e-12
