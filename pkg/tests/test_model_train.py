"""Prioritized-epoch bookkeeping, determinism, persistence, convergence."""

import numpy as np
import pytest

from musel.model import ArchConfig, DklModel, NumericsError


def _toy_data(n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, 4))
    w = np.array([1.5, -2.0, 1.0, 0.5])
    y = np.column_stack([np.sin(x @ w) + rng.normal(0, 0.05, n),
                         np.cos(x @ w) + rng.normal(0, 0.05, n)])
    return x, y


SMALL = ArchConfig(widths=(4, 8, 8), n_inducing=5, n_heads=2)


class TestVisitCounters:
    def test_single_epoch_visits_everything_once(self):
        x, y = _toy_data(100)
        model = DklModel.init(0, SMALL)
        model.train_epoch(x, y, np.random.default_rng(0))
        assert np.all(model.visits[:100] == 1)

    def test_counters_equal_after_k_epochs(self):
        x, y = _toy_data(70)
        model = DklModel.init(0, SMALL)
        rng = np.random.default_rng(1)
        for _ in range(3):
            model.train_epoch(x, y, rng)
        assert np.all(model.visits[:70] == 3)

    def test_least_visited_selected_first(self):
        x, y = _toy_data(50)
        model = DklModel.init(0, SMALL)
        rng = np.random.default_rng(2)
        model.train_epoch(x, y, rng)          # everyone at 1
        x2, y2 = _toy_data(60, seed=5)        # 10 fresh rows appended
        model.train_epoch(x2, y2, rng, m_train=10)
        assert np.all(model.visits[50:60] == 1)
        assert np.all(model.visits[:50] == 1)

    def test_ties_broken_by_insertion_order(self):
        x, y = _toy_data(40)
        model = DklModel.init(0, SMALL)
        model.train_epoch(x, y, np.random.default_rng(0), m_train=16)
        assert np.all(model.visits[:16] == 1)
        assert np.all(model.visits[16:40] == 0)


class TestDeterminism:
    def test_same_seed_same_parameters(self):
        x, y = _toy_data(64)

        def run():
            model = DklModel.init(42, SMALL)
            rng = np.random.default_rng(7)
            for _ in range(4):
                model.train_epoch(x, y, rng)
            return model.theta

        np.testing.assert_array_equal(run(), run())

    def test_same_seed_same_init(self):
        a = DklModel.init(3)
        b = DklModel.init(3)
        np.testing.assert_array_equal(a.theta, b.theta)


class TestCheckpoint:
    def test_bit_exact_roundtrip(self, tmp_path):
        x, y = _toy_data(30)
        model = DklModel.init(1, SMALL)
        model.train_epoch(x, y, np.random.default_rng(3))
        path = tmp_path / "ckpt.npz"
        model.save(path)
        again = DklModel.load(path)
        np.testing.assert_array_equal(model.theta, again.theta)
        np.testing.assert_array_equal(model.visits, again.visits)
        np.testing.assert_array_equal(model.adam.m, again.adam.m)
        np.testing.assert_array_equal(model.adam.v, again.adam.v)
        assert model.adam.t == again.adam.t
        assert model.arch == again.arch
        # training continues identically from the restored state
        r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
        model.train_epoch(x, y, r1)
        again.train_epoch(x, y, r2)
        np.testing.assert_array_equal(model.theta, again.theta)


class TestTraining:
    def test_empty_dataset_rejected(self):
        model = DklModel.init(0, SMALL)
        with pytest.raises(ValueError):
            model.train_epoch(np.zeros((0, 4)), np.zeros((0, 2)),
                              np.random.default_rng(0))

    def test_nonfinite_objective_aborts(self):
        x, y = _toy_data(20)
        model = DklModel.init(0, SMALL)
        model.theta[0] = np.nan  # a blown-up parameter poisons the ELBO
        with pytest.raises(NumericsError):
            with np.errstate(all="ignore"):
                model.train_epoch(x, y, np.random.default_rng(0))

    def test_synthetic_convergence(self):
        # 200-point smooth target: 300 prioritized epochs get well under the
        # 0.15 RMSE gate (pilot runs land near 0.05)
        x, y = _toy_data(200, seed=42)
        model = DklModel.init(7)
        rng = np.random.default_rng(99)
        for _ in range(300):
            model.train_epoch(x, y, rng)
        mean, _ = model.predict(x)
        rmse = np.sqrt(((mean - y) ** 2).sum(axis=1).mean())
        assert rmse < 0.15
