"""Dense GP oracle sanity checks."""

import numpy as np
import pytest

from musel.model import ExactGP


class TestExactGP:
    def test_single_point_closed_form(self):
        # n = 1: posterior mean at the training point is y s^2 / (s^2 + noise)
        s, noise, y = 1.3, 0.2, 2.0
        gp = ExactGP(np.zeros((1, 2)), np.array([y]), lengthscale=0.7,
                     outputscale=s, noise_var=noise, jitter=0.0)
        mean, std = gp.predict(np.zeros((1, 2)))
        assert abs(mean[0] - y * s * s / (s * s + noise)) < 1e-12
        var_expected = s * s - s ** 4 / (s * s + noise) + noise
        assert abs(std[0] ** 2 - var_expected) < 1e-12

    def test_symmetric_inputs_symmetric_predictions(self):
        x = np.array([[-1.0, 0.0], [1.0, 0.0]])
        y = np.array([2.0, 2.0])
        gp = ExactGP(x, y, 1.0, 1.0, 0.1)
        q = np.array([[-0.5, 0.3], [0.5, 0.3]])
        mean, std = gp.predict(q)
        assert abs(mean[0] - mean[1]) < 1e-12
        assert abs(std[0] - std[1]) < 1e-12

    def test_size_cap(self):
        with pytest.raises(ValueError):
            ExactGP(np.zeros((2001, 1)), np.zeros(2001), 1.0, 1.0, 0.1)

    def test_interpolates_with_tiny_noise(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (12, 3))
        y = rng.normal(0, 1, 12)
        gp = ExactGP(x, y, 1.0, 1.0, 1e-8)
        mean, _ = gp.predict(x)
        np.testing.assert_allclose(mean, y, atol=1e-5)
