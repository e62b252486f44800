"""Gradient engine versus central finite differences."""

import numpy as np

from musel.model import ArchConfig, DklModel
from musel.model import svgp


def finite_difference(model, x, y, n, h=1e-5):
    fd = np.zeros_like(model.theta)
    base = model.theta.copy()
    for i in range(base.size):
        tp = base.copy()
        tp[i] += h
        tm = base.copy()
        tm[i] -= h
        vp, _ = model.elbo(x, y, n, theta=tp)
        vm, _ = model.elbo(x, y, n, theta=tm)
        fd[i] = (vp - vm) / (2.0 * h)
    return fd


def random_small_model(seed):
    """Small randomized model with no pre-activation near a rectifier kink
    (finite differences are only a valid oracle away from the kinks)."""
    rng = np.random.default_rng(seed)
    arch = ArchConfig(widths=(4, 6, 5, 4), n_inducing=3, n_heads=2)
    for _ in range(50):
        model = DklModel.init(rng.integers(1 << 31), arch)
        model.theta += rng.normal(0.0, 0.3, model.theta.shape)
        x = rng.uniform(-1.0, 1.0, (10, 4))
        y = rng.normal(0.0, 1.0, (10, 2))
        ws, bs = model._net()
        from musel.model import mlp
        _, (pre, _) = mlp.forward(ws, bs, x)
        if min(np.abs(a).min() for a in pre[:-1]) > 1e-3:
            return model, x, y
    raise AssertionError("could not draw a kink-free configuration")


class TestFiniteDifferences:
    def test_small_model_all_coordinates(self):
        model, x, y = random_small_model(123)
        _, grad = model.elbo_and_grad(x, y, 10)
        fd = finite_difference(model, x, y, 10)
        rel = np.abs(grad - fd) / np.maximum(np.abs(grad), 1e-8)
        assert rel.max() < 1e-4

    def test_kl_gradient_vanishes_at_prior(self):
        # m = 0, S = K_ZZ is the KL minimum: full gradient of -KL is zero
        arch = ArchConfig(widths=(4, 4), n_inducing=5, n_heads=1)
        model = DklModel.init(2, arch)
        model.layout.view(model.theta, "w0")[:] = np.eye(4)
        head = model.head(0)
        c = svgp._common(head, np.zeros((1, 4)), model.arch.jitter)
        from scipy.linalg import cholesky
        L = cholesky(c["P"], lower=True)
        tril = np.tril_indices(5)
        packed = L[tril].copy()
        diag_slots = np.where(tril[0] == tril[1])[0]
        packed[diag_slots] = svgp.softplus_inv(packed[diag_slots])
        model.layout.view(model.theta, "h0.L_packed")[:] = packed
        phi = np.zeros((1, 4))
        _, _, _, grads, _ = svgp.elbo_and_grads(model.head(0), phi,
                                                np.zeros(1), 0.0,
                                                model.arch.jitter)
        assert np.abs(grads["m"]).max() < 1e-9
        assert np.abs(grads["L_packed"]).max() < 1e-8
        # Z and hypers only influence -KL here, which is at its minimum
        assert np.abs(grads["Z"]).max() < 1e-7

    def test_zero_weight_gradient_is_neg_kl_gradient(self):
        # with the data term weighted by zero only the KL survives
        rng = np.random.default_rng(9)
        arch = ArchConfig(widths=(4, 4), n_inducing=4, n_heads=1)
        model = DklModel.init(9, arch)
        model.theta += rng.normal(0, 0.2, model.theta.shape)
        phi = rng.uniform(-1, 1, (6, 4))
        y = rng.normal(0, 1, 6)
        head = model.head(0)
        value, data, kl, grads, g_phi = svgp.elbo_and_grads(
            head, phi, y, 0.0, model.arch.jitter)
        assert data == 0.0
        assert abs(value + kl) < 1e-12
        # finite differences of -KL over the variational mean
        h = 1e-6
        fd = np.zeros_like(head.m)
        for i in range(fd.size):
            for sgn, acc in ((1, 1.0), (-1, -1.0)):
                head.m[i] += sgn * h
                c = svgp._common(head, phi, model.arch.jitter)
                k, _, _ = svgp.kl_term(head, c)
                fd[i] += acc * (-k)
                head.m[i] -= sgn * h
        fd /= 2.0 * h
        np.testing.assert_allclose(grads["m"], fd, atol=1e-6)
