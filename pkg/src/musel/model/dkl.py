"""Deep-kernel regressor: shared MLP features + one SVGP head per output.

All trainable parameters live in one flat float64 vector so the optimizer,
the checkpoint format, and the finite-difference tests all see the same
thing.  Training maximizes the mini-batch ELBO with Adam.
"""

import dataclasses
import json

import numpy as np

from . import mlp, svgp


class NumericsError(RuntimeError):
    """Non-finite training objective; the run should abort."""


@dataclasses.dataclass(frozen=True)
class ArchConfig:
    widths: tuple = (4, 32, 64, 32)
    n_inducing: int = 20
    n_heads: int = 2
    init_noise_var: float = 0.01
    jitter: float = 1e-6

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("need at least one layer")
        if self.n_inducing < 1 or self.n_heads < 1:
            raise ValueError("n_inducing and n_heads must be positive")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["widths"] = tuple(d["widths"])
        return cls(**d)


@dataclasses.dataclass(frozen=True)
class Prediction:
    """Per-output predictive mean and standard deviation (noise included)."""

    mean: np.ndarray
    std: np.ndarray


class _Layout:
    """Name -> (slice, shape) map over the flat parameter vector."""

    def __init__(self, arch):
        self.entries = {}
        off = 0
        for i in range(len(arch.widths) - 1):
            fan_in, fan_out = arch.widths[i], arch.widths[i + 1]
            off = self._add(f"w{i}", (fan_in, fan_out), off)
            off = self._add(f"b{i}", (fan_out,), off)
        M, d = arch.n_inducing, arch.widths[-1]
        for h in range(arch.n_heads):
            off = self._add(f"h{h}.Z", (M, d), off)
            off = self._add(f"h{h}.m", (M,), off)
            off = self._add(f"h{h}.L_packed", (M * (M + 1) // 2,), off)
            off = self._add(f"h{h}.raw_len", (1,), off)
            off = self._add(f"h{h}.raw_out", (1,), off)
            off = self._add(f"h{h}.raw_noise", (1,), off)
        self.size = off

    def _add(self, name, shape, off):
        n = int(np.prod(shape))
        self.entries[name] = (slice(off, off + n), shape)
        return off + n

    def view(self, theta, name):
        sl, shape = self.entries[name]
        return theta[sl].reshape(shape)


class Adam:
    """First-order adaptive-moment ascent on the flat parameter vector."""

    def __init__(self, size, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, theta, grad, lr):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        theta += lr * mhat / (np.sqrt(vhat) + self.eps)


class DklModel:
    def __init__(self, arch, theta, visits=None, adam=None):
        self.arch = arch
        self.layout = _Layout(arch)
        assert theta.shape == (self.layout.size,)
        self.theta = theta
        self.visits = visits if visits is not None else np.zeros(0, dtype=np.int64)
        self.adam = adam if adam is not None else Adam(self.layout.size)

    # -- construction -----------------------------------------------------

    @classmethod
    def init(cls, seed, arch=None):
        """Fresh model: fan-in-scaled zero-mean weights, standard-normal
        inducing locations, identity variational covariance."""
        arch = arch or ArchConfig()
        rng = np.random.default_rng(seed)
        layout = _Layout(arch)
        theta = np.zeros(layout.size)
        for i in range(len(arch.widths) - 1):
            fan_in = arch.widths[i]
            w = layout.view(theta, f"w{i}")
            w[:] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=w.shape)
        M = arch.n_inducing
        diag_slots = np.where(np.tril_indices(M)[0] == np.tril_indices(M)[1])[0]
        for h in range(arch.n_heads):
            z = layout.view(theta, f"h{h}.Z")
            z[:] = rng.standard_normal(z.shape)
            lp = layout.view(theta, f"h{h}.L_packed")
            lp[diag_slots] = svgp.softplus_inv(1.0)
            layout.view(theta, f"h{h}.raw_len")[:] = svgp.softplus_inv(1.0)
            layout.view(theta, f"h{h}.raw_out")[:] = svgp.softplus_inv(1.0)
            layout.view(theta, f"h{h}.raw_noise")[:] = \
                svgp.softplus_inv(arch.init_noise_var)
        return cls(arch, theta)

    def head(self, h, theta=None):
        t = self.theta if theta is None else theta
        v = self.layout.view
        return svgp.HeadParams(v(t, f"h{h}.Z"), v(t, f"h{h}.m"),
                               v(t, f"h{h}.L_packed"), v(t, f"h{h}.raw_len"),
                               v(t, f"h{h}.raw_out"), v(t, f"h{h}.raw_noise"))

    def param_count(self):
        return self.layout.size

    # -- inference --------------------------------------------------------

    def _net(self, theta=None):
        t = self.theta if theta is None else theta
        n_layers = len(self.arch.widths) - 1
        ws = [self.layout.view(t, f"w{i}") for i in range(n_layers)]
        bs = [self.layout.view(t, f"b{i}") for i in range(n_layers)]
        return ws, bs

    def features(self, x):
        ws, bs = self._net()
        phi, _ = mlp.forward(ws, bs, np.atleast_2d(x))
        return phi

    def predict(self, x):
        """Batch prediction: (means, stds), each (n, n_heads)."""
        phi = self.features(x)
        means = np.empty((phi.shape[0], self.arch.n_heads))
        stds = np.empty_like(means)
        for h in range(self.arch.n_heads):
            mu, var, noise = svgp.predict(self.head(h), phi, self.arch.jitter)
            means[:, h] = mu
            stds[:, h] = np.sqrt(var + noise)
        return means, stds

    def predict_point(self, x):
        means, stds = self.predict(np.asarray(x)[None, :])
        return Prediction(mean=means[0], std=stds[0])

    # -- objective --------------------------------------------------------

    def elbo(self, x, y, dataset_size, theta=None):
        """Mini-batch ELBO and its (data term, KL) breakdown."""
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        if x.shape[0] == 0:
            raise ValueError("empty batch")
        if dataset_size < x.shape[0]:
            raise ValueError("dataset_size smaller than the batch")
        ws, bs = self._net(theta)
        phi, _ = mlp.forward(ws, bs, x)
        weight = dataset_size / x.shape[0]
        total = data_total = kl_total = 0.0
        for h in range(self.arch.n_heads):
            hp = self.head(h, theta)
            c = svgp._common(hp, phi, self.arch.jitter)
            r = y[:, h] - c["mu"]
            noise = hp.noise_var
            ell_sum = (-0.5 * (svgp.LOG_2PI + np.log(noise))
                       - (r * r) / (2 * noise) - c["v"] / (2 * noise)).sum()
            kl, _, _ = svgp.kl_term(hp, c)
            total += weight * ell_sum - kl
            data_total += weight * ell_sum
            kl_total += kl
        return total, {"data": data_total, "kl": kl_total}

    def elbo_and_grad(self, x, y, dataset_size, theta=None):
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        if dataset_size < x.shape[0]:
            raise ValueError("dataset_size smaller than the batch")
        t = self.theta if theta is None else theta
        ws, bs = self._net(t)
        phi, cache = mlp.forward(ws, bs, x)
        weight = dataset_size / x.shape[0]
        grad = np.zeros_like(t)
        g_phi = np.zeros_like(phi)
        total = 0.0
        for h in range(self.arch.n_heads):
            hp = self.head(h, t)
            value, _, _, grads, gp = svgp.elbo_and_grads(
                hp, phi, y[:, h], weight, self.arch.jitter)
            total += value
            g_phi += gp
            for key, g in grads.items():
                self.layout.view(grad, f"h{h}.{key}")[:] += g
        g_ws, g_bs = mlp.backward(ws, cache, g_phi)
        n_layers = len(ws)
        for i in range(n_layers):
            self.layout.view(grad, f"w{i}")[:] = g_ws[i]
            self.layout.view(grad, f"b{i}")[:] = g_bs[i]
        return total, grad

    # -- training ---------------------------------------------------------

    def ensure_visit_slots(self, n):
        if self.visits.shape[0] < n:
            grown = np.zeros(n, dtype=np.int64)
            grown[:self.visits.shape[0]] = self.visits
            self.visits = grown

    def train_epoch(self, x, y, rng, lr=5e-3, m_train=2000, batch_size=64):
        """One prioritized epoch: the least-visited samples (ties broken by
        insertion order) are shuffled and swept once in mini-batches."""
        n = x.shape[0]
        if n == 0:
            raise ValueError("empty dataset")
        self.ensure_visit_slots(n)
        take = min(m_train, n)
        chosen = np.argsort(self.visits[:n], kind="stable")[:take]
        order = chosen[rng.permutation(take)]
        losses = []
        for start in range(0, take, batch_size):
            idx = order[start:start + batch_size]
            try:
                value, grad = self.elbo_and_grad(x[idx], y[idx], n)
            except np.linalg.LinAlgError as exc:
                raise NumericsError(f"kernel factorization failed: {exc}")
            if not np.isfinite(value):
                raise NumericsError(f"non-finite ELBO {value!r}")
            self.adam.step(self.theta, grad, lr)
            self.visits[idx] += 1
            losses.append(-value)
        return float(np.mean(losses))

    # -- persistence ------------------------------------------------------

    def save(self, path):
        np.savez(path,
                 theta=self.theta,
                 visits=self.visits,
                 adam_m=self.adam.m,
                 adam_v=self.adam.v,
                 adam_t=np.int64(self.adam.t),
                 arch=json.dumps(self.arch.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as f:
            arch = ArchConfig.from_dict(json.loads(str(f["arch"])))
            model = cls(arch, f["theta"].copy(), f["visits"].copy())
            model.adam.m = f["adam_m"].copy()
            model.adam.v = f["adam_v"].copy()
            model.adam.t = int(f["adam_t"])
        return model
