"""Dense Gaussian-process regression, used as a test oracle.

Same RBF kernel as the sparse heads, O(n^3) fit.  Kept deliberately
independent of the variational code paths.
"""

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve


def rbf(a, b, lengthscale, outputscale):
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
    return outputscale ** 2 * np.exp(-np.maximum(d2, 0.0)
                                     / (2.0 * lengthscale ** 2))


class ExactGP:
    def __init__(self, x, y, lengthscale, outputscale, noise_var,
                 jitter=1e-10):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[0] > 2000:
            raise ValueError("dense GP capped at n=2000")
        self.x = x
        self.y = np.asarray(y, dtype=float)
        self.lengthscale = lengthscale
        self.outputscale = outputscale
        self.noise_var = noise_var
        K = rbf(x, x, lengthscale, outputscale)
        K[np.diag_indices_from(K)] += noise_var + jitter
        self._chol = cho_factor(K, lower=True)
        self._alpha = cho_solve(self._chol, self.y)

    def predict(self, xq, include_noise=True):
        """Posterior mean and standard deviation at query points."""
        xq = np.atleast_2d(np.asarray(xq, dtype=float))
        k = rbf(xq, self.x, self.lengthscale, self.outputscale)
        mean = k @ self._alpha
        solve = cho_solve(self._chol, k.T)
        var = self.outputscale ** 2 - (k * solve.T).sum(axis=1)
        var = np.maximum(var, 0.0)
        if include_noise:
            var = var + self.noise_var
        return mean, np.sqrt(var)

    def log_marginal_likelihood(self):
        n = self.x.shape[0]
        logdet = 2.0 * np.log(np.diag(self._chol[0])).sum()
        return float(-0.5 * (self.y @ self._alpha) - 0.5 * logdet
                     - 0.5 * n * math.log(2.0 * math.pi))
