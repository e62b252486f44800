"""Sparse variational GP head on learned features.

One head regresses one output dimension.  The variational posterior over
the inducing outputs is N(m, S) with S = L L^T; the kernel is an RBF with
positive hyperparameters kept positive by softplus reparameterization.
The expected Gaussian log-likelihood is computed in closed form (for a
Gaussian likelihood the Monte Carlo estimate has the same expectation but
strictly higher variance):

    E_q[log N(y | f, s_n^2)] = log N(y | mu_f, s_n^2) - var_f / (2 s_n^2)

All gradients are hand-derived reverse mode; the finite-difference suite
checks every coordinate.
"""

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

LOG_2PI = math.log(2.0 * math.pi)


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    y = np.asarray(y, dtype=float)
    # log(expm1(y)), stable for large y
    return np.where(y > 30.0, y, np.log(np.expm1(np.minimum(y, 30.0))))


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sq_dists(a, b):
    """Pairwise squared Euclidean distances, (n, m) for (n,d) x (m,d)."""
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def unpack_tril(packed, M):
    L = np.zeros((M, M))
    idx = np.tril_indices(M)
    L[idx] = packed
    diag = np.arange(M)
    L[diag, diag] = softplus(L[diag, diag])
    return L


class HeadParams:
    """Views of one head's parameters inside the flat vector."""

    __slots__ = ("Z", "m", "L_packed", "raw_len", "raw_out", "raw_noise")

    def __init__(self, Z, m, L_packed, raw_len, raw_out, raw_noise):
        self.Z = Z
        self.m = m
        self.L_packed = L_packed
        self.raw_len = raw_len
        self.raw_out = raw_out
        self.raw_noise = raw_noise

    @property
    def lengthscale(self):
        return float(softplus(self.raw_len[0]))

    @property
    def outputscale(self):
        return float(softplus(self.raw_out[0]))

    @property
    def noise_var(self):
        return float(softplus(self.raw_noise[0]))


def _common(head, phi, jitter):
    """Kernel matrices and solves shared by prediction and the ELBO."""
    M = head.Z.shape[0]
    ell = head.lengthscale
    s = head.outputscale
    s2 = s * s
    L = unpack_tril(head.L_packed, M)
    D_P = sq_dists(head.Z, head.Z)
    K_nj = s2 * np.exp(-D_P / (2.0 * ell * ell))
    P = K_nj + jitter * np.eye(M)
    C = cho_factor(P, lower=True, check_finite=False)
    D_K = sq_dists(head.Z, phi)
    K = s2 * np.exp(-D_K / (2.0 * ell * ell))
    A = cho_solve(C, K, check_finite=False)
    W = L.T @ A
    mu = A.T @ head.m
    v = s2 - (K * A).sum(axis=0) + (W * W).sum(axis=0)
    return dict(M=M, ell=ell, s=s, s2=s2, L=L, D_P=D_P, K_nj=K_nj, P=P,
                C=C, D_K=D_K, K=K, A=A, W=W, mu=mu, v=v)


def predict(head, phi, jitter=1e-6):
    """Latent predictive mean and variance plus the noise variance.

    Escalates the jitter once (1e-6 -> 1e-4) if the inducing kernel matrix
    fails to factor.
    """
    try:
        c = _common(head, phi, jitter)
    except np.linalg.LinAlgError:
        c = _common(head, phi, max(jitter, 1e-4))
    return c["mu"], np.maximum(c["v"], 0.0), head.noise_var


def kl_term(head, c):
    """KL[q(u) || p(u)] for the current kernel matrix."""
    M = c["M"]
    Pinv_L = cho_solve(c["C"], c["L"], check_finite=False)
    B_m = cho_solve(c["C"], head.m, check_finite=False)
    tr = float((c["L"] * Pinv_L).sum())
    quad = float(head.m @ B_m)
    logdet_P = 2.0 * float(np.log(np.diag(c["C"][0])).sum())
    logdet_S = 2.0 * float(np.log(np.diag(c["L"])).sum())
    return 0.5 * (tr + quad - M + logdet_P - logdet_S), Pinv_L, B_m


def elbo_and_grads(head, phi, y, weight, jitter=1e-6):
    """One head's ELBO contribution and gradients.

    weight = dataset_size / batch_size scales the data term.  Returns
    (value, data_term, kl, grads dict, g_phi) where grads contains entries
    for every head parameter (packed like the parameter views).
    """
    c = _common(head, phi, jitter)
    M, s2, ell = c["M"], c["s2"], c["ell"]
    A, K, W, L, mu, v = c["A"], c["K"], c["W"], c["L"], c["mu"], c["v"]
    noise = head.noise_var
    B = phi.shape[0]

    r = y - mu
    ell_sum = (-0.5 * (LOG_2PI + math.log(noise))
               - (r * r) / (2.0 * noise) - v / (2.0 * noise)).sum()
    data = weight * ell_sum
    kl, Pinv_L, B_m = kl_term(head, c)
    value = data - kl

    # --- backward ---
    g_mu = weight * r / noise
    gv = -weight / (2.0 * noise)                      # same for every point
    g_noise = weight * ((-0.5 / noise) * B
                        + (r * r).sum() / (2.0 * noise * noise)
                        + v.sum() / (2.0 * noise * noise))

    gW = (2.0 * gv) * W
    gA = head.m[:, None] * g_mu[None, :] - gv * K + L @ gW
    G = cho_solve(c["C"], gA, check_finite=False)
    gK = G - gv * A
    gP = -G @ A.T
    # KL terms
    g_m = A @ g_mu - B_m
    gL = A @ gW.T - Pinv_L
    gL[np.diag_indices(M)] += 1.0 / np.diag(L)
    gP += 0.5 * (Pinv_L @ Pinv_L.T + np.outer(B_m, B_m)
                 - cho_solve(c["C"], np.eye(M), check_finite=False))

    # kernel hyperparameters and inputs
    inv2l2 = 1.0 / (2.0 * ell * ell)
    gKK = gK * K
    gPP = gP * c["K_nj"]
    g_s2 = gKK.sum() / s2 + gPP.sum() / s2 + B * gv
    g_ell = (float((gKK * c["D_K"]).sum()) +
             float((gPP * c["D_P"]).sum())) / ell ** 3
    GDK = -inv2l2 * gKK
    GDP = -inv2l2 * gPP
    GS = GDP + GDP.T
    g_Z = 2.0 * (GDK.sum(axis=1)[:, None] * head.Z - GDK @ phi)
    g_Z += 2.0 * (GS.sum(axis=1)[:, None] * head.Z - GS @ head.Z)
    g_phi = 2.0 * (GDK.sum(axis=0)[:, None] * phi - GDK.T @ head.Z)

    # chain through the positivity transforms
    tril = np.tril_indices(M)
    gL_packed = gL[tril]
    diag_slots = np.where(tril[0] == tril[1])[0]
    raw_diag = head.L_packed[diag_slots]
    gL_packed[diag_slots] *= sigmoid(raw_diag)
    s = c["s"]
    grads = {
        "Z": g_Z,
        "m": g_m,
        "L_packed": gL_packed,
        "raw_len": np.array([g_ell * sigmoid(head.raw_len[0])]),
        "raw_out": np.array([g_s2 * 2.0 * s * sigmoid(head.raw_out[0])]),
        "raw_noise": np.array([g_noise * sigmoid(head.raw_noise[0])]),
    }
    return value, data, kl, grads, g_phi
