"""Selection-score components: predictive spread, nearest-neighbour
separation, and region-level learning progress.

The score of a candidate push x is the product

    u(x) = sigma(x) * min_dist(x) * lp(region(x))

where sigma is the norm of the per-output predictive standard deviations,
min_dist the exact Euclidean distance to the nearest training input in the
normalized encoding, and lp a [1e-4, 1] rate of recent error decrease for
the candidate's cell of a uniform grid over (alpha, pos_x, pos_y).
"""

import dataclasses
import math

import numpy as np

from . import kernels
from .env import ALPHA_MAX, ALPHA_MIN

LP_FLOOR = 1e-4
LP_CEIL = 1.0


@dataclasses.dataclass(frozen=True)
class UncertaintyBreakdown:
    sigma: float
    min_dist: float
    lp: float

    @property
    def u_model(self):
        return self.sigma * self.min_dist * self.lp


def min_distance(x_enc, observed_enc):
    """Exact distance from one encoded input to the nearest observed one."""
    obs = np.atleast_2d(observed_enc)
    if obs.shape[0] == 0:
        raise ValueError("observed set is empty")
    return float(kernels.min_dist_batch(np.atleast_2d(x_enc), obs)[0])


def fit_slope(values):
    """Least-squares slope of values against t = 1..n (closed form)."""
    n = len(values)
    t = np.arange(1.0, n + 1.0)
    tbar = t.mean()
    vbar = float(np.mean(values))
    denom = float(((t - tbar) ** 2).sum())
    return float(((t - tbar) * (np.asarray(values) - vbar)).sum()) / denom


def lp_from_slope(slope):
    """Map an error-trend slope to [1e-4, 1]: improving regions score the
    normalized magnitude of the trend, non-improving ones the floor."""
    if slope > 0.0:
        return LP_FLOOR
    return min(max(-(2.0 / math.pi) * math.atan(slope), LP_FLOOR), LP_CEIL)


class LpGrid:
    """Uniform partition of (alpha, pos_x, pos_y) with per-region learning
    progress derived from a ring buffer of recent average errors."""

    def __init__(self, half_extent, n_bins=7, window=10,
                 alpha_range=(ALPHA_MIN, ALPHA_MAX)):
        self.n_bins = n_bins
        self.window = window
        self.lows = np.array([alpha_range[0], -half_extent, -half_extent])
        self.highs = np.array([alpha_range[1], half_extent, half_extent])
        n = n_bins ** 3
        self.buffers = [[] for _ in range(n)]
        self.pending_sum = np.zeros(n)
        self.pending_cnt = np.zeros(n, dtype=np.int64)
        self.lp = np.ones(n)

    @property
    def n_regions(self):
        return self.n_bins ** 3

    def region_of(self, x):
        """Flat region index of an input (raw alpha and position, not the
        sin/cos encoding).  Bins are right-open; the top edge is inclusive."""
        coords = np.array([x.alpha, x.pos[0], x.pos[1]], dtype=float)
        if np.any(coords < self.lows - 1e-12) or \
                np.any(coords > self.highs + 1e-12):
            raise ValueError(f"input outside the region grid: {coords}")
        frac = (coords - self.lows) / (self.highs - self.lows)
        idx = np.minimum((frac * self.n_bins).astype(np.int64),
                         self.n_bins - 1)
        idx = np.maximum(idx, 0)
        return int(idx[0] * self.n_bins * self.n_bins
                   + idx[1] * self.n_bins + idx[2])

    def region_of_batch(self, alphas, pos):
        coords = np.column_stack([alphas, pos[:, 0], pos[:, 1]])
        frac = (coords - self.lows) / (self.highs - self.lows)
        idx = np.clip((frac * self.n_bins).astype(np.int64), 0,
                      self.n_bins - 1)
        return (idx[:, 0] * self.n_bins * self.n_bins
                + idx[:, 1] * self.n_bins + idx[:, 2])

    def unravel(self, region):
        b = self.n_bins
        return region // (b * b), (region // b) % b, region % b

    def record_error(self, x, predicted_mean, observed_delta):
        """Accumulate the prediction error of one executed push (prediction
        taken before the model trains on it)."""
        err = float(np.linalg.norm(np.asarray(predicted_mean, dtype=float)
                                   - np.asarray(observed_delta, dtype=float)))
        r = self.region_of(x)
        self.pending_sum[r] += err
        self.pending_cnt[r] += 1

    def snapshot_errors(self):
        """Push accumulated region means onto the ring buffers; regions with
        no new executions keep their history frozen."""
        touched = np.nonzero(self.pending_cnt)[0]
        for r in touched:
            buf = self.buffers[r]
            buf.append(self.pending_sum[r] / self.pending_cnt[r])
            if len(buf) > self.window:
                buf.pop(0)
            self.lp[r] = self.learning_progress(r)
        self.pending_sum[touched] = 0.0
        self.pending_cnt[touched] = 0

    def learning_progress(self, region):
        """LP of one region from its buffered error history; optimistic 1.0
        until two snapshots exist."""
        buf = self.buffers[region]
        if len(buf) < 2:
            return 1.0
        return lp_from_slope(fit_slope(buf))

    def lp_of_batch(self, alphas, pos):
        return self.lp[self.region_of_batch(alphas, pos)]


def estimate_model_uncertainty(model, grid, observed_enc, candidates,
                               half_extent):
    """Score candidates: returns (sigma, min_dist, lp, u_model) arrays.

    Read-only in (model, grid, observed set); safe to fan out.
    """
    from .encoding import encode_batch

    obs = np.atleast_2d(observed_enc)
    if obs.shape[0] == 0:
        raise ValueError("observed set is empty")
    enc = encode_batch(candidates, half_extent)
    _, stds = model.predict(enc)
    sigma = np.sqrt((stds * stds).sum(axis=1))
    md = kernels.min_dist_batch(enc, obs)
    alphas = np.array([c.alpha for c in candidates])
    pos = np.array([c.pos for c in candidates])
    lp = grid.lp_of_batch(alphas, pos)
    return sigma, md, lp, sigma * md * lp
