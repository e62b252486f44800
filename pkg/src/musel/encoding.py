"""Input encoding shared by the model and the distance metric.

A push (alpha, pos) becomes (sin a, cos a, pos_x / H, pos_y / H) with H the
table half-extent, so every component lies in [-1, 1].  The same vector is
fed to the feature extractor and used for nearest-neighbour distances.
"""

import math

import numpy as np


def encode_input(point, half_extent):
    return np.array([math.sin(point.alpha), math.cos(point.alpha),
                     point.pos[0] / half_extent, point.pos[1] / half_extent])


def encode_batch(points, half_extent):
    out = np.empty((len(points), 4))
    for i, p in enumerate(points):
        out[i, 0] = math.sin(p.alpha)
        out[i, 1] = math.cos(p.alpha)
        out[i, 2] = p.pos[0] / half_extent
        out[i, 3] = p.pos[1] / half_extent
    return out


def encode_raw(alphas, pos, half_extent):
    """Vectorized encoding from raw arrays (n,), (n, 2)."""
    alphas = np.asarray(alphas, dtype=float)
    pos = np.asarray(pos, dtype=float)
    return np.column_stack([np.sin(alphas), np.cos(alphas),
                            pos[:, 0] / half_extent, pos[:, 1] / half_extent])
