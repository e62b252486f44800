"""Evaluation grid with cached, checksummed ground truth.

The grid spans the full input ranges; placements that fail validity are
filtered out.  Ground truth comes from the same environment configuration as
the training executions, so a WorldConfig change produces a different cache
key and the stale file is ignored.
"""

import dataclasses
import hashlib
import json
import math
import pathlib

import numpy as np

from .. import env
from ..encoding import encode_batch
from ..env import ALPHA_MAX, ALPHA_MIN, InputPoint


@dataclasses.dataclass
class TestGrid:
    dims: tuple
    inputs: list
    encoded: np.ndarray
    truth: np.ndarray

    def __len__(self):
        return len(self.inputs)


def cache_key(world, dims):
    blob = world.to_json() + json.dumps(list(dims))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_test_grid(world, dims):
    """Evaluate the environment on every valid grid point."""
    na, nx, ny = dims
    alphas = np.linspace(ALPHA_MIN, ALPHA_MAX, na)
    xs = np.linspace(-world.half_extent, world.half_extent, nx)
    ys = np.linspace(-world.half_extent, world.half_extent, ny)
    inputs = []
    for a in alphas:
        for x in xs:
            for y in ys:
                if env.is_valid_position(world, (x, y)):
                    inputs.append(InputPoint(float(a), (float(x), float(y))))
    truth = np.empty((len(inputs), 2))
    for i, pt in enumerate(inputs):
        truth[i] = env.execute_and_observe(world, pt).delta
    return TestGrid(dims=tuple(dims), inputs=inputs,
                    encoded=encode_batch(inputs, world.half_extent),
                    truth=truth)


def load_or_build(world, dims, cache_dir):
    cache_dir = pathlib.Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"grid_{cache_key(world, dims)}.npz"
    if path.exists():
        with np.load(path) as f:
            digest = hashlib.sha256(f["truth"].tobytes()).hexdigest()
            if digest == str(f["digest"]):
                alphas = f["alphas"]
                pos = f["pos"]
                inputs = [InputPoint(float(a), (float(p[0]), float(p[1])))
                          for a, p in zip(alphas, pos)]
                return TestGrid(dims=tuple(int(d) for d in f["dims"]),
                                inputs=inputs, encoded=f["encoded"].copy(),
                                truth=f["truth"].copy())
    grid = build_test_grid(world, dims)
    np.savez(path,
             dims=np.array(grid.dims),
             alphas=np.array([p.alpha for p in grid.inputs]),
             pos=np.array([p.pos for p in grid.inputs]),
             encoded=grid.encoded,
             truth=grid.truth,
             digest=hashlib.sha256(grid.truth.tobytes()).hexdigest())
    return grid


def eval_rmse(model, grid):
    """Root mean squared error over the grid, both output dims jointly."""
    means, _ = model.predict(grid.encoded)
    return float(np.sqrt(((means - grid.truth) ** 2).sum(axis=1).mean()))
