"""The active-learning iterate: train, sample candidates, score, select,
execute, append.

Each run owns four independent RNG streams derived from the run seed
(candidate pools, initial placements, training shuffles, model init), so the
candidate pools of two runs with equal seeds coincide regardless of the
selection strategy.  Every logged byte is a pure function of
(seed, strategy, config); wall-clock timing goes in a sidecar file, never in
the run log.
"""

import dataclasses
import json

import numpy as np

from . import env, uncertainty
from .encoding import encode_batch, encode_input
from .model import ArchConfig, DklModel

STRATEGIES = ("random", "sigma", "md", "lp", "musel",
              "musel_no_sigma", "musel_no_md", "musel_no_lp")


class RunError(RuntimeError):
    """A component failed mid-run; carries the iteration index."""

    def __init__(self, iteration, cause):
        super().__init__(f"run aborted at iteration {iteration}: {cause}")
        self.iteration = iteration


@dataclasses.dataclass(frozen=True)
class LoopParams:
    n_iter: int = 3000
    m_init: int = 1
    m_cand: int = 500
    k: int = 1
    lr: float = 5e-3
    m_train: int = 2000
    batch_size: int = 64
    lp_bins: int = 7
    lp_window: int = 10
    eval_interval: int = 0          # 0: never evaluate
    checkpoint_every: int = 0       # 0: never checkpoint

    def __post_init__(self):
        if self.m_init < 1 or self.m_cand < 1 or self.k < 1:
            raise ValueError("m_init, m_cand and k must be positive")
        if self.k > self.m_cand:
            raise ValueError("cannot select more than the pool size")


def strategy_scores(strategy, sigma, md, lp):
    """Ranking score per candidate; None for the random baseline (each
    ablation replaces exactly one factor of the product with 1)."""
    if strategy == "random":
        return None
    if strategy == "sigma":
        return sigma
    if strategy == "md":
        return md
    if strategy == "lp":
        return lp
    if strategy == "musel":
        return sigma * md * lp
    if strategy == "musel_no_sigma":
        return md * lp
    if strategy == "musel_no_md":
        return sigma * lp
    if strategy == "musel_no_lp":
        return sigma * md
    raise ValueError(f"unknown strategy {strategy!r}")


def create_set(cfg, rng, m_init):
    """Initial i.i.d. training inputs."""
    return env.sample_input_space(cfg, rng, m_init)


def select_top_k(candidates, scores, k):
    """The k highest-scoring candidates; ties go to the earlier pool index.

    Returns (selected, indices).
    """
    scores = np.asarray(scores, dtype=float)
    if len(candidates) < k or k < 1:
        raise ValueError("need len(candidates) >= k >= 1")
    idx = np.argsort(-scores, kind="stable")[:k]
    return [candidates[i] for i in idx], idx


class _Growing:
    """Append-only float matrix with capacity doubling."""

    def __init__(self, width):
        self.data = np.empty((16, width))
        self.n = 0

    def append(self, row):
        if self.n == self.data.shape[0]:
            grown = np.empty((2 * self.data.shape[0], self.data.shape[1]))
            grown[:self.n] = self.data[:self.n]
            self.data = grown
        self.data[self.n] = row
        self.n += 1

    @property
    def view(self):
        return self.data[:self.n]


class RunState:
    """Everything one run mutates: dataset, model, region grid, RNG streams,
    iteration counter, and the record log."""

    def __init__(self, world, strategy, seed, params, arch=None):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.world = world
        self.strategy = strategy
        self.seed = seed
        self.params = params
        self.arch = arch or ArchConfig()
        ss = np.random.SeedSequence(seed)
        cand_ss, place_ss, train_ss, model_ss = ss.spawn(4)
        self.cand_rng = np.random.default_rng(cand_ss)
        self.place_rng = np.random.default_rng(place_ss)
        self.train_rng = np.random.default_rng(train_ss)
        self.model = DklModel.init(model_ss, self.arch)
        self.grid = uncertainty.LpGrid(world.half_extent, params.lp_bins,
                                       params.lp_window)
        self.inputs = []
        self.enc = _Growing(4)
        self.effects = _Growing(2)
        self.iteration = 0
        self.records = []
        self.last_pool = None       # kept for inspection/tests

    def bootstrap(self):
        """Initial dataset: m_init random executions, logged as iteration 0."""
        for x in create_set(self.world, self.place_rng, self.params.m_init):
            eff = env.execute_and_observe(self.world, x)
            self._append(x, eff)
            self.records.append(self._record(0, x, eff, None, None, None,
                                             None, None, None, None))
        return self

    def _append(self, x, eff):
        self.inputs.append(x)
        self.enc.append(encode_input(x, self.world.half_extent))
        self.effects.append(np.asarray(eff.delta))

    def _record(self, it, x, eff, sigma, md, lp, u, score, loss, rmse):
        rec = {
            "iter": it,
            "alpha": x.alpha,
            "pos": [x.pos[0], x.pos[1]],
            "effect": [eff.delta[0], eff.delta[1]],
            "sigma": sigma,
            "min_dist": md,
            "lp": lp,
            "u_model": u,
            "score": score,
            "train_loss": loss,
            "rmse": rmse,
        }
        return rec

    def dataset_size(self):
        assert len(self.inputs) == self.effects.n
        return len(self.inputs)

    def iterate(self, eval_fn=None, candidate_writer=None, log_lp_grid=False):
        """One full loop iteration; appends k records and returns them."""
        p = self.params
        self.iteration += 1
        it = self.iteration
        n = self.dataset_size()
        loss = self.model.train_epoch(self.enc.view, self.effects.view,
                                      self.train_rng, lr=p.lr,
                                      m_train=p.m_train,
                                      batch_size=p.batch_size)
        pool = env.sample_input_space(self.world, self.cand_rng, p.m_cand)
        self.last_pool = pool
        sigma, md, lp, u = uncertainty.estimate_model_uncertainty(
            self.model, self.grid, self.enc.view, pool,
            self.world.half_extent)
        scores = strategy_scores(self.strategy, sigma, md, lp)
        if scores is None:
            idx = np.arange(p.k)    # the pool itself is i.i.d.
        else:
            _, idx = select_top_k(pool, scores, p.k)
        if candidate_writer is not None:
            chosen = set(int(i) for i in idx)
            for j, cand in enumerate(pool):
                candidate_writer.writerow([
                    it, j, repr(cand.alpha), repr(cand.pos[0]),
                    repr(cand.pos[1]), repr(float(sigma[j])),
                    repr(float(md[j])), repr(float(lp[j])),
                    repr(float(u[j])), int(j in chosen)])
        new_records = []
        for j in idx:
            x = pool[j]
            pred = self.model.predict_point(
                encode_input(x, self.world.half_extent))
            eff = env.execute_and_observe(self.world, x)
            self.grid.record_error(x, pred.mean, eff.delta)
            self._append(x, eff)
            score = None if scores is None else float(scores[j])
            new_records.append(self._record(
                it, x, eff, float(sigma[j]), float(md[j]), float(lp[j]),
                float(u[j]), score, loss, None))
        self.grid.snapshot_errors()
        if eval_fn is not None and p.eval_interval and \
                it % p.eval_interval == 0:
            rmse = float(eval_fn(self.model))
            for rec in new_records:
                rec["rmse"] = rmse
        if log_lp_grid:
            for rec in new_records:
                rec["lp_grid"] = [float(v) for v in self.grid.lp]
        self.records.extend(new_records)
        expected = p.m_init + p.k * it
        assert self.dataset_size() == expected
        return new_records


def run_iteration(state, eval_fn=None, candidate_writer=None,
                  log_lp_grid=False):
    """Single-step entry point (mainly for tests and interactive use)."""
    return state.iterate(eval_fn=eval_fn, candidate_writer=candidate_writer,
                         log_lp_grid=log_lp_grid)


def run(world, strategy, seed, params, arch=None, eval_fn=None,
        jsonl_path=None, candidate_log_path=None, log_lp_grid=False,
        checkpoint_dir=None):
    """Full run: bootstrap then n_iter iterations.

    Returns the final RunState.  With ``jsonl_path`` every record is written
    as one JSON line; the file contents are byte-reproducible given
    (world, strategy, seed, params).
    """
    import csv
    import pathlib

    try:
        state = RunState(world, strategy, seed, params, arch).bootstrap()
    except Exception as exc:
        raise RunError(0, exc) from exc
    jsonl = open(jsonl_path, "w") if jsonl_path else None
    cand_fh = open(candidate_log_path, "w", newline="") if candidate_log_path \
        else None
    cand_writer = None
    if cand_fh:
        cand_writer = csv.writer(cand_fh)
        cand_writer.writerow(["iter", "cand_id", "alpha", "pos_x", "pos_y",
                              "sigma", "min_dist", "lp", "u_model",
                              "selected"])
    try:
        if jsonl:
            for rec in state.records:
                jsonl.write(json.dumps(rec) + "\n")
        for it in range(1, params.n_iter + 1):
            try:
                recs = state.iterate(eval_fn=eval_fn,
                                     candidate_writer=cand_writer,
                                     log_lp_grid=log_lp_grid)
            except Exception as exc:
                raise RunError(it, exc) from exc
            if jsonl:
                for rec in recs:
                    jsonl.write(json.dumps(rec) + "\n")
            if checkpoint_dir and params.checkpoint_every and \
                    it % params.checkpoint_every == 0:
                ckpt = pathlib.Path(checkpoint_dir) / f"model_{it:06d}.npz"
                state.model.save(ckpt)
    finally:
        if jsonl:
            jsonl.close()
        if cand_fh:
            cand_fh.close()
    return state
