"""Multi-seed strategy comparison runner.

Every (strategy, seed) pair is one independent, internally sequential run
producing a JSON-lines log plus a timing sidecar.  Aggregation is a
deterministic reduce over the surviving logs: mean RMSE and its standard
error per strategy per evaluation checkpoint.
"""

import csv
import json
import pathlib
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import loop
from . import testgrid


def run_name(strategy, seed):
    return f"{strategy}_s{seed}"


def _execute_run(cfg_doc, strategy, seed):
    """Worker entry point (module-level so process pools can pickle it)."""
    from .config import ExperimentConfig

    cfg = ExperimentConfig.from_dict(cfg_doc)
    world = cfg.world_config()
    out = pathlib.Path(cfg.out_dir)
    grid = testgrid.load_or_build(world, cfg.grid_dims(), out / "gridcache")
    name = run_name(strategy, seed)
    jsonl = out / f"{name}.jsonl"
    cand = out / f"{name}_candidates.csv" if cfg.log_candidates else None
    ckpt_dir = None
    if cfg.checkpoint_every:
        ckpt_dir = out / f"{name}_checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    loop.run(world, strategy, seed, cfg.loop_params(), arch=cfg.arch_config(),
             eval_fn=lambda model: testgrid.eval_rmse(model, grid),
             jsonl_path=jsonl, candidate_log_path=cand,
             log_lp_grid=cfg.log_lp_grid, checkpoint_dir=ckpt_dir)
    meta = {"run": name, "strategy": strategy, "seed": seed,
            "wall_time_s": time.perf_counter() - t0,
            "n_grid_points": len(grid)}
    with open(out / f"{name}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    return name


def run_experiment(cfg):
    """Execute all (strategy, seed) runs and write the aggregate CSV.

    Per-run failures are recorded in the returned summary (and as a warning
    column in the CSV); aggregation proceeds over the survivors.
    """
    out = pathlib.Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    world = cfg.world_config()
    cfg.loop_params()   # validate before spending any time
    cfg.arch_config()
    # build the grid cache up front so parallel workers only read it
    testgrid.load_or_build(world, cfg.grid_dims(), out / "gridcache")

    jobs = [(strategy, seed) for strategy in cfg.strategies
            for seed in cfg.seeds]
    failures = {}
    cfg_doc = _cfg_doc(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {pool.submit(_execute_run, cfg_doc, s, k): (s, k)
                       for s, k in jobs}
            for fut, (s, k) in futures.items():
                try:
                    fut.result()
                except Exception as exc:
                    failures[(s, k)] = repr(exc)
    else:
        for s, k in jobs:
            try:
                _execute_run(cfg_doc, s, k)
            except Exception as exc:
                failures[(s, k)] = repr(exc)

    summary = aggregate(cfg, failures)
    return summary


def _cfg_doc(cfg):
    import dataclasses
    return dataclasses.asdict(cfg)


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh]


def rmse_series(records):
    """(iteration, rmse) checkpoints recorded in one run log."""
    out = {}
    for rec in records:
        if rec.get("rmse") is not None:
            out[rec["iter"]] = rec["rmse"]
    return out


def aggregate(cfg, failures=None):
    """Reduce run logs into mean/SEM learning curves per strategy."""
    failures = failures or {}
    out = pathlib.Path(cfg.out_dir)
    summary = {"strategies": {}, "failures":
               {run_name(s, k): msg for (s, k), msg in failures.items()}}
    rows = []
    for strategy in cfg.strategies:
        per_seed = []
        for seed in cfg.seeds:
            if (strategy, seed) in failures:
                continue
            path = out / f"{run_name(strategy, seed)}.jsonl"
            if not path.exists():
                continue
            per_seed.append(rmse_series(read_jsonl(path)))
        if not per_seed:
            continue
        iters = sorted(set.intersection(*[set(s) for s in per_seed]))
        mean, sem = [], []
        for it in iters:
            vals = np.array([s[it] for s in per_seed])
            mean.append(float(vals.mean()))
            sem.append(float(vals.std(ddof=1) / np.sqrt(len(vals)))
                       if len(vals) > 1 else 0.0)
        warn = "" if len(per_seed) == len(cfg.seeds) else \
            f"only {len(per_seed)}/{len(cfg.seeds)} seeds"
        summary["strategies"][strategy] = {
            "iters": iters, "mean": mean, "sem": sem,
            "n_seeds": len(per_seed), "warning": warn,
        }
        for it, m, s in zip(iters, mean, sem):
            rows.append([strategy, it, repr(m), repr(s), len(per_seed), warn])
    with open(out / "aggregate.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "iter", "mean_rmse", "sem_rmse",
                         "n_seeds", "warning"])
        writer.writerows(rows)
    return summary
