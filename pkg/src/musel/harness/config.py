"""Experiment configuration: JSON file + dotted-path overrides."""

import dataclasses
import json

from ..env import TASK_ONE_SPHERE, TASK_TWO_SPHERE, WorldConfig
from ..loop import STRATEGIES


class ConfigError(ValueError):
    """Bad experiment configuration (CLI exit code 2)."""


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    task: str = TASK_ONE_SPHERE
    strategies: tuple = ("musel", "random")
    seeds: tuple = (0, 1, 2, 3, 4)
    n_iter: int = 500
    m_init: int = 1
    m_cand: int = 200
    k: int = 1
    eval_interval: int = 100
    test_grid: tuple = ()           # empty: per-task default
    out_dir: str = "runs"
    world: dict = dataclasses.field(default_factory=dict)
    model: dict = dataclasses.field(default_factory=dict)
    loop: dict = dataclasses.field(default_factory=dict)
    log_lp_grid: bool = False
    log_candidates: bool = False
    checkpoint_every: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.task not in (TASK_ONE_SPHERE, TASK_TWO_SPHERE):
            raise ConfigError(f"unknown task {self.task!r}")
        unknown = [s for s in self.strategies if s not in STRATEGIES]
        if unknown:
            raise ConfigError(f"unknown strategies {unknown}")
        if not self.strategies:
            raise ConfigError("need at least one strategy")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ConfigError("seeds must be non-empty and distinct")
        for name in ("n_iter", "m_init", "m_cand", "k", "eval_interval"):
            if getattr(self, name) < 0 or \
                    (name not in ("n_iter",) and getattr(self, name) == 0):
                raise ConfigError(f"{name} must be positive")
        if self.test_grid and (len(self.test_grid) != 3
                               or any(d < 1 for d in self.test_grid)):
            raise ConfigError("test_grid must be three positive dimensions")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    # -- derived objects ----------------------------------------------------

    def grid_dims(self):
        if self.test_grid:
            return tuple(self.test_grid)
        return (25, 20, 20) if self.task == TASK_ONE_SPHERE else (20, 25, 25)

    def world_config(self):
        try:
            return WorldConfig(task=self.task, **self.world)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad world overrides: {exc}")

    def loop_params(self):
        from ..loop import LoopParams
        try:
            return LoopParams(n_iter=self.n_iter, m_init=self.m_init,
                              m_cand=self.m_cand, k=self.k,
                              eval_interval=self.eval_interval,
                              checkpoint_every=self.checkpoint_every,
                              **self.loop)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad loop overrides: {exc}")

    def arch_config(self):
        from ..model import ArchConfig
        try:
            overrides = dict(self.model)
            if "widths" in overrides:
                overrides["widths"] = tuple(overrides["widths"])
            return ArchConfig(**overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model overrides: {exc}")

    # -- I/O ------------------------------------------------------------------

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        for key in ("strategies", "seeds", "test_grid"):
            if key in doc:
                doc[key] = tuple(doc[key])
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc))

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        return cls.from_dict(doc)

    def with_overrides(self, pairs):
        """Apply CLI --set key=value pairs (dots descend into dicts)."""
        doc = dataclasses.asdict(self)
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"override {pair!r} is not key=value")
            key, raw = pair.split("=", 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = doc
            parts = key.split(".")
            for part in parts[:-1]:
                if part not in node or not isinstance(node[part], dict):
                    raise ConfigError(f"unknown override path {key!r}")
                node = node[part]
            if parts[0] not in doc:
                raise ConfigError(f"unknown override path {key!r}")
            node[parts[-1]] = value
        return type(self).from_dict(doc)


def desk_preset(task=TASK_ONE_SPHERE, strategies=("musel", "random"),
                **kwargs):
    """Small-budget preset used by the acceptance suite: 500 iterations,
    five seeds, 200-candidate pools."""
    return ExperimentConfig(task=task, strategies=tuple(strategies),
                            seeds=(0, 1, 2, 3, 4), n_iter=500, m_cand=200,
                            eval_interval=100, **kwargs)
