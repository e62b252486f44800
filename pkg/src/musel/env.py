"""Deterministic 2D tabletop push environment.

A ball sits on a square table bounded by four walls plus one diagonal wall
spanning two adjacent edges.  The single action is a straight push through
the ball's center at an angle ``alpha``; the ball (and, in the two-ball task,
a fixed-start second ball it may strike) then rolls under constant friction
deceleration, reflecting off walls with restitution, until everything is at
rest.  The observed effect is the pushed ball's net displacement.
"""

import csv
import dataclasses
import json
import math

import numpy as np

from . import kernels

TASK_ONE_SPHERE = "one_sphere"
TASK_TWO_SPHERE = "two_sphere"

ALPHA_MIN = -math.pi / 3.0
ALPHA_MAX = math.pi / 3.0

_EVENT_NAMES = {
    kernels.EV_START: "start",
    kernels.EV_STOP: "stop",
    kernels.EV_WALL_X: "wall_x",
    kernels.EV_WALL_Y: "wall_y",
    kernels.EV_DIAG: "diag",
    kernels.EV_DIAG_END: "diag_end",
    kernels.EV_HIT: "hit",
}


class ConfigError(ValueError):
    """Invalid world configuration."""


class SamplingError(RuntimeError):
    """Rejection sampling failed to find a valid placement."""


@dataclasses.dataclass(frozen=True)
class WorldConfig:
    """Geometry and physics constants of the table."""

    half_extent: float = 4.0
    ball_radius: float = 0.25
    push_offset: float = 0.5          # contact start/end offset of the push
    push_speed: float = 6.0
    friction_decel: float = 2.0
    restitution: float = 0.9
    margin: float = 0.05
    diag_start: tuple = (1.5, 4.0)
    diag_end: tuple = (4.0, 1.5)
    task: str = TASK_ONE_SPHERE
    fixed_ball: tuple = (1.5, 1.5)    # second ball start (two_sphere only)
    event_cap: int = 1000
    sample_attempt_cap: int = 10_000

    def __post_init__(self):
        if self.ball_radius <= 0:
            raise ConfigError("ball_radius must be positive")
        if self.push_offset <= self.ball_radius:
            raise ConfigError("push_offset must exceed ball_radius")
        if self.push_speed <= 0 or self.friction_decel <= 0:
            raise ConfigError("push_speed and friction_decel must be positive")
        if not 0.0 < self.restitution <= 1.0:
            raise ConfigError("restitution must lie in (0, 1]")
        if self.half_extent <= self.ball_radius + self.margin:
            raise ConfigError("table too small for the ball")
        if self.task not in (TASK_ONE_SPHERE, TASK_TWO_SPHERE):
            raise ConfigError(f"unknown task {self.task!r}")
        self._check_diag()
        if self.task == TASK_TWO_SPHERE:
            probe = dataclasses.replace(self, task=TASK_ONE_SPHERE)
            if not is_valid_position(probe, np.asarray(self.fixed_ball)):
                raise ConfigError("fixed_ball is not a valid placement")

    def _check_diag(self):
        h = self.half_extent
        on_edge = []
        for px, py in (self.diag_start, self.diag_end):
            if not (abs(px) <= h + 1e-9 and abs(py) <= h + 1e-9):
                raise ConfigError("diagonal endpoint outside the table")
            edges = set()
            if abs(abs(px) - h) < 1e-9:
                edges.add(("x", math.copysign(1.0, px)))
            if abs(abs(py) - h) < 1e-9:
                edges.add(("y", math.copysign(1.0, py)))
            if not edges:
                raise ConfigError("diagonal endpoint must lie on a table edge")
            on_edge.append(edges)
        if on_edge[0] & on_edge[1]:
            raise ConfigError("diagonal endpoints must span two distinct edges")
        frame = kernels.diag_frame(self.geom())
        # center of the table must be on the interior side of the wall
        if frame[5] * 0.0 + frame[6] * 0.0 - frame[7] >= 0.0:
            raise ConfigError("table center must be interior to the diagonal")

    def geom(self):
        """Flat geometry tuple consumed by the kernels."""
        return (self.half_extent, self.ball_radius, self.friction_decel,
                self.restitution, self.diag_start[0], self.diag_start[1],
                self.diag_end[0], self.diag_end[1])

    def to_json(self, path=None):
        doc = dataclasses.asdict(self)
        doc["units"] = {
            "half_extent": "length", "ball_radius": "length",
            "push_offset": "length", "push_speed": "length/time",
            "friction_decel": "length/time^2", "restitution": "1",
            "margin": "length", "diag_start": "length", "diag_end": "length",
            "fixed_ball": "length",
        }
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source):
        if isinstance(source, str) and source.lstrip().startswith("{"):
            doc = json.loads(source)
        else:
            with open(source) as fh:
                doc = json.load(fh)
        doc.pop("units", None)
        for key in ("diag_start", "diag_end", "fixed_ball"):
            if key in doc:
                doc[key] = tuple(doc[key])
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown world config fields: {sorted(extra)}")
        return cls(**doc)


@dataclasses.dataclass(frozen=True)
class InputPoint:
    """A push action: angle plus the ball's initial placement."""

    alpha: float
    pos: tuple

    def __post_init__(self):
        if not ALPHA_MIN - 1e-12 <= self.alpha <= ALPHA_MAX + 1e-12:
            raise ValueError(f"alpha {self.alpha} outside push-angle range")

    @property
    def encoded(self):
        """Raw 4-vector (sin a, cos a, pos_x, pos_y)."""
        return np.array([math.sin(self.alpha), math.cos(self.alpha),
                         self.pos[0], self.pos[1]])


@dataclasses.dataclass(frozen=True)
class Effect:
    """Net 2D displacement of the pushed ball."""

    delta: tuple

    @property
    def norm(self):
        return math.hypot(self.delta[0], self.delta[1])


def is_valid_position(cfg, pos):
    """Whether the ball (radius + margin) fits at ``pos``.

    Requires clearance from the four walls, the interior side of the
    diagonal wall, and (two-ball task) the fixed ball.
    """
    x, y = float(pos[0]), float(pos[1])
    clear = cfg.ball_radius + cfg.margin
    bound = cfg.half_extent - clear
    if not (-bound <= x <= bound and -bound <= y <= bound):
        return False
    e1x, e1y, tx, ty, seg_len, nx, ny, c = kernels.diag_frame(cfg.geom())
    if nx * x + ny * y - c >= 0.0:   # on or beyond the wall line
        return False
    proj = (x - e1x) * tx + (y - e1y) * ty
    proj = min(max(proj, 0.0), seg_len)
    dx, dy = x - (e1x + proj * tx), y - (e1y + proj * ty)
    if dx * dx + dy * dy < clear * clear:
        return False
    if cfg.task == TASK_TWO_SPHERE:
        fx, fy = cfg.fixed_ball
        sep = 2.0 * cfg.ball_radius + cfg.margin
        if (x - fx) ** 2 + (y - fy) ** 2 < sep * sep:
            return False
    return True


def sample_input_space(cfg, rng, m):
    """Draw m i.i.d. inputs: alpha uniform, position uniform on the valid
    region (rejection sampling inside the wall-clearance box)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    bound = cfg.half_extent - cfg.ball_radius - cfg.margin
    points = []
    for _ in range(m):
        alpha = rng.uniform(ALPHA_MIN, ALPHA_MAX)
        for _attempt in range(cfg.sample_attempt_cap):
            pos = rng.uniform(-bound, bound, size=2)
            if is_valid_position(cfg, pos):
                points.append(InputPoint(alpha, (pos[0], pos[1])))
                break
        else:
            raise SamplingError(
                f"no valid placement in {cfg.sample_attempt_cap} attempts")
    return points


def push_endpoints(cfg, x):
    """Start and end of the pusher's straight stroke through the ball."""
    ca, sa = math.cos(x.alpha), math.sin(x.alpha)
    r = cfg.push_offset
    px, py = x.pos
    return (np.array([px - r * ca, py - r * sa]),
            np.array([px + r * ca, py + r * sa]))


def simulate_roll(cfg, pos0, direction, speed, record_events=False):
    """Roll the ball from ``pos0`` along unit ``direction`` until rest.

    Returns the rest position, or (rest, events) when ``record_events``;
    events are (t, x, y, vx, vy, name) tuples for the pushed ball.
    """
    s2 = cfg.fixed_ball if cfg.task == TASK_TWO_SPHERE else (math.nan, math.nan)
    rx, ry, _, _, _, events = kernels.simulate_push(
        cfg.geom(), float(pos0[0]), float(pos0[1]),
        float(direction[0]), float(direction[1]), float(speed),
        s2[0], s2[1], cfg.event_cap, record_events)
    rest = np.array([rx, ry])
    if record_events:
        named = [(t, x, y, vx, vy, _EVENT_NAMES[int(code)])
                 for t, x, y, vx, vy, code in events]
        return rest, named
    return rest


def execute_and_observe(cfg, x, trajectory_path=None):
    """Run one push and return the observed Effect.

    The second ball (two-ball task) is reset to its fixed start before every
    execution.  With ``trajectory_path`` the event trajectory of the pushed
    ball is dumped as CSV rows (t, x, y, vx, vy, event).
    """
    direction = (math.cos(x.alpha), math.sin(x.alpha))
    if trajectory_path is not None:
        rest, events = simulate_roll(cfg, x.pos, direction, cfg.push_speed,
                                     record_events=True)
        with open(trajectory_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "y", "vx", "vy", "event"])
            writer.writerows(events)
    else:
        rest = simulate_roll(cfg, x.pos, direction, cfg.push_speed)
    return Effect((float(rest[0] - x.pos[0]), float(rest[1] - x.pos[1])))


def reference_roll_batch(cfg, pos0, direction, speed, dt=1e-4):
    """Fixed-step oracle integrator for a batch of pushes (test use)."""
    s2 = None
    if cfg.task == TASK_TWO_SPHERE:
        s2 = np.tile(np.asarray(cfg.fixed_ball, dtype=float),
                     (pos0.shape[0], 1))
    return kernels.dense_push_batch(cfg.geom(), pos0, direction,
                                    np.asarray(speed, dtype=float), s2, dt)


def boundary_distance(cfg, pos):
    """Distance from a point to the nearest wall or the diagonal segment."""
    x, y = float(pos[0]), float(pos[1])
    h = cfg.half_extent
    d = min(h - abs(x), h - abs(y))
    e1x, e1y, tx, ty, seg_len, _, _, _ = kernels.diag_frame(cfg.geom())
    proj = (x - e1x) * tx + (y - e1y) * ty
    proj = min(max(proj, 0.0), seg_len)
    d_seg = math.hypot(x - (e1x + proj * tx), y - (e1y + proj * ty))
    return min(d, d_seg)


def max_effect_norm(cfg):
    """Upper bound on displacement: stopping distance plus bounce slack."""
    stop = cfg.push_speed ** 2 / (2.0 * cfg.friction_decel)
    return stop + 2.0 * (2.0 * cfg.half_extent * math.sqrt(2.0))
