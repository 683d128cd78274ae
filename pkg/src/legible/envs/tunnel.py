"""Procedurally generated tunnels with colored reward regions and obstacles.

The agent starts in column 0 and is carried one column forward on every step;
its three actions only choose the row (up, down, stay). Entering a cell of its
own color pays +1, entering an obstacle costs -10 and ends the episode, and
reaching the last column ends the episode successfully.

Colors are stored as one boolean layer per color, so a merged tunnel keeps every
source tunnel's colored cells exactly, even where two colors overlap.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .common import EpisodeOverError, Transition

UP, DOWN, STAY = range(3)
ACTION_NAMES = ("up", "down", "stay")
ROW_DELTA = (-1, 1, 0)

REWARD = 1.0
PENALTY = -10.0

# Column-distance buckets of the reduced observation: 1-2, 3-5, 6-sight.
_BUCKET_EDGES = (2, 5)
N_BUCKETS = 3


@dataclass(frozen=True)
class TunnelSpec:
    length: int = 60
    width: int = 8
    sight: int = 10
    colors: int = 3
    rects_per_color: int = 3
    rect_height: tuple = (2, 4)
    rect_width: tuple = (8, 16)
    obstacles: int = 6
    square_size: tuple = (1, 2)
    line_length: tuple = (2, 3)
    start_row: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("length", "width", "sight", "colors"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.length < 2:
            raise ValueError("a tunnel needs at least 2 columns")
        if self.rects_per_color < 0 or self.obstacles < 0:
            raise ValueError("shape counts must be >= 0")
        for name in ("rect_height", "rect_width", "square_size", "line_length"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must be a range 1 <= lo <= hi, got {(lo, hi)}")
        if self.start_row is not None and not 0 <= self.start_row < self.width:
            raise ValueError("start_row outside the tunnel")
        if self.rects_per_color and (self.rect_height[0] > self.width or self.rect_width[0] > self.length):
            raise ValueError("colored rectangles cannot fit in the tunnel")
        if self.obstacles:
            # obstacles stay out of column 0, so only length - 1 columns are usable
            if self.square_size[0] > min(self.width, self.length - 1) or \
                    self.line_length[0] > max(self.width, self.length - 1):
                raise ValueError("obstacles cannot fit in the tunnel")

    @property
    def start(self) -> tuple:
        return (self.width // 2 if self.start_row is None else self.start_row, 0)

    @classmethod
    def full_scale(cls, seed: int = 0) -> "TunnelSpec":
        return cls(length=200, width=12, sight=20, colors=4, rects_per_color=5, obstacles=10, seed=seed)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "TunnelSpec":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields
        if unknown:
            raise ValueError(f"unknown tunnel spec keys: {sorted(unknown)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**kwargs)


class Placement(NamedTuple):
    kind: str  # "square", "line" or "rect"
    row: int
    col: int
    height: int
    width: int
    color: int = -1


class Tunnel:
    """Static tunnel layout: obstacle mask, per-color layers, start cell, sight."""

    def __init__(self, obstacles, colors, start, sight: int, placements: Sequence[Placement] = (),
                 spec: Optional[TunnelSpec] = None):
        self.obstacles = np.array(obstacles, dtype=bool)
        self.colors = np.array(colors, dtype=bool)
        if self.obstacles.ndim != 2 or self.colors.ndim != 3 or self.colors.shape[1:] != self.obstacles.shape:
            raise ValueError("color layers must be (C, W, L) matching the (W, L) obstacle mask")
        if self.colors.shape[0] < 1:
            raise ValueError("a tunnel needs at least one color")
        if np.any(self.colors & self.obstacles[None]):
            raise ValueError("a cell cannot be both obstacle and colored")
        self.start = (int(start[0]), int(start[1]))
        r, c = self.start
        if not (0 <= r < self.width and 0 <= c < self.length):
            raise ValueError("start cell outside the tunnel")
        if self.obstacles[r, c] or self.colors[:, r, c].any():
            raise ValueError("start cell must be empty")
        if sight < 1:
            raise ValueError("sight must be >= 1")
        self.sight = int(sight)
        self.obstacles.flags.writeable = False
        self.colors.flags.writeable = False
        self.placements = tuple(placements)
        self.spec = spec
        self._key = None
        self._masks = None

    @property
    def width(self) -> int:
        return self.obstacles.shape[0]

    @property
    def length(self) -> int:
        return self.obstacles.shape[1]

    @property
    def n_colors(self) -> int:
        return self.colors.shape[0]

    def layout_key(self) -> str:
        """Digest identifying the layout; trajectories on equal layouts share it."""
        if self._key is None:
            h = hashlib.sha1()
            h.update(np.packbits(self.obstacles).tobytes())
            h.update(np.packbits(self.colors).tobytes())
            h.update(repr((self.obstacles.shape, self.colors.shape, self.start, self.sight)).encode())
            self._key = h.hexdigest()[:16]
        return self._key

    def masks(self):
        if self._masks is None:
            self._masks = ([column_masks(layer) for layer in self.colors], column_masks(self.obstacles))
        return self._masks

    def single_color(self, color: int) -> "Tunnel":
        return Tunnel(self.obstacles, self.colors[color:color + 1], self.start, self.sight,
                      [p for p in self.placements if p.kind != "rect" or p.color == color], self.spec)

    def __eq__(self, other):
        if not isinstance(other, Tunnel):
            return NotImplemented
        return (self.start == other.start and self.sight == other.sight
                and np.array_equal(self.obstacles, other.obstacles)
                and np.array_equal(self.colors, other.colors))

    def to_dict(self) -> dict:
        return {
            "kind": "tunnel",
            "length": self.length,
            "width": self.width,
            "sight": self.sight,
            "start": list(self.start),
            "obstacles": [[int(r), int(c)] for r, c in zip(*np.nonzero(self.obstacles))],
            "colors": [[[int(r), int(c)] for r, c in zip(*np.nonzero(layer))] for layer in self.colors],
            "placements": [list(p) for p in self.placements],
            "spec": self.spec.to_dict() if self.spec is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tunnel":
        w, length = int(data["width"]), int(data["length"])
        obstacles = np.zeros((w, length), dtype=bool)
        for r, c in data["obstacles"]:
            obstacles[r, c] = True
        colors = np.zeros((len(data["colors"]), w, length), dtype=bool)
        for k, cells in enumerate(data["colors"]):
            for r, c in cells:
                colors[k, r, c] = True
        spec = TunnelSpec.from_dict(data["spec"]) if data.get("spec") else None
        return cls(obstacles, colors, tuple(data["start"]), int(data["sight"]),
                   [Placement(*p) for p in data.get("placements", [])], spec)


def _shape_range(rng, lo_hi) -> int:
    lo, hi = lo_hi
    return int(rng.integers(lo, hi + 1))


def tunnel_generate(spec: TunnelSpec) -> Tunnel:
    """Sample a tunnel: obstacles first, then each color's rectangles in turn.

    Shape anchors are uniform over every position where the shape fits.
    Obstacles never touch column 0. A rectangle only colors cells that are still
    empty, so obstacles beat colors, earlier colors beat later ones, and the
    start cell stays empty.
    """
    rng = np.random.default_rng(spec.seed)
    w, length = spec.width, spec.length
    obstacles = np.zeros((w, length), dtype=bool)
    placements = []
    for _ in range(spec.obstacles):
        # draw the shape, retrying orientations that cannot fit
        for _attempt in range(100):
            if rng.random() < 0.5:
                size = _shape_range(rng, spec.square_size)
                kind, h, wd = "square", size, size
            else:
                n = _shape_range(rng, spec.line_length)
                kind, (h, wd) = "line", ((n, 1) if rng.random() < 0.5 else (1, n))
            if h <= w and wd <= length - 1:
                break
        else:
            raise ValueError("obstacle shapes cannot fit in the tunnel")
        r = int(rng.integers(0, w - h + 1))
        c = int(rng.integers(1, length - wd + 1))
        obstacles[r:r + h, c:c + wd] = True
        placements.append(Placement(kind, r, c, h, wd))

    colors = np.zeros((spec.colors, w, length), dtype=bool)
    taken = obstacles.copy()
    taken[spec.start] = True
    for color in range(spec.colors):
        for _ in range(spec.rects_per_color):
            h = min(_shape_range(rng, spec.rect_height), w)
            wd = min(_shape_range(rng, spec.rect_width), length)
            r = int(rng.integers(0, w - h + 1))
            c = int(rng.integers(0, length - wd + 1))
            colors[color, r:r + h, c:c + wd] = True
            placements.append(Placement("rect", r, c, h, wd, color))
        colors[color] &= ~taken
        taken |= colors[color]
    return Tunnel(obstacles, colors, spec.start, spec.sight, placements, spec)


def tunnel_merge(tunnels: Sequence[Tunnel]) -> Tunnel:
    """Stack the color layers of tunnels that share everything but their colors."""
    if not tunnels:
        raise ValueError("nothing to merge")
    first = tunnels[0]
    for t in tunnels[1:]:
        if t.obstacles.shape != first.obstacles.shape:
            raise ValueError("tunnels differ in dimensions")
        if t.start != first.start or t.sight != first.sight:
            raise ValueError("tunnels differ in start cell or sight")
        if not np.array_equal(t.obstacles, first.obstacles):
            raise ValueError("tunnels differ in obstacle layout")
    colors = np.concatenate([t.colors for t in tunnels], axis=0)
    placements = [p for p in first.placements if p.kind != "rect"]
    offset = 0
    for t in tunnels:
        placements.extend(p._replace(color=p.color + offset) for p in t.placements if p.kind == "rect")
        offset += t.n_colors
    return Tunnel(first.obstacles, colors, first.start, first.sight, placements, first.spec)


# --- reduced observation -------------------------------------------------------
#
# state = (row, nearest own-color cell, nearest obstacle cell), where "nearest"
# ranges over cells in the sight window that the agent can still reach
# (|row offset| <= column offset), ordered by column offset, then |row offset|,
# upward first. Each target is either absent or (column bucket, row offset).


class TargetFeature(NamedTuple):
    bucket: int
    drow: int


class ObservationFeatures(NamedTuple):
    row: int
    reward: Optional[TargetFeature]
    obstacle: Optional[TargetFeature]


def n_target_codes(width: int) -> int:
    return 1 + N_BUCKETS * (2 * width - 1)


def n_observations(width: int) -> int:
    return width * n_target_codes(width) ** 2


def column_bucket(dcol: int) -> int:
    if dcol < 1:
        raise ValueError("column offset must be >= 1")
    for k, edge in enumerate(_BUCKET_EDGES):
        if dcol <= edge:
            return k
    return N_BUCKETS - 1


def _encode_target(target: Optional[TargetFeature], width: int) -> int:
    if target is None:
        return 0
    if not (0 <= target.bucket < N_BUCKETS and -width < target.drow < width):
        raise ValueError(f"target feature {target} out of range")
    return 1 + target.bucket * (2 * width - 1) + target.drow + width - 1


def _decode_target(code: int, width: int) -> Optional[TargetFeature]:
    if code == 0:
        return None
    bucket, off = divmod(code - 1, 2 * width - 1)
    return TargetFeature(bucket, off - width + 1)


def encode_observation(features: ObservationFeatures, width: int) -> int:
    if not 0 <= features.row < width:
        raise ValueError("row outside the tunnel")
    n = n_target_codes(width)
    return (features.row * n + _encode_target(features.reward, width)) * n + _encode_target(features.obstacle, width)


def decode_observation(state: int, width: int) -> ObservationFeatures:
    n = n_target_codes(width)
    if not 0 <= state < width * n * n:
        raise ValueError(f"state {state} out of range")
    rest, obstacle = divmod(int(state), n)
    row, reward = divmod(rest, n)
    return ObservationFeatures(row, _decode_target(reward, width), _decode_target(obstacle, width))


def column_masks(layer: np.ndarray) -> list:
    """Per-column row bitmasks (bit r set when row r is occupied)."""
    weights = 1 << np.arange(layer.shape[0], dtype=np.int64)
    return [int(x) for x in (layer.astype(np.int64) * weights[:, None]).sum(axis=0)]


def nearest_target(masks: Sequence[int], row: int, col: int, sight: int, width: int) -> Optional[TargetFeature]:
    """Closest occupied cell ahead within ``sight`` columns and the reachable cone."""
    last = min(col + sight, len(masks) - 1)
    for dcol in range(1, last - col + 1):
        m = masks[col + dcol]
        if not m:
            continue
        for d in range(0, min(dcol, width - 1) + 1):
            if d == 0:
                if (m >> row) & 1:
                    return TargetFeature(column_bucket(dcol), 0)
                continue
            if row - d >= 0 and (m >> (row - d)) & 1:
                return TargetFeature(column_bucket(dcol), -d)
            if row + d < width and (m >> (row + d)) & 1:
                return TargetFeature(column_bucket(dcol), d)
    return None


def observation_features(tunnel: Tunnel, color: int, position) -> ObservationFeatures:
    row, col = position
    color_masks, obstacle_masks = tunnel.masks()
    return ObservationFeatures(
        int(row),
        nearest_target(color_masks[color], row, col, tunnel.sight, tunnel.width),
        nearest_target(obstacle_masks, row, col, tunnel.sight, tunnel.width),
    )


def observe(tunnel: Tunnel, color: int, position) -> int:
    if not 0 <= color < tunnel.n_colors:
        raise IndexError(f"color {color} out of range")
    return encode_observation(observation_features(tunnel, color, position), tunnel.width)


def observation_fingerprint(width: int, sight: int) -> str:
    return f"tunnel-obs:W={width}:S={sight}"


class TunnelEnv:
    """One agent traversing one tunnel while seeking ``color``."""

    n_actions = 3

    def __init__(self, tunnel: Tunnel, color: int = 0):
        if not 0 <= color < tunnel.n_colors:
            raise IndexError(f"color {color} out of range")
        self.tunnel = tunnel
        self.color = color
        self.position = tunnel.start
        self.done = False

    @property
    def n_states(self) -> int:
        return n_observations(self.tunnel.width)

    @property
    def fingerprint(self) -> str:
        return observation_fingerprint(self.tunnel.width, self.tunnel.sight)

    @property
    def state(self) -> int:
        return observe(self.tunnel, self.color, self.position)

    def joint_state(self) -> tuple:
        """The state as seen by each color's policy."""
        return tuple(observe(self.tunnel, c, self.position) for c in range(self.tunnel.n_colors))

    def reset(self, seed=None) -> int:
        self.position = self.tunnel.start
        self.done = False
        return self.state

    def step(self, action: int) -> Transition:
        if self.done:
            raise EpisodeOverError("step() called after the episode ended")
        if not 0 <= action < 3:
            raise IndexError(f"action {action} out of range")
        t = self.tunnel
        row = min(max(self.position[0] + ROW_DELTA[action], 0), t.width - 1)
        col = self.position[1] + 1
        self.position = (row, col)
        if t.obstacles[row, col]:
            self.done = True
            return Transition(self.state, PENALTY, True, hit_obstacle=True)
        collected = tuple(int(c) for c in np.nonzero(t.colors[:, row, col])[0])
        reward = REWARD if self.color in collected else 0.0
        success = col == t.length - 1
        self.done = success
        return Transition(self.state, reward, success, collected=collected, success=success)


class TunnelTrainingEnv:
    """Draws a fresh single-color tunnel from ``spec`` on every reset."""

    n_actions = 3

    def __init__(self, spec: TunnelSpec):
        self.spec = dataclasses.replace(spec, colors=1)
        self.env: Optional[TunnelEnv] = None

    @property
    def n_states(self) -> int:
        return n_observations(self.spec.width)

    @property
    def fingerprint(self) -> str:
        return observation_fingerprint(self.spec.width, self.spec.sight)

    @property
    def state(self) -> int:
        return self.env.state

    def reset(self, seed=None) -> int:
        seed = 0 if seed is None else int(seed)
        self.env = TunnelEnv(tunnel_generate(dataclasses.replace(self.spec, seed=seed)), 0)
        return self.env.reset()

    def step(self, action: int) -> Transition:
        return self.env.step(action)
