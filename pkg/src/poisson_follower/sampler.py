"""Seeded homogeneous Poisson configurations in rectangular windows.

Random streams come from numpy's ``SeedSequence`` feeding a ``PCG64`` bit
generator.  Replica ``i`` of an experiment seeded with ``seed`` always uses
``SeedSequence(seed, spawn_key=(i,))``, so replicas are independent and can be
generated in any order or in parallel.  Both classes are part of numpy's
stability guarantee for a fixed numpy version (see ``RNG_VERSION``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

RNG_VERSION = f"numpy-{np.__version__}/PCG64/SeedSequence"

BOUNDARY_MODES = ("guard_margin", "torus")


@dataclass(frozen=True)
class Window:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    boundary_mode: str = "guard_margin"

    def __post_init__(self):
        for v in (self.xmin, self.xmax, self.ymin, self.ymax):
            if not math.isfinite(v):
                raise InvalidArgument("window bounds must be finite")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise InvalidArgument(f"degenerate window {self}")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise InvalidArgument(f"unknown boundary mode {self.boundary_mode!r}")

    @classmethod
    def square(cls, side: float, boundary_mode: str = "guard_margin") -> "Window":
        return cls(0.0, float(side), 0.0, float(side), boundary_mode)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def is_torus(self) -> bool:
        return self.boundary_mode == "torus"

    def contains(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return ((xy[:, 0] >= self.xmin) & (xy[:, 0] <= self.xmax)
                & (xy[:, 1] >= self.ymin) & (xy[:, 1] <= self.ymax))

    def wrap_delta(self, delta: np.ndarray) -> np.ndarray:
        """Shortest representative of a displacement (identity unless torus)."""
        if not self.is_torus:
            return delta
        delta = np.array(delta, dtype=float, copy=True)
        for axis, side in ((0, self.width), (1, self.height)):
            d = delta[..., axis]
            d -= side * np.round(d / side)
        return delta

    def wrap_points(self, xy: np.ndarray) -> np.ndarray:
        if not self.is_torus:
            return xy
        xy = np.array(xy, dtype=float, copy=True)
        xy[..., 0] = self.xmin + np.mod(xy[..., 0] - self.xmin, self.width)
        xy[..., 1] = self.ymin + np.mod(xy[..., 1] - self.ymin, self.height)
        return xy

    def to_dict(self) -> dict:
        return {"xmin": self.xmin, "xmax": self.xmax, "ymin": self.ymin,
                "ymax": self.ymax, "boundary_mode": self.boundary_mode}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class Configuration:
    """A set of identified agents with planar positions at one step.

    Agents are stored sorted by id so that array index order coincides with
    id order (this makes every "smaller id wins" tie-break an index
    comparison).  Positions are kept as an unevaluated sum ``xy + xy_lo``;
    the low-order part is zero for sampled configurations and carries the
    rounding residue of the halving dynamics (see ``dynamics``).
    """

    __slots__ = ("ids", "xy", "xy_lo", "window", "intensity", "step", "seed")

    def __init__(self, ids, xy, window: Window, intensity: float = 1.0,
                 step: int = 0, seed: int | None = None, xy_lo=None,
                 check: bool = True):
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        lo = (np.zeros_like(xy) if xy_lo is None
              else np.asarray(xy_lo, dtype=float).reshape(-1, 2))
        if len(ids) != len(xy) or lo.shape != xy.shape:
            raise InvalidArgument("ids and positions differ in length")
        if not intensity > 0:
            raise InvalidArgument("intensity must be positive")
        if step < 0:
            raise InvalidArgument("step must be non-negative")
        if len(ids) > 1 and np.any(np.diff(ids) <= 0):
            order = np.argsort(ids, kind="stable")
            ids, xy, lo = ids[order], xy[order], lo[order]
            if np.any(np.diff(ids) == 0):
                raise InvalidArgument("agent ids must be unique")
        if check and len(xy):
            if not np.all(np.isfinite(xy)):
                raise InvalidArgument("positions must be finite")
            if not np.all(window.contains(xy)):
                raise InvalidArgument("all positions must lie inside the window")
        object.__setattr__(self, "ids", _frozen(ids))
        object.__setattr__(self, "xy", _frozen(xy))
        object.__setattr__(self, "xy_lo", _frozen(lo))
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "intensity", float(intensity))
        object.__setattr__(self, "step", int(step))
        object.__setattr__(self, "seed", seed)

    def __setattr__(self, name, value):
        raise AttributeError("Configuration is immutable")

    def __len__(self) -> int:
        return len(self.ids)

    def __repr__(self) -> str:
        return (f"Configuration(n={len(self)}, step={self.step}, "
                f"intensity={self.intensity}, window={self.window})")

    @property
    def positions(self) -> np.ndarray:
        """Positions rounded to plain float64."""
        return self.xy + self.xy_lo

    def index_of(self, agent_id) -> int:
        from .errors import NotFound
        i = int(np.searchsorted(self.ids, agent_id))
        if i >= len(self.ids) or self.ids[i] != agent_id:
            raise NotFound(f"unknown agent id {agent_id}")
        return i

    def position(self, agent_id) -> np.ndarray:
        i = self.index_of(agent_id)
        return self.xy[i] + self.xy_lo[i]

    def agents(self) -> dict:
        return {int(a): (float(p[0]), float(p[1]))
                for a, p in zip(self.ids, self.positions)}

    def with_positions(self, xy, xy_lo=None, step: int | None = None) -> "Configuration":
        return Configuration(self.ids, xy, self.window, self.intensity,
                             self.step if step is None else step, self.seed,
                             xy_lo=xy_lo, check=False)

    def translated(self, offset) -> "Configuration":
        off = np.asarray(offset, dtype=float).reshape(2)
        w = self.window
        win = Window(w.xmin + off[0], w.xmax + off[0], w.ymin + off[1],
                     w.ymax + off[1], w.boundary_mode)
        return Configuration(self.ids, self.xy + off, win, self.intensity,
                             self.step, self.seed, xy_lo=self.xy_lo, check=False)

    def subset(self, mask) -> "Configuration":
        mask = np.asarray(mask, dtype=bool)
        return Configuration(self.ids[mask], self.xy[mask], self.window,
                             self.intensity, self.step, self.seed,
                             xy_lo=self.xy_lo[mask], check=False)


@dataclass(frozen=True)
class ExperimentPlan:
    seed: int = 0
    replicas: int = 40
    window: Window = field(default_factory=lambda: Window.square(142.0))
    intensity: float = 1.0
    guard_margin: float | None = None
    steps: int = 1

    def __post_init__(self):
        if self.replicas < 1:
            raise InvalidArgument("replicas must be positive")
        if not self.intensity > 0:
            raise InvalidArgument("intensity must be positive")
        if self.steps < 0:
            raise InvalidArgument("steps must be non-negative")
        margin = self.margin
        if margin < 0 or margin >= min(self.window.width, self.window.height) / 2:
            raise InvalidArgument(f"guard margin {margin} too large for window")

    @property
    def margin(self) -> float:
        if self.guard_margin is None:
            return default_guard_margin(self.intensity)
        return float(self.guard_margin)

    def core(self) -> Window:
        return core_region(self.window, self.margin)

    def replica_seed(self, i: int) -> np.random.SeedSequence:
        return replica_seed(self.seed, i)


def default_guard_margin(intensity: float) -> float:
    return 5.0 / math.sqrt(intensity)


def replica_seed(seed: int, replica: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(replica),))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def sample_poisson(window: Window, intensity: float, seed,
                   replica: int | None = None) -> Configuration:
    """Homogeneous Poisson sample: Poisson count, then iid uniform positions.

    ``seed`` may be an int or a ``SeedSequence``; when ``replica`` is given
    the stream for that replica of ``seed`` is used.
    """
    if not (intensity > 0 and math.isfinite(intensity)):
        raise InvalidArgument("intensity must be positive and finite")
    if replica is not None:
        ss = replica_seed(seed, replica)
    elif isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(seed))
    rng = make_rng(ss)
    n = int(rng.poisson(intensity * window.area))
    u = rng.random((n, 2))
    xy = np.empty((n, 2))
    xy[:, 0] = window.xmin + u[:, 0] * window.width
    xy[:, 1] = window.ymin + u[:, 1] * window.height
    # u < 1 strictly, but the affine map can round onto the upper edge; the
    # window is closed so that is still inside.
    seed_repr = int(seed) if not isinstance(seed, np.random.SeedSequence) else None
    return Configuration(np.arange(n), xy, window, intensity, 0, seed_repr)


def core_region(window: Window, margin: float) -> Window:
    """Window eroded by ``margin`` on every side (identity on a torus)."""
    if margin < 0 or margin >= min(window.width, window.height) / 2:
        raise InvalidArgument(f"margin {margin} must be in [0, min side / 2)")
    if window.is_torus:
        return window
    return Window(window.xmin + margin, window.xmax - margin,
                  window.ymin + margin, window.ymax - margin, window.boundary_mode)
