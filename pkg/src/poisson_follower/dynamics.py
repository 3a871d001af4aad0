"""Simultaneous halving dynamics: every agent moves halfway to its leader.

Positions are carried as unevaluated sums ``hi + lo`` of two doubles
(error-free transformations below).  A follower of a merged pair approaches
it like 2**-n, and with a single double its coordinates would become
indistinguishable from the pair's after ~45 steps in a 142-wide window; the
two-term representation postpones that to beyond ~95 steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .follower_graph import (FollowerGraph, build_graph, mutual_pairs_index,
                             pair_delta)
from .sampler import Configuration

FREEZE_TOL = 1e-12
DEFAULT_MEMORY_CAP = 1 << 30  # bytes of stored configurations and graphs

ULTIMATE_LEADER = "ultimate_leader"
ULTIMATE_FOLLOWER = "ultimate_follower"
UNDECIDED = "undecided"


def _two_sum(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def _fast_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def step(config: Configuration, graph: FollowerGraph) -> Configuration:
    """Positions at the next step; all agents update simultaneously."""
    if len(graph) != len(config) or not np.array_equal(graph.ids, config.ids):
        raise InvalidArgument("graph does not belong to this configuration")
    h = graph.leader
    hi, lo = config.xy, config.xy_lo
    win = config.window
    if win.is_torus:
        dhi = win.wrap_delta(hi[h] - hi) * 0.5
        s, e = _two_sum(hi, dhi)
        t = e + (lo + 0.5 * (lo[h] - lo))
        s, t = _fast_two_sum(s, t)
        s = win.wrap_points(s)
    else:
        s, e = _two_sum(hi, hi[h])
        t = e + (lo + lo[h])
        s, t = _fast_two_sum(s, t)
        s *= 0.5
        t *= 0.5
    # a mutual pair lands on one exact common point
    pairs = mutual_pairs_index(graph)
    s[pairs[:, 1]] = s[pairs[:, 0]]
    t[pairs[:, 1]] = t[pairs[:, 0]]
    return config.with_positions(s, t, step=config.step + 1)


def displacement(c0: Configuration, c1: Configuration) -> np.ndarray:
    """Per-agent distance moved between two configurations of the same agents."""
    win = c0.window
    d = c1.xy - c0.xy
    if win.is_torus:
        d = win.wrap_delta(d)
    d = d + (c1.xy_lo - c0.xy_lo)
    return np.hypot(d[:, 0], d[:, 1])


def _nbytes(config: Configuration) -> int:
    return config.ids.nbytes + config.xy.nbytes + config.xy_lo.nbytes + 3 * 8 * len(config)


@dataclass
class Trajectory:
    """Configurations and graphs of a run.

    When the stored history would exceed ``memory_cap`` bytes only the last
    two steps are kept; ``first_step`` tells which step ``configs[0]`` is.
    """

    configs: list
    graphs: list
    frozen_at: np.ndarray  # step at which the agent merged, -1 if never
    last_displacement: np.ndarray
    summaries: list = field(default_factory=list)
    first_step: int = 0
    freeze_tol: float = FREEZE_TOL

    @property
    def ids(self) -> np.ndarray:
        return self.configs[-1].ids

    @property
    def last_step(self) -> int:
        return self.configs[-1].step

    def __len__(self) -> int:
        return self.last_step + 1

    def config_at(self, n: int) -> Configuration:
        k = n - self.first_step
        if k < 0 or k >= len(self.configs):
            raise IndexError(f"step {n} not retained (retained from {self.first_step})")
        return self.configs[k]

    def graph_at(self, n: int) -> FollowerGraph:
        k = n - self.first_step
        if k < 0 or k >= len(self.graphs):
            raise IndexError(f"graph of step {n} not retained")
        return self.graphs[k]

    def frozen_map(self) -> dict:
        return {int(a): (int(s) if s >= 0 else None)
                for a, s in zip(self.ids, self.frozen_at)}


def _summary(config: Configuration, graph: FollowerGraph, frozen_at: np.ndarray) -> dict:
    labels = graph.party_labels()
    n_parties = int(labels.max()) + 1 if len(labels) else 0
    return {
        "step": config.step,
        "n_agents": len(config),
        "n_frozen": int(np.count_nonzero(frozen_at >= 0)),
        "n_pairs": int(np.count_nonzero(graph.mutual) // 2),
        "mean_party_size": len(config) / n_parties if n_parties else 0.0,
    }


def _mark_frozen(graph: FollowerGraph, frozen_at: np.ndarray, n: int, tol: float):
    merged = graph.mutual & (graph.nn_distance <= tol) & (frozen_at < 0)
    frozen_at[merged] = n


def run(config: Configuration, steps: int, freeze_tol: float = FREEZE_TOL,
        memory_cap: int = DEFAULT_MEMORY_CAP, summaries: bool = True) -> Trajectory:
    """Iterate graph construction and halving ``steps`` times.

    The trajectory holds ``steps + 1`` configurations and as many graphs (the
    graph of the final configuration included).
    """
    if steps < 0:
        raise InvalidArgument("steps must be non-negative")
    g = build_graph(config)
    frozen_at = np.full(len(config), -1, dtype=np.int64)
    _mark_frozen(g, frozen_at, config.step, freeze_tol)
    traj = Trajectory([config], [g], frozen_at, np.zeros(len(config)),
                      first_step=config.step, freeze_tol=freeze_tol)
    if summaries:
        traj.summaries.append(_summary(config, g, frozen_at))
    per_step = 2 * _nbytes(config)
    rolling = per_step * (steps + 1) > memory_cap
    c = config
    for _ in range(steps):
        c_next = step(c, g)
        traj.last_displacement = displacement(c, c_next)
        g = build_graph(c_next)
        _mark_frozen(g, frozen_at, c_next.step, freeze_tol)
        traj.configs.append(c_next)
        traj.graphs.append(g)
        if rolling and len(traj.configs) > 2:
            del traj.configs[0]
            del traj.graphs[0]
            traj.first_step += 1
        if summaries:
            traj.summaries.append(_summary(c_next, g, frozen_at))
        c = c_next
    return traj


def limit_labels(traj: Trajectory, tol: float = 0.0) -> np.ndarray:
    """Array of ULTIMATE_LEADER / ULTIMATE_FOLLOWER / UNDECIDED per agent index.

    A follower must still have moved more than ``tol`` during the last step
    and belong (in the last graph) to a party whose root pair has merged.
    """
    if len(traj.configs) < 2 and traj.last_step == traj.first_step:
        raise InvalidArgument("trajectory needs at least two steps")
    g = traj.graphs[-1]
    frozen = traj.frozen_at >= 0
    labels = g.party_labels()
    root_frozen = np.zeros(labels.max() + 1, dtype=bool)
    pairs = mutual_pairs_index(g)
    root_frozen[labels[pairs[:, 0]]] |= frozen[pairs[:, 0]] & frozen[pairs[:, 1]]
    follower = (~frozen) & (traj.last_displacement > tol) & root_frozen[labels]
    out = np.full(len(g), UNDECIDED, dtype=object)
    out[frozen] = ULTIMATE_LEADER
    out[follower] = ULTIMATE_FOLLOWER
    return out


def classify_limit(traj: Trajectory, tol: float = 0.0) -> dict:
    lab = limit_labels(traj, tol)
    return dict(zip(traj.ids.tolist(), lab.tolist()))
