"""Long-run behaviour: stable chains, branching breaks and limit statistics.

In a stable chain anchor <- a1 <- a2 <- ... every agent keeps its leader, so
a_n(i) = (a_n(i-1) + a_{n-1}(i-1)) / 2 with the anchor (a merged pair) fixed.
Unrolling gives

    a_n(i) = anchor + sum_{k=0}^{min(i, n-1)} C(i, k) / 2**i * (a_{n-k} - anchor),

i.e. all binomial mass with k >= n lands on the anchor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (ULTIMATE_FOLLOWER, ULTIMATE_LEADER, UNDECIDED, Trajectory,
                       limit_labels)
from .errors import InsufficientData, InvalidArgument
from .follower_graph import FollowerGraph, Party

UNDECIDED_BUDGET = 0.01


@dataclass(frozen=True)
class StableChain:
    """Anchor plus followers a_1..a_N, a_1 following the anchor."""

    anchor: tuple
    positions: tuple

    def __post_init__(self):
        a = np.asarray(self.anchor, float)
        p = np.asarray(self.positions, float).reshape(-1, 2)
        if a.shape != (2,):
            raise InvalidArgument("anchor must be a planar point")
        if len(p) == 0:
            raise InvalidArgument("a chain needs at least one follower")
        object.__setattr__(self, "anchor", tuple(a))
        object.__setattr__(self, "positions", tuple(map(tuple, p)))

    def __len__(self):
        return len(self.positions)

    def offsets(self) -> np.ndarray:
        """a_n - anchor for n = 1..N."""
        return np.asarray(self.positions) - np.asarray(self.anchor)


def binomial_weights(i: int, kmax: int) -> list:
    """C(i, k) / 2**i for k = 0..kmax, each correctly rounded."""
    den = 1 << i
    return [math.comb(i, k) / den for k in range(kmax + 1)]


def stable_position(chain: StableChain, n: int, i: int) -> np.ndarray:
    """Position of a_n after i steps of the stable chain (i = 0 is the input)."""
    if not 1 <= n <= len(chain):
        raise InvalidArgument(f"index {n} outside 1..{len(chain)}")
    if i < 0:
        raise InvalidArgument("step must be non-negative")
    off = chain.offsets()
    kmax = min(i, n - 1)
    w = binomial_weights(i, kmax)
    anchor = chain.anchor
    return np.array([
        math.fsum([anchor[c]] + [w[k] * off[n - 1 - k, c] for k in range(kmax + 1)])
        for c in range(2)
    ])


def stable_trajectory(chain: StableChain, steps: int) -> np.ndarray:
    """(steps + 1, N, 2) array of closed-form positions."""
    return np.array([[stable_position(chain, n, i) for n in range(1, len(chain) + 1)]
                     for i in range(steps + 1)])


def _scaled_gap(gaps: np.ndarray, m: int, i: int) -> np.ndarray:
    """2**i * (a_m(i) - a_{m-1}(i)) = sum_k C(i, k) g_{m-k}; gaps[j-1] = g_j."""
    out = np.zeros(2)
    for k in range(min(i, m - 1) + 1):
        out = out + math.comb(i, k) * gaps[m - 1 - k]
    return out


def branching_break_step(chain: StableChain, sibling1, sibling2, max_steps: int = 100_000) -> int:
    """First step at which one of two followers of the chain's last agent is
    strictly closer to the other sibling than to their common leader.

    Evaluated from the closed forms: sibling distances halve every step while
    the distance to the leader, multiplied by 2**i, grows polynomially in i.
    Only the sibling/leader comparison is made; other agents are assumed not
    to interfere.
    """
    s1 = np.asarray(sibling1, float)
    s2 = np.asarray(sibling2, float)
    sep = float(np.hypot(*(s1 - s2)))
    if sep == 0.0:
        raise InvalidArgument("siblings coincide")
    pts = np.vstack([np.asarray(chain.anchor)[None], np.asarray(chain.positions)])
    n = len(chain)
    for s in (s1, s2):
        d = float(np.hypot(*(s - pts[-1])))
        if not d > 0:
            raise InvalidArgument("sibling coincides with its leader")
        if d > sep:
            raise InvalidArgument("siblings must initially be closer to their leader")
    for i in range(1, max_steps + 1):
        for s in (s1, s2):
            gaps = np.diff(np.vstack([pts, s[None]]), axis=0)
            g = _scaled_gap(gaps, n + 1, i)
            if float(np.hypot(*g)) > sep:
                return i
    raise InsufficientData(f"no break within {max_steps} steps")


# ------------------------------------------------------- limit statistics

@dataclass(frozen=True)
class LimitReport:
    lambda_l: float
    lambda_f: float
    n_bar: float
    mean_party_size: float
    steps_simulated: int
    undecided_fraction: float = 0.0
    stable_party_fraction: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def limit_report(traj: Trajectory, tol: float = 0.0, mask=None,
                 undecided_budget: float = UNDECIDED_BUDGET) -> LimitReport:
    """Fractions of ultimate leaders and followers at the last simulated step.

    ``mask`` restricts the agent fractions (e.g. to a core region); the mean
    party size is taken over the whole final graph.  With lambda_l the
    leader fraction, n_bar = 1/lambda_l - 1 is the mean number of ultimate
    followers per ultimate leader.
    """
    lab = limit_labels(traj, tol)
    sel = np.ones(len(lab), bool) if mask is None else np.asarray(mask, bool)
    if not sel.any():
        raise InsufficientData("no agents selected")
    lab = lab[sel]
    lam_l = float(np.mean(lab == ULTIMATE_LEADER))
    lam_f = float(np.mean(lab == ULTIMATE_FOLLOWER))
    und = float(np.mean(lab == UNDECIDED))
    if und >= undecided_budget:
        raise InsufficientData(f"{und:.2%} of agents undecided; simulate more steps")
    if lam_l == 0:
        raise InsufficientData("no agent has frozen yet")
    labels = traj.graphs[-1].party_labels()
    mean_party = len(labels) / (int(labels.max()) + 1)
    return LimitReport(lam_l, lam_f, 1.0 / lam_l - 1.0, mean_party, traj.last_step, und)


def is_stable_party(traj: Trajectory, party: Party, from_step: int | None = None):
    """(stable, first_change_step) over the retained graphs after ``from_step``.

    Stable means the leader of every member is the same at every later step.
    """
    start = traj.first_step if from_step is None else from_step
    g0 = traj.graph_at(start)
    idx = np.searchsorted(g0.ids, np.fromiter(party.members, dtype=np.int64))
    ref = g0.leader[idx]
    for n in range(start + 1, traj.last_step + 1):
        if not np.array_equal(traj.graph_at(n).leader[idx], ref):
            return False, n
    return True, None


def stable_party_mask(traj: Trajectory, from_step: int) -> np.ndarray:
    """Per party label of the graph at ``from_step``: leader map unchanged afterwards."""
    g0 = traj.graph_at(from_step)
    labels = g0.party_labels()
    changed = np.zeros(int(labels.max()) + 1, bool)
    for n in range(from_step + 1, traj.last_step + 1):
        diff = traj.graph_at(n).leader != g0.leader
        changed[labels[diff]] = True
    return ~changed


def branches_outside_root(graph: FollowerGraph) -> np.ndarray:
    """Per party label: some agent other than a root-pair member has 2+ followers.

    Root members may have their partner plus one chain follower.
    """
    labels = graph.party_labels()
    deg = graph.in_degree()
    limit = np.where(graph.mutual, 2, 1)
    out = np.zeros(int(labels.max()) + 1, bool)
    out[labels[deg > limit]] = True
    return out


def stable_party_fraction(traj: Trajectory, window: int = 10) -> float:
    """Fraction of parties at ``last_step - window`` unchanged until the end."""
    start = max(traj.first_step, traj.last_step - window)
    return float(np.mean(stable_party_mask(traj, start)))
