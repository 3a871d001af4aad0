"""Nearest-neighbour follower graph and the objects derived from it.

Every agent follows its nearest other agent.  Exact ties (which appear after
pairs merge) go to the smaller agent id.  Because configurations keep agents
sorted by id, "smaller id" is "smaller array index" throughout this module.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import InvalidArgument, NotFound
from .sampler import Configuration

# Initial neighbour count requested from the k-d tree (self included).
_K0 = 8


def pair_delta(config: Configuration, i, j) -> np.ndarray:
    """Displacement ``pos[j] - pos[i]`` using the low-order position parts."""
    win = config.window
    hi = config.xy[j] - config.xy[i]
    if win.is_torus:
        hi = win.wrap_delta(hi)
    return hi + (config.xy_lo[j] - config.xy_lo[i])


def squared_distance(config: Configuration, i, j) -> np.ndarray:
    d = pair_delta(config, i, j)
    return d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]


def _pick(d2: np.ndarray, cand: np.ndarray):
    """Row-wise argmin of ``d2`` with ties going to the smaller candidate."""
    best = d2.min(axis=1)
    big = np.iinfo(np.int64).max
    masked = np.where(d2 == best[:, None], cand, big)
    return masked.min(axis=1), best


def _tree(config: Configuration) -> cKDTree:
    win = config.window
    if win.is_torus:
        shifted = config.xy - (win.xmin, win.ymin)
        box = np.array([win.width, win.height])
        shifted = np.where(shifted >= box, shifted - box, shifted)
        shifted = np.where(shifted < 0, 0.0, shifted)
        return cKDTree(shifted, boxsize=box)
    return cKDTree(config.xy)


def nearest_leaders(config: Configuration) -> tuple[np.ndarray, np.ndarray]:
    """Leader index and leader distance for every agent.

    Candidates come from a k-d tree on the high-order coordinates; the winner
    is re-ranked on the full positions.  An agent's answer is accepted only
    when the winner is strictly closer than everything the tree did not
    return (with a margin covering the coordinate rounding); otherwise the
    query is repeated with twice as many neighbours, up to all of them.
    """
    n = len(config)
    if n < 2:
        raise InvalidArgument("need at least two agents to build a follower graph")
    tree = _tree(config)
    scale = max(1.0, float(np.abs(config.xy).max()))
    slack = 64 * np.finfo(float).eps * scale + 2 * float(np.abs(config.xy_lo).max())
    leader = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n)
    pending = np.arange(n)
    k = min(_K0, n)
    while len(pending):
        pts = config.xy[pending]
        if config.window.is_torus:
            win = config.window
            pts = pts - (win.xmin, win.ymin)
            pts = np.where(pts >= tree.boxsize[:2], pts - tree.boxsize[:2], pts)
            pts = np.where(pts < 0, 0.0, pts)
        coarse, cand = tree.query(pts, k=k)
        cand = np.asarray(cand, dtype=np.int64).reshape(len(pending), k)
        coarse = np.asarray(coarse).reshape(len(pending), k)
        d2 = squared_distance(config, pending[:, None], cand)
        d2 = np.where(cand == pending[:, None], np.inf, d2)
        win_idx, best = _pick(d2, cand)
        if k >= n:
            ok = np.ones(len(pending), dtype=bool)
        else:
            ok = np.sqrt(best) < coarse[:, -1] - slack
        leader[pending[ok]] = win_idx[ok]
        dist2[pending[ok]] = best[ok]
        pending = pending[~ok]
        k = min(2 * k, n)
    return leader, np.sqrt(dist2)


def brute_force_leaders(config: Configuration, chunk: int = 512) -> np.ndarray:
    """O(n^2) reference: scan every pair, ties to the smaller index."""
    n = len(config)
    if n < 2:
        raise InvalidArgument("need at least two agents")
    out = np.empty(n, dtype=np.int64)
    allidx = np.arange(n)
    for start in range(0, n, chunk):
        rows = allidx[start:start + chunk]
        d2 = squared_distance(config, rows[:, None], allidx[None, :])
        d2[np.arange(len(rows)), rows] = np.inf
        best = d2.min(axis=1)
        out[rows] = np.argmax(d2 == best[:, None], axis=1)
    return out


@dataclass(frozen=True)
class Party:
    id: int
    members: frozenset
    root_pair: tuple | None = None

    def __len__(self):
        return len(self.members)


@dataclass
class FollowerGraph:
    """Leader map of one configuration (index-aligned with ``ids``)."""

    ids: np.ndarray
    leader: np.ndarray
    nn_distance: np.ndarray
    step: int = 0
    _followers: tuple | None = field(default=None, repr=False, compare=False)
    _labels: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.ids)

    # id <-> index helpers
    def index_of(self, agent_id) -> int:
        i = int(np.searchsorted(self.ids, agent_id))
        if i >= len(self.ids) or self.ids[i] != agent_id:
            raise NotFound(f"unknown agent id {agent_id}")
        return i

    def leader_of(self, agent_id) -> int:
        return int(self.ids[self.leader[self.index_of(agent_id)]])

    def leader_map(self) -> dict:
        return dict(zip(self.ids.tolist(), self.ids[self.leader].tolist()))

    @property
    def mutual(self) -> np.ndarray:
        """Mask of agents belonging to a 2-cycle."""
        return self.leader[self.leader] == np.arange(len(self))

    def follower_index(self):
        """CSR-style (indptr, order): followers of i are order[indptr[i]:indptr[i+1]]."""
        if self._followers is None:
            order = np.argsort(self.leader, kind="stable")
            counts = np.bincount(self.leader, minlength=len(self))
            indptr = np.concatenate([[0], np.cumsum(counts)])
            self._followers = (indptr, order)
        return self._followers

    def followers_of_index(self, i: int) -> np.ndarray:
        indptr, order = self.follower_index()
        return order[indptr[i]:indptr[i + 1]]

    def followers(self, agent_id) -> set:
        return set(self.ids[self.followers_of_index(self.index_of(agent_id))].tolist())

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.leader, minlength=len(self))

    def party_labels(self) -> np.ndarray:
        """Weakly connected component label per agent, numbered by smallest member."""
        if self._labels is None:
            n = len(self)
            adj = coo_matrix((np.ones(n), (np.arange(n), self.leader)), shape=(n, n))
            _, raw = connected_components(adj, directed=True, connection="weak")
            # relabel so that label order follows the smallest member index
            first = np.full(raw.max() + 1, n, dtype=np.int64)
            np.minimum.at(first, raw, np.arange(n))
            rank = np.empty_like(first)
            rank[np.argsort(first, kind="stable")] = np.arange(len(first))
            self._labels = rank[raw]
        return self._labels


def build_graph(config: Configuration) -> FollowerGraph:
    leader, dist = nearest_leaders(config)
    return FollowerGraph(config.ids, leader, dist, config.step)


def graph_from_leaders(ids, leader_ids, nn_distance=None, step: int = 0) -> FollowerGraph:
    """Graph from an explicit id -> leader-id assignment (mainly for tests)."""
    ids = np.asarray(ids, dtype=np.int64)
    order = np.argsort(ids)
    ids = ids[order]
    lead = np.searchsorted(ids, np.asarray(leader_ids, dtype=np.int64)[order])
    if np.any(lead == np.arange(len(ids))):
        raise InvalidArgument("an agent cannot lead itself")
    dist = (np.zeros(len(ids)) if nn_distance is None
            else np.asarray(nn_distance, dtype=float)[order])
    return FollowerGraph(ids, lead, dist, step)


def leader_of_order(graph: FollowerGraph, agent_id, k: int) -> int:
    if k < 1:
        raise InvalidArgument("order must be positive")
    i = graph.index_of(agent_id)
    # the walk ends on a 2-cycle, so only the parity of the excess matters
    for _ in range(min(k, 2 * len(graph) + (k % 2))):
        i = graph.leader[i]
    return int(graph.ids[i])


def leaders_of_order(graph: FollowerGraph, k: int) -> np.ndarray:
    """Vectorised h^k as an index array."""
    out = np.arange(len(graph))
    p = graph.leader.copy()
    while k:
        if k & 1:
            out = p[out]
        p = p[p]
        k >>= 1
    return out


def _forward_indices(graph: FollowerGraph, i: int) -> list:
    seen = []
    seen_set = set()
    j = graph.leader[i]
    while j not in seen_set:
        seen.append(int(j))
        seen_set.add(int(j))
        j = graph.leader[j]
    return [j for j in seen if j != i]


def forward_set(graph: FollowerGraph, agent_id) -> set:
    i = graph.index_of(agent_id)
    return set(graph.ids[_forward_indices(graph, i)].tolist())


def backward_set(graph: FollowerGraph, agent_id) -> set:
    i = graph.index_of(agent_id)
    indptr, order = graph.follower_index()
    out = set()
    stack = [i]
    while stack:
        j = stack.pop()
        for f in order[indptr[j]:indptr[j + 1]]:
            f = int(f)
            if f != i and f not in out:
                out.add(f)
                stack.append(f)
    return set(graph.ids[sorted(out)].tolist())


def mutual_pairs_index(graph: FollowerGraph) -> np.ndarray:
    """(m, 2) array of index pairs (a < b) that follow each other."""
    a = np.flatnonzero(graph.mutual)
    a = a[a < graph.leader[a]]
    return np.column_stack([a, graph.leader[a]])


def ultimate_leader_pairs(graph: FollowerGraph) -> list:
    p = mutual_pairs_index(graph)
    return [(int(graph.ids[a]), int(graph.ids[b])) for a, b in p]


def parties(graph: FollowerGraph) -> list:
    labels = graph.party_labels()
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    groups = np.split(order, bounds)
    pairs = mutual_pairs_index(graph)
    roots: dict = {}
    for a, b in pairs:
        roots.setdefault(int(labels[a]), []).append((int(graph.ids[a]), int(graph.ids[b])))
    out = []
    for g in groups:
        lab = int(labels[g[0]])
        rp = roots.get(lab, [])
        out.append(Party(lab, frozenset(graph.ids[g].tolist()),
                         rp[0] if len(rp) == 1 else None))
    return out


def contraction_ratios(graph: FollowerGraph) -> np.ndarray:
    """rho for every agent; 0 for mutual pairs and for zero-length edges."""
    h = graph.leader
    num = graph.nn_distance[h]
    den = graph.nn_distance
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    rho[graph.mutual] = 0.0
    return rho


def contraction_ratio(graph: FollowerGraph, config: Configuration | None, agent_id) -> float:
    if config is not None and len(config) != len(graph):
        raise InvalidArgument("graph was not built from this configuration")
    i = graph.index_of(agent_id)
    return float(contraction_ratios(graph)[i])


@dataclass(frozen=True)
class InDegreeHistogram:
    counts: dict
    max_degree: int
    # Poisson configurations have in-degree at most 5 almost surely; 6 needs
    # an exact equidistance
    generic: bool


def in_degree_histogram(graph: FollowerGraph) -> InDegreeHistogram:
    deg = graph.in_degree()
    counts = dict(sorted(Counter(deg.tolist()).items()))
    m = int(deg.max()) if len(deg) else 0
    return InDegreeHistogram(counts, m, m <= 5)
