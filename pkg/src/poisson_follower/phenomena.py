"""Detection of the step-to-step phenomena of the follower dynamics.

Every detector looks at two consecutive follower graphs (and, where needed,
the configurations).  Agent-level detectors come in two flavours sharing the
same vectorised masks: ``*_mask`` functions give one boolean per agent index
(used for frequency counting) and ``detect_*`` functions give lists of
``EventRecord``.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, Unsupported
from .follower_graph import FollowerGraph, Party


class PhenomenonKind(enum.Enum):
    LeaderKeep = "LeaderKeep"
    LeaderSwap = "LeaderSwap"
    FollowerLoss = "FollowerLoss"
    FollowerGain = "FollowerGain"
    FollowerKeep = "FollowerKeep"
    UltimatePairOrder0 = "UltimatePairOrder0"
    UltimatePairOrder1Type1 = "UltimatePairOrder1Type1"
    UltimatePairOrder1Type2 = "UltimatePairOrder1Type2"
    FollowerInversion = "FollowerInversion"
    FourBodySwap = "FourBodySwap"
    PartyFission = "PartyFission"
    PartyGain = "PartyGain"
    PartyLoss = "PartyLoss"
    PartySwap = "PartySwap"
    PartyRestructuring = "PartyRestructuring"
    StableParty = "StableParty"

    @classmethod
    def parse(cls, name: str) -> "PhenomenonKind":
        key = name.strip().replace("_", "").replace("-", "").lower()
        for k in cls:
            if k.value.lower() == key:
                return k
        raise Unsupported(f"unknown phenomenon kind {name!r}")


K = PhenomenonKind

# fixed number of principal agents, where the kind has one
ARITY = {K.LeaderKeep: 2, K.LeaderSwap: 3, K.UltimatePairOrder0: 2,
         K.UltimatePairOrder1Type1: 2, K.UltimatePairOrder1Type2: 2,
         K.FollowerInversion: 2, K.FourBodySwap: 4, K.PartyFission: 2,
         K.PartySwap: 1}


@dataclass(frozen=True)
class EventRecord:
    """One occurrence; ``step`` is n for an event observed between n and n+1."""

    kind: PhenomenonKind
    step: int
    agents: tuple
    party_ids: tuple | None = None
    tag: str | None = None

    def __post_init__(self):
        agents = tuple(int(a) for a in self.agents)
        object.__setattr__(self, "agents", agents)
        if len(set(agents)) != len(agents):
            raise InvalidArgument(f"{self.kind.value}: agents must be distinct")
        n = ARITY.get(self.kind)
        if n is not None and len(agents) != n:
            raise InvalidArgument(f"{self.kind.value} needs {n} agents, got {len(agents)}")


def _check_pair(g0: FollowerGraph, g1: FollowerGraph):
    if len(g0) != len(g1) or not np.array_equal(g0.ids, g1.ids):
        raise InvalidArgument("graphs are not over the same agents")


# ---------------------------------------------------------------- masks

def leader_swap_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    _check_pair(g0, g1)
    return g0.leader != g1.leader


def follower_change_masks(g0: FollowerGraph, g1: FollowerGraph):
    """(loss, gain, keep) masks over agents viewed as leaders."""
    swap = leader_swap_mask(g0, g1)
    n = len(g0)
    loss = np.zeros(n, bool)
    gain = np.zeros(n, bool)
    keep = np.zeros(n, bool)
    loss[g0.leader[swap]] = True
    gain[g1.leader[swap]] = True
    keep[g0.leader[~swap]] = True
    return loss, gain, keep


def order0_mask(g0: FollowerGraph) -> np.ndarray:
    return g0.mutual


def _new_pair(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    """Agents in a g1 mutual pair that was not already mutual in g0."""
    h0, h1 = g0.leader, g1.leader
    was = (h0 == h1) & (h0[h1] == np.arange(len(g0)))
    return g1.mutual & ~was


def order1_type1_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    """Both members of a new pair whose members shared their g0 leader."""
    _check_pair(g0, g1)
    return _new_pair(g0, g1) & (g0.leader == g0.leader[g1.leader])


def order1_type2_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    """The follower of a g0 edge whose two ends became a new pair.

    Only the follower is marked; the leader of the edge is its partner.
    """
    _check_pair(g0, g1)
    return _new_pair(g0, g1) & (g0.leader == g1.leader)


def inversion_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    """Agents a with h0(a) = b, h1(b) = a and h1(a) != b."""
    _check_pair(g0, g1)
    a = np.arange(len(g0))
    b = g0.leader
    return (g1.leader[b] == a) & (g1.leader != b)


def four_body_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    """Agents A that swapped to A1 = h1(A) with A, h0(A), A1, h0(A1) distinct."""
    _check_pair(g0, g1)
    h0, h1 = g0.leader, g1.leader
    a = np.arange(len(g0))
    b1 = h0[h1]
    return (h1 != h0) & (b1 != a) & (b1 != h0)


# ------------------------------------------------------- agent detectors

def detect_edge_events(g0: FollowerGraph, g1: FollowerGraph) -> list:
    _check_pair(g0, g1)
    ids, h0, h1 = g0.ids, g0.leader, g1.leader
    step = g0.step
    out = []
    swap = h0 != h1
    for i in range(len(g0)):
        if swap[i]:
            out.append(EventRecord(K.LeaderSwap, step, (ids[i], ids[h0[i]], ids[h1[i]])))
        else:
            out.append(EventRecord(K.LeaderKeep, step, (ids[i], ids[h0[i]])))
    f0 = _follower_lists(h0)
    f1 = _follower_lists(h1)
    for y in sorted(set(f0) | set(f1)):
        before, after = f0.get(y, set()), f1.get(y, set())
        for kind, group in ((K.FollowerLoss, before - after),
                            (K.FollowerGain, after - before),
                            (K.FollowerKeep, before & after)):
            if group:
                out.append(EventRecord(kind, step, (ids[y], *ids[sorted(group)])))
    return out


def _follower_lists(h: np.ndarray) -> dict:
    out: dict = {}
    for i, y in enumerate(h.tolist()):
        out.setdefault(y, set()).add(i)
    return out


def detect_ultimate_pairs_order0(g0: FollowerGraph) -> list:
    a = np.flatnonzero(g0.mutual)
    a = a[a < g0.leader[a]]
    return [EventRecord(K.UltimatePairOrder0, g0.step, (g0.ids[i], g0.ids[g0.leader[i]]))
            for i in a]


def detect_ultimate_pairs_order1(g0: FollowerGraph, g1: FollowerGraph, c0=None) -> list:
    """New g1 pairs: Type 1 agents are (smaller, larger); Type 2 are (follower, leader)."""
    if c0 is not None and len(c0) != len(g0):
        raise InvalidArgument("configuration does not match the graphs")
    ids, h1 = g0.ids, g1.leader
    out = []
    t1 = order1_type1_mask(g0, g1)
    for i in np.flatnonzero(t1 & (np.arange(len(g0)) < h1)):
        out.append(EventRecord(K.UltimatePairOrder1Type1, g0.step, (ids[i], ids[h1[i]])))
    for i in np.flatnonzero(order1_type2_mask(g0, g1)):
        out.append(EventRecord(K.UltimatePairOrder1Type2, g0.step, (ids[i], ids[h1[i]])))
    return out


def detect_inversions(g0: FollowerGraph, g1: FollowerGraph) -> list:
    """Events (a, b): b led a at step n and follows a at step n+1.

    The tag records whether b's new follower relation sits next to a pair
    created at this step: ``joined_new_pair`` when a itself entered a new
    mutual pair, else ``plain``.
    """
    ids, h0 = g0.ids, g0.leader
    new = _new_pair(g0, g1)
    out = []
    for a in np.flatnonzero(inversion_mask(g0, g1)):
        tag = "joined_new_pair" if new[a] else "plain"
        out.append(EventRecord(K.FollowerInversion, g0.step, (ids[a], ids[h0[a]]), tag=tag))
    return out


def detect_four_body_swap(g0: FollowerGraph, g1: FollowerGraph, c0=None, c1=None) -> list:
    """Events (A, B, A1, B1) with A->B, A1->B1 before and A->A1 after."""
    for c in (c0, c1):
        if c is not None and len(c) != len(g0):
            raise InvalidArgument("configuration does not match the graphs")
    ids, h0, h1 = g0.ids, g0.leader, g1.leader
    out = []
    for a in np.flatnonzero(four_body_mask(g0, g1)):
        a1 = h1[a]
        out.append(EventRecord(K.FourBodySwap, g0.step,
                               (ids[a], ids[h0[a]], ids[a1], ids[h0[a1]])))
    return out


# -------------------------------------------------------- party level

def _labels_from(parties_list, g: FollowerGraph) -> np.ndarray:
    if parties_list is None:
        return g.party_labels()
    lab = np.full(len(g), -1, dtype=np.int64)
    for p in parties_list:
        idx = np.searchsorted(g.ids, np.fromiter(p.members, dtype=np.int64))
        lab[idx] = p.id
    if np.any(lab < 0):
        raise InvalidArgument("parties do not cover every agent")
    return lab


def inherit_party_ids(labels0: np.ndarray, labels1: np.ndarray) -> np.ndarray:
    """Id of every step-(n+1) party, indexed by its label.

    A party inherits the id of the old party that contributed most of its
    members (ties to the smaller id).  When several new parties claim the same
    id, the largest keeps it (ties to the smaller label) and the others get
    fresh ids above every old id.
    """
    m1 = int(labels1.max()) + 1
    m0 = int(labels0.max()) + 1
    # contribution counts per (new, old)
    key = labels1 * m0 + labels0
    uk, cnt = np.unique(key, return_counts=True)
    new, old = uk // m0, uk % m0
    # plurality: sort by new, then count desc, then old asc
    order = np.lexsort((old, -cnt, new))
    first = np.ones(len(order), bool)
    first[1:] = new[order][1:] != new[order][:-1]
    claim = np.empty(m1, dtype=np.int64)
    claim[new[order][first]] = old[order][first]
    size = np.bincount(labels1, minlength=m1)
    ids = np.empty(m1, dtype=np.int64)
    nxt = m0
    order = np.lexsort((np.arange(m1), -size, claim))
    prev = -1
    for lab in order:
        if claim[lab] != prev:
            ids[lab] = claim[lab]
            prev = claim[lab]
        else:
            ids[lab] = nxt
            nxt += 1
    return ids


@dataclass(frozen=True)
class PartyTransition:
    """Per-agent and per-party bookkeeping shared by the party detectors."""

    labels0: np.ndarray
    labels1: np.ndarray
    new_ids: np.ndarray        # id of each new party label
    swapped: np.ndarray        # agent changed party
    fission: np.ndarray        # old party label -> has a new pair inside
    internal_swap: np.ndarray  # old party label -> leader swap inside the party
    loss: np.ndarray           # old party label -> lost members
    gain: np.ndarray           # new party label -> gained members
    restructured: np.ndarray   # old party label -> internal swap, no fission or loss
    stable: np.ndarray         # old party label -> nothing changed this step


def party_transition(g0: FollowerGraph, g1: FollowerGraph, labels0=None, labels1=None) -> PartyTransition:
    _check_pair(g0, g1)
    l0 = g0.party_labels() if labels0 is None else labels0
    l1 = g1.party_labels() if labels1 is None else labels1
    h0, h1 = g0.leader, g1.leader
    n0, n1 = int(l0.max()) + 1, int(l1.max()) + 1
    # each new party has exactly one 2-cycle; its members' old parties are
    # the lineage of the new party
    pair_a = np.flatnonzero(g1.mutual)
    lin_a = np.full(n1, -1, dtype=np.int64)
    lin_b = np.full(n1, -1, dtype=np.int64)
    lin_a[l1[pair_a]] = l0[pair_a]
    lin_b[l1[pair_a]] = l0[h1[pair_a]]
    q = l1
    swapped = (l0 != lin_a[q]) & (l0 != lin_b[q])
    new = _new_pair(g0, g1)
    inside = new & (l0 == l0[h1])
    fission = np.zeros(n0, bool)
    fission[l0[inside]] = True
    sw = (h0 != h1) & (l0[h1] == l0)
    internal = np.zeros(n0, bool)
    internal[l0[sw]] = True
    loss = np.zeros(n0, bool)
    loss[l0[swapped]] = True
    gain = np.zeros(n1, bool)
    gain[l1[swapped]] = True
    nid = inherit_party_ids(l0, l1)
    any_swap = np.zeros(n0, bool)
    any_swap[l0[h0 != h1]] = True
    # an old party gains if the new party inheriting its id gained members
    gained_old = np.zeros(n0, bool)
    gained_old[nid[(nid < n0) & gain]] = True
    restructured = internal & ~fission & ~loss
    stable = ~any_swap & ~loss & ~gained_old & ~fission
    return PartyTransition(l0, l1, nid, swapped, fission, internal, loss, gain,
                           restructured, stable)


def party_swap_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    return party_transition(g0, g1).swapped


def party_fission_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    """Members of new pairs formed inside a single old party."""
    l0 = g0.party_labels()
    return _new_pair(g0, g1) & (l0 == l0[g1.leader])


def restructuring_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    tr = party_transition(g0, g1)
    return tr.restructured[tr.labels0]


def stable_party_mask(g0: FollowerGraph, g1: FollowerGraph) -> np.ndarray:
    tr = party_transition(g0, g1)
    return tr.stable[tr.labels0]


def detect_party_events(p0, p1, g0: FollowerGraph, g1: FollowerGraph) -> list:
    """Party fission, swap, gain, loss, restructuring and per-step stability.

    ``p0``/``p1`` are the party lists of the two graphs (``None`` recomputes
    them).  A new party's "lineage" is the pair of old parties of its two
    root-pair members; an agent swaps party when its old party is not in the
    lineage of its new party, which also covers the followers that move with
    it.  StableParty here means no member changed leader and nothing entered
    or left during this step.
    """
    tr = party_transition(g0, g1, _labels_from(p0, g0), _labels_from(p1, g1))
    ids, h1 = g0.ids, g1.leader
    l0, l1, nid = tr.labels0, tr.labels1, tr.new_ids
    step = g0.step
    out = []
    new = _new_pair(g0, g1)
    for a in np.flatnonzero(new & (l0 == l0[h1]) & (np.arange(len(g0)) < h1)):
        out.append(EventRecord(K.PartyFission, step, (ids[a], ids[h1[a]]),
                               party_ids=(int(l0[a]), int(nid[l1[a]]))))
    for a in np.flatnonzero(tr.swapped):
        out.append(EventRecord(K.PartySwap, step, (ids[a],),
                               party_ids=(int(l0[a]), int(nid[l1[a]]))))
    sw_idx = np.flatnonzero(tr.swapped)
    for p in np.flatnonzero(tr.loss):
        who = sw_idx[l0[sw_idx] == p]
        out.append(EventRecord(K.PartyLoss, step, tuple(ids[who]), party_ids=(int(p), None)))
    for q in np.flatnonzero(tr.gain):
        who = sw_idx[l1[sw_idx] == q]
        out.append(EventRecord(K.PartyGain, step, tuple(ids[who]), party_ids=(None, int(nid[q]))))
    members = np.split(np.argsort(l0, kind="stable"),
                       np.cumsum(np.bincount(l0))[:-1])
    for p in np.flatnonzero(tr.restructured):
        out.append(EventRecord(K.PartyRestructuring, step, tuple(ids[members[p]]),
                               party_ids=(int(p), int(p))))
    for p in np.flatnonzero(tr.stable):
        out.append(EventRecord(K.StableParty, step, tuple(ids[members[p]]),
                               party_ids=(int(p), int(p))))
    return out


# ------------------------------------------------------------ umbrella

AGENT_MASKS = {
    K.UltimatePairOrder0: lambda g0, g1: order0_mask(g0),
    K.UltimatePairOrder1Type1: order1_type1_mask,
    K.UltimatePairOrder1Type2: order1_type2_mask,
    K.FollowerInversion: inversion_mask,
    K.FourBodySwap: four_body_mask,
    K.LeaderSwap: leader_swap_mask,
    K.LeaderKeep: lambda g0, g1: ~leader_swap_mask(g0, g1),
    K.FollowerLoss: lambda g0, g1: follower_change_masks(g0, g1)[0],
    K.FollowerGain: lambda g0, g1: follower_change_masks(g0, g1)[1],
    K.FollowerKeep: lambda g0, g1: follower_change_masks(g0, g1)[2],
    K.PartySwap: party_swap_mask,
    # gain and loss are carried by the same moving agents
    K.PartyGain: party_swap_mask,
    K.PartyLoss: party_swap_mask,
    K.PartyFission: party_fission_mask,
    K.PartyRestructuring: restructuring_mask,
    K.StableParty: stable_party_mask,
}


def agent_mask(kind: PhenomenonKind, g0: FollowerGraph, g1: FollowerGraph | None) -> np.ndarray:
    """Indicator of agents counted for ``kind`` (one count per agent at most).

    Counted agents: both members for order-0 and order-1 Type-1 pairs; the
    follower for Type 2; the follower a for an inversion; the swapping agent
    for a 4-body swap; the agent itself for edge events and party swaps.
    """
    try:
        fn = AGENT_MASKS[kind]
    except KeyError:
        raise Unsupported(f"no per-agent detector for {kind.value}") from None
    if g1 is None:
        if kind is not K.UltimatePairOrder0:
            raise InvalidArgument(f"{kind.value} needs two consecutive graphs")
        return order0_mask(g0)
    return fn(g0, g1)


def needs_step(kind: PhenomenonKind) -> bool:
    return kind is not K.UltimatePairOrder0


def detect_all(g0: FollowerGraph, g1: FollowerGraph, c0=None, c1=None) -> list:
    out = detect_ultimate_pairs_order0(g0)
    out += detect_edge_events(g0, g1)
    out += detect_ultimate_pairs_order1(g0, g1, c0)
    out += detect_inversions(g0, g1)
    out += detect_four_body_swap(g0, g1, c0, c1)
    out += detect_party_events(None, None, g0, g1)
    return out


def write_events_csv(events, path) -> None:
    """Columns: step, kind, agents (space separated), party_from, party_to, tag.

    ``path`` may also be an open text file.
    """
    if hasattr(path, "write"):
        _write_events(events, path)
        return
    with open(path, "w", newline="") as fh:
        _write_events(events, fh)


def _write_events(events, fh) -> None:
    w = csv.writer(fh)
    w.writerow(["step", "kind", "agents", "party_from", "party_to", "tag"])
    for e in events:
        pf, pt = e.party_ids if e.party_ids else (None, None)
        w.writerow([e.step, e.kind.value, " ".join(map(str, e.agents)),
                    "" if pf is None else pf, "" if pt is None else pt, e.tag or ""])
