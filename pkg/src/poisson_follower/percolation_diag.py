"""Square-lattice diagnostics for the percolation argument on party sizes.

The plane is tiled by squares of side 2a centred at 2a*(i, j).  A square is
open at step 0 when it is occupied, every agent inside has its nearest
neighbour within a, and every agent inside has contraction ratio at most
1 - epsilon.  The step-1 criterion asks the same of the moved points on the
square and its 8 neighbours (layers 0-1), plus conditions on the step-0
points: every layer 0-1 square has a point in its central sub-square of side
a, and the surrounding "shield" layers are occupied with short nearest
neighbour distances.

Cell conditions over rings of neighbours are evaluated with min/max filters
on per-cell aggregates, so classifying a window is linear in its size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, ndimage

from .ball_geometry import lens_area
from .dynamics import Trajectory, step as advance
from .errors import InsufficientData, InvalidArgument
from .follower_graph import FollowerGraph, build_graph, contraction_ratios
from .sampler import Configuration, ExperimentPlan, Window, sample_poisson

# reason bits
EMPTY = 1       # (i) no point
FAR = 2         # (ii) some nearest neighbour farther than a
CONTRACT = 4    # (iii) some contraction ratio above 1 - epsilon
INNER = 8       # (a) a central sub-square of layers 0-1 is empty of step-0 points
SHIELD = 16     # (b) shield layers empty somewhere or with a far neighbour

REASON_NAMES = {EMPTY: "empty", FAR: "far_neighbor", CONTRACT: "contraction",
                INNER: "inner_square", SHIELD: "shield"}

EXCLUSION_CONSTANT = 4 * math.pi / 3 + math.sqrt(3) / 2
DEFAULT_SHIELD_LAYERS = (2, 4)


@dataclass(frozen=True)
class LatticeClassification:
    """Open/closed states of the lattice squares meeting a core region.

    ``reasons[i, j]`` is a bitmask of failed conditions; 0 means open.  The
    square ``[i, j]`` of the arrays is lattice cell ``(i0 + i, j0 + j)``.
    """

    a: float
    epsilon: float
    step: int
    origin: tuple
    reasons: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidArgument("a must be positive")
        if not 0 < self.epsilon < 1:
            raise InvalidArgument("epsilon must lie in (0, 1)")
        if self.step not in (0, 1):
            raise InvalidArgument("step must be 0 or 1")

    @property
    def open(self) -> np.ndarray:
        return self.reasons == 0

    @property
    def shape(self) -> tuple:
        return self.reasons.shape

    @property
    def open_fraction(self) -> float:
        return float(self.open.mean())

    @property
    def states(self) -> dict:
        i0, j0 = self.origin
        return {(i0 + i, j0 + j): ("open" if r == 0 else "closed")
                for (i, j), r in np.ndenumerate(self.reasons)}

    def reasons_of(self, cell) -> tuple:
        i0, j0 = self.origin
        r = int(self.reasons[cell[0] - i0, cell[1] - j0])
        return tuple(name for bit, name in REASON_NAMES.items() if r & bit)

    def cell_center(self, cell) -> np.ndarray:
        return 2 * self.a * np.asarray(cell, float)


def cell_index(xy, a: float) -> np.ndarray:
    """Lattice cell (i, j) of each point; cell (i, j) is centred at 2a*(i, j)."""
    return np.floor((np.asarray(xy, float) + a) / (2 * a)).astype(np.int64)


def _core_cells(core: Window, a: float) -> tuple:
    lo = cell_index([[core.xmin, core.ymin]], a)[0]
    hi = cell_index([[core.xmax, core.ymax]], a)[0]
    return lo, hi


class _Grid:
    """Per-cell aggregates on the cell range [lo - pad, hi + pad]."""

    def __init__(self, lo, hi, pad: int, a: float):
        self.base = np.asarray(lo) - pad
        self.shape = tuple(int(v) for v in np.asarray(hi) - np.asarray(lo) + 1 + 2 * pad)
        self.pad = pad
        self.a = a

    def locate(self, xy):
        idx = cell_index(xy, self.a) - self.base
        ok = (idx >= 0).all(1) & (idx[:, 0] < self.shape[0]) & (idx[:, 1] < self.shape[1])
        return idx, ok

    def count(self, xy, sel=None) -> np.ndarray:
        idx, ok = self.locate(xy)
        if sel is not None:
            ok &= sel
        out = np.zeros(self.shape, np.int64)
        np.add.at(out, (idx[ok, 0], idx[ok, 1]), 1)
        return out

    def maximum(self, xy, values) -> np.ndarray:
        idx, ok = self.locate(xy)
        out = np.full(self.shape, -np.inf)
        np.maximum.at(out, (idx[ok, 0], idx[ok, 1]), np.asarray(values, float)[ok])
        return out

    def inner(self, arr: np.ndarray) -> np.ndarray:
        p = self.pad
        return arr[p:arr.shape[0] - p, p:arr.shape[1] - p] if p else arr


def _inner_square_mask(xy, a: float) -> np.ndarray:
    """Point lies in the central sub-square (side a) of its own cell."""
    off = np.asarray(xy, float) - 2 * a * cell_index(xy, a)
    return (np.abs(off) <= a / 2).all(1)


def _box(r: int) -> np.ndarray:
    return np.ones((2 * r + 1, 2 * r + 1), bool)


def _ring(r0: int, r1: int) -> np.ndarray:
    fp = _box(r1)
    if r0 > 0:
        fp[r1 - r0 + 1:r1 + r0, r1 - r0 + 1:r1 + r0] = False
    return fp


def _all_filled(counts: np.ndarray, footprint) -> np.ndarray:
    return ndimage.minimum_filter(counts, footprint=footprint, mode="constant", cval=0) >= 1


def _all_below(maxima: np.ndarray, bound: float, footprint) -> np.ndarray:
    return ndimage.maximum_filter(maxima, footprint=footprint, mode="constant",
                                  cval=-np.inf) <= bound


def _check(a, epsilon):
    if not a > 0:
        raise InvalidArgument("a must be positive")
    if not 0 < epsilon < 1:
        raise InvalidArgument("epsilon must lie in (0, 1)")


def classify_step0(config: Configuration, graph: FollowerGraph, a: float, epsilon: float,
                   core: Window | None = None) -> LatticeClassification:
    """Open iff occupied, all nearest neighbours within a, all rho <= 1 - epsilon."""
    _check(a, epsilon)
    if len(graph) != len(config):
        raise InvalidArgument("graph and configuration differ in size")
    core = core or config.window
    lo, hi = _core_cells(core, a)
    grid = _Grid(lo, hi, 0, a)
    xy = config.xy
    reasons = np.where(grid.count(xy) == 0, EMPTY, 0)
    reasons |= np.where(grid.maximum(xy, graph.nn_distance) > a, FAR, 0)
    reasons |= np.where(grid.maximum(xy, contraction_ratios(graph)) > 1 - epsilon, CONTRACT, 0)
    return LatticeClassification(a, epsilon, 0, tuple(int(v) for v in lo), reasons,
                                 {"core": core.to_dict()})


def classify_step1(traj: Trajectory, a: float, epsilon: float, core: Window | None = None,
                   shield_layers: tuple = DEFAULT_SHIELD_LAYERS) -> LatticeClassification:
    """Step-1 criterion on layers 0-1 plus step-0 inner-square and shield conditions.

    ``shield_layers`` selects the ring of step-0 squares that must be occupied
    with nearest neighbours within a; (2, 4) is the wide variant, (2, 3) the
    narrow one.  The choice is echoed in the metadata.
    """
    _check(a, epsilon)
    if traj.first_step > 0 or traj.last_step < 1:
        raise InsufficientData("classification needs steps 0 and 1")
    r0, r1 = shield_layers
    if not 2 <= r0 <= r1:
        raise InvalidArgument("shield layers must start at 2")
    c0, c1 = traj.config_at(0), traj.config_at(1)
    g0, g1 = traj.graph_at(0), traj.graph_at(1)
    core = core or c0.window
    lo, hi = _core_cells(core, a)
    grid = _Grid(lo, hi, r1, a)
    near = _box(1)
    shield = _ring(r0, r1)

    reasons = np.zeros(grid.shape, np.int64)
    # conditions on the moved points
    reasons |= np.where(_all_filled(grid.count(c1.xy), near), 0, EMPTY)
    reasons |= np.where(_all_below(grid.maximum(c1.xy, g1.nn_distance), a, near), 0, FAR)
    rho1 = grid.maximum(c1.xy, contraction_ratios(g1))
    reasons |= np.where(_all_below(rho1, 1 - epsilon, near), 0, CONTRACT)
    # conditions on the initial points
    nn0 = grid.maximum(c0.xy, g0.nn_distance)
    inner_ok = _all_filled(grid.count(c0.xy, _inner_square_mask(c0.xy, a)), near)
    inner_ok &= _all_below(nn0, a, near)
    reasons |= np.where(inner_ok, 0, INNER)
    shield_ok = _all_filled(grid.count(c0.xy), shield) & _all_below(nn0, a, shield)
    reasons |= np.where(shield_ok, 0, SHIELD)

    meta = {"core": core.to_dict(), "shield_layers": [r0, r1],
            "wide_shield": r1 >= 4}
    return LatticeClassification(a, epsilon, 1, tuple(int(v) for v in lo),
                                 grid.inner(reasons), meta)


# ------------------------------------------------------------ probabilities

def p0_analytic(a: float, epsilon: float) -> float:
    """First-order expansion in epsilon of the contraction-tail probability.

    eps * (a^2 pi / K) * (exp(-a^2 K) + 4 pi / 3 + 17 / 8) with
    K = 4 pi / 3 + sqrt(3) / 2.  See ``p0_exact`` for the integral itself.
    """
    if not a > 0:
        raise InvalidArgument("a must be positive")
    if epsilon < 0:
        raise InvalidArgument("epsilon must be non-negative")
    k = EXCLUSION_CONSTANT
    return epsilon * (a * a * math.pi / k) * (math.exp(-a * a * k) + 4 * math.pi / 3 + 17 / 8)


def p0_exact(a: float, epsilon: float) -> float:
    """P0[nn distance < a and rho > 1 - epsilon] at unit intensity, by quadrature.

    With r1 the nearest-neighbour distance and r2 = r1 (1 - epsilon), the
    leader's own nearest neighbour must avoid B(y, r2) \\ B(x, r1) and hit
    B(y, r1) \\ (B(x, r1) u B(y, r2)).
    """
    if not a > 0:
        raise InvalidArgument("a must be positive")
    if not 0 <= epsilon < 1:
        raise InvalidArgument("epsilon must lie in [0, 1)")
    if epsilon == 0:
        return 0.0
    eq = float(lens_area(1.0, 1.0, 1.0))

    def f(r):
        r2 = r * (1 - epsilon)
        a1 = math.pi * r2 * r2 - float(lens_area(r, r2, r))
        a2 = math.pi * r * r - eq * r * r - a1
        return 2 * math.pi * r * math.exp(-math.pi * r * r - a1) * -math.expm1(-a2)

    return float(integrate.quad(f, 0.0, a, limit=200)[0])


def closed_probability_bound(a: float, epsilon: float) -> float:
    """Union bound on a step-0 square being closed:
    exp(-4a^2) + 4a^2 exp(-4 pi a^2) + 4a^2 p0_analytic(a, epsilon)."""
    if not a > 0:
        raise InvalidArgument("a must be positive")
    s = 4 * a * a
    return math.exp(-s) + s * math.exp(-s * math.pi) + s * p0_analytic(a, epsilon)


def closed_probability_union_bound(a: float, epsilon: float) -> float:
    """The same union bound with each term integrated directly:
    exp(-4a^2) + 4a^2 exp(-pi a^2) + 4a^2 p0_exact(a, epsilon)."""
    if not a > 0:
        raise InvalidArgument("a must be positive")
    s = 4 * a * a
    return math.exp(-s) + far_neighbor_bound(a) + s * p0_exact(a, epsilon)


def far_neighbor_bound(a: float) -> float:
    """Expected number of points of a side-2a square with nearest neighbour beyond a."""
    return 4 * a * a * math.exp(-math.pi * a * a)


def _tail_replica(args):
    plan, i, step, a, epsilon = args
    cfg = sample_poisson(plan.window, plan.intensity, plan.replica_seed(i))
    g = build_graph(cfg)
    if step == 1:
        cfg = advance(cfg, g)
        g = build_graph(cfg)
    inside = plan.core().contains(cfg.xy)
    hit = (g.nn_distance < a) & (contraction_ratios(g) > 1 - epsilon)
    return float(hit[inside].mean())


def _replica_mean(values) -> tuple:
    v = np.asarray(values, float)
    if len(v) < 2:
        raise InsufficientData("need at least two replicas")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def _map(fn, tasks, workers):
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def empirical_contraction_tail(plan: ExperimentPlan, step: int, a: float, epsilon: float,
                               workers: int = 1) -> tuple:
    """(probability, std_error): fraction of core agents with nn < a and
    rho > 1 - epsilon at the given step, averaged over replicas."""
    if step not in (0, 1):
        raise InvalidArgument("step must be 0 or 1")
    _check(a, epsilon)
    return _replica_mean(_map(_tail_replica, [(plan, i, step, a, epsilon)
                                              for i in range(plan.replicas)], workers))


def _closed_replica(args):
    plan, i, a, epsilon = args
    cfg = sample_poisson(plan.window, plan.intensity, plan.replica_seed(i))
    cls = classify_step0(cfg, build_graph(cfg), a, epsilon, plan.core())
    return 1.0 - cls.open_fraction


def empirical_closed_fraction(plan: ExperimentPlan, a: float, epsilon: float,
                              workers: int = 1) -> tuple:
    """(fraction, std_error) of closed step-0 squares in the core region."""
    _check(a, epsilon)
    return _replica_mean(_map(_closed_replica, [(plan, i, a, epsilon)
                                                for i in range(plan.replicas)], workers))


# ---------------------------------------------------------------- clusters

def _as_open(classification) -> np.ndarray:
    if isinstance(classification, LatticeClassification):
        return classification.open
    return np.asarray(classification, bool)


def cluster_statistics(classification) -> dict:
    """Largest 4-connected open and closed clusters and the open fraction."""
    op = _as_open(classification)

    def largest(mask):
        lab, n = ndimage.label(mask)
        return int(np.bincount(lab.ravel())[1:].max()) if n else 0

    return {"largest_closed_cluster": largest(~op),
            "largest_open_cluster": largest(op),
            "open_fraction": float(op.mean()) if op.size else 0.0}


def state_correlation(classification, separation: int = 10) -> tuple:
    """(correlation, approximate std_error) of open indicators for cells
    ``separation`` apart along either axis."""
    op = _as_open(classification).astype(float)
    k = int(separation)
    if k < 1:
        raise InvalidArgument("separation must be positive")
    pairs = [(op[:-k].ravel(), op[k:].ravel()), (op[:, :-k].ravel(), op[:, k:].ravel())]
    x = np.concatenate([p[0] for p in pairs])
    y = np.concatenate([p[1] for p in pairs])
    if len(x) < 3 or x.std() == 0 or y.std() == 0:
        raise InsufficientData("not enough variation for a correlation")
    return float(np.corrcoef(x, y)[0, 1]), 1.0 / math.sqrt(len(x))
