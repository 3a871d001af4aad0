"""Areas of unions and intersections of planar disks.

Exact areas for any number of disks come from Green's theorem: the boundary
of a union (or intersection) is a set of circular arcs, and each arc from
angle t0 to t1 on the circle (c, r) contributes

    r * (cx * (sin t1 - sin t0) - cy * (cos t1 - cos t0)) / 2 + r**2 * (t1 - t0) / 2.

``boundary_areas`` evaluates this for many small unions at once and is what
the frequency integrals use.  Monte Carlo and grid estimates are kept for
cross-validation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InvalidArgument, Unsupported

MAX_BALLS = 8
METHODS = ("exact_pair", "inclusion_exclusion", "monte_carlo", "grid", "boundary")


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 2:
            raise InvalidArgument("ball centre must be a planar point")
        object.__setattr__(self, "center", c)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidArgument("radius must be positive")

    @classmethod
    def through(cls, x, y) -> "Ball":
        """The ball centred at x whose boundary passes through y."""
        x = np.asarray(x, float)
        return cls(tuple(x), float(np.hypot(*(np.asarray(y, float) - x))))

    def contains(self, pts) -> np.ndarray:
        p = np.asarray(pts, float)
        d2 = (p[..., 0] - self.center[0]) ** 2 + (p[..., 1] - self.center[1]) ** 2
        return d2 <= self.radius ** 2


@dataclass(frozen=True)
class BallUnion:
    balls: tuple

    def __post_init__(self):
        b = tuple(self.balls)
        if not 1 <= len(b) <= MAX_BALLS:
            raise InvalidArgument(f"a union holds 1..{MAX_BALLS} balls")
        object.__setattr__(self, "balls", b)

    def __len__(self):
        return len(self.balls)

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.balls])

    @property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])

    def bounding_box(self):
        c, r = self.centers, self.radii
        return (c[:, 0] - r).min(), (c[:, 0] + r).max(), (c[:, 1] - r).min(), (c[:, 1] + r).max()

    def contains(self, pts) -> np.ndarray:
        return self.membership_matrix(pts).any(axis=-1)

    def membership_matrix(self, pts) -> np.ndarray:
        p = np.asarray(pts, float)[..., None, :]
        d2 = ((p - self.centers) ** 2).sum(-1)
        return d2 <= self.radii ** 2


def lens_area(r1, r2, d):
    """Area of the intersection of two disks with radii r1, r2 at distance d."""
    r1, r2, d = np.broadcast_arrays(*(np.asarray(v, float) for v in (r1, r2, d)))
    if np.any(r1 < 0) or np.any(r2 < 0) or np.any(d < 0):
        raise InvalidArgument("radii and distance must be non-negative")
    out = np.zeros(r1.shape)
    inner = d <= np.abs(r1 - r2)
    out[inner] = np.pi * np.minimum(r1, r2)[inner] ** 2
    mid = ~inner & (d < r1 + r2)
    a, b, e = r1[mid], r2[mid], d[mid]
    c1 = np.clip((e * e + a * a - b * b) / (2 * e * a), -1, 1)
    c2 = np.clip((e * e + b * b - a * a) / (2 * e * b), -1, 1)
    tri = 0.5 * np.sqrt(np.clip((-e + a + b) * (e + a - b) * (e - a + b) * (e + a + b), 0, None))
    out[mid] = a * a * np.arccos(c1) + b * b * np.arccos(c2) - tri
    return out[()] if out.ndim == 0 else out


def _active(C: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Mask dropping disks identical to an earlier one (and zero radii)."""
    N, k = R.shape
    act = R > 0
    for i in range(k):
        for j in range(i):
            same = (C[:, i, 0] == C[:, j, 0]) & (C[:, i, 1] == C[:, j, 1]) & (R[:, i] == R[:, j])
            act[:, i] &= ~(same & act[:, j])
    return act


def boundary_areas(C, R, mode: str = "union") -> np.ndarray:
    """Exact union (or intersection) areas of N groups of k disks.

    ``C`` has shape (N, k, 2), ``R`` shape (N, k).  Zero radii are ignored in
    unions; in intersections a zero radius makes the area zero.
    """
    C = np.asarray(C, float)
    R = np.asarray(R, float)
    if C.ndim != 3 or C.shape[:2] != R.shape or C.shape[2] != 2:
        raise InvalidArgument("expected centres (N, k, 2) and radii (N, k)")
    if mode not in ("union", "intersection"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    N, k = R.shape
    act = _active(C, R)
    total = np.zeros(N)
    two_pi = 2 * np.pi
    for i in range(k):
        ci, ri = C[:, i], R[:, i]
        cuts = [np.zeros(N), np.full(N, two_pi)]
        for j in range(k):
            if j == i:
                continue
            dv = C[:, j] - ci
            dist = np.hypot(dv[:, 0], dv[:, 1])
            rj = R[:, j]
            cross = act[:, j] & (dist < ri + rj) & (dist > np.abs(ri - rj))
            safe = np.where(cross, dist, 1.0) * np.where(ri > 0, ri, 1.0)
            half = np.arccos(np.clip((ri ** 2 + dist ** 2 - rj ** 2) / (2 * safe), -1, 1))
            base = np.arctan2(dv[:, 1], dv[:, 0])
            cuts.append(np.where(cross, np.mod(base - half, two_pi), 0.0))
            cuts.append(np.where(cross, np.mod(base + half, two_pi), 0.0))
        A = np.sort(np.stack(cuts, 1), 1)
        t0, t1 = A[:, :-1], A[:, 1:]
        tm = 0.5 * (t0 + t1)
        px = ci[:, 0, None] + ri[:, None] * np.cos(tm)
        py = ci[:, 1, None] + ri[:, None] * np.sin(tm)
        keep = np.ones(t0.shape, bool)
        for j in range(k):
            if j == i:
                continue
            cj, rj = C[:, j], R[:, j]
            d2 = (px - cj[:, 0, None]) ** 2 + (py - cj[:, 1, None]) ** 2
            if mode == "union":
                keep &= ~(act[:, j, None] & (d2 < rj[:, None] ** 2))
            else:
                keep &= ~act[:, j, None] | (d2 < rj[:, None] ** 2)
        contrib = (ri[:, None] * (ci[:, 0, None] * (np.sin(t1) - np.sin(t0))
                                  - ci[:, 1, None] * (np.cos(t1) - np.cos(t0)))
                   + ri[:, None] ** 2 * (t1 - t0))
        total += 0.5 * np.where(keep & act[:, i, None], contrib, 0.0).sum(1)
    if mode == "intersection":
        total = np.where((R <= 0).any(1), 0.0, total)
    return total


def intersection_area(balls) -> float:
    b = list(balls)
    C = np.array([[x.center for x in b]])
    R = np.array([[x.radius for x in b]])
    return float(boundary_areas(C, R, "intersection")[0])


def _inclusion_exclusion(u: BallUnion) -> float:
    b = u.balls
    total = 0.0
    for m in range(1, len(b) + 1):
        sign = 1.0 if m % 2 else -1.0
        for sub in combinations(b, m):
            if m == 1:
                term = math.pi * sub[0].radius ** 2
            elif m == 2:
                d = math.dist(sub[0].center, sub[1].center)
                term = float(lens_area(sub[0].radius, sub[1].radius, d))
            else:
                term = intersection_area(sub)
            total += sign * term
    return total


def _monte_carlo(u: BallUnion, budget: int, seed) -> tuple:
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = u.bounding_box()
    box = (x1 - x0) * (y1 - y0)
    hits = 0
    done = 0
    chunk = 1 << 18
    while done < budget:
        m = min(chunk, budget - done)
        p = np.column_stack([rng.uniform(x0, x1, m), rng.uniform(y0, y1, m)])
        hits += int(u.contains(p).sum())
        done += m
    f = hits / budget
    return float(box * f), float(box * math.sqrt(max(f * (1 - f), 0.0) / budget))


def _grid(u: BallUnion, budget: int) -> tuple:
    x0, x1, y0, y1 = u.bounding_box()
    side = max(int(math.sqrt(budget)), 2)
    hx, hy = (x1 - x0) / side, (y1 - y0) / side
    xs = x0 + hx * (np.arange(side) + 0.5)
    ys = y0 + hy * (np.arange(side) + 0.5)
    area = 0.0
    straddle = 0
    half_diag = 0.5 * math.hypot(hx, hy)
    c, r = u.centers, u.radii
    for y in ys:
        p = np.column_stack([xs, np.full(side, y)])
        dist = np.sqrt(((p[:, None, :] - c) ** 2).sum(-1))
        area += (dist <= r).any(1).sum() * hx * hy
        straddle += (np.abs(dist - r) <= half_diag).any(1).sum()
    # every misclassified cell straddles a circle
    return float(area), float(straddle * hx * hy)


def union_area(u: BallUnion, method: str = "boundary", budget: int = 1_000_000, seed=0) -> tuple:
    """(area, std_error); exact methods report an error of 0.

    The grid method reports a deterministic bound (area of cells crossed
    by a circle) in place of a standard error.
    """
    k = len(u)
    if method == "exact_pair":
        if k > 2:
            raise Unsupported("exact_pair handles at most two balls")
        return _inclusion_exclusion(u), 0.0
    if method == "inclusion_exclusion":
        if k > 3:
            raise Unsupported("inclusion_exclusion handles at most three balls")
        return _inclusion_exclusion(u), 0.0
    if method == "boundary":
        return float(boundary_areas(u.centers[None], u.radii[None])[0]), 0.0
    if budget < 1:
        raise InvalidArgument("budget must be positive")
    if method == "monte_carlo":
        return _monte_carlo(u, budget, seed)
    if method == "grid":
        return _grid(u, budget)
    raise Unsupported(f"unknown method {method!r}")


def cell_membership(u: BallUnion, s, point) -> bool:
    """True iff the point is in every ball indexed by ``s`` and in no other."""
    s = set(int(i) for i in s)
    if not s:
        raise InvalidArgument("cell index set must be non-empty")
    if not s <= set(range(len(u))):
        raise InvalidArgument("cell index out of range")
    inside = u.membership_matrix(np.asarray(point, float))
    want = np.zeros(len(u), bool)
    want[list(s)] = True
    return bool(np.array_equal(inside, want))


def cell_masses(u: BallUnion, budget: int = 200_000, seed=0) -> dict:
    """Monte Carlo area of every non-empty cell, keyed by frozenset of ball indices."""
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = u.bounding_box()
    box = (x1 - x0) * (y1 - y0)
    p = np.column_stack([rng.uniform(x0, x1, budget), rng.uniform(y0, y1, budget)])
    m = u.membership_matrix(p)
    code = (m * (1 << np.arange(len(u)))).sum(1)
    counts = np.bincount(code, minlength=1 << len(u))
    out = {}
    for c in range(1, 1 << len(u)):
        key = frozenset(i for i in range(len(u)) if c >> i & 1)
        out[key] = float(box * counts[c] / budget)
    return out
