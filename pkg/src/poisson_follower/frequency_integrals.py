"""Integral-geometry formulas for pair densities.

Order 0 has a closed form.  Order 1, Type 1 reduces to integrals over
semi-algebraic sets of point tuples (the reference point x3 pinned at the
origin) of exp(-area of a union of balls).  They are estimated by importance
sampling from Gaussian proposals, and the union area inside the integrand is
computed exactly (``ball_geometry``), so the only error is sampling error.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .ball_geometry import boundary_areas
from .errors import InvalidArgument
from .sampler import make_rng

MUTUAL_EXCLUSION_AREA = math.pi / 3 + math.sqrt(3) / 2
TRUNCATION_RADIUS = 5.0
DEFAULT_SIGMA = 1.0
DEFAULT_SAMPLES = 4_000_000


def density_order0_closed_form() -> float:
    """Fraction of points in a mutual nearest-neighbour pair (intensity 1)."""
    return math.pi / (math.pi + MUTUAL_EXCLUSION_AREA)


@dataclass(frozen=True)
class IntegralResult:
    value: float
    std_error: float
    samples: int
    domain: str
    seed: int | None = None
    hits: int | None = None  # samples with a non-zero integrand

    def __post_init__(self):
        if not self.std_error >= 0:
            raise InvalidArgument("std_error must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def density_order0_numeric(samples: int = 1_000_000, seed=0, method: str = "monte_carlo") -> IntegralResult:
    """Radial integral of 2 pi v exp(-pi v^2) exp(-v^2 (pi/3 + sqrt3/2)).

    ``monte_carlo`` draws v from the density 2 pi v exp(-pi v^2) (a Rayleigh
    law), so the estimator averages exp(-c v^2); ``quadrature`` uses
    adaptive Gauss-Kronrod.
    """
    c = MUTUAL_EXCLUSION_AREA
    if method == "quadrature":
        val, err = integrate.quad(lambda v: 2 * math.pi * v * math.exp(-(math.pi + c) * v * v),
                                  0, math.inf, epsabs=1e-13, epsrel=1e-12)
        return IntegralResult(val, err, 0, "order0", None)
    if method != "monte_carlo":
        raise InvalidArgument(f"unknown method {method!r}")
    if samples < 1:
        raise InvalidArgument("samples must be positive")
    rng = make_rng(seed)
    v = rng.rayleigh(1 / math.sqrt(2 * math.pi), samples)
    w = np.exp(-c * v * v)
    se = float(w.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return IntegralResult(float(w.mean()), se, samples, "order0", int(seed))


# ------------------------------------------------------------- domains

@dataclass(frozen=True)
class ConstraintSet:
    """Strict inequalities d(a, b) < d(c, e) between named points.

    ``free`` lists the points sampled (x3 is pinned at the origin); a name
    ending in a prime denotes a step-1 position given by ``midpoints``.
    ``balls`` lists (centre, through) pairs of the empty-ball union.
    """

    name: str
    free: tuple
    inequalities: tuple
    midpoints: tuple
    balls: tuple

    @property
    def variables(self) -> int:
        return len(self.free)

    @property
    def full(self) -> tuple:
        """Point order when x3 is supplied explicitly (inserted before x4)."""
        f = list(self.free)
        f.insert(f.index("x4"), "x3")
        return tuple(f)


_BASE_MID = (("x1'", ("x1", "x3")), ("x2'", ("x2", "x3")), ("x3'", ("x3", "x4")))
_BASE_INEQ = (
    (("x1", "x3"), ("x1", "x2")), (("x1", "x3"), ("x1", "x4")),
    (("x2", "x3"), ("x2", "x1")), (("x2", "x3"), ("x2", "x4")),
    (("x3", "x4"), ("x3", "x1")), (("x3", "x4"), ("x3", "x2")),
    (("x1'", "x2'"), ("x1'", "x3'")), (("x2'", "x1'"), ("x2'", "x3'")),
)
_BASE_BALLS = (("x3", "x4"), ("x1", "x3"), ("x2", "x3"))


def _extra_follower(leader: str) -> tuple:
    others = [p for p in ("x1", "x2", "x3", "x4") if p != leader]
    ineq = [(("x", leader), ("x", o)) for o in others]
    ineq += [(("x1", "x3"), ("x1", "x")), (("x2", "x3"), ("x2", "x")),
             (("x4", "x3"), ("x4", "x"))]
    ineq.append((("x'", "x1'"), ("x1'", "x2'")))
    return tuple(ineq)


DOMAINS = {
    "D": ConstraintSet("D", ("x1", "x2", "x4"), _BASE_INEQ, _BASE_MID, _BASE_BALLS),
    # an extra point following x1 comes between x1' and x2'
    "D1": ConstraintSet("D1", ("x", "x1", "x2", "x4"),
                        _BASE_INEQ + _extra_follower("x1"),
                        _BASE_MID + (("x'", ("x", "x1")),),
                        _BASE_BALLS + (("x", "x1"),)),
    # an extra follower of x3; its step-1 position is the midpoint with x3
    "D2": ConstraintSet("D2", ("x", "x1", "x2", "x4"),
                        _BASE_INEQ + _extra_follower("x3"),
                        _BASE_MID + (("x'", ("x", "x3")),),
                        _BASE_BALLS + (("x", "x3"),)),
    # an extra pair x -> y, none of x1, x2, x3 following x or y
    "D3": ConstraintSet(
        "D3", ("x", "y", "x1", "x2", "x4"),
        _BASE_INEQ + tuple((("x", "y"), ("x", o)) for o in ("x1", "x2", "x3", "x4"))
        + ((("x1", "x3"), ("x1", "x")), (("x1", "x3"), ("x1", "y")),
           (("x2", "x3"), ("x2", "x")), (("x2", "x3"), ("x2", "y")),
           (("x3", "x4"), ("x3", "x")), (("x3", "x4"), ("x3", "y")),
           (("x1'", "x'"), ("x1'", "x2'"))),
        _BASE_MID + (("x'", ("x", "y")),),
        _BASE_BALLS + (("x", "y"),)),
}


def _named(cs: ConstraintSet, pts) -> dict:
    """Map point names to (N, 2) arrays from a list/array of points."""
    arr = np.asarray(pts, float)
    if arr.ndim == 2:
        arr = arr[:, None, :]
    elif arr.ndim != 3:
        raise InvalidArgument("points must have shape (k, 2) or (k, N, 2)")
    k = arr.shape[0]
    if k == cs.variables:
        names = cs.free
        out = dict(zip(names, arr))
        out["x3"] = np.zeros_like(arr[0])
    elif k == cs.variables + 1:
        out = dict(zip(cs.full, arr))
    else:
        raise InvalidArgument(
            f"{cs.name} takes {cs.variables} free points (or {cs.variables + 1} with x3), got {k}")
    for name, (a, b) in cs.midpoints:
        out[name] = 0.5 * (out[a] + out[b])
    return out


def _d2(p, q):
    d = p - q
    return d[:, 0] ** 2 + d[:, 1] ** 2


def _membership(cs: ConstraintSet, P: dict) -> np.ndarray:
    ok = np.ones(len(P["x1"]), bool)
    for (a, b), (c, e) in cs.inequalities:
        ok &= _d2(P[a], P[b]) < _d2(P[c], P[e])
    return ok


def membership(cs, points) -> bool | np.ndarray:
    """Whether the tuple satisfies every inequality of ``cs`` strictly.

    ``points`` is ordered as ``cs.free`` (x3 at the origin) or as
    ``cs.full``; a stacked (k, N, 2) array gives a vector answer.
    """
    cs = DOMAINS[cs] if isinstance(cs, str) else cs
    single = np.asarray(points, float).ndim == 2
    res = _membership(cs, _named(cs, points))
    return bool(res[0]) if single else res


def integrand(cs: ConstraintSet, P: dict) -> np.ndarray:
    """Indicator of ``cs`` times exp(-area of the ball union)."""
    ok = _membership(cs, P)
    out = np.zeros(len(ok))
    if ok.any():
        C = np.stack([P[a][ok] for a, _ in cs.balls], 1)
        R = np.stack([np.sqrt(_d2(P[a][ok], P[b][ok])) for a, b in cs.balls], 1)
        out[ok] = np.exp(-boundary_areas(C, R))
    return out


# anchored extra points are spread in units of |x1|, the scale of the
# empty ball around x1
ANCHOR_SCALE = 1.0
HALF_SCALE = 0.5


def _gauss_logpdf(d2, scale):
    return -np.log(2 * np.pi * scale * scale) - d2 / (2 * scale * scale)


def _propose(cs: ConstraintSet, rng, m: int, sigma: float, anchored: bool):
    """Draw m tuples in ``cs.free`` order and their log proposal density.

    Base points x1, x2, x4 are iid N(0, sigma^2 I).  With ``anchored`` the
    extra points are drawn where the domain can be hit, at a scale s = |x1|:
    the follower of x1 as N(x1, s^2 I), and the pair (x, y) of D3 through
    its midpoint N(x1/2, s^2 I) and half-difference N(0, (s/2)^2 I) (the map
    to (x, y) has Jacobian 4).  Otherwise every point is N(0, sigma^2 I).
    """
    k = cs.variables
    if not anchored or cs.name in ("D", "D2"):
        X = rng.normal(0.0, sigma, (k, m, 2))
        return X, _gauss_logpdf((X ** 2).sum(-1), sigma).sum(0)
    base = rng.normal(0.0, sigma, (3, m, 2))
    logq = _gauss_logpdf((base ** 2).sum(-1), sigma).sum(0)
    x1 = base[0]
    scale = np.sqrt((x1 ** 2).sum(-1))
    tau = ANCHOR_SCALE * scale
    if cs.name == "D1":
        e = rng.normal(0.0, 1.0, (m, 2)) * tau[:, None]
        logq += _gauss_logpdf((e ** 2).sum(-1), tau)
        return np.concatenate([(x1 + e)[None], base]), logq
    eta = HALF_SCALE * scale
    mid = rng.normal(0.0, 1.0, (m, 2)) * tau[:, None]
    half = rng.normal(0.0, 1.0, (m, 2)) * eta[:, None]
    logq += (_gauss_logpdf((mid ** 2).sum(-1), tau) + _gauss_logpdf((half ** 2).sum(-1), eta)
             - math.log(4.0))
    c = 0.5 * x1 + mid
    return np.concatenate([(c + half)[None], (c - half)[None], base]), logq


def estimate_integral(cs, samples: int = DEFAULT_SAMPLES, seed=0, sigma: float = DEFAULT_SIGMA,
                      anchored: bool = True, batch: int = 1 << 18) -> IntegralResult:
    """Importance-sampling estimate of the integral over ``cs``.

    See ``_propose`` for the proposal.  Points beyond ``TRUNCATION_RADIUS``
    from the origin contribute zero.
    """
    cs = DOMAINS[cs] if isinstance(cs, str) else cs
    if samples < 1:
        raise InvalidArgument("samples must be positive")
    if not sigma > 0:
        raise InvalidArgument("sigma must be positive")
    rng = make_rng(seed)
    s1 = s2 = 0.0
    done = hits = 0
    while done < samples:
        m = min(batch, samples - done)
        X, logq = _propose(cs, rng, m, sigma, anchored)
        inside = ((X ** 2).sum(-1) <= TRUNCATION_RADIUS ** 2).all(0)
        f = integrand(cs, _named(cs, X))
        w = np.where(inside & (f > 0), f * np.exp(-logq), 0.0)
        s1 += w.sum()
        s2 += (w * w).sum()
        hits += int(np.count_nonzero(w))
        done += m
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    se = math.sqrt(var / (samples - 1)) if samples > 1 else math.inf
    return IntegralResult(float(mean), float(se), samples, cs.name,
                          int(seed) if not isinstance(seed, np.random.SeedSequence) else None,
                          hits)


def beta_upper_type1(samples: int = DEFAULT_SAMPLES, seed=0, sigma: float = DEFAULT_SIGMA) -> IntegralResult:
    """Integral over D: ordered follower pairs (x1, x2) of x3 whose halves pair up."""
    return estimate_integral("D", samples, seed, sigma)


def beta_refinement(which: int, samples: int = DEFAULT_SAMPLES, seed=0,
                    sigma: float = DEFAULT_SIGMA) -> IntegralResult:
    if which not in (1, 2, 3):
        raise InvalidArgument("refinement index must be 1, 2 or 3")
    return estimate_integral(f"D{which}", samples, seed, sigma)


def frequency_order1_type1(results) -> IntegralResult:
    """(beta_upper - beta_1 - beta_2 - beta_3) / 2 with propagated error.

    ``results`` maps domain names ("D", "D1", "D2", "D3") to results, or is
    a sequence of results carrying those domain names.
    """
    if not isinstance(results, dict):
        results = {r.domain: r for r in results}
    missing = [d for d in ("D", "D1", "D2", "D3") if d not in results]
    if missing:
        raise InvalidArgument(f"missing integrals: {', '.join(missing)}")
    ref = [results[d] for d in ("D1", "D2", "D3")]
    val = 0.5 * (results["D"].value - sum(r.value for r in ref))
    se = 0.5 * math.sqrt(results["D"].std_error ** 2 + sum(r.std_error ** 2 for r in ref))
    n = results["D"].samples + sum(r.samples for r in ref)
    return IntegralResult(val, se, n, "order1_type1")
