"""Replica estimates of spatial frequencies with 95% confidence intervals.

A frequency is the fraction of core-region agents (by their step-0 position)
for which a phenomenon's condition holds.  The dynamics runs on the whole
window; the guard margin keeps boundary effects out of the count.  With
intensity 1 this fraction is also a density per unit area.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import InsufficientData, InvalidArgument, Unsupported
from .follower_graph import build_graph
from .dynamics import step as advance
from .phenomena import AGENT_MASKS, PhenomenonKind, agent_mask, needs_step
from .sampler import Configuration, ExperimentPlan, Window, core_region, sample_poisson

TABLE_KINDS = (
    PhenomenonKind.UltimatePairOrder0,
    PhenomenonKind.UltimatePairOrder1Type1,
    PhenomenonKind.UltimatePairOrder1Type2,
    PhenomenonKind.FourBodySwap,
    PhenomenonKind.FollowerInversion,
)


@dataclass(frozen=True)
class FrequencyEstimate:
    kind: PhenomenonKind
    mean: float
    ci95: tuple
    replicas: int
    points_per_replica_mean: float
    std_error: float = 0.0

    def __post_init__(self):
        lo, hi = self.ci95
        if not lo <= self.mean <= hi:
            raise InvalidArgument("confidence interval must contain the mean")
        if self.replicas < 2:
            raise InvalidArgument("need at least two replicas")

    def overlaps(self, lo: float, hi: float) -> bool:
        return self.ci95[0] <= hi and lo <= self.ci95[1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["ci95"] = list(self.ci95)
        return d


def replica_frequencies(config: Configuration, kinds, core: Window) -> tuple:
    """Per-kind fractions for one replica and the core agent count."""
    inside = core.contains(config.xy)
    n_core = int(inside.sum())
    if n_core == 0:
        raise InsufficientData("no agents in the core region")
    g0 = build_graph(config)
    g1 = None
    if any(needs_step(k) for k in kinds):
        g1 = build_graph(advance(config, g0))
    return {k: float(agent_mask(k, g0, g1)[inside].sum()) / n_core for k in kinds}, n_core


def _replica_task(args):
    plan, i, kinds = args
    cfg = sample_poisson(plan.window, plan.intensity, plan.replica_seed(i))
    return replica_frequencies(cfg, kinds, plan.core())


def t_interval(values, level: float = 0.95) -> tuple:
    """(mean, (lo, hi), standard error) from Student's t over replica values."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise InsufficientData("need at least two replicas for an interval")
    m = float(v.mean())
    se = float(v.std(ddof=1) / np.sqrt(len(v)))
    q = float(stats.t.ppf(0.5 + level / 2, len(v) - 1))
    return m, (m - q * se, m + q * se), se


def _aggregate(rows, counts, kinds) -> list:
    out = []
    for k in kinds:
        m, ci, se = t_interval([r[k] for r in rows])
        out.append(FrequencyEstimate(k, m, ci, len(rows), float(np.mean(counts)), se))
    return out


def _validate_kinds(kinds) -> list:
    kinds = [PhenomenonKind.parse(k) if isinstance(k, str) else k for k in kinds]
    for k in kinds:
        if k not in AGENT_MASKS:
            raise Unsupported(f"no frequency detector for {k.value}")
    return kinds


def estimate_frequencies(plan: ExperimentPlan, kinds=TABLE_KINDS, workers: int = 1) -> list:
    """Sample ``plan.replicas`` independent configurations and aggregate.

    Replica ``i`` is a pure function of ``(plan.seed, i)``, so results do not
    depend on ``workers``.
    """
    kinds = _validate_kinds(kinds)
    if plan.replicas < 2:
        raise InvalidArgument("need at least two replicas")
    tasks = [(plan, i, kinds) for i in range(plan.replicas)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_replica_task, tasks))
    else:
        results = [_replica_task(t) for t in tasks]
    rows, counts = zip(*results)
    return _aggregate(rows, counts, kinds)


def estimate_from_configurations(configs, kinds, margin: float = 0.0) -> list:
    """Same estimator over given step-0 configurations (one per replica)."""
    kinds = _validate_kinds(kinds)
    configs = list(configs)
    if len(configs) < 2:
        raise InvalidArgument("need at least two replicas")
    results = [replica_frequencies(c, kinds, core_region(c.window, margin)) for c in configs]
    rows, counts = zip(*results)
    return _aggregate(rows, counts, kinds)


def write_estimates(estimates, path, fmt: str = "csv", manifest: dict | None = None) -> None:
    if fmt == "json":
        doc = {"schema": "poisson_follower.frequencies/1",
               "manifest": manifest or {},
               "estimates": [e.to_dict() for e in estimates]}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "mean", "ci95_lo", "ci95_hi", "std_error",
                        "replicas", "points_per_replica_mean"])
            for e in estimates:
                w.writerow([e.kind.value, repr(e.mean), repr(e.ci95[0]), repr(e.ci95[1]),
                            repr(e.std_error), e.replicas, e.points_per_replica_mean])
    else:
        raise InvalidArgument(f"unknown format {fmt!r}")
