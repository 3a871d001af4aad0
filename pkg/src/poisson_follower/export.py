"""File formats: configurations, graphs, trajectories and run manifests.

Floats are written with ``repr`` so a CSV round trip is exact.  Every JSON
document carries a versioned ``schema`` string.
"""
from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata

import numpy as np

from .dynamics import Trajectory
from .errors import InvalidArgument
from .follower_graph import FollowerGraph
from .sampler import Configuration, Window

SCHEMAS = {
    "configuration": "poisson_follower.configuration/1",
    "trajectory": "poisson_follower.trajectory/1",
    "manifest": "poisson_follower.manifest/1",
    "integral": "poisson_follower.integral/1",
    "stable": "poisson_follower.stable/1",
    "percolation": "poisson_follower.percolation/1",
}


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunManifest:
    """Everything needed to rerun a command and get the same artifact."""

    command: str
    params: dict
    seed: int | None
    tool_version: str = field(default_factory=tool_version)
    wall_time: float = 0.0
    python: str = field(default_factory=platform.python_version)
    numpy: str = np.__version__

    def __post_init__(self):
        self._start = time.perf_counter()

    def finish(self) -> "RunManifest":
        """Record the wall time elapsed since creation."""
        self.wall_time = time.perf_counter() - self._start
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = SCHEMAS["manifest"]
        return d

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dump_json(doc, fh) -> None:
    json.dump(doc, fh, indent=2, default=_jsonable)
    fh.write("\n")


# ---------------------------------------------------------- configurations

def write_configuration_csv(config: Configuration, fh) -> None:
    w = csv.writer(fh)
    w.writerow(["id", "x", "y"])
    for i, (x, y) in zip(config.ids.tolist(), config.xy.tolist()):
        w.writerow([i, repr(x), repr(y)])


def configuration_envelope(config: Configuration) -> dict:
    return {"schema": SCHEMAS["configuration"], "step": config.step, "seed": config.seed,
            "intensity": config.intensity, "window": config.window.to_dict()}


def save_configuration(config: Configuration, csv_path, json_path=None) -> None:
    with open(csv_path, "w", newline="") as fh:
        write_configuration_csv(config, fh)
    if json_path is not None:
        with open(json_path, "w") as fh:
            dump_json(configuration_envelope(config), fh)


def load_configuration(csv_path, json_path=None, window: Window | None = None) -> Configuration:
    """Read a configuration; the window comes from the envelope, the argument,
    or else the bounding box of the points."""
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(rows[0]) != {"id", "x", "y"}:
        raise InvalidArgument("configuration CSV needs columns id, x, y")
    ids = np.array([int(r["id"]) for r in rows], dtype=np.int64)
    xy = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
    env = {}
    if json_path is not None:
        with open(json_path) as fh:
            env = json.load(fh)
        window = Window(**env["window"])
    if window is None:
        if len(xy) == 0:
            raise InvalidArgument("cannot infer a window from an empty configuration")
        lo, hi = xy.min(0), xy.max(0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        window = Window(lo[0], hi[0], lo[1], hi[1])
    return Configuration(ids, xy, window, env.get("intensity", 1.0),
                         env.get("step", 0), env.get("seed"))


# ------------------------------------------------------------------ graphs

def write_graph_csv(graph: FollowerGraph, fh) -> None:
    w = csv.writer(fh)
    w.writerow(["follower_id", "leader_id", "distance"])
    for f, l, d in zip(graph.ids.tolist(), graph.ids[graph.leader].tolist(),
                       graph.nn_distance.tolist()):
        w.writerow([f, l, repr(d)])


# ------------------------------------------------------------ trajectories

def write_trajectory_csv(traj: Trajectory, fh) -> None:
    """Long format: one row per (retained step, agent)."""
    w = csv.writer(fh)
    w.writerow(["step", "id", "x", "y"])
    for c in traj.configs:
        for i, (x, y) in zip(c.ids.tolist(), c.xy.tolist()):
            w.writerow([c.step, i, repr(x), repr(y)])


def trajectory_summary(traj: Trajectory) -> dict:
    return {"schema": SCHEMAS["trajectory"], "first_step": traj.first_step,
            "last_step": traj.last_step, "steps": list(traj.summaries)}


def read_key_values(path) -> dict:
    """``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidArgument(f"{path}:{n}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out
