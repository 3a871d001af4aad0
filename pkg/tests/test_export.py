import io
import json

import numpy as np
from hypothesis import given, strategies as st

from poisson_follower import Window, run, sample_poisson
from poisson_follower.export import (RunManifest, SCHEMAS, load_configuration,
                                     read_key_values, save_configuration,
                                     trajectory_summary, write_trajectory_csv)
from poisson_follower.sampler import Configuration


def test_configuration_round_trip(tmp_path):
    c = sample_poisson(Window.square(15), 1.3, 21)
    save_configuration(c, tmp_path / "c.csv", tmp_path / "c.json")
    d = load_configuration(tmp_path / "c.csv", tmp_path / "c.json")
    assert np.array_equal(c.ids, d.ids) and np.array_equal(c.xy, d.xy)
    assert d.window == c.window and d.intensity == 1.3 and d.seed == 21
    env = json.loads((tmp_path / "c.json").read_text())
    assert env["schema"] == SCHEMAS["configuration"]


@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1,
                max_size=20))
def test_csv_floats_are_exact(pts):
    import tempfile, os
    xy = np.array(pts)
    lo, hi = xy.min(0) - 1, xy.max(0) + 1
    c = Configuration(np.arange(len(xy)), xy, Window(lo[0], hi[0], lo[1], hi[1]))
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "c.csv")
        save_configuration(c, p)
        assert np.array_equal(load_configuration(p, window=c.window).xy, c.xy)


def test_trajectory_export():
    t = run(sample_poisson(Window.square(10), 1.0, 2), 2)
    buf = io.StringIO()
    write_trajectory_csv(t, buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "step,id,x,y"
    assert len(rows) == 1 + 3 * len(t.config_at(0))
    s = trajectory_summary(t)
    assert s["last_step"] == 2 and len(s["steps"]) == 3


def test_manifest(tmp_path):
    m = RunManifest("sample", {"window": [10, 10]}, 3).finish()
    m.write(tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["schema"] == SCHEMAS["manifest"] and doc["seed"] == 3
    assert doc["wall_time"] >= 0


def test_key_values(tmp_path):
    p = tmp_path / "k.cfg"
    p.write_text("# comment\nmc-samples = 10  # trailing\n\nseed=2\n")
    assert read_key_values(p) == {"mc_samples": "10", "seed": "2"}
