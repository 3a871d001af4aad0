import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from poisson_follower import (Configuration, ExperimentPlan, InvalidArgument, Window,
                              core_region, replica_seed, sample_poisson)
from poisson_follower.export import write_configuration_csv
from poisson_follower.sampler import default_guard_margin


def test_window_validation():
    with pytest.raises(InvalidArgument):
        Window(0, 0, 0, 1)
    with pytest.raises(InvalidArgument):
        Window(0, 1, 0, 1, "reflecting")
    assert Window.square(3).area == 9


def test_same_seed_same_configuration():
    w = Window.square(30)
    a, b = sample_poisson(w, 1.0, 11), sample_poisson(w, 1.0, 11)
    assert np.array_equal(a.xy, b.xy) and np.array_equal(a.ids, b.ids)
    assert not np.array_equal(a.xy[:5], sample_poisson(w, 1.0, 12).xy[:5])


def test_serialised_form_is_byte_identical():
    import io
    w = Window.square(20)
    bufs = []
    for _ in range(2):
        buf = io.StringIO()
        write_configuration_csv(sample_poisson(w, 1.0, 3), buf)
        bufs.append(buf.getvalue())
    assert bufs[0] == bufs[1]


@pytest.mark.parametrize("lam", [0.0, -1.0, float("inf")])
def test_bad_intensity(lam):
    with pytest.raises(InvalidArgument):
        sample_poisson(Window.square(10), lam, 0)


def test_positions_inside_window_and_distinct():
    w = Window(-3, 7, 2, 5)
    c = sample_poisson(w, 4.0, 5)
    assert w.contains(c.xy).all()
    assert len(np.unique(c.xy, axis=0)) == len(c)


def test_count_mean_and_variance():
    w = Window.square(10)
    n = np.array([len(sample_poisson(w, 1.0, 0, replica=i)) for i in range(1000)])
    se = np.sqrt(100 / len(n))
    assert abs(n.mean() - 100) < 3 * se
    # variance of a Poisson count equals its mean
    assert 0.85 < n.var(ddof=1) / 100 < 1.15


def test_large_window_count_variance():
    w = Window.square(100)
    n = np.array([len(sample_poisson(w, 1.0, 1, replica=i)) for i in range(200)])
    assert abs(n.mean() - 10000) < 3 * 100 / np.sqrt(200)
    assert 0.7 < n.var(ddof=1) / 10000 < 1.35


def test_uniform_positions_chi_square():
    w = Window.square(10)
    xy = np.vstack([sample_poisson(w, 1.0, 2, replica=i).xy for i in range(300)])
    h, _, _ = np.histogram2d(xy[:, 0], xy[:, 1], bins=10, range=[[0, 10], [0, 10]])
    _, p = stats.chisquare(h.ravel())
    assert p > 1e-3


def test_core_region():
    w = Window.square(100)
    assert core_region(w, 10) == Window(10, 90, 10, 90)
    assert core_region(w, 0) == w
    with pytest.raises(InvalidArgument):
        core_region(w, 60)
    t = Window.square(100, "torus")
    assert core_region(t, 10) == t


def test_plan_defaults_and_margin_check():
    p = ExperimentPlan()
    assert p.window == Window.square(142) and p.margin == pytest.approx(5.0)
    assert default_guard_margin(4.0) == 2.5
    with pytest.raises(InvalidArgument):
        ExperimentPlan(window=Window.square(8), guard_margin=4)


def test_replica_streams_independent_of_order():
    a = replica_seed(9, 3).generate_state(4)
    b = replica_seed(9, 3).generate_state(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, replica_seed(9, 4).generate_state(4))


def test_configuration_sorted_by_id_and_immutable():
    w = Window.square(5)
    c = Configuration([5, 2, 9], [(1, 1), (2, 2), (3, 3)], w)
    assert c.ids.tolist() == [2, 5, 9]
    assert c.position(5).tolist() == [1, 1]
    with pytest.raises(AttributeError):
        c.step = 3
    with pytest.raises(ValueError):
        c.xy[0, 0] = 7
    with pytest.raises(InvalidArgument):
        Configuration([1, 1], [(0, 0), (1, 1)], w)
    with pytest.raises(InvalidArgument):
        Configuration([0], [(6, 0)], w)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_translation_keeps_relative_positions(dx, dy):
    c = sample_poisson(Window.square(5), 1.0, 4)
    t = c.translated((dx, dy))
    assert np.allclose(t.xy - (dx, dy), c.xy, atol=1e-9)
