import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poisson_follower import (ExperimentPlan, InsufficientData, InvalidArgument, Window,
                              build_graph, classify_step0, classify_step1,
                              closed_probability_bound, cluster_statistics, contraction_ratios,
                              empirical_contraction_tail, p0_analytic, p0_exact, run,
                              sample_poisson)
from poisson_follower.percolation_diag import (CONTRACT, EMPTY, FAR, REASON_NAMES,
                                               cell_index, closed_probability_union_bound,
                                               far_neighbor_bound, state_correlation)
from poisson_follower.sampler import Configuration

from conftest import make_config


def test_cell_index_convention():
    a = 1.0
    idx = cell_index([[0, 0], [0.999, -0.999], [1.0, 0], [-1.0, 3.1]], a)
    assert idx.tolist() == [[0, 0], [0, 0], [1, 0], [0, 2]]


def test_empty_cell_is_closed():
    c = make_config([(0, 0), (0.5, 0)], Window(-1, 5, -1, 1))
    cls = classify_step0(c, build_graph(c), 1.0, 0.1)
    assert cls.reasons_of((0, 0)) == ()
    assert cls.reasons_of((1, 0)) == ("empty",)
    assert cls.reasons_of((2, 0)) == ("empty",)


def test_far_and_contracting_cells():
    a = 1.0
    # a chain whose gaps barely shrink: rho close to 1
    c = make_config([(0, 0), (0.5, 0), (0.5, 0.49), (0.0, 0.97)], Window(-1, 1, -1, 1))
    cls = classify_step0(c, build_graph(c), a, 0.1)
    assert "contraction" in cls.reasons_of((0, 0))
    c = make_config([(0, 0), (1.5, 0)], Window(-1, 3, -1, 1))
    cls = classify_step0(c, build_graph(c), a, 0.1)
    assert cls.reasons_of((0, 0)) == ("far_neighbor",)


def _brute_step0(c, a, eps):
    g = build_graph(c)
    rho = contraction_ratios(g)
    idx = cell_index(c.xy, a)
    out = {}
    for i in range(idx[:, 0].min(), idx[:, 0].max() + 1):
        for j in range(idx[:, 1].min(), idx[:, 1].max() + 1):
            sel = (idx[:, 0] == i) & (idx[:, 1] == j)
            r = 0
            if not sel.any():
                r |= EMPTY
            else:
                r |= FAR if g.nn_distance[sel].max() > a else 0
                r |= CONTRACT if rho[sel].max() > 1 - eps else 0
            out[(i, j)] = r
    return out


@pytest.mark.parametrize("a,eps", [(0.5, 0.1), (1.0, 0.05), (2.0, 0.3)])
def test_step0_matches_brute_force(a, eps):
    c = sample_poisson(Window.square(30), 1.0, 17)
    cls = classify_step0(c, build_graph(c), a, eps)
    want = _brute_step0(c, a, eps)
    i0, j0 = cls.origin
    for (i, j), r in np.ndenumerate(cls.reasons):
        if (i0 + i, j0 + j) in want:
            assert r == want[(i0 + i, j0 + j)]


def test_probability_formulas():
    assert p0_exact(1.0, 0.0) == 0.0
    assert p0_analytic(1.0, 0.0) == 0.0
    assert p0_analytic(1.0, 0.02) == pytest.approx(2 * p0_analytic(1.0, 0.01))
    # the exact tail is linear in epsilon to first order
    assert p0_exact(1.0, 0.002) / p0_exact(1.0, 0.001) == pytest.approx(2, rel=0.01)
    assert far_neighbor_bound(1.0) == pytest.approx(4 * math.exp(-math.pi))
    s = 4.0
    assert closed_probability_bound(1.0, 0.01) == pytest.approx(
        math.exp(-s) + s * math.exp(-s * math.pi) + s * p0_analytic(1.0, 0.01))
    assert closed_probability_union_bound(1.0, 0.01) > closed_probability_bound(1.0, 0.01)
    with pytest.raises(InvalidArgument):
        p0_exact(-1, 0.1)


@given(st.floats(0.2, 3.0), st.floats(0.001, 0.4), st.floats(0.001, 0.4))
def test_p0_exact_monotone(a, e1, e2):
    lo, hi = sorted((e1, e2))
    assert p0_exact(a, lo) <= p0_exact(a, hi) + 1e-15
    assert p0_exact(a, lo) <= p0_exact(a + 0.5, lo) + 1e-15


def test_empirical_tail_tracks_exact_integral():
    plan = ExperimentPlan(seed=3, replicas=4, window=Window.square(80))
    p, se = empirical_contraction_tail(plan, 0, 1.0, 0.1)
    assert abs(p - p0_exact(1.0, 0.1)) < 4 * se
    p1, _ = empirical_contraction_tail(plan, 1, 1.0, 0.1)
    assert 0 <= p1 < p


def test_cluster_statistics():
    board = (np.add.outer(np.arange(6), np.arange(6)) % 2).astype(bool)
    st_ = cluster_statistics(board)
    assert st_["largest_open_cluster"] == 1 and st_["largest_closed_cluster"] == 1
    assert st_["open_fraction"] == 0.5
    full = cluster_statistics(np.ones((4, 5), bool))
    assert full["largest_open_cluster"] == 20 and full["largest_closed_cluster"] == 0


def test_state_correlation_needs_variation():
    with pytest.raises(InsufficientData):
        state_correlation(np.ones((20, 20), bool))
    rng = np.random.default_rng(0)
    corr, se = state_correlation(rng.random((60, 60)) < 0.5, 10)
    assert abs(corr) < 4 * se


def test_step1_needs_two_steps():
    c = sample_poisson(Window.square(20), 1.0, 1)
    with pytest.raises(InsufficientData):
        classify_step1(run(c, 0), 2.0, 0.1)


def test_step1_metadata_and_variants():
    c = sample_poisson(Window.square(60), 1.0, 4)
    t = run(c, 1)
    core = Window(20, 40, 20, 40)
    wide = classify_step1(t, 2.0, 0.1, core)
    narrow = classify_step1(t, 2.0, 0.1, core, shield_layers=(2, 3))
    assert wide.metadata["wide_shield"] and not narrow.metadata["wide_shield"]
    # fewer shield squares can only open more cells
    assert np.all(narrow.open | ~wide.open)
    assert set(REASON_NAMES.values()) >= {n for cell in wide.states
                                          for n in wide.reasons_of(cell)}


def test_step1_is_local():
    a = 2.0
    c = sample_poisson(Window.square(80), 1.0, 6)
    t = run(c, 1)
    cell = (10, 10)
    ref = classify_step1(t, a, 0.1, Window(39, 41, 39, 41))
    centre = 2 * a * np.array(cell)
    keep = np.abs(c.xy - centre).max(1) < 14 * a
    local = Configuration(c.ids[keep], c.xy[keep], c.window)
    loc = classify_step1(run(local, 1), a, 0.1, Window(39, 41, 39, 41))
    assert ref.reasons_of(cell) == loc.reasons_of(cell)


def test_small_squares_closed_larger_open():
    c = sample_poisson(Window.square(120), 1.0, 8)
    t = run(c, 1)
    core = Window(20, 100, 20, 100)
    # side-2 squares often hold no point; side-4 squares mostly pass; bigger
    # squares collect more chances of a rho near 1, so the trend is not monotone
    assert classify_step1(t, 1.0, 0.01, core).open_fraction < 0.05
    assert classify_step1(t, 2.0, 0.01, core).open_fraction > 0.5
