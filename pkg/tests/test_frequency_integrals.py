import math

import numpy as np
import pytest

from poisson_follower import (DOMAINS, InvalidArgument, Window, build_graph,
                              density_order0_closed_form, density_order0_numeric,
                              estimate_integral, frequency_order1_type1, membership,
                              sample_poisson, step)
from poisson_follower.frequency_integrals import IntegralResult, _named, _propose, integrand
from poisson_follower.phenomena import order1_type1_mask

from conftest import make_config


def test_order0_closed_form():
    v = density_order0_closed_form()
    assert v == pytest.approx(math.pi / (4 * math.pi / 3 + math.sqrt(3) / 2), abs=1e-15)
    assert v == pytest.approx(0.62150, abs=1e-5)


def test_order0_numeric_paths_agree():
    q = density_order0_numeric(method="quadrature")
    assert q.value == pytest.approx(density_order0_closed_form(), abs=1e-12)
    mc = density_order0_numeric(200_000, seed=4)
    assert abs(mc.value - q.value) < 4 * mc.std_error
    with pytest.raises(InvalidArgument):
        density_order0_numeric(method="simpson")


def test_membership_hand_example():
    # x1, x2 on either side of x3 at the origin, x4 further out: both follow
    # x3, whose leader is x4; their midpoints with x3 are closer together
    # than either is to x3' = x4 / 2
    assert membership("D", [(1.0, 0.8), (-1.0, 0.8), (0.0, -1.2)])
    # same with x3 given explicitly
    assert membership("D", [(1.0, 0.8), (-1.0, 0.8), (0.0, 0.0), (0.0, -1.2)])
    # x4 pulled in: x3' now sits closer to x1' than x2' does
    assert not membership("D", [(1.0, 0.8), (-1.0, 0.8), (0.0, -0.5)])
    # x1 closer to x2 than to x3
    assert not membership("D", [(1.0, 0.8), (1.3, 0.8), (0.0, -1.2)])
    with pytest.raises(InvalidArgument):
        membership("D", [(1.0, 0.0)])


def test_simulated_type1_events_lie_in_domain():
    seen = 0
    for seed in range(6):
        c0 = sample_poisson(Window.square(40), 1.0, seed)
        g0 = build_graph(c0)
        g1 = build_graph(step(c0, g0))
        m = order1_type1_mask(g0, g1)
        for a in np.flatnonzero(m & (np.arange(len(g0)) < g1.leader)):
            b = g1.leader[a]
            x3 = g0.leader[a]
            x4 = g0.leader[x3]
            P = c0.xy[[a, b, x3, x4]] - c0.xy[x3]
            assert membership("D", P)
            seen += 1
    assert seen > 20


@pytest.mark.parametrize("name", ["D1", "D2"])
def test_refinements_project_into_D(name):
    cs = DOMAINS[name]
    X, _ = _propose(cs, np.random.default_rng(7), 2_000_000, 1.0, True)
    inside = membership(cs, X)
    assert inside.sum() > 20
    assert membership("D", X[1:, inside]).all()


def test_thin_pair_refinement_example():
    # found by a conditional search; this domain is a thin sliver
    X = [(-0.706, 0.881), (-0.474, 0.726), (-1.38, -0.647), (0.669, -1.652), (0.462, 0.702)]
    assert membership("D3", X)
    assert membership("D", X[2:])
    # pulling the pair's midpoint away from x1/2 leaves the domain
    assert not membership("D3", [(0.3, 1.6), (0.5, 1.4)] + X[2:])


def test_integrand_is_bounded_by_indicator():
    cs = DOMAINS["D"]
    X = np.random.default_rng(1).normal(0, 1, (3, 5000, 2))
    f = integrand(cs, _named(cs, X))
    assert np.all((f >= 0) & (f <= 1))
    assert np.array_equal(f > 0, membership(cs, X))


def test_integral_estimate_reproducible():
    a = estimate_integral("D", 50_000, seed=3)
    b = estimate_integral("D", 50_000, seed=3)
    assert a == b and a.hits > 0 and a.std_error > 0
    with pytest.raises(InvalidArgument):
        estimate_integral("D", 0)


def test_anchored_and_plain_proposals_agree():
    a = estimate_integral("D", 300_000, seed=5)
    b = estimate_integral("D", 300_000, seed=6, anchored=False)
    assert abs(a.value - b.value) < 4 * math.hypot(a.std_error, b.std_error)


def test_type1_combination():
    r = {"D": IntegralResult(0.03, 0.001, 10, "D"),
         "D1": IntegralResult(0.004, 0.0002, 10, "D1"),
         "D2": IntegralResult(0.002, 0.0002, 10, "D2"),
         "D3": IntegralResult(0.001, 0.0001, 10, "D3")}
    out = frequency_order1_type1(r)
    assert out.value == pytest.approx(0.0115)
    assert out.std_error == pytest.approx(0.5 * math.sqrt(1e-6 + 4e-8 + 4e-8 + 1e-8))
    assert frequency_order1_type1(list(r.values())).value == out.value
    with pytest.raises(InvalidArgument):
        frequency_order1_type1({"D": r["D"]})
