import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabolab import Ellipticity, build_ball_grid, make_case, sample_function
from parabolab.catalog import parse_case
from parabolab.density import (
    BarrierParams,
    DegenerateVertexSet,
    barrier_probe,
    barrier_profile,
    density_scan,
    find_contact_pair,
    jacobian_bound,
    nonempty_witness,
    step_pipeline,
    vertex_measure_compare,
)


def test_witness_for_linear_function(grid129):
    ell = np.array([0.6, 0.8])
    u = sample_function(lambda x: x @ ell / 32, grid129)
    x = nonempty_witness(u, 1.0)
    # continuum minimiser is -ell/32; the grid answer is within one cell
    np.testing.assert_allclose(x, [-0.015625, -0.03125])
    assert np.linalg.norm(x + ell / 32) <= grid129.h


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(1, 50))
def test_witness_always_found(seed, K):
    spec = build_ball_grid(2, 33)
    rng = np.random.default_rng(seed)
    vals = np.where(spec.mask, rng.uniform(-1, 1, spec.shape) / 16, np.nan)
    from parabolab.grid import GridFunction

    x = nonempty_witness(GridFunction(spec, vals), K)
    assert np.linalg.norm(x) <= 0.5 + spec.h


def test_witness_preconditions(grid65):
    big = sample_function(lambda x: np.ones(len(x)), grid65)
    with pytest.raises(ValueError):
        nonempty_witness(big, 1.0)
    with pytest.raises(ValueError):
        nonempty_witness(big.scaled(0.01), 0.5)


@pytest.mark.parametrize("text, frozen", [
    ("quadratic:1", {2.0: 0.318, 4.0: 0.645, 8.0: 0.858}),
    ("radial_plaplace:1.8", {2.0: 0.503, 4.0: 0.794, 8.0: 0.935}),
])
def test_density_scan_frozen(text, frozen, grid129):
    rep = density_scan(parse_case(text).sample(grid129), 1.0, seed=0)
    assert rep.kept > 0
    for M, v in frozen.items():
        assert rep.min_ratio[M] == pytest.approx(v, abs=1e-3)
    # larger M can only add contact points, so ratios increase
    assert rep.min_ratio[2.0] <= rep.min_ratio[4.0] <= rep.min_ratio[8.0]


def test_density_scan_is_seeded(grid65):
    u = make_case("bump").sample(grid65)
    a = density_scan(u, 2.0, ball_samples=30, seed=5).to_dict()
    b = density_scan(u, 2.0, ball_samples=30, seed=5).to_dict()
    assert a == b


def test_barrier_profile():
    assert barrier_profile(1.0, 3.0) == pytest.approx(0.0, abs=1e-15)
    assert barrier_profile(0.0, 3.0) == pytest.approx(math.exp(3) - 1)
    assert barrier_profile(0.5, 3.0) > 0 > barrier_profile(1.5, 3.0)


def test_barrier_params_validation():
    z = np.zeros(2)
    with pytest.raises(ValueError):
        BarrierParams(1.0, 1.0, 0.2, z, z, z)
    with pytest.raises(ValueError):
        BarrierParams(3.0, 0.5, 0.2, z, z, z)
    with pytest.raises(ValueError):
        BarrierParams(3.0, 1.0, 0.5, np.array([0.7, 0.0]), z, z)
    assert BarrierParams(3.0, 1.0, 0.2, z, z, z).C0 == pytest.approx(math.exp(3))


@pytest.mark.parametrize("text", ["quadratic:1", "bump", "radial_plaplace:1.5"])
def test_barrier_gap_bounded(text, grid129):
    u = parse_case(text).sample(grid129)
    x0, r = np.array([0.1, -0.05]), 0.3
    pair = find_contact_pair(u, 16.0, x0, r)
    assert pair is not None
    x1, y1 = pair
    res = barrier_probe(u, BarrierParams(3.0, 16.0, r, x0, x1, y1))
    assert res.within_bound
    assert res.gap >= -16.0 * grid129.h**2 - 1e-12


def test_barrier_rejects_off_grid_point(grid65):
    u = make_case("bump").sample(grid65)
    z = np.zeros(2)
    with pytest.raises(ValueError):
        barrier_probe(u, BarrierParams(3.0, 1.0, 0.3, z, np.array([0.01, 0.0]), z))


def test_jacobian_bound():
    assert jacobian_bound(2, Ellipticity(1.0, 2.0)) == 16.0
    assert jacobian_bound(2, Ellipticity(0.5, 1.0)) == pytest.approx(36.0)


def test_vertex_set_of_quadratic(grid129):
    # u = |x|^2/2, K = 1, M = 4: each vertex y touches at 4y/5, so the image of
    # V is V scaled by 4/5 and the touching ratio approaches (5/4)^2
    u = make_case("quadratic", a=1.0).sample(grid129)
    rep = vertex_measure_compare(u, 1.0, 4.0, np.zeros(2), np.zeros(2), 0.8, np.zeros(2),
                                 ell=Ellipticity(1.0, 2.0))
    assert rep.containment
    assert rep.touching_ratio == pytest.approx(1.5625, rel=0.05)
    assert rep.det_violations == 0
    assert rep.det_max == pytest.approx(1.5625, rel=1e-6)


def test_vertex_set_degenerate(grid65):
    u = make_case("bump").sample(grid65)
    with pytest.raises(DegenerateVertexSet):
        vertex_measure_compare(u, 1.0, 2.0, np.array([0.01, 0.013]), np.array([0.01, 0.013]),
                               0.05, np.zeros(2))


@pytest.mark.parametrize("text", ["quadratic:1", "radial_plaplace:1.5", "bump"])
def test_step_pipeline(text, grid129):
    case = parse_case(text)
    recs = step_pipeline(case.sample(grid129), 4.0, 4.0, case.ell, balls=3, seed=1)
    assert len(recs) == 3
    for rec in recs:
        assert rec.status in ("ok", "miss", "degenerate")
        if rec.status == "ok":
            assert rec.barrier.within_bound
            assert rec.vertex.containment
            assert rec.vertex.det_violations == 0
            assert isinstance(rec.to_dict()["vertex"], dict)
