import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabolab import build_ball_grid, make_case, sample_function
from parabolab._envelope import min_plus_quadratic
from parabolab.contact import (
    Paraboloid,
    contact_set,
    lower_transform,
    moreau_envelope,
    vertex_map,
    vertex_map_field,
)
from parabolab.grid import GridFunction
from parabolab.oracles import (
    brute_contact_mask,
    brute_lower_transform,
    brute_moreau,
    brute_upper_envelope,
)

SMALL = build_ball_grid(2, 17)


def _random_field(seed, spec=SMALL, scale=1.0):
    rng = np.random.default_rng(seed)
    vals = np.where(spec.mask, scale * rng.normal(size=spec.shape), np.nan)
    return GridFunction(spec, vals)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.3, 200))
def test_transform_matches_brute_force(seed, kappa):
    u = _random_field(seed)
    tr = lower_transform(u, kappa)
    m = brute_lower_transform(u, kappa)
    np.testing.assert_allclose(tr.m[SMALL.mask], m[SMALL.mask], rtol=1e-12, atol=1e-12)
    w = brute_upper_envelope(m, kappa, SMALL)
    np.testing.assert_allclose(tr.w[SMALL.mask], w[SMALL.mask], rtol=1e-12, atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.5, 100), st.sampled_from(["lower", "upper"]))
def test_contact_mask_matches_brute_force(seed, kappa, direction):
    u = _random_field(seed, scale=0.1)
    fast = contact_set(u, kappa, direction=direction)
    assert np.array_equal(fast.mask, brute_contact_mask(u, kappa, direction))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.5, 50))
def test_restricted_vertex_set_matches_brute_force(seed, kappa):
    u = _random_field(seed, scale=0.1)
    V = SMALL.ball_raster((0.2, -0.1), 0.4) & SMALL.mask
    fast = contact_set(u, kappa, V=V)
    assert np.array_equal(fast.mask, brute_contact_mask(u, kappa, "lower", V=V))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_envelope_lies_below_and_touches(seed):
    u = _random_field(seed)
    tr = lower_transform(u, 5.0)
    assert np.all(tr.w[SMALL.mask] <= u.values[SMALL.mask] + 1e-12)
    # the global minimiser of u is always a contact point
    i = np.nanargmin(u.values)
    assert contact_set(u, 5.0).mask.ravel()[i]


@pytest.mark.parametrize("kind", ["bump", "quadratic:-3", "radial_plaplace:1.5"])
@pytest.mark.parametrize("direction", ["lower", "upper"])
def test_complement_shrinks_with_kappa(kind, direction, grid65):
    # exact nesting needs off-grid vertices; the measures still decrease
    from parabolab.catalog import parse_case

    u = parse_case(kind).sample(grid65)
    meas = [contact_set(u, 2.0**k, direction=direction).complement_measure() for k in range(8)]
    assert all(b <= a for a, b in zip(meas, meas[1:]))


def test_min_plus_1d_by_hand():
    out, arg = min_plus_quadratic(np.array([0.0, 5.0, 1.0, np.inf]), 1.0)
    np.testing.assert_array_equal(out, [0.0, 1.0, 1.0, 2.0])
    np.testing.assert_array_equal(arg[:, 0], [0, 0, 2, 2])


def test_min_plus_rejects_bad_coef():
    with pytest.raises(ValueError):
        min_plus_quadratic(np.zeros(3), 0.0)


def test_quadratic_contact_disc(grid65):
    u = make_case("quadratic", a=1.0).sample(grid65)
    # lower contact of |x|^2/2 at opening 4 is the disc of radius 4/5
    lo = contact_set(u, 4.0, direction="lower", tol=0.0)
    assert grid65.radius[lo.mask].max() <= 0.8 + grid65.h
    assert lo.complement_measure() == pytest.approx(np.pi * (1 - 0.64), abs=0.05)
    # the default tolerance widens the disc by about sqrt(2 tol / (kappa + a))
    wide = contact_set(u, 4.0, direction="lower")
    assert grid65.radius[wide.mask].max() <= 0.8 + 0.04 + grid65.h
    # and every node is an upper contact point since -u is semiconvex with constant 1 < 4
    assert contact_set(u, 4.0, direction="upper").members.count == grid65.mask.sum()


def test_cone_complements_frozen(grid65):
    # values agree with the brute-force oracle on this grid (see test_oracles)
    u = make_case("cone").sample(grid65)
    upper = [contact_set(u, k, direction="upper").complement_measure() for k in (1, 4, 16)]
    assert upper == [2.8720703125, 0.1337890625, 0.0009765625]


def test_direction_both_is_intersection(grid65):
    u = make_case("bump").sample(grid65)
    both = contact_set(u, 8.0, direction="both").mask
    lo = contact_set(u, 8.0, direction="lower").mask
    hi = contact_set(u, 8.0, direction="upper").mask
    assert np.array_equal(both, lo & hi)


@pytest.mark.parametrize("bad", [dict(kappa=0.0), dict(kappa=1.0, tol=-1.0),
                                 dict(kappa=1.0, direction="sideways")])
def test_contact_rejects(bad, grid65):
    u = make_case("bump").sample(grid65)
    with pytest.raises(ValueError):
        contact_set(u, **bad)


def test_empty_vertex_set_rejected():
    u = _random_field(0)
    with pytest.raises(ValueError):
        contact_set(u, 1.0, V=np.zeros(SMALL.shape, bool))


def test_moreau_matches_brute_force():
    u = _random_field(3)
    for eps in (0.5, 0.8, 1.2):
        np.testing.assert_allclose(moreau_envelope(u, eps).values[SMALL.mask],
                                   brute_moreau(u, eps)[SMALL.mask], rtol=1e-12, atol=1e-12)


def test_moreau_of_concave_quadratic_closed_form(grid65):
    # u = -a|x|^2/2 with a = kappa/2: the infimum is attained at the far rim
    # of the ball, u_eps(x) = kappa/2 (1 + |x|)^2 - a/2 ... checked at the centre
    eps = 0.5
    kappa = 2 / eps**4
    a = kappa / 2
    u = sample_function(lambda x: -0.5 * a * np.sum(x**2, axis=1), grid65)
    ue = moreau_envelope(u, eps)
    # at the centre every rim node z gives -a/2 + kappa/2 = kappa/4
    assert ue.values[grid65.center_index] == pytest.approx(min(0.0, kappa / 4))
    assert np.all(ue.values[grid65.mask] <= u.values[grid65.mask] + 1e-12)


def test_paraboloid_through():
    P = Paraboloid.through(2.0, (0.1, 0.0), (0.5, 0.0), 3.0)
    assert P(np.array([0.5, 0.0])) == pytest.approx(3.0)
    assert P(np.array([0.1, 0.0])) == pytest.approx(3.0 + 0.16)
    with pytest.raises(ValueError):
        Paraboloid(-1.0, np.zeros(2), 0.0)


def test_vertex_map_of_quadratic(grid65):
    a, kappa = 1.0, 4.0
    u = make_case("quadratic", a=a).sample(grid65)
    y, det, valid = vertex_map_field(u, kappa)
    np.testing.assert_allclose(y[valid], (1 + a / kappa) * grid65.coords[valid], atol=1e-10)
    np.testing.assert_allclose(det[valid], (1 + a / kappa) ** 2, atol=1e-10)
    idx = grid65.center_index
    y0, d0 = vertex_map(u, idx, kappa)
    assert np.allclose(y0, 0) and d0 == pytest.approx(1.5625)
    with pytest.raises(ValueError):
        vertex_map(u, (0, 32), kappa)
