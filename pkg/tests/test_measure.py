import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabolab import build_ball_grid, make_case, sample_function
from parabolab.catalog import parse_case
from parabolab.grid import GridFunction
from parabolab.measure import (
    DyadicParams,
    c2_inclusion,
    decay_profile,
    distribution_measure,
    dyadic_constant,
    dyadic_norm,
    normalize_and_ratio,
    w2delta_compare,
    w2delta_estimate,
)

SPEC = build_ball_grid(2, 33)


def test_dyadic_constant_by_hand():
    # eta = 1, M = 2, p = 1: max(2, 2/(2-1)) = 2
    assert dyadic_constant(DyadicParams(1.0, 2.0, 1.0)) == 2.0
    assert dyadic_constant(DyadicParams(math.sqrt(2), 2.0, 2.0)) == pytest.approx(8.0)


def test_dyadic_sum_by_hand():
    # g = 5 everywhere, eta = 1, M = 2: levels 2 and 4 are full, 8 is empty
    g = sample_function(lambda x: np.full(len(x), 5.0), SPEC)
    res = dyadic_norm(g, DyadicParams(1.0, 2.0, 1.0))
    vol = SPEC.mask.sum() * SPEC.cell_volume
    assert res.levels == 2
    assert res.s == pytest.approx((2 + 4) * vol)
    assert res.direct == pytest.approx(5 * vol)
    assert res.holds


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.2, 3), st.floats(1.2, 8), st.floats(0.1, 3),
       st.floats(0.1, 100))
def test_dyadic_bound_always_holds(seed, eta, M, p, scale):
    rng = np.random.default_rng(seed)
    vals = np.where(SPEC.mask, scale * rng.exponential(size=SPEC.shape) ** 3, np.nan)
    assert dyadic_norm(GridFunction(SPEC, vals), DyadicParams(eta, M, p)).holds


def test_dyadic_rejects_negative_and_bad_params():
    g = sample_function(lambda x: x[:, 0], SPEC)
    with pytest.raises(ValueError):
        dyadic_norm(g, DyadicParams.default(2, 1.0))
    with pytest.raises(ValueError):
        DyadicParams(1.0, 1.0, 1.0)


def test_distribution_measure(grid65):
    g = sample_function(lambda x: np.linalg.norm(x, axis=1), grid65)
    m = distribution_measure(g, [0.0, 0.5, 1.0])
    assert m[0] == pytest.approx(np.pi, abs=0.05)
    assert m[1] == pytest.approx(0.75 * np.pi, abs=0.05)
    assert m[2] == 0.0


def test_decay_of_cone_and_quadratic(grid129):
    cone = decay_profile(make_case("cone").sample(grid129), "upper")
    assert 1.6 <= cone.sigma <= 2.4
    assert cone.sigma == pytest.approx(2.374, abs=0.01)
    quad = decay_profile(make_case("quadratic", a=1.0).sample(grid129), "lower")
    assert 0.8 <= quad.sigma <= 1.2
    assert quad.sigma == pytest.approx(0.878, abs=0.01)
    assert quad.monotone and cone.monotone
    assert 0 < cone.theta < 1


def test_decay_rows_and_dict(grid65):
    rep = decay_profile(make_case("bump").sample(grid65), "both", (1.0, 2.0, 4))
    rows = list(rep.rows())
    assert [r[0] for r in rows] == [0, 1, 2, 3, 4]
    assert [r[1] for r in rows] == [1.0, 2.0, 4.0, 8.0, 16.0]
    d = rep.to_dict()
    assert d["ladder"][2]["t"] == 4.0 and d["label"] == "empirical surrogate"


def test_decay_saturates_for_affine(grid65):
    rep = decay_profile(sample_function(lambda x: 0.1 * x[:, 0], grid65), "both")
    # an affine function is touched everywhere from both sides except near the rim
    assert rep.measures[-1] <= rep.measures[0]


@pytest.mark.parametrize("bad", [(0.5, 2.0, 8), (1.0, 1.0, 8), (1.0, 2.0, 2)])
def test_decay_rejects_ladders(bad, grid65):
    with pytest.raises(ValueError):
        decay_profile(make_case("bump").sample(grid65), "lower", bad)


@pytest.mark.parametrize("text", ["quadratic:4", "quadratic:-10", "bump", "cone",
                                  "radial_plaplace:1.5"])
def test_hessian_levels_sit_in_complements(text, grid65):
    u = parse_case(text).sample(grid65)
    steps = c2_inclusion(u, [1.0, 2.0, 4.0, 8.0])
    assert all(s.violations == 0 for s in steps)


def test_inclusion_is_not_vacuous(grid65):
    steps = c2_inclusion(make_case("quadratic", a=4.0).sample(grid65), [1.0, 2.0])
    assert steps[0].level_count > 0


def test_w2delta_of_quadratic(grid65):
    # D^2 u = a I, |D^2 u|_F = a sqrt(2) on every Hessian-valid node
    u = make_case("quadratic", a=2.0).sample(grid65)
    direct = w2delta_estimate(u, 0.3)
    _, _, valid = __import__("parabolab").fd_derivatives(u)
    vol = valid.sum() * grid65.cell_volume
    assert direct == pytest.approx(2 * math.sqrt(2) * vol ** (1 / 0.3), rel=1e-9)
    d, b, ok = w2delta_compare(u, 0.3)
    assert ok and d <= b


def test_w2delta_rejects(grid65):
    u = make_case("bump").sample(grid65)
    with pytest.raises(ValueError):
        w2delta_estimate(u, 0.0)
    with pytest.raises(ValueError):
        w2delta_estimate(u, 0.3, route="other")


@pytest.mark.parametrize("text", ["radial_plaplace:1.5", "bump", "quadratic:-3"])
def test_normalisation_hits_the_hypotheses(text, grid65):
    case = parse_case(text)
    params, ratio = normalize_and_ratio(case.sample(grid65), case.sample_f(grid65), case.gamma,
                                        1e-12, 0.3)
    assert params.hypotheses_hold
    assert params.u_scaled_sup <= 1 / 16 and params.f_scaled_sup <= 1
    assert ratio > 0


def test_normalisation_rejects_bad_guard(grid65):
    case = make_case("bump")
    with pytest.raises(ValueError):
        normalize_and_ratio(case.sample(grid65), case.sample_f(grid65), 0.0, 0.0, 0.3)


def test_cone_hessian_integrability_threshold():
    # |D^2 u|_F = 1/|x| for the cone: L^delta finite iff delta < 2 in 2-D.
    # Above the threshold the cut-off at |x| ~ h makes the norm grow like
    # h^{(2 - delta)/delta}, i.e. by 2^{(delta-2)/delta} per halving of h.
    def norms(delta):
        return [w2delta_estimate(make_case("cone").sample(build_ball_grid(2, m)), delta)
                for m in (65, 129, 257)]

    low = norms(1.0)
    assert low[2] / low[1] < 1.02
    at = norms(2.0)
    assert at[0] < at[1] < at[2]
    high = norms(3.0)
    assert high[2] / high[1] == pytest.approx(2 ** (1 / 3), rel=0.01)
