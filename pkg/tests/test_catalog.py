import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabolab.catalog import CASE_KINDS, make_case, parse_case, radial_plaplace_constant
from parabolab.operators import Ellipticity, pucci_eval, singular_residual


# c_p from integrating the radial ODE (r^{n-1} |u'|^{p-2} u')' = r^{n-1} by hand:
# u' = (r/n)^{1/(p-1)}, so c_p = (p-1)/p * n^{-1/(p-1)}.  p = 1.5 gives 1/12.
FROZEN_CP = {(1.5, 2): 1 / 12, (1.8, 2): 0.186865870056381, (1.5, 3): 1 / 27}


@pytest.mark.parametrize("key", sorted(FROZEN_CP))
def test_radial_constant_frozen(key):
    assert radial_plaplace_constant(*key) == pytest.approx(FROZEN_CP[key], rel=1e-13)


@pytest.mark.parametrize("p", [1.5, 1.8, 2.0])
def test_radial_solves_plaplace_in_divergence_form(p):
    # independent check: finite-difference the radial flux r^{n-1}|u'|^{p-2}u'
    case = make_case("radial_plaplace", 2, p=p)
    r = np.linspace(0.2, 0.9, 8)
    d = 1e-5
    def flux(s):
        pts = np.stack([s, np.zeros_like(s)], axis=-1)
        g = case.grad(pts)[:, 0]
        return s * np.abs(g) ** (p - 2) * g
    lap = (flux(r + d) - flux(r - d)) / (2 * d) / r
    np.testing.assert_allclose(lap, 1.0, rtol=1e-6)


def test_pucci_on_diagonal():
    ell = Ellipticity(1.0, 3.0)
    X = np.diag([2.0, -1.0])
    assert pucci_eval(X, ell, "plus") == pytest.approx(3 * 2 - 1)
    assert pucci_eval(X, ell, "minus") == pytest.approx(2 - 3)
    with pytest.raises(ValueError):
        pucci_eval(X, ell, "sideways")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(0.1, 1), st.floats(1, 5),
       st.floats(0, np.pi), st.floats(0, 1), st.floats(0, 1))
def test_pucci_brackets_linear_operators(entries, lam, ratio, angle, s1, s2):
    a, b, d = entries
    X = np.array([[a, b], [b, d]])
    ell = Ellipticity(lam, lam * ratio)
    hi, lo = pucci_eval(X, ell, "plus"), pucci_eval(X, ell, "minus")
    assert pucci_eval(-X, ell, "plus") == pytest.approx(-lo, abs=1e-9)
    # any coefficient matrix with spectrum in [lam, Lam] gives tr(AX) in [lo, hi]
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    eig = lam + (ell.Lam - lam) * np.array([s1, s2])
    A = R @ np.diag(eig) @ R.T
    t = np.trace(A @ X)
    assert lo - 1e-9 <= t <= hi + 1e-9


def test_ellipticity_validation():
    with pytest.raises(ValueError):
        Ellipticity(2.0, 1.0)
    with pytest.raises(ValueError):
        Ellipticity(0.0, 1.0)


@pytest.mark.parametrize("text", ["quadratic:1", "quadratic:-3", "radial_plaplace:1.5",
                                  "radial_plaplace:1.8", "bump"])
def test_in_class_cases_satisfy_inequalities(text):
    case = parse_case(text)
    assert case.in_class
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.7, 0.7, size=(500, 2))
    pts = pts[np.linalg.norm(case.grad(pts), axis=1) > 1e-6]
    lo, hi = case.residuals(pts)
    assert np.all(lo <= 1e-9) and np.all(hi >= -1e-9)


def test_cone_is_flagged_out_of_class():
    assert not make_case("cone").in_class


def test_exact_derivatives_match_finite_differences():
    case = make_case("bump")
    x = np.array([[0.31, -0.2]])
    d = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = d
        fd = (case.u(x + e) - case.u(x - e)) / (2 * d)
        assert fd[0] == pytest.approx(case.grad(x)[0, i], abs=1e-7)


@pytest.mark.parametrize("bad", ["quadratic:x", "cone:2", "unknown", "radial_plaplace:2.5"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_case(bad)


def test_case_kinds():
    assert set(CASE_KINDS) == {"quadratic", "cone", "radial_plaplace", "bump"}


def test_singular_residual_at_zero_gradient():
    ell = Ellipticity(1.0, 2.0)
    lo, hi = singular_residual(np.zeros((1, 2)), np.eye(2)[None], np.array([2.0]), 0.0, ell)
    # gamma = 0: the right-hand side is f itself
    assert lo[0] == pytest.approx(2.0 - 2.0)
    assert hi[0] == pytest.approx(4.0 - 2.0)
