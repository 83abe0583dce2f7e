"""Analytic test cases with exact derivatives.

Every case except ``cone`` satisfies both singular inequalities pointwise
wherever ``Du != 0``; this is checked on a fixed random sample when the case
is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridFunction, GridSpec, sample_function
from .operators import Ellipticity, check_gamma, pucci_eval, singular_residual

__all__ = ["TestCase", "make_case", "parse_case", "radial_plaplace_constant", "CASE_KINDS"]

CASE_KINDS = ("quadratic", "cone", "radial_plaplace", "bump")

Pointwise = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TestCase:
    """A bundle ``(u, f, gamma, ell)`` with exact first and second derivatives.

    The callables take points of shape ``(k, ndim)``.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    ndim: int
    u: Pointwise
    grad: Pointwise
    hess: Pointwise
    f: Pointwise
    gamma: float
    ell: Ellipticity
    notes: str = ""
    in_class: bool = True
    params: dict = field(default_factory=dict)

    def sample(self, spec: GridSpec) -> GridFunction:
        self._check_dim(spec)
        return sample_function(self.u, spec)

    def sample_f(self, spec: GridSpec) -> GridFunction:
        self._check_dim(spec)
        return sample_function(self.f, spec)

    def exact_derivatives(self, spec: GridSpec):
        """Exact gradient and Hessian at the ball nodes (NaN elsewhere)."""
        self._check_dim(spec)
        n = spec.ndim
        grad = np.full(spec.shape + (n,), np.nan)
        hess = np.full(spec.shape + (n, n), np.nan)
        pts = spec.coords[spec.mask]
        grad[spec.mask] = self.grad(pts)
        hess[spec.mask] = self.hess(pts)
        return grad, hess

    def residuals(self, pts: np.ndarray):
        return singular_residual(self.grad(pts), self.hess(pts), self.f(pts), self.gamma, self.ell)

    def _check_dim(self, spec):
        if spec.ndim != self.ndim:
            raise ValueError(f"case {self.name} is {self.ndim}-D, grid is {spec.ndim}-D")


def radial_plaplace_constant(p: float, ndim: int) -> float:
    """``c_p = ((p-1)/p) * n^{-1/(p-1)}`` so that ``Delta_p (c_p |x|^{p/(p-1)}) = 1``."""
    return (p - 1) / p * ndim ** (-1.0 / (p - 1))


def _norm(x):
    return np.linalg.norm(x, axis=-1)


def _unit(x):
    r = _norm(x)[..., None]
    return np.divide(x, r, out=np.zeros_like(x), where=r > 0)


def _outer(a):
    return a[..., :, None] * a[..., None, :]


def _quadratic(a: float, ndim: int, ell: Ellipticity) -> TestCase:
    if a == 0:
        raise ValueError("quadratic needs a != 0")
    eye = np.eye(ndim)
    # lam*tr(aI) is P-(aI) for a > 0 and P+(aI) for a < 0
    f_const = ell.lam * ndim * a
    return TestCase(
        name=f"quadratic:{a:g}",
        ndim=ndim,
        u=lambda x: 0.5 * a * np.sum(x**2, axis=-1),
        grad=lambda x: a * np.asarray(x, dtype=float),
        hess=lambda x: np.broadcast_to(a * eye, np.shape(x)[:-1] + (ndim, ndim)).copy(),
        f=lambda x: np.full(np.shape(x)[:-1], f_const),
        gamma=0.0,
        ell=ell,
        notes=f"Hessian {a:g}*I; lower contact radius k/(k+a) for a > 0",
        params={"a": a},
    )


def _cone(ndim: int, ell: Ellipticity) -> TestCase:
    eye = np.eye(ndim)

    def hess(x):
        x = np.asarray(x, dtype=float)
        r = _norm(x)[..., None, None]
        xh = _unit(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            H = (eye - _outer(xh)) / r
        return np.where(r > 0, H, np.inf)

    return TestCase(
        name="cone",
        ndim=ndim,
        u=_norm,
        grad=_unit,
        hess=hess,
        f=lambda x: np.zeros(np.shape(x)[:-1]),
        gamma=0.0,
        ell=ell,
        notes=(
            "outside the class: P-(D^2u) ~ lam*(n-1)/|x| is unbounded at the vertex; "
            "upper contact sets exclude a ball of radius ~1/t"
        ),
        in_class=False,
    )


def _radial_plaplace(p: float, ndim: int) -> TestCase:
    if not (1 < p <= 2):
        raise ValueError(f"radial_plaplace needs 1 < p <= 2, got {p}")
    c = radial_plaplace_constant(p, ndim)
    q = p / (p - 1)
    eye = np.eye(ndim)

    def u(x):
        return c * _norm(x) ** q

    def grad(x):
        x = np.asarray(x, dtype=float)
        # q >= 2 for p <= 2, so r**(q-2) is bounded at the origin
        return c * q * _norm(x)[..., None] ** (q - 2) * x

    def hess(x):
        x = np.asarray(x, dtype=float)
        r = _norm(x)[..., None, None]
        P = _outer(_unit(x))
        # radial second derivative c q (q-1) r^{q-2}, tangential c q r^{q-2}
        return c * q * r ** (q - 2) * ((q - 1) * P + (eye - P))

    return TestCase(
        name=f"radial_plaplace:{p:g}",
        ndim=ndim,
        u=u,
        grad=grad,
        hess=hess,
        f=lambda x: np.ones(np.shape(x)[:-1]),
        gamma=2.0 - p,
        ell=Ellipticity(p - 1.0, 1.0),
        notes=f"Delta_p u = 1 with c_p = {c:.12g}, exponent {q:.6g}",
        params={"p": p, "c_p": c},
    )


def _bump(ndim: int, ell: Ellipticity) -> TestCase:
    eye = np.eye(ndim)

    def u(x):
        return np.cos(0.5 * np.pi * np.sum(np.asarray(x) ** 2, axis=-1))

    def grad(x):
        x = np.asarray(x, dtype=float)
        s = 0.5 * np.pi * np.sum(x**2, axis=-1)
        return (-np.pi * np.sin(s))[..., None] * x

    def hess(x):
        x = np.asarray(x, dtype=float)
        s = 0.5 * np.pi * np.sum(x**2, axis=-1)[..., None, None]
        return -np.pi * np.sin(s) * eye - np.pi**2 * np.cos(s) * _outer(x)

    def f(x):
        # equality on the P- side: f = P-(D^2u) - |Du|
        return pucci_eval(hess(x), ell, "minus") - _norm(grad(x))

    return TestCase(
        name="bump",
        ndim=ndim,
        u=u,
        grad=grad,
        hess=hess,
        f=f,
        gamma=0.0,
        ell=ell,
        notes="u = cos(pi|x|^2/2); f makes the lower inequality an equality",
    )


def _verify_case(case: TestCase, n_points: int = 400, tol: float = 1e-9) -> None:
    rng = np.random.default_rng(12345)
    pts = rng.normal(size=(n_points, case.ndim))
    pts *= (rng.uniform(size=(n_points, 1)) ** (1 / case.ndim)) / _norm(pts)[:, None]
    g = _norm(case.grad(pts))
    keep = g > 1e-8
    lo, hi = case.residuals(pts[keep])
    if np.any(lo > tol) or np.any(hi < -tol):
        raise AssertionError(f"case {case.name} violates the inequality class")


def make_case(kind: str, ndim: int = 2, ell: Ellipticity | None = None, **params) -> TestCase:
    """Build a catalog case.

    Parameters
    ----------
    kind : {'quadratic', 'cone', 'radial_plaplace', 'bump'}
    params : ``a`` for quadratic (default 1), ``p`` for radial_plaplace
        (default 1.5). ``radial_plaplace`` ignores ``ell`` and uses
        ``(p - 1, 1)``.
    """
    if ndim not in (1, 2, 3):
        raise ValueError(f"ndim must be 1, 2 or 3, got {ndim}")
    ell = ell or Ellipticity(1.0, 2.0)
    if kind == "quadratic":
        case = _quadratic(float(params.get("a", 1.0)), ndim, ell)
    elif kind == "cone":
        case = _cone(ndim, ell)
    elif kind == "radial_plaplace":
        case = _radial_plaplace(float(params.get("p", 1.5)), ndim)
    elif kind == "bump":
        case = _bump(ndim, ell)
    else:
        raise ValueError(f"unknown case kind {kind!r}; choose from {CASE_KINDS}")
    check_gamma(case.gamma)
    if case.in_class:
        _verify_case(case)
    return case


def parse_case(text: str, ndim: int = 2, ell: Ellipticity | None = None) -> TestCase:
    """Parse ``'quadratic:2'``, ``'radial_plaplace:1.5'``, ``'cone'`` or ``'bump'``."""
    kind, _, arg = text.partition(":")
    params = {}
    if arg:
        key = {"quadratic": "a", "radial_plaplace": "p"}.get(kind)
        if key is None:
            raise ValueError(f"case {kind!r} takes no parameter")
        params[key] = float(arg)
    return make_case(kind, ndim=ndim, ell=ell, **params)
