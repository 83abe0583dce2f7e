"""Sliding paraboloids: contact sets, the epsilon-envelope and the vertex map.

A concave paraboloid of opening ``kappa`` and vertex ``y`` slid up from below
first touches ``u`` at level ``m(y) = min_x u(x) + kappa/2 |x - y|^2``. The
upper envelope ``w(x) = max_{y in V} m(y) - kappa/2 |x - y|^2`` of all the
touching paraboloids satisfies ``w <= u``, with equality exactly at the contact
points. Both steps are separable min-plus transforms with a quadratic kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._envelope import min_plus_quadratic
from .grid import CellSet, GridFunction, GridSpec, fd_derivatives

__all__ = [
    "Paraboloid",
    "TransformResult",
    "ContactSet",
    "as_vertex_set",
    "lower_transform",
    "upper_envelope",
    "contact_set",
    "moreau_envelope",
    "vertex_map",
    "vertex_map_field",
]


@dataclass(frozen=True)
class Paraboloid:
    """``-kappa/2 |x - vertex|^2 + level``."""

    kappa: float
    vertex: np.ndarray
    level: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("opening must be positive")
        if np.linalg.norm(self.vertex) > 1 + 1e-12:
            raise ValueError("vertex must lie in the closed unit ball")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * self.kappa * np.sum((x - self.vertex) ** 2, axis=-1) + self.level

    @classmethod
    def through(cls, kappa, vertex, point, value) -> "Paraboloid":
        """The opening-``kappa`` paraboloid with given vertex passing through ``(point, value)``."""
        vertex = np.asarray(vertex, dtype=float)
        d2 = float(np.sum((np.asarray(point, dtype=float) - vertex) ** 2))
        return cls(kappa, vertex, value + 0.5 * kappa * d2)


@dataclass(frozen=True)
class TransformResult:
    """Output of :func:`lower_transform`.

    ``m`` holds the touching levels on V (NaN elsewhere), ``argmin`` the index
    of a touching point per vertex (``-1`` off V), ``w`` the envelope on the
    ball (or None when not requested) and ``vertex_index`` the vertex of the
    envelope paraboloid active at each ball node.
    """

    m: np.ndarray
    argmin: np.ndarray
    w: np.ndarray | None = None
    vertex_index: np.ndarray | None = None


@dataclass(frozen=True)
class ContactSet:
    """Contact nodes of ``u`` for one opening, vertex set and direction."""

    members: CellSet
    direction: str
    kappa: float
    tol: float
    vertex_set: str
    gap: np.ndarray
    vertex_index: np.ndarray | None = None

    @property
    def spec(self) -> GridSpec:
        return self.members.spec

    @property
    def mask(self) -> np.ndarray:
        return self.members.members

    @property
    def boundary_ring(self) -> np.ndarray:
        return self.spec.boundary_ring

    def interior_members(self) -> np.ndarray:
        """Members with the discrete boundary ring removed."""
        return self.mask & ~self.spec.boundary_ring

    def measure(self) -> float:
        return self.members.measure()

    def complement_measure(self) -> float:
        return self.members.complement().measure()

    def vertex_of(self, index) -> np.ndarray:
        if self.vertex_index is None:
            raise ValueError("vertex data is only kept for one-sided contact sets")
        vi = self.vertex_index[tuple(index)]
        if np.any(vi < 0):
            raise ValueError(f"node {index} has no vertex")
        return self.spec.point(vi)


def as_vertex_set(V, spec: GridSpec) -> CellSet:
    """Normalise ``None``/``'full'``/bool array/CellSet to a nonempty CellSet."""
    if V is None or (isinstance(V, str) and V == "full"):
        cs = CellSet(spec, spec.mask)
    elif isinstance(V, CellSet):
        if V.spec != spec:
            raise ValueError("vertex set lives on a different grid")
        cs = V
    else:
        cs = CellSet(spec, np.asarray(V, dtype=bool))
    if cs.count == 0:
        raise ValueError("vertex set is empty")
    return cs


def _describe(V) -> str:
    if V is None or (isinstance(V, str) and V == "full"):
        return "full"
    return "restricted"


def lower_transform(u: GridFunction, kappa: float, V=None, envelope: bool = True) -> TransformResult:
    """Touching levels ``m(y) = min_{x in ball} u(x) + kappa/2 |x - y|^2`` for y in V.

    With ``envelope=True`` also returns the upper envelope ``w`` of the
    touching paraboloids (see :func:`upper_envelope`).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    spec = u.spec
    Vs = as_vertex_set(V, spec)
    coef = 0.5 * kappa * spec.h**2
    full, arg = min_plus_quadratic(u.filled(np.inf), coef)
    m = np.where(Vs.members, full, np.nan)
    argmin = np.where(Vs.members[..., None], arg, -1)
    if not envelope:
        return TransformResult(m, argmin)
    w, vidx = upper_envelope(m, kappa, spec)
    return TransformResult(m, argmin, w, vidx)


def upper_envelope(m: np.ndarray, kappa: float, spec: GridSpec):
    """``w(x) = max_{y : m(y) finite} m(y) - kappa/2 |x - y|^2`` on the ball.

    Returns ``w`` (NaN outside the ball) and the maximising vertex index.
    """
    neg = np.where(np.isfinite(m), -m, np.inf)
    out, idx = min_plus_quadratic(neg, 0.5 * kappa * spec.h**2)
    w = np.where(spec.mask, -out, np.nan)
    idx = np.where(spec.mask[..., None], idx, -1)
    return w, idx


def _slack(u: GridFunction, kappa: float, tol: float) -> float:
    # absorbs rounding in the two transforms; scales like u so that
    # (a*u, kappa, a*tol) and (u, kappa/a, tol) classify alike
    scale = float(np.max(np.abs(u.values[u.spec.mask]))) + 2.0 * kappa
    return 1e-9 * tol + 1e-13 * scale


def _one_sided(u: GridFunction, kappa: float, V, tol: float):
    tr = lower_transform(u, kappa, V)
    gap = np.where(u.spec.mask, u.values - tr.w, np.nan)
    members = u.spec.mask & (gap <= tol + _slack(u, kappa, tol))
    return members, gap, tr.vertex_index


def contact_set(
    u: GridFunction,
    kappa: float,
    V=None,
    direction: str = "lower",
    tol: float | None = None,
) -> ContactSet:
    """Contact set ``T_kappa^-`` (lower), ``T_kappa^+`` (upper) or their intersection.

    Parameters
    ----------
    V : None, 'full', bool array or CellSet
        Vertex set; None means the whole closed ball.
    tol : float, optional
        A node is a contact point when ``u - w <= tol``. Defaults to
        ``kappa * h**2``.
    """
    spec = u.spec
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    as_vertex_set(V, spec)
    if tol is None:
        tol = kappa * spec.h**2
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    desc = _describe(V)
    if direction == "lower":
        mem, gap, vidx = _one_sided(u, kappa, V, tol)
    elif direction == "upper":
        mem, gap, vidx = _one_sided(-u, kappa, V, tol)
    elif direction == "both":
        lo, glo, _ = _one_sided(u, kappa, V, tol)
        hi, ghi, _ = _one_sided(-u, kappa, V, tol)
        mem, gap, vidx = lo & hi, np.fmax(glo, ghi), None
    else:
        raise ValueError(f"direction must be lower, upper or both, got {direction!r}")
    return ContactSet(CellSet(spec, mem), direction, float(kappa), float(tol), desc, gap, vidx)


def moreau_envelope(u: GridFunction, epsilon: float) -> GridFunction:
    """``u_eps(x) = min_z u(z) + |z - x|^2 / eps^4`` over ball nodes z."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    tr = lower_transform(u, 2.0 / epsilon**4, None, envelope=False)
    return GridFunction(u.spec, tr.m)


def vertex_map_field(u_eps: GridFunction, kappa: float):
    """Vertex map ``y = x + Du_eps/kappa`` and ``det(I + D^2u_eps/kappa)`` clamped at 0.

    Returns ``(y, det, valid)`` over the whole grid; entries off ``valid`` are NaN.
    """
    grad, hess, valid = fd_derivatives(u_eps)
    n = u_eps.spec.ndim
    y = u_eps.spec.coords + grad / kappa
    jac = np.eye(n) + hess / kappa
    det = np.full(u_eps.spec.shape, np.nan)
    det[valid] = np.maximum(np.linalg.det(jac[valid]), 0.0)
    y[~valid] = np.nan
    return y, det, valid


def vertex_map(u_eps: GridFunction, x, kappa: float):
    """Vertex and clamped Jacobian determinant at the node with index ``x``."""
    x = tuple(int(i) for i in x)
    if not u_eps.spec.interior[x]:
        raise ValueError(f"node {x} has an incomplete difference stencil")
    y, det, _ = vertex_map_field(u_eps, kappa)
    return y[x], float(det[x])
