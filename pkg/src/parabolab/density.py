"""Probes of the density step on concrete grid functions.

Three pieces, in the order a proof would use them:

* :func:`nonempty_witness` produces a lower contact point near the origin
  for any small enough ``u``;
* :func:`density_scan` samples balls meeting ``T_K^-`` and measures how much of
  each ball lies in ``T_{KM}^-``;
* :func:`barrier_probe` and :func:`vertex_measure_compare` replay the barrier
  and vertex-set construction for one ball and compare measures, both
  directly and through the Jacobian of the vertex map.

Everything here checks conclusions on instances; nothing is proved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contact import Paraboloid, contact_set, lower_transform, moreau_envelope, vertex_map_field
from .grid import CellSet, GridFunction
from .operators import Ellipticity

__all__ = [
    "BarrierParams",
    "BarrierResult",
    "DensityReport",
    "DegenerateVertexSet",
    "VertexMeasureReport",
    "nonempty_witness",
    "density_scan",
    "find_contact_pair",
    "barrier_probe",
    "vertex_measure_compare",
    "jacobian_bound",
    "barrier_profile",
    "StepRecord",
    "step_pipeline",
]


class DegenerateVertexSet(ValueError):
    """The vertex ball contains no grid node at this resolution."""


def _point(x, ndim: int) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if p.size != ndim:
        raise ValueError(f"expected a point in R^{ndim}, got {x!r}")
    return p


# -- nonemptiness ---------------------------------------------------------------


def nonempty_witness(u: GridFunction, K: float) -> np.ndarray:
    """Minimiser of ``u(x) + K/2 |x|^2`` over the ball.

    For ``||u|| <= 1/16`` the paraboloid with vertex at the origin touches
    ``u`` from below at the returned point, and comparing with the value at the
    origin gives ``K/2 |x|^2 <= 2||u|| <= 1/8``, hence ``|x| <= 1/2``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if u.sup_norm() > 1.0 / 16.0:
        raise ValueError(f"need ||u|| <= 1/16, got {u.sup_norm():.6g}")
    spec = u.spec
    obj = np.where(spec.mask, u.filled(np.inf) + 0.5 * K * spec.radius**2, np.inf)
    idx = np.unravel_index(int(np.argmin(obj)), spec.shape)
    x = spec.point(idx)
    cs = contact_set(u, K, direction="lower")
    if not cs.mask[idx]:
        raise AssertionError(f"witness {x} is not a lower contact point")
    if np.linalg.norm(x) > 0.5 + spec.h:
        raise AssertionError(f"witness {x} lies outside B_(1/2 + h)")
    return x


# -- density scan -----------------------------------------------------------------


@dataclass
class DensityReport:
    """Minimum over sampled balls of ``|B ∩ T_{KM}^-| / |B|`` for each M."""

    K: float
    M: list[float]
    min_ratio: dict[float, float]
    worst_ball: dict[float, tuple]
    sampled: int
    kept: int
    seed: int
    balls: list[tuple] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.kept == 0

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "M": list(self.M),
            "min_ratio": {str(M): v for M, v in self.min_ratio.items()},
            "worst_ball": {
                str(M): {"center": list(map(float, c)), "radius": float(r)}
                for M, (c, r) in self.worst_ball.items()
            },
            "sampled": self.sampled,
            "kept": self.kept,
            "seed": self.seed,
        }


def _sample_balls(spec, count: int, rng: np.random.Generator):
    """Balls ``B_r(x0)`` inside the unit ball: r uniform on [4h, 1/2], x0 uniform on ``B_(1-r)``."""
    n = spec.ndim
    out = []
    for _ in range(count):
        r = rng.uniform(4 * spec.h, 0.5)
        d = rng.normal(size=n)
        d /= np.linalg.norm(d)
        rho = (1.0 - r) * rng.uniform() ** (1.0 / n)
        out.append((rho * d, r))
    return out


def density_scan(u: GridFunction, K: float, M_candidates=(2.0, 4.0, 8.0), ball_samples: int = 200,
                 seed: int = 0) -> DensityReport:
    """Empirical density constant of ``T_{KM}^-`` in balls that meet ``T_K^-``.

    Balls are open rasters. When no sampled ball meets ``T_K^-`` the report
    comes back with ``kept == 0`` and NaN ratios.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    Ms = [float(M) for M in M_candidates]
    if not Ms or any(M <= 1 for M in Ms):
        raise ValueError("every M must exceed 1")
    spec = u.spec
    rng = np.random.default_rng(seed)
    balls = _sample_balls(spec, ball_samples, rng)
    base = contact_set(u, K, direction="lower").mask
    upper = {M: contact_set(u, K * M, direction="lower").mask for M in Ms}
    min_ratio = {M: float("nan") for M in Ms}
    worst = {M: (np.full(spec.ndim, np.nan), float("nan")) for M in Ms}
    kept_balls = []
    for c, r in balls:
        B = spec.ball_raster(c, r, closed=False)
        nb = int(B.sum())
        if nb == 0 or not np.any(B & base):
            continue
        kept_balls.append((c, r))
        for M in Ms:
            ratio = int(np.count_nonzero(B & upper[M])) / nb
            if not ratio >= min_ratio[M]:  # also replaces the initial NaN
                min_ratio[M] = ratio
                worst[M] = (c, r)
    return DensityReport(float(K), Ms, min_ratio, worst, len(balls), len(kept_balls), seed,
                         kept_balls)


# -- barrier -------------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierParams:
    """Barrier ``psi = P + K r^2 phi(|x - x0|/r)`` with ``phi(t) = C0 exp(-A t^2) - 1``."""

    A: float
    K: float
    r: float
    x0: np.ndarray
    x1: np.ndarray
    y1: np.ndarray
    C0: float | None = None

    def __post_init__(self):
        if self.A <= 1:
            raise ValueError("A must exceed 1")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.C0 is None:
            object.__setattr__(self, "C0", math.exp(self.A))
        if np.linalg.norm(self.x0) + self.r > 1 + 1e-12:
            raise ValueError("B_r(x0) must lie inside the unit ball")


def barrier_profile(t, A: float, C0: float | None = None):
    """``phi(t) = C0 exp(-A t^2) - 1``; with the default ``C0 = e^A`` it vanishes at t = 1."""
    C0 = math.exp(A) if C0 is None else C0
    return C0 * np.exp(-A * np.asarray(t, dtype=float) ** 2) - 1.0


@dataclass(frozen=True)
class BarrierResult:
    x2: np.ndarray
    gap: float
    inside_half: bool
    bound: float
    paraboloid: Paraboloid

    @property
    def within_bound(self) -> bool:
        return self.gap <= self.bound


def find_contact_pair(u: GridFunction, K: float, x0, r: float):
    """A lower contact node ``x1`` in ``B_r(x0)`` closest to ``x0``, and its vertex ``y1``.

    Returns None when the ball misses ``T_K^-``.
    """
    spec = u.spec
    x0 = _point(x0, spec.ndim)
    cs = contact_set(u, K, direction="lower")
    cand = cs.mask & spec.ball_raster(x0, r, closed=False)
    if not np.any(cand):
        return None
    d2 = np.where(cand, np.sum((spec.coords - x0) ** 2, axis=-1), np.inf)
    idx = np.unravel_index(int(np.argmin(d2)), spec.shape)
    return spec.point(idx), cs.vertex_of(idx)


def barrier_probe(u: GridFunction, params: BarrierParams, tol: float | None = None) -> BarrierResult:
    """Slide the barrier under ``u`` on the closed ball ``B_r(x0)``.

    Returns the grid minimiser ``x2`` of ``u - psi``, the gap
    ``u(x2) - P(x2)`` above the touching paraboloid and whether ``x2`` lies in
    ``B_(r/2)(x0)``. Since ``u - psi`` at ``x1`` is at most zero and
    ``phi <= C0 - 1``, the gap never exceeds ``C0 K r^2`` (checked).

    Raises
    ------
    ValueError
        when ``P`` is not below ``u`` up to ``tol`` (default ``K h^2``).
    """
    spec = u.spec
    n = spec.ndim
    K, r = params.K, params.r
    x0, x1, y1 = (_point(v, n) for v in (params.x0, params.x1, params.y1))
    if np.linalg.norm(x1 - x0) > r + 1e-12:
        raise ValueError("x1 must lie in the closed ball B_r(x0)")
    i1 = spec.index_of(x1)
    if not spec.mask[i1] or np.linalg.norm(spec.point(i1) - x1) > 1e-9:
        raise ValueError("x1 must be a grid node of the ball")
    P = Paraboloid.through(K, y1, x1, float(u.values[i1]))
    tol = K * spec.h**2 if tol is None else tol
    below = u.values[spec.mask] - P(spec.coords[spec.mask])
    scale = 1e-12 * (u.sup_norm() + K)
    if float(below.min()) < -(tol + scale):
        raise ValueError(f"paraboloid through x1 is not below u (undershoot {-below.min():.3g})")
    ball = spec.ball_raster(x0, r, closed=True)
    pts = spec.coords[ball]
    t = np.linalg.norm(pts - x0, axis=-1) / r
    psi = P(pts) + K * r**2 * barrier_profile(t, params.A, params.C0)
    diff = u.values[ball] - psi
    k = int(np.argmin(diff))
    x2 = pts[k]
    gap = float(u.values[ball][k] - P(x2))
    bound = params.C0 * K * r**2 + scale
    if gap > bound:
        raise AssertionError(f"barrier gap {gap:.6g} exceeds C0 K r^2 = {bound:.6g}")
    inside = bool(np.linalg.norm(x2 - x0) < 0.5 * r)
    return BarrierResult(x2, gap, inside, bound, P)


# -- vertex set and measure comparison --------------------------------------------------


def jacobian_bound(ndim: int, ell: Ellipticity) -> float:
    """``((n Lam + 4) / (n lam))^n``, the cap on ``det(D_x y)`` at contact points."""
    return ((ndim * ell.Lam + 4.0) / (ndim * ell.lam)) ** ndim


@dataclass
class VertexMeasureReport:
    V: CellSet
    center: np.ndarray
    radius: float
    image: CellSet
    containment: bool
    exceptions: int
    ring_exceptions: int
    exception_fraction: float
    ratio: float
    touching_ratio: float
    det_bound: float
    det_checked: int
    det_violations: int
    det_max: float
    det_histogram: tuple[list[int], list[float]]

    @property
    def det_fraction_ok(self) -> float:
        if self.det_checked == 0:
            return 1.0
        return 1.0 - self.det_violations / self.det_checked

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "radius": self.radius,
            "V_nodes": self.V.count,
            "image_nodes": self.image.count,
            "containment": self.containment,
            "exceptions": self.exceptions,
            "ring_exceptions": self.ring_exceptions,
            "exception_fraction": self.exception_fraction,
            "ratio": self.ratio,
            "touching_ratio": self.touching_ratio,
            "det_bound": self.det_bound,
            "det_checked": self.det_checked,
            "det_violations": self.det_violations,
            "det_max": self.det_max,
            "det_histogram": {"counts": self.det_histogram[0], "edges": self.det_histogram[1]},
        }


def vertex_measure_compare(u: GridFunction, K: float, M: float, x2, y1, r: float, x0,
                           ell: Ellipticity | None = None, epsilon: float = 0.3,
                           tol: float | None = None, det_tol: float = 1e-8) -> VertexMeasureReport:
    """Vertex ball ``V``, its contact image ``T_{KM}^-(V)`` and the two measure comparisons.

    ``V`` is the closed ball of radius ``r(M-1)/(8M)`` around
    ``y1/M + (M-1) x2/M``. Containment asks ``T_{KM}^-(V) ⊆ B_r(x0)``; image
    nodes outside the closed ball are exceptions; those on the boundary ring,
    where the discrete contact test is one-sided, are tallied apart and do
    not break containment. ``exception_fraction`` counts both kinds. ``ratio`` is
    ``|V| / |T_{KM}^-(V)|`` with the contact tolerance ``tol``; since that
    tolerance thickens the image by about a cell, ``touching_ratio`` repeats
    the count with the image replaced by the exact touching nodes (the
    minimisers for each vertex in V). The Jacobian check runs the vertex map of the
    Moreau envelope ``u_epsilon`` over the Hessian-valid image nodes and
    compares ``det(D_x y)`` with :func:`jacobian_bound`.

    Raises
    ------
    DegenerateVertexSet
        when ``V`` holds no grid node.
    """
    spec = u.spec
    n = spec.ndim
    ell = ell or Ellipticity()
    if M <= 1 or K < 1:
        raise ValueError("need K >= 1 and M > 1")
    x2, y1, x0 = (_point(v, n) for v in (x2, y1, x0))
    center = y1 / M + (M - 1) * x2 / M
    radius = r * (M - 1) / (8 * M)
    Vmask = spec.ball_raster(center, radius, closed=True)
    if not np.any(Vmask):
        raise DegenerateVertexSet(
            f"vertex ball of radius {radius:.3g} around {center} holds no node at h = {spec.h:.3g}")
    V = CellSet(spec, Vmask)
    kappa = K * M
    image = contact_set(u, kappa, V=V, direction="lower", tol=tol).members
    outside = image.members & ~spec.ball_raster(x0, r, closed=True)
    exceptions = int(np.count_nonzero(outside & ~spec.boundary_ring))
    ring_exc = int(np.count_nonzero(outside & spec.boundary_ring))
    frac = (exceptions + ring_exc) / max(image.count, 1)
    ratio = V.measure() / image.measure() if image.count else float("inf")
    arg = lower_transform(u, kappa, V, envelope=False).argmin[Vmask]
    touching = len({tuple(a) for a in arg.tolist()})
    touching_ratio = V.count / touching

    u_eps = moreau_envelope(u, epsilon)
    _, det, valid = vertex_map_field(u_eps, kappa)
    check = image.members & valid
    bound = jacobian_bound(n, ell)
    dets = det[check]
    viol = int(np.count_nonzero(dets > bound * (1 + det_tol)))
    if dets.size:
        counts, edges = np.histogram(dets, bins=10, range=(0.0, max(bound, float(dets.max()))))
        hist = (counts.tolist(), edges.tolist())
        dmax = float(dets.max())
    else:
        hist, dmax = ([], []), float("nan")
    return VertexMeasureReport(V, center, radius, image, exceptions == 0, exceptions, ring_exc,
                               frac, ratio,
                               touching_ratio, bound, int(dets.size), viol, dmax, hist)


@dataclass
class StepRecord:
    x0: np.ndarray
    r: float
    barrier: BarrierResult | None
    vertex: VertexMeasureReport | None
    status: str  # "ok", "miss" (ball misses T_K^-) or "degenerate"

    def to_dict(self) -> dict:
        out = {"x0": [float(v) for v in self.x0], "r": self.r, "status": self.status}
        if self.barrier is not None:
            out["barrier"] = {"x2": [float(v) for v in self.barrier.x2], "gap": self.barrier.gap,
                              "bound": self.barrier.bound, "inside_half": self.barrier.inside_half}
        if self.vertex is not None:
            out["vertex"] = self.vertex.to_dict()
        return out


def step_pipeline(u: GridFunction, K: float, M: float, ell: Ellipticity | None = None,
                  A: float = 3.0, balls: int = 4, seed: int = 0, r_range=(0.15, 0.5),
                  epsilon: float = 0.3) -> list[StepRecord]:
    """Barrier probe followed by the vertex-set comparison on seeded random balls."""
    spec = u.spec
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(balls):
        r = float(rng.uniform(*r_range))
        d = rng.normal(size=spec.ndim)
        x0 = d / np.linalg.norm(d) * (1.0 - r) * rng.uniform() ** (1.0 / spec.ndim)
        pair = find_contact_pair(u, K, x0, r)
        if pair is None:
            out.append(StepRecord(x0, r, None, None, "miss"))
            continue
        x1, y1 = pair
        br = barrier_probe(u, BarrierParams(A, K, r, x0, x1, y1))
        try:
            vm = vertex_measure_compare(u, K, M, br.x2, y1, r, x0, ell=ell, epsilon=epsilon)
        except DegenerateVertexSet:
            out.append(StepRecord(x0, r, br, None, "degenerate"))
            continue
        out.append(StepRecord(x0, r, br, vm, "ok"))
    return out
