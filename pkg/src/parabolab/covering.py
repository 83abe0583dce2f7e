"""Raster versions of the ball-covering argument.

A set ``E`` that, in every ball it meets, is followed by a set ``F`` with
relative density at least ``mu``, forces ``|B_1 \\ F| <= (1 - mu/5^n) |B_1 \\ E|``.
This module provides the pieces to test that on rasters: largest balls inside
an open set, a greedy Vitali selection, samplers for the hypothesis and a
checker for the conclusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.ndimage import distance_transform_edt

from .grid import CellSet, GridSpec

__all__ = [
    "RasterSet",
    "Ball",
    "BallFamily",
    "CoveringVerdict",
    "largest_ball",
    "vitali_select",
    "vitali_check",
    "covering_check",
    "covering_tolerance",
    "random_balls",
    "random_ball_union",
    "random_instance",
]


@dataclass(frozen=True)
class RasterSet:
    """Node set inside the ball together with a flag saying whether it stands for a closed set."""

    cells: CellSet
    closed: bool = True

    @classmethod
    def from_mask(cls, spec: GridSpec, members, closed: bool = True) -> "RasterSet":
        return cls(CellSet(spec, np.asarray(members, dtype=bool)), closed)

    @property
    def spec(self) -> GridSpec:
        return self.cells.spec

    @property
    def members(self) -> np.ndarray:
        return self.cells.members

    def measure(self) -> float:
        return self.cells.measure()

    def complement(self) -> "RasterSet":
        return RasterSet(self.cells.complement(), not self.closed)


class Ball(NamedTuple):
    center: tuple
    radius: float

    def contains(self, other: "Ball", slack: float = 0.0) -> bool:
        d = math.dist(self.center, other.center)
        return d + other.radius <= self.radius + slack

    def dilate(self, factor: float) -> "Ball":
        return Ball(self.center, factor * self.radius)


@dataclass(frozen=True)
class BallFamily:
    """Balls of radius at least ``2h`` inside the closed unit ball."""

    spec: GridSpec
    balls: tuple[Ball, ...] = field(default_factory=tuple)

    def __post_init__(self):
        balls = tuple(Ball(tuple(float(c) for c in b[0]), float(b[1])) for b in self.balls)
        for b in balls:
            if len(b.center) != self.spec.ndim:
                raise ValueError(f"ball {b} has the wrong dimension")
            if b.radius < 2 * self.spec.h - 1e-12:
                raise ValueError(f"ball radius {b.radius:.4g} is below 2h")
            if math.hypot(*b.center) + b.radius > 1 + 1e-9:
                raise ValueError(f"ball {b} leaves the unit ball")
        object.__setattr__(self, "balls", balls)

    def __len__(self):
        return len(self.balls)

    def __iter__(self):
        return iter(self.balls)

    def raster(self, closed: bool = True, factor: float = 1.0) -> np.ndarray:
        """Union of the (dilated) balls on the grid."""
        out = np.zeros(self.spec.shape, dtype=bool)
        for b in self.balls:
            sl, sub = _ball_window(self.spec, b.center, factor * b.radius, closed)
            out[sl] |= sub
        return out


def _ball_window(spec: GridSpec, center, radius: float, closed: bool = True):
    """Bounding-box slice of a ball and its raster inside that box (masked to the unit ball)."""
    c = np.asarray(center, dtype=float)
    h, m = spec.h, spec.cells_per_axis
    lo = np.clip(np.floor((c - radius + 1.0) / h).astype(int), 0, m - 1)
    hi = np.clip(np.ceil((c + radius + 1.0) / h).astype(int), 0, m - 1)
    sl = tuple(slice(int(a), int(b) + 1) for a, b in zip(lo, hi))
    pts = spec.coords[sl]
    d2 = np.sum((pts - c) ** 2, axis=-1)
    inside = d2 <= radius**2 if closed else d2 < radius**2
    return sl, inside & spec.mask[sl]


# -- largest balls -----------------------------------------------------------------


def _inner_radius(U: RasterSet) -> np.ndarray:
    """Distance from each node to the complement of U: nodes outside U and the unit sphere."""
    spec = U.spec
    d = distance_transform_edt(U.members) * spec.h
    return np.where(U.members, np.minimum(d, 1.0 - spec.radius), 0.0)


def largest_ball(x, U: RasterSet, _radius: np.ndarray | None = None) -> Ball:
    """Largest ball with a grid-node centre that contains ``x`` and stays inside ``U``.

    The radius at centre ``c`` is the distance from ``c`` to the complement of
    ``U`` (non-member nodes and the unit sphere). Ties go to the
    lexicographically smallest centre index.
    """
    if U.closed:
        raise ValueError("largest_ball needs an open set")
    spec = U.spec
    x = np.asarray(x, dtype=float)
    if not U.members[spec.index_of(x)]:
        raise ValueError(f"x = {x} is not in U")
    rad = _inner_radius(U) if _radius is None else _radius
    d = np.sqrt(np.sum((spec.coords - x) ** 2, axis=-1))
    ok = U.members & (d < rad)
    if not np.any(ok):
        # x sits on a member node whose distance to the complement rounds to zero
        idx = spec.index_of(x)
        return Ball(tuple(spec.point(idx)), float(rad[idx]))
    score = np.where(ok, rad, -np.inf)
    k = int(np.argmax(score))  # first maximum in C order = smallest index
    idx = np.unravel_index(k, spec.shape)
    return Ball(tuple(float(v) for v in spec.point(idx)), float(rad[idx]))


# -- Vitali ------------------------------------------------------------------------------


def vitali_select(family: BallFamily) -> BallFamily:
    """Greedy selection by decreasing radius (ties: smallest centre).

    A ball is kept when its closure misses every ball kept so far. Any
    discarded ball meets a kept ball at least as large, so it lies in the
    3-fold (hence 5-fold) dilation of that ball.
    """
    if len(family) == 0:
        raise ValueError("empty family")
    order = sorted(family.balls, key=lambda b: (-b.radius, b.center))
    kept: list[Ball] = []
    for b in order:
        if all(math.dist(b.center, k.center) > b.radius + k.radius for k in kept):
            kept.append(b)
    return BallFamily(family.spec, tuple(kept))


def vitali_check(family: BallFamily, selected: BallFamily, factor: float = 5.0):
    """Raster checks: selected rasters pairwise disjoint; input union inside the dilated union.

    Returns ``(disjoint, covered)``.
    """
    spec = family.spec
    count = np.zeros(spec.shape, dtype=np.int32)
    for b in selected:
        sl, sub = _ball_window(spec, b.center, b.radius, closed=True)
        count[sl] += sub
    disjoint = bool(count.max() <= 1)
    covered = bool(np.all(~family.raster() | selected.raster(factor=factor)))
    return disjoint, covered


# -- covering check -------------------------------------------------------------------------


def covering_tolerance(spec: GridSpec) -> float:
    """``3h`` times the surface measure of the unit sphere."""
    n = spec.ndim
    sphere = n * math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return 3.0 * spec.h * sphere


@dataclass
class CoveringVerdict:
    hypothesis: bool
    conclusion: bool | None
    worst_ball: Ball | None
    worst_ratio: float
    mu: float
    lhs: float
    rhs: float
    tol: float
    balls_checked: int
    sources: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "conclusion": self.conclusion,
            "worst_ball": None if self.worst_ball is None else {
                "center": list(self.worst_ball.center), "radius": self.worst_ball.radius},
            "worst_ratio": self.worst_ratio,
            "mu": self.mu,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "tol": self.tol,
            "tolerance_formula": "3 h |S^{n-1}|",
            "balls_checked": self.balls_checked,
            "sources": dict(self.sources),
        }


def random_balls(spec: GridSpec, count: int, rng) -> list[Ball]:
    """Balls with centres uniform in the unit ball and radius uniform on [2h, 1 - |c|]."""
    n = spec.ndim
    out = []
    for _ in range(count):
        d = rng.normal(size=n)
        d /= np.linalg.norm(d)
        c = d * rng.uniform() ** (1.0 / n) * (1.0 - 2 * spec.h)
        r = rng.uniform(2 * spec.h, 1.0 - np.linalg.norm(c))
        out.append(Ball(tuple(float(v) for v in c), float(r)))
    return out


def _boundary_nodes(E: np.ndarray, spec: GridSpec) -> np.ndarray:
    inner = E.copy()
    for ax in range(spec.ndim):
        for s in (1, -1):
            inner &= np.roll(E, s, axis=ax)
    return np.argwhere(E & ~inner)


def _tangent_balls(spec: GridSpec, E: np.ndarray, count: int, rng) -> list[Ball]:
    """Balls that contain a boundary node of E just barely, in random directions."""
    nodes = _boundary_nodes(E, spec)
    out = []
    if len(nodes) == 0:
        return out
    for _ in range(count):
        p = spec.point(nodes[rng.integers(len(nodes))])
        v = rng.normal(size=spec.ndim)
        v /= np.linalg.norm(v)
        R = rng.uniform(2 * spec.h, 0.5)
        c = p + (R - 0.25 * spec.h) * v
        room = 1.0 - np.linalg.norm(c)
        if room >= R:
            out.append(Ball(tuple(c), float(R)))
    return out


def covering_check(E: RasterSet, F: RasterSet, mu: float, ball_samples: int = 200,
                   seed: int = 0, bx_samples: int | None = None) -> CoveringVerdict:
    """Test the density hypothesis on sampled balls and, if it holds, the measure conclusion.

    Sampled balls are open rasters: uniformly random balls in the unit ball,
    balls barely containing a boundary node of E, and the largest balls
    ``B^x`` inside ``B_1 \\ E`` for sampled ``x``, enlarged by ``2h`` so that
    they reach E. Only balls meeting E test the hypothesis.
    """
    spec = E.spec
    if F.spec != spec:
        raise ValueError("E and F live on different grids")
    if not (0 < mu < 1):
        raise ValueError("mu must lie in (0, 1)")
    if not np.any(E.members):
        raise ValueError("E is empty")
    if np.any(E.members & ~F.members):
        raise ValueError("E is not contained in F")
    rng = np.random.default_rng(seed)
    bx_samples = ball_samples // 4 if bx_samples is None else bx_samples
    sources = {"random": random_balls(spec, ball_samples, rng),
               "tangent": _tangent_balls(spec, E.members, ball_samples // 2, rng)}
    U = RasterSet(CellSet(spec, spec.mask & ~E.members), closed=False)
    bx = []
    free = np.argwhere(U.members)
    if len(free) and bx_samples:
        rad = _inner_radius(U)
        for k in rng.choice(len(free), size=min(bx_samples, len(free)), replace=False):
            b = largest_ball(spec.point(free[k]), U, _radius=rad)
            R = min(b.radius + 2 * spec.h, 1.0 - math.hypot(*b.center))
            if R > 0:
                bx.append(Ball(b.center, R))
    sources["enlarged_bx"] = bx

    worst, worst_ratio, checked = None, float("inf"), 0
    for balls in sources.values():
        for b in balls:
            sl, B = _ball_window(spec, b.center, b.radius, closed=False)
            nb = int(B.sum())
            if nb == 0 or not np.any(B & E.members[sl]):
                continue
            checked += 1
            ratio = int(np.count_nonzero(B & F.members[sl])) / nb
            if ratio < worst_ratio:
                worst, worst_ratio = b, ratio
    hyp = checked > 0 and worst_ratio >= mu
    lhs = F.complement().measure()
    rhs = (1.0 - mu / 5**spec.ndim) * E.complement().measure()
    tol = covering_tolerance(spec)
    concl = bool(lhs <= rhs + tol) if hyp else None
    counts = {k: len(v) for k, v in sources.items()}
    return CoveringVerdict(bool(hyp), concl, worst, float(worst_ratio), mu, lhs, rhs, tol, checked,
                           counts)


# -- instance generators ------------------------------------------------------------------


def random_ball_union(spec: GridSpec, count: int, radius_range=(0.05, 0.3), seed: int = 0,
                      grow: float = 0.0):
    """Closed raster of a union of random balls; ``grow`` enlarges every radius.

    Returns the raster and the list of balls (before growth).
    """
    rng = np.random.default_rng(seed)
    balls = []
    for _ in range(count):
        r = rng.uniform(*radius_range)
        d = rng.normal(size=spec.ndim)
        d /= np.linalg.norm(d)
        c = d * rng.uniform() ** (1.0 / spec.ndim) * max(1.0 - r, 0.0)
        balls.append(Ball(tuple(c), float(r)))
    out = np.zeros(spec.shape, dtype=bool)
    for b in balls:
        sl, sub = _ball_window(spec, b.center, b.radius + grow, closed=True)
        out[sl] |= sub
    return out, balls


def random_instance(spec: GridSpec, seed: int):
    """``(E, F, mu)`` with E a union of 1-4 random balls and F its ``d``-neighbourhood.

    Any ball meeting E contains a point p of E and then a ball of radius
    ``min(R, d)/2`` inside both itself and ``B_d(p)``, so its density in F is
    at least ``(d/2)^n``; ``mu`` is half of that to leave room for rasters.
    """
    rng = np.random.default_rng(seed)
    count = int(rng.integers(1, 5))
    d = float(rng.uniform(0.1, 0.3))
    sub = int(rng.integers(2**31))
    E, _ = random_ball_union(spec, count, seed=sub)
    F, _ = random_ball_union(spec, count, seed=sub, grow=d)
    mu = 0.5 * (d / 2) ** spec.ndim
    return RasterSet.from_mask(spec, E), RasterSet.from_mask(spec, F | E), mu
