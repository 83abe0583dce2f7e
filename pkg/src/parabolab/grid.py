"""Masked Cartesian grids on the closed unit ball.

A :class:`GridSpec` is a node-centred Cartesian grid on ``[-1, 1]^n`` whose
origin is always a node. Fields living on the ball are stored as full
``(m,)*n`` arrays with ``NaN`` at nodes outside the ball; transforms swap the
NaN for ``+inf`` or ``-inf`` as needed.

Also contains finite differences, quadrature, and the GF01 binary format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage

__all__ = [
    "GridSpec",
    "GridFunction",
    "CellSet",
    "build_ball_grid",
    "sample_function",
    "fd_derivatives",
    "measure",
    "lp_norm",
    "ball_measure",
    "write_gf01",
    "read_gf01",
]

#: Sentinel stored at nodes outside the ball.
OUTSIDE = np.nan

# |x|^2 <= 1 is tested with this slack so that nodes such as (1, 0), whose
# coordinates carry a rounding error, are kept.
_MASK_SLACK = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Node-centred grid on ``[-1, 1]^ndim`` with ``cells_per_axis`` nodes per axis."""

    ndim: int
    cells_per_axis: int

    def __post_init__(self):
        if self.ndim not in (1, 2, 3):
            raise ValueError(f"ndim must be 1, 2 or 3, got {self.ndim}")
        m = self.cells_per_axis
        if m < 3 or m % 2 == 0:
            raise ValueError(
                f"cells_per_axis must be odd and >= 3 so the origin is a node, got {m}"
            )

    @property
    def h(self) -> float:
        return 2.0 / (self.cells_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.ndim

    @property
    def center_index(self) -> tuple[int, ...]:
        c = (self.cells_per_axis - 1) // 2
        return (c,) * self.ndim

    @cached_property
    def axis(self) -> np.ndarray:
        """1-D node coordinates ``-1 + i*h``."""
        m = self.cells_per_axis
        # i*h computed as 2*i/(m-1) keeps the centre node exactly at 0
        return (2.0 * np.arange(m) - (m - 1)) / (m - 1)

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (ndim,)``."""
        grids = np.meshgrid(*([self.axis] * self.ndim), indexing="ij")
        out = np.stack(grids, axis=-1)
        out.setflags(write=False)
        return out

    @cached_property
    def radius(self) -> np.ndarray:
        r = np.sqrt(np.sum(self.coords**2, axis=-1))
        r.setflags(write=False)
        return r

    @cached_property
    def mask(self) -> np.ndarray:
        """True at nodes with ``|x| <= 1``."""
        m = np.sum(self.coords**2, axis=-1) <= 1.0 + _MASK_SLACK
        m.setflags(write=False)
        return m

    @cached_property
    def interior(self) -> np.ndarray:
        """Nodes whose full ``3^n`` neighbourhood lies in the mask.

        These are the nodes where every central difference (including the
        diagonal ones used for mixed partials) is available.
        """
        structure = np.ones((3,) * self.ndim, dtype=bool)
        out = ndimage.binary_erosion(self.mask, structure=structure, border_value=0)
        out.setflags(write=False)
        return out

    @cached_property
    def boundary_ring(self) -> np.ndarray:
        """Masked nodes that are not :attr:`interior` (the discrete boundary)."""
        out = self.mask & ~self.interior
        out.setflags(write=False)
        return out

    @property
    def cell_volume(self) -> float:
        return self.h**self.ndim

    def refine(self) -> "GridSpec":
        """Grid with half the spacing (``m -> 2m - 1``)."""
        return GridSpec(self.ndim, 2 * self.cells_per_axis - 1)

    def index_of(self, point) -> tuple[int, ...]:
        """Index of the node nearest to ``point``."""
        p = np.broadcast_to(np.asarray(point, dtype=float), (self.ndim,))
        idx = np.rint((p + 1.0) / self.h).astype(int)
        idx = np.clip(idx, 0, self.cells_per_axis - 1)
        return tuple(int(i) for i in idx)

    def point(self, index) -> np.ndarray:
        return self.coords[tuple(index)].copy()

    def ball_raster(self, center, radius: float, closed: bool = True) -> np.ndarray:
        """Nodes of the mask inside the ball ``B_radius(center)``."""
        d2 = np.sum((self.coords - np.asarray(center, dtype=float)) ** 2, axis=-1)
        inside = d2 <= radius**2 if closed else d2 < radius**2
        return inside & self.mask


@dataclass(frozen=True)
class GridFunction:
    """Scalar field on the ball; ``values`` is NaN outside :attr:`GridSpec.mask`."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.spec.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.spec.shape}")
        vals[~self.spec.mask] = OUTSIDE
        if not np.all(np.isfinite(vals[self.spec.mask])):
            raise ValueError("GridFunction values must be finite on the ball")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def mask(self) -> np.ndarray:
        return self.spec.mask

    def filled(self, fill: float) -> np.ndarray:
        """Copy of the values with ``fill`` outside the ball."""
        out = np.array(self.values)
        out[~self.spec.mask] = fill
        return out

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values[self.spec.mask])))

    def at(self, point) -> float:
        return float(self.values[self.spec.index_of(point)])

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.spec, -self.values)

    def scaled(self, a: float) -> "GridFunction":
        return GridFunction(self.spec, a * self.values)


@dataclass(frozen=True)
class CellSet:
    """Set of grid nodes, always a subset of the ball mask."""

    spec: GridSpec
    members: np.ndarray = field(repr=False)

    def __post_init__(self):
        mem = np.asarray(self.members, dtype=bool) & self.spec.mask
        if mem.shape != self.spec.shape:
            raise ValueError("members shape does not match grid")
        mem.setflags(write=False)
        object.__setattr__(self, "members", mem)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.members))

    def measure(self) -> float:
        return measure(self)

    def __and__(self, other: "CellSet") -> "CellSet":
        return CellSet(self.spec, self.members & other.members)

    def __or__(self, other: "CellSet") -> "CellSet":
        return CellSet(self.spec, self.members | other.members)

    def complement(self) -> "CellSet":
        """Complement inside the ball."""
        return CellSet(self.spec, self.spec.mask & ~self.members)

    def issubset(self, other: "CellSet") -> bool:
        return not np.any(self.members & ~other.members)


def build_ball_grid(ndim: int, cells_per_axis: int) -> GridSpec:
    """Grid covering ``[-1, 1]^ndim`` whose mask is the closed unit ball."""
    return GridSpec(ndim, cells_per_axis)


def sample_function(expr: Callable[[np.ndarray], np.ndarray], spec: GridSpec) -> GridFunction:
    """Evaluate ``expr`` at the ball nodes.

    ``expr`` receives an array of points of shape ``(k, ndim)`` and must
    return ``k`` values.
    """
    pts = spec.coords[spec.mask]
    vals = np.asarray(expr(pts), dtype=float)
    vals = np.broadcast_to(vals, (pts.shape[0],))
    if not np.all(np.isfinite(vals)):
        raise ValueError("expression is not finite on the closed ball")
    out = np.full(spec.shape, OUTSIDE)
    out[spec.mask] = vals
    return GridFunction(spec, out)


def _shift(a: np.ndarray, offset) -> np.ndarray:
    """``out[i] = a[i + offset]`` with NaN where the neighbour is off the grid."""
    out = np.full_like(a, np.nan)
    src, dst = [], []
    for o, n in zip(offset, a.shape):
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, n - o))
        else:
            src.append(slice(0, n + o))
            dst.append(slice(-o, n))
    out[tuple(dst)] = a[tuple(src)]
    return out


def fd_derivatives(u: GridFunction):
    """Central second-order finite differences.

    Returns
    -------
    grad : ndarray, shape ``shape + (n,)``
    hess : ndarray, shape ``shape + (n, n)``
        Symmetric; mixed partials use the four-point diagonal formula.
    valid : ndarray of bool
        Nodes whose full stencil lies in the ball. Values elsewhere are NaN.
    """
    spec = u.spec
    n, h = spec.ndim, spec.h
    v = u.values
    grad = np.full(spec.shape + (n,), np.nan)
    hess = np.full(spec.shape + (n, n), np.nan)
    e = np.eye(n, dtype=int)
    for i in range(n):
        up, dn = _shift(v, e[i]), _shift(v, -e[i])
        grad[..., i] = (up - dn) / (2 * h)
        hess[..., i, i] = (up - 2 * v + dn) / h**2
        for j in range(i + 1, n):
            pp = _shift(v, e[i] + e[j])
            pm = _shift(v, e[i] - e[j])
            mp = _shift(v, -e[i] + e[j])
            mm = _shift(v, -e[i] - e[j])
            mixed = (pp - pm - mp + mm) / (4 * h**2)
            hess[..., i, j] = mixed
            hess[..., j, i] = mixed
    valid = spec.interior.copy()
    grad[~valid] = np.nan
    hess[~valid] = np.nan
    return grad, hess, valid


def measure(s) -> float:
    """Discrete Lebesgue measure: member count times ``h^n``.

    Accepts a :class:`CellSet` or a boolean array on the grid of ``s.spec``.
    """
    if isinstance(s, CellSet):
        return s.count * s.spec.cell_volume
    raise TypeError("measure expects a CellSet")


def ball_measure(spec: GridSpec) -> float:
    """Discrete measure of the whole ball mask."""
    return int(np.count_nonzero(spec.mask)) * spec.cell_volume


def lp_norm(g: GridFunction, p: float, where: np.ndarray | None = None) -> float:
    """``(h^n * sum g^p)^(1/p)`` over the ball nodes (or over ``where``)."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    sel = g.spec.mask if where is None else (np.asarray(where, dtype=bool) & g.spec.mask)
    vals = g.values[sel]
    if np.any(vals < 0):
        raise ValueError("lp_norm expects a nonnegative field")
    return float((g.spec.cell_volume * np.sum(vals**p)) ** (1.0 / p))


# -- GF01 -------------------------------------------------------------------

_GF01_MAGIC = b"GF01"
_GF01_HEADER = struct.Struct("<4sIId")


def write_gf01(path, field_: GridFunction | CellSet) -> None:
    """Write a field (or a 0/1 mask) in the GF01 little-endian format."""
    if isinstance(field_, CellSet):
        vals = field_.members.astype(float)
        vals[~field_.spec.mask] = np.nan
        spec = field_.spec
    else:
        vals, spec = field_.values, field_.spec
    header = _GF01_HEADER.pack(_GF01_MAGIC, spec.ndim, spec.cells_per_axis, spec.h)
    body = np.ascontiguousarray(vals, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(header + body)


def read_gf01(path) -> GridFunction:
    """Read a GF01 file. NaN nodes must coincide with the ball complement."""
    raw = Path(path).read_bytes()
    if len(raw) < _GF01_HEADER.size:
        raise ValueError("truncated GF01 file")
    magic, ndim, m, h = _GF01_HEADER.unpack_from(raw)
    if magic != _GF01_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    spec = GridSpec(int(ndim), int(m))
    if not np.isclose(h, spec.h, rtol=0, atol=1e-15):
        raise ValueError(f"spacing {h} inconsistent with {m} nodes per axis")
    vals = np.frombuffer(raw, dtype="<f8", offset=_GF01_HEADER.size)
    if vals.size != m**ndim:
        raise ValueError(f"expected {m**ndim} values, found {vals.size}")
    vals = vals.reshape(spec.shape).astype(float)
    if np.any(np.isnan(vals[spec.mask])):
        raise ValueError("NaN value at a node inside the ball")
    return GridFunction(spec, vals)
