"""Separable lower envelope of parabolas (the 1-D kernel and its n-D driver)."""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["min_plus_quadratic"]


@njit(cache=True)
def _lines(F, c, out, arg):
    """For each row f of F: ``out[p] = min_q f[q] + c*(p - q)**2`` and its argmin.

    Entries equal to +inf are ignored. Rows that are entirely +inf give
    ``out = +inf`` and ``arg = -1``. Ties go to the smaller index.
    """
    nl, m = F.shape
    for l in range(nl):
        f = F[l]
        v = np.empty(m, dtype=np.int64)
        z = np.empty(m + 1)
        k = -1
        for q in range(m):
            fq = f[q]
            if fq == np.inf:
                continue
            if k < 0:
                k = 0
                v[0] = q
                z[0] = -np.inf
                z[1] = np.inf
                continue
            s = 0.0
            while k >= 0:
                vk = v[k]
                s = ((fq + c * q * q) - (f[vk] + c * vk * vk)) / (2.0 * c * (q - vk))
                if s <= z[k]:
                    k -= 1
                else:
                    break
            if k < 0:
                k = 0
                v[0] = q
                z[0] = -np.inf
                z[1] = np.inf
            else:
                k += 1
                v[k] = q
                z[k] = s
                z[k + 1] = np.inf
        if k < 0:
            for p in range(m):
                out[l, p] = np.inf
                arg[l, p] = -1
            continue
        j = 0
        for p in range(m):
            while z[j + 1] < p:
                j += 1
            d = p - v[j]
            out[l, p] = f[v[j]] + c * d * d
            arg[l, p] = v[j]


def min_plus_quadratic(values: np.ndarray, coef: float):
    """``min_x values[x] + coef * |x - y|^2`` over all grid indices x, for every y.

    Distances are in index units. ``+inf`` entries never win. One 1-D pass per
    axis, linear in the number of nodes.

    Returns
    -------
    out : ndarray
    argmin : int ndarray, shape ``values.shape + (ndim,)``; ``-1`` where no
        finite entry exists.
    """
    if coef <= 0:
        raise ValueError("coef must be positive")
    cur = np.array(values, dtype=float)
    nd = cur.ndim
    idx = np.indices(cur.shape).transpose(tuple(range(1, nd + 1)) + (0,)).copy()
    for axis in range(nd):
        moved = np.moveaxis(cur, axis, -1)
        shp = moved.shape
        F = np.ascontiguousarray(moved).reshape(-1, shp[-1])
        out = np.empty_like(F)
        arg = np.empty(F.shape, dtype=np.int64)
        _lines(F, float(coef), out, arg)
        out = np.moveaxis(out.reshape(shp), -1, axis)
        arg = np.moveaxis(arg.reshape(shp), -1, axis)
        dead = arg < 0
        safe = np.where(dead, 0, arg)
        idx = np.take_along_axis(idx, safe[..., None], axis=axis)
        idx[dead] = -1
        cur = out
    return cur, idx
