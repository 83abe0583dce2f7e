"""Slow, independent reference computations used to validate the fast paths.

Nothing here shares code with the separable transforms: every quantity is
obtained from explicit pairwise distance tables.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import GridFunction, GridSpec

__all__ = [
    "brute_lower_transform",
    "brute_upper_envelope",
    "brute_contact_mask",
    "brute_moreau",
    "minimal_opening",
    "decay_from_openings",
    "quadratic_lower_complement",
    "fit_power",
]


def _pairwise_min(values: np.ndarray, src: np.ndarray, dst: np.ndarray, coef: float,
                  chunk: int = 2048):
    """``min_j values[j] + coef |dst_i - src_j|^2`` for each i, with its argmin."""
    out = np.empty(len(dst))
    arg = np.empty(len(dst), dtype=np.int64)
    for s in range(0, len(dst), chunk):
        d = dst[s:s + chunk]
        d2 = np.sum((d[:, None, :] - src[None, :, :]) ** 2, axis=-1)
        tot = values[None, :] + coef * d2
        arg[s:s + chunk] = np.argmin(tot, axis=1)
        out[s:s + chunk] = tot[np.arange(len(d)), arg[s:s + chunk]]
    return out, arg


def brute_lower_transform(u: GridFunction, kappa: float, V: np.ndarray | None = None):
    """``m(y) = min_x u(x) + kappa/2 |x - y|^2`` over ball nodes x, for y in V (NaN elsewhere)."""
    spec = u.spec
    V = spec.mask if V is None else (np.asarray(V, dtype=bool) & spec.mask)
    pts = spec.coords[spec.mask]
    vals = u.values[spec.mask]
    m, _ = _pairwise_min(vals, pts, spec.coords[V], 0.5 * kappa)
    out = np.full(spec.shape, np.nan)
    out[V] = m
    return out


def brute_upper_envelope(m: np.ndarray, kappa: float, spec: GridSpec):
    """``w(x) = max_{y : m(y) finite} m(y) - kappa/2 |x - y|^2`` on the ball."""
    V = np.isfinite(m)
    neg, _ = _pairwise_min(-m[V], spec.coords[V], spec.coords[spec.mask], 0.5 * kappa)
    w = np.full(spec.shape, np.nan)
    w[spec.mask] = -neg
    return w


def brute_contact_mask(u: GridFunction, kappa: float, direction: str = "lower",
                       tol: float | None = None, V=None) -> np.ndarray:
    """Contact mask by explicit min/max over all node pairs (``gap <= tol``)."""
    spec = u.spec
    if direction == "upper":
        return brute_contact_mask(GridFunction(spec, -u.values), kappa, "lower", tol, V)
    tol = kappa * spec.h**2 if tol is None else tol
    m = brute_lower_transform(u, kappa, V)
    w = brute_upper_envelope(m, kappa, spec)
    gap = u.values - w
    # same rounding allowance as the fast path, so that ties classify alike
    slack = 1e-9 * tol + 1e-13 * (float(np.max(np.abs(u.values[spec.mask]))) + 2 * kappa)
    return spec.mask & (gap <= tol + slack)


def brute_moreau(u: GridFunction, epsilon: float) -> np.ndarray:
    return brute_lower_transform(u, 2.0 / epsilon**4)


# -- decay oracles -------------------------------------------------------------------


def minimal_opening(u: GridFunction, kappas, direction: str = "upper") -> np.ndarray:
    """Smallest opening on the ``kappas`` ladder at which each node is a contact point.

    Nodes never reached get ``inf``. Membership is computed by brute force at
    every rung, independently of monotonicity.
    """
    spec = u.spec
    kappas = np.sort(np.asarray(kappas, dtype=float))
    first = np.full(spec.shape, np.inf)
    for k in kappas:
        mask = brute_contact_mask(u, k, direction)
        first = np.where(mask & ~np.isfinite(first), k, first)
    return np.where(spec.mask, first, np.nan)


def decay_from_openings(openings: np.ndarray, spec: GridSpec, ts) -> np.ndarray:
    """``|B_1 \\ T_t|`` read off the per-node minimal openings."""
    vals = openings[spec.mask]
    return np.array([np.count_nonzero(~(vals <= t)) * spec.cell_volume for t in ts])


def quadratic_lower_complement(a: float, kappa, ndim: int = 2):
    """Continuum ``|B_1 \\ T_kappa^-|`` for ``u = a|x|^2/2`` with a > 0.

    The vertex y touches at ``kappa y / (kappa + a)``, so the contact set is
    the ball of radius ``kappa / (kappa + a)``.
    """
    kappa = np.asarray(kappa, dtype=float)
    omega = math.pi ** (ndim / 2) / math.gamma(ndim / 2 + 1)
    return omega * (1.0 - (kappa / (kappa + a)) ** ndim)


def fit_power(ts, measures) -> float:
    """Minus the least-squares slope of ``log measure`` against ``log t`` (positive entries only)."""
    ts = np.asarray(ts, dtype=float)
    ms = np.asarray(measures, dtype=float)
    keep = ms > 0
    if keep.sum() < 2:
        return float("nan")
    return float(-np.polyfit(np.log(ts[keep]), np.log(ms[keep]), 1)[0])
