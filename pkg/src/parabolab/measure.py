"""Distribution functions, dyadic L^p sums, decay-law fits and W^{2,delta} estimates.

The two-sided dyadic bound
--------------------------
For ``g >= 0`` on ``Omega`` let ``A_k = {g > eta M^k}`` and
``s = sum_{k>=1} M^{pk} |A_k|``. Then

    s / C <= ||g||_p^p <= C (s + |Omega|),   C = max((eta M)^p, M^p / ((M^p - 1) eta^p)).

Upper half: split ``Omega`` into ``{g <= eta M}`` and the shells
``A_k \\ A_{k+1}``; on a shell ``g^p <= (eta M^{k+1})^p``, so
``||g||_p^p <= (eta M)^p |Omega| + sum_k (eta M)^p M^{pk} |A_k|``.

Lower half: pointwise, with ``K(x)`` the largest k such that ``x`` is in
``A_k``, ``sum_k M^{pk} 1_{A_k}(x) <= M^{pK} M^p/(M^p - 1)`` and
``M^{pK} < (g(x)/eta)^p``. Integrating gives ``s <= M^p/((M^p-1) eta^p) ||g||_p^p``.

Both halves are pointwise arguments, so they hold verbatim for the discrete
(node count times ``h^n``) measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .contact import contact_set
from .grid import CellSet, GridFunction, ball_measure, fd_derivatives, lp_norm

__all__ = [
    "DyadicParams",
    "DyadicResult",
    "DecayReport",
    "ScalingParams",
    "dyadic_constant",
    "distribution_measure",
    "dyadic_norm",
    "decay_profile",
    "hessian_frobenius",
    "w2delta_estimate",
    "w2delta_compare",
    "normalize_and_ratio",
    "InclusionStep",
    "c2_inclusion",
    "lipschitz_estimate",
]


@dataclass(frozen=True)
class DyadicParams:
    eta: float
    M: float
    p: float

    def __post_init__(self):
        if self.eta <= 0 or self.M <= 1 or self.p <= 0:
            raise ValueError(f"need eta > 0, M > 1, p > 0, got {self}")

    @classmethod
    def default(cls, ndim: int, p: float) -> "DyadicParams":
        return cls(math.sqrt(ndim), 2.0, p)


def dyadic_constant(params: DyadicParams) -> float:
    """The constant ``C(eta, M, p)`` derived in the module docstring."""
    eta, M, p = params.eta, params.M, params.p
    return max((eta * M) ** p, M**p / ((M**p - 1.0) * eta**p))


class DyadicResult(NamedTuple):
    s: float
    direct: float  # ||g||_p^p
    holds: bool
    C: float
    levels: int


def _nonneg_values(g: GridFunction) -> np.ndarray:
    vals = g.values[g.spec.mask]
    if np.any(vals < 0):
        raise ValueError("distribution functions need g >= 0")
    return vals


def distribution_measure(g: GridFunction, thresholds) -> list[float]:
    """``|{g > t}|`` for each threshold t."""
    vals = _nonneg_values(g)
    vol = g.spec.cell_volume
    return [int(np.count_nonzero(vals > t)) * vol for t in np.atleast_1d(thresholds)]


def dyadic_norm(g: GridFunction, params: DyadicParams, rel_slack: float = 1e-12) -> DyadicResult:
    """Dyadic sum ``s``, ``||g||_p^p`` and the verdict of the two-sided bound.

    The sum stops at the first empty level set.
    """
    vals = _nonneg_values(g)
    vol = g.spec.cell_volume
    eta, M, p = params.eta, params.M, params.p
    s = 0.0
    k = 1
    while True:
        count = int(np.count_nonzero(vals > eta * M**k))
        if count == 0:
            break
        s += M ** (p * k) * count * vol
        k += 1
    direct = float(vol * np.sum(vals**p))
    C = dyadic_constant(params)
    omega = ball_measure(g.spec)
    holds = bool(s / C <= direct * (1 + rel_slack) and direct <= C * (s + omega) * (1 + rel_slack))
    return DyadicResult(s, direct, holds, C, k - 1)


# -- decay of contact-set complements ---------------------------------------


@dataclass
class DecayReport:
    """Complement measures ``|B_1 \\ T_t|`` along a geometric ladder of openings.

    ``sigma`` and ``theta`` are empirical surrogates for the dimensional
    constants; they are fitted, never derived.
    """

    direction: str
    t: np.ndarray
    measure_lower: np.ndarray
    measure_upper: np.ndarray
    measure_both: np.ndarray
    M: float
    sigma: float
    theta: float
    fit_steps: list[int] = field(default_factory=list)
    fit_residual: float = float("nan")
    saturated: bool = False
    monotone: bool = True
    t_max_resolved: float = float("inf")
    label: str = "empirical surrogate"

    @property
    def measures(self) -> np.ndarray:
        return {"lower": self.measure_lower, "upper": self.measure_upper, "both": self.measure_both}[
            self.direction
        ]

    def rows(self):
        for k, t in enumerate(self.t):
            yield k, float(t), float(self.measure_lower[k]), float(self.measure_upper[k]), float(
                self.measure_both[k]
            )

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "M": self.M,
            "sigma": self.sigma,
            "theta": self.theta,
            "fit_steps": list(self.fit_steps),
            "fit_residual": self.fit_residual,
            "saturated": self.saturated,
            "monotone": self.monotone,
            "t_max_resolved": self.t_max_resolved,
            "label": self.label,
            "ladder": [
                {"k": k, "t": t, "measure_lower": lo, "measure_upper": up, "measure_both": bo}
                for k, t, lo, up, bo in self.rows()
            ],
        }


def lipschitz_estimate(u: GridFunction) -> float:
    grad, _, valid = fd_derivatives(u)
    if not np.any(valid):
        return 0.0
    return float(np.max(np.linalg.norm(grad[valid], axis=-1)))


def decay_profile(
    u: GridFunction,
    direction: str = "lower",
    ladder: tuple[float, float, int] = (1.0, 2.0, 8),
    resolution_limit: float = 0.3,
) -> DecayReport:
    """Contact sets at ``t_k = t0 M^k`` (k = 0..kmax, V = closed ball) and a power-law fit.

    ``sigma`` is minus the least-squares slope of log-measure against log-t.
    The fit skips step 0, steps with an empty complement, and steps that are
    not resolved by the grid: features of the complement have size about
    ``|Du|/t``, so steps with ``t*h > resolution_limit * max|Du|`` are left out.
    """
    t0, M, kmax = ladder
    if t0 < 1 or M <= 1 or kmax < 3:
        raise ValueError(f"need t0 >= 1, M > 1, kmax >= 3, got {ladder}")
    if direction not in ("lower", "upper", "both"):
        raise ValueError(f"unknown direction {direction!r}")
    ts = t0 * M ** np.arange(kmax + 1, dtype=float)
    lo, up, bo = [], [], []
    for t in ts:
        L = contact_set(u, t, direction="lower")
        U = contact_set(u, t, direction="upper")
        lo.append(L.complement_measure())
        up.append(U.complement_measure())
        bo.append(CellSet(u.spec, L.mask & U.mask).complement().measure())
    lo, up, bo = map(np.asarray, (lo, up, bo))
    meas = {"lower": lo, "upper": up, "both": bo}[direction]
    monotone = bool(np.all(np.diff(meas) <= 0))
    t_res = resolution_limit * lipschitz_estimate(u) / u.spec.h
    steps = [k for k in range(1, kmax + 1) if meas[k] > 0 and ts[k] <= t_res]
    report = DecayReport(direction, ts, lo, up, bo, M, float("nan"), float("nan"),
                         steps, monotone=monotone, t_max_resolved=t_res)
    if not np.any(meas[1:] > 0):
        report.saturated = True
        report.sigma = float("inf")
        report.theta = 0.0
        return report
    if len(steps) < 2:
        return report
    x = np.log(ts[steps])
    y = np.log(meas[steps])
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    report.sigma = float(-coef[0])
    report.theta = float(M ** (-report.sigma))
    report.fit_residual = float(np.sqrt(res[0] / len(steps))) if len(res) else 0.0
    return report


# -- W^{2,delta} --------------------------------------------------------------


def hessian_frobenius(u: GridFunction):
    """``|D^2_h u|_F`` on Hessian-valid nodes (NaN elsewhere) and the validity mask."""
    _, hess, valid = fd_derivatives(u)
    g = np.full(u.spec.shape, np.nan)
    g[valid] = np.sqrt(np.sum(hess[valid] ** 2, axis=(-2, -1)))
    return g, valid


def _direct(u: GridFunction, delta: float) -> float:
    g, valid = hessian_frobenius(u)
    gf = GridFunction(u.spec, np.where(valid, g, 0.0))
    return lp_norm(gf, delta, where=valid)


def _decay_bound(u: GridFunction, delta: float, M: float) -> float:
    n = u.spec.ndim
    g, valid = hessian_frobenius(u)
    gmax = float(np.max(g[valid])) if np.any(valid) else 0.0
    # the sum runs until the level sets {g > sqrt(n) M^k} are empty
    K = max(1, math.ceil(math.log(max(gmax / math.sqrt(n), 1.0), M)))
    total = (math.sqrt(n) * M) ** delta * ball_measure(u.spec)
    for k in range(1, K + 1):
        comp = contact_set(u, M**k, direction="both").complement_measure()
        total += (math.sqrt(n) * M ** (k + 1)) ** delta * comp
    return total ** (1.0 / delta)


def w2delta_estimate(u: GridFunction, delta: float, route: str = "direct", M: float = 2.0) -> float:
    """``||D^2 u||_{L^delta}`` by quadrature (``direct``) or the contact-set bound (``decay``).

    The decay route sums ``(sqrt(n) M^{k+1})^delta |B_1 \\ T_{M^k}|`` over k plus
    ``(sqrt(n) M)^delta |B_1|``; it bounds the direct value from above as long as
    the Hessian level sets sit inside the contact complements.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if route == "direct":
        return _direct(u, delta)
    if route == "decay":
        return _decay_bound(u, delta, M)
    raise ValueError(f"route must be 'direct' or 'decay', got {route!r}")


def w2delta_compare(u: GridFunction, delta: float, M: float = 2.0, slack: float = 1e-9):
    """``(direct, decay, direct <= decay * (1 + slack))``."""
    d = w2delta_estimate(u, delta, "direct", M)
    b = w2delta_estimate(u, delta, "decay", M)
    return d, b, bool(d <= b * (1 + slack))


@dataclass(frozen=True)
class ScalingParams:
    a: float
    eps_guard: float
    u_sup: float
    f_sup: float
    u_scaled_sup: float
    f_scaled_sup: float

    @property
    def hypotheses_hold(self) -> bool:
        return self.u_scaled_sup <= 1 / 16 and self.f_scaled_sup <= 1.0


def normalize_and_ratio(u: GridFunction, f: GridFunction, gamma: float, eps_guard: float,
                        delta: float):
    """Rescale to ``||a u|| <= 1/16``, ``||a^{1-gamma} f|| <= 1`` and report the theorem ratio.

    ``a = 1/(16||u|| + ||f||^{1/(1-gamma)} + eps_guard)``; the ratio is
    ``||D^2 u||_{L^delta} / (||u|| + ||f||^{1/(1-gamma)} + eps_guard)``.
    """
    if eps_guard <= 0:
        raise ValueError("eps_guard must be positive")
    if not (0 <= gamma < 1):
        raise ValueError("gamma must lie in [0, 1)")
    us, fs = u.sup_norm(), f.sup_norm()
    fpow = fs ** (1.0 / (1.0 - gamma))
    a = 1.0 / (16.0 * us + fpow + eps_guard)
    u_t = u.scaled(a).sup_norm()
    f_t = f.scaled(a ** (1.0 - gamma)).sup_norm()
    params = ScalingParams(a, eps_guard, us, fs, u_t, f_t)
    if not params.hypotheses_hold:
        raise AssertionError(f"normalisation failed: {params}")
    ratio = w2delta_estimate(u, delta, "direct") / (us + fpow + eps_guard)
    return params, ratio


class InclusionStep(NamedTuple):
    t: float
    level_count: int  # Hessian-valid nodes with |D^2 u| > sqrt(n) t
    violations: int  # of those, interior nodes inside T_t


def c2_inclusion(u: GridFunction, ts) -> list[InclusionStep]:
    """Check ``{|D^2 u|_F > sqrt(n) t} ⊆ (B_1 \\ T_t) ∪ ring`` at each opening t.

    At a node touched from both sides by paraboloids of opening t the Hessian
    is squeezed between ``-tI`` and ``tI``, so its Frobenius norm is at most
    ``sqrt(n) t``; a violation is a Hessian-valid node off the boundary ring
    where this fails.
    """
    g, valid = hessian_frobenius(u)
    n = u.spec.ndim
    out = []
    for t in ts:
        big = valid & (np.nan_to_num(g) > math.sqrt(n) * t)
        both = contact_set(u, t, direction="both").mask
        bad = big & both & ~u.spec.boundary_ring
        out.append(InclusionStep(float(t), int(big.sum()), int(bad.sum())))
    return out
