"""Discrete solutions beyond the analytic catalog.

``solve_plaplace`` minimises a regularised p-Dirichlet energy with a damped
Newton method; ``solve_pucci`` solves a monotone wide-stencil Pucci equation
by policy (Howard) iteration. Dirichlet data live on
:attr:`GridSpec.boundary_ring`, the unknowns on :attr:`GridSpec.interior`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .grid import GridFunction, GridSpec, fd_derivatives, sample_function
from .operators import Ellipticity, singular_residual

__all__ = [
    "SolverConfig",
    "SolveResult",
    "ConvergenceWarning",
    "solve_plaplace",
    "solve_pucci",
    "pucci_operator",
    "ResidualReport",
    "residual_report",
]


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 200
    residual_tolerance: float = 1e-8
    eps_schedule: tuple[float, ...] = (1e-2, 1e-4, 1e-6, 1e-8)
    step_policy: str = "newton-armijo"
    seed: int = 0

    def __post_init__(self):
        if self.residual_tolerance <= 0:
            raise ValueError("residual_tolerance must be positive")
        sched = np.asarray(self.eps_schedule, dtype=float)
        if sched.size == 0 or np.any(np.diff(sched) >= 0):
            raise ValueError("eps_schedule must be strictly decreasing")
        if sched[-1] < 1e-8:
            raise ValueError("eps_schedule must end at or above 1e-8")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class SolveResult:
    u: GridFunction
    converged: bool
    residual: float
    iterations: int
    log: list[dict] = field(default_factory=list)


def _as_field(f, spec: GridSpec) -> np.ndarray:
    if isinstance(f, GridFunction):
        if f.spec != spec:
            raise ValueError("f lives on a different grid")
        return f.values
    if callable(f):
        return sample_function(f, spec).values
    return np.where(spec.mask, float(f), np.nan)


def _boundary_values(boundary: Callable, spec: GridSpec) -> np.ndarray:
    ring = spec.boundary_ring
    vals = np.asarray(boundary(spec.coords[ring]), dtype=float)
    out = np.zeros(spec.shape)
    out[ring] = np.broadcast_to(vals, (int(ring.sum()),))
    return out


# -- p-Laplace ---------------------------------------------------------------


def _forward_gradient(spec: GridSpec):
    """Sparse forward-difference operators on cells whose forward neighbours are all in the ball.

    Returns a list of ``(ncells, N)`` matrices, one per axis.
    """
    n, m, h = spec.ndim, spec.cells_per_axis, spec.h
    N = m**n
    flat = np.arange(N).reshape(spec.shape)
    ok = spec.mask.copy()
    for k in range(n):
        nb = np.zeros(spec.shape, dtype=bool)
        sl_dst = [slice(None)] * n
        sl_src = [slice(None)] * n
        sl_dst[k] = slice(0, m - 1)
        sl_src[k] = slice(1, m)
        nb[tuple(sl_dst)] = spec.mask[tuple(sl_src)]
        ok &= nb
    cells = flat[ok]
    ops = []
    strides = [m ** (n - 1 - k) for k in range(n)]
    rows = np.arange(cells.size)
    for k in range(n):
        data = np.concatenate([np.full(cells.size, -1.0 / h), np.full(cells.size, 1.0 / h)])
        r = np.concatenate([rows, rows])
        c = np.concatenate([cells, cells + strides[k]])
        ops.append(sp.csr_matrix((data, (r, c)), shape=(cells.size, N)))
    return ops


def solve_plaplace(f, boundary: Callable, p: float, spec: GridSpec,
                   cfg: SolverConfig | None = None) -> SolveResult:
    """Weak solution of ``Delta_p u = f`` with Dirichlet data ``boundary``.

    Minimises ``h^n * sum_cells (|grad_h u|^2 + eps^2)^{p/2}/p + h^n * sum f u``
    over the interior nodes, for each ``eps`` of the annealing schedule in
    turn. Each stage runs Newton steps with Armijo backtracking, so the energy
    never increases within a stage beyond rounding. Stops once the final stage reaches
    ``max |dE/du| / h^n <= residual_tolerance``.
    """
    if not (1 < p <= 2):
        raise ValueError(f"p must lie in (1, 2], got {p}")
    cfg = cfg or SolverConfig()
    fv = _as_field(f, spec)
    if not np.all(np.isfinite(fv[spec.mask])):
        raise ValueError("f must be finite on the ball")
    vol = spec.cell_volume
    unknown = spec.interior.ravel()
    ops_full = _forward_gradient(spec)
    G = [op[:, unknown] for op in ops_full]
    u_full = _boundary_values(boundary, spec).ravel()
    u_full[unknown] = 0.0
    g0 = [op @ u_full for op in ops_full]  # contribution of the Dirichlet data
    f_unk = fv.ravel()[unknown]
    Gs = sp.vstack(G, format="csr")
    # warm start from the p = 2 problem, a single linear solve
    L = (Gs.T @ Gs).tocsc()
    x = spsolve(L, -(Gs.T @ np.concatenate(g0) + f_unk)) if L.shape[0] else np.zeros(0)

    def parts(x, eps):
        g = [Gk @ x + g0k for Gk, g0k in zip(G, g0)]
        s = sum(gk**2 for gk in g) + eps**2
        return g, s

    def energy(x, eps):
        _, s = parts(x, eps)
        return vol * (np.sum(s ** (p / 2)) / p + f_unk @ x)

    def gradient(x, eps):
        g, s = parts(x, eps)
        w = s ** ((p - 2) / 2)
        return vol * (sum(Gk.T @ (w * gk) for Gk, gk in zip(G, g)) + f_unk), g, s

    log: list[dict] = []
    it = 0
    res = np.inf
    converged = False
    for stage, eps in enumerate(cfg.eps_schedule):
        final = stage == len(cfg.eps_schedule) - 1
        stage_tol = cfg.residual_tolerance if final else max(cfg.residual_tolerance, 1e-6)
        E = energy(x, eps)
        while it < cfg.max_iterations:
            grad, g, s = gradient(x, eps)
            res = float(np.max(np.abs(grad))) / vol if grad.size else 0.0
            log.append({"iteration": it, "stage": stage, "eps_reg": eps, "energy": float(E),
                        "residual": res})
            if res <= stage_tol:
                break
            w = s ** ((p - 2) / 2)
            c = (p - 2) * s ** ((p - 4) / 2)
            blocks = [[sp.diags(w + c * g[a] * g[a] if a == b else c * g[a] * g[b])
                       for b in range(spec.ndim)] for a in range(spec.ndim)]
            B = sp.bmat(blocks, format="csr")
            H = (vol * (Gs.T @ B @ Gs)).tocsc()
            d = spsolve(H, -grad)
            slope = float(grad @ d)
            alpha = 1.0
            accepted = False
            while alpha > 1e-12:
                x_new = x + alpha * d
                E_new = energy(x_new, eps)
                if E_new <= E + 1e-4 * alpha * slope:
                    accepted = True
                    break
                if alpha == 1.0 and E_new <= E + 1e-14 * abs(E):
                    # energy flat to rounding: take the full step if the residual drops
                    r_new = float(np.max(np.abs(gradient(x_new, eps)[0]))) / vol
                    if r_new < res:
                        accepted = True
                        break
                alpha *= 0.5
            it += 1
            if not accepted:
                # no representable decrease: the iterate is as good as rounding allows
                break
            x, E = x_new, E_new
        if final:
            converged = res <= cfg.residual_tolerance
    u_full[unknown] = x
    u = GridFunction(spec, np.where(spec.mask, u_full.reshape(spec.shape), np.nan))
    if not converged:
        warnings.warn(f"p-Laplace solve stopped at residual {res:.3g} after {it} iterations",
                      ConvergenceWarning, stacklevel=2)
    return SolveResult(u, converged, res, it, log)


# -- Pucci -------------------------------------------------------------------

# lattice directions, grouped into the two orthogonal frames
_FRAMES = (((1, 0), (0, 1)), ((1, 1), (1, -1)))


def _neighbour(flat: np.ndarray, e, sign: int) -> np.ndarray:
    return np.roll(flat, shift=(-sign * e[0], -sign * e[1]), axis=(0, 1))


def _directional_second(U: np.ndarray, h: float):
    """``{e: (U(x+he) + U(x-he) - 2U(x)) / (|e| h)^2}`` for the four lattice directions."""
    out = {}
    for frame in _FRAMES:
        for e in frame:
            up = np.roll(U, shift=(-e[0], -e[1]), axis=(0, 1))
            dn = np.roll(U, shift=(e[0], e[1]), axis=(0, 1))
            out[e] = (up + dn - 2 * U) / ((e[0] ** 2 + e[1] ** 2) * h**2)
    return out


def pucci_operator(U: np.ndarray, spec: GridSpec, ell: Ellipticity, sign: str):
    """Wide-stencil Pucci operator at every grid node (meaningful on the interior).

    ``P-`` is the minimum over the two frames of ``sum_e min(lam D_e, Lam D_e)``;
    ``P+`` the maximum of ``sum_e max(lam D_e, Lam D_e)``. Also returns the
    optimal policy: frame index and the coefficient per direction.
    """
    D = _directional_second(np.nan_to_num(U), spec.h)
    pick = np.minimum if sign == "minus" else np.maximum
    frame_vals, frame_coefs = [], []
    for frame in _FRAMES:
        total = 0.0
        coefs = []
        for e in frame:
            lo, hi = ell.lam * D[e], ell.Lam * D[e]
            val = pick(lo, hi)
            coefs.append(np.where(val == lo, ell.lam, ell.Lam))
            total = total + val
        frame_vals.append(total)
        frame_coefs.append(coefs)
    if sign == "minus":
        which = (frame_vals[1] < frame_vals[0]).astype(int)
    else:
        which = (frame_vals[1] > frame_vals[0]).astype(int)
    value = np.where(which == 1, frame_vals[1], frame_vals[0])
    return value, which, frame_coefs


def _policy_matrix(spec: GridSpec, which, frame_coefs, unknown_idx, flat):
    """Sparse matrix of the linear operator selected by the policy, all nodes as columns."""
    h = spec.h
    rows, cols, vals = [], [], []
    diag = np.zeros(spec.shape)
    for fi, frame in enumerate(_FRAMES):
        active = which == fi
        for e, coef in zip(frame, frame_coefs[fi]):
            a = np.where(active, coef, 0.0) / ((e[0] ** 2 + e[1] ** 2) * h**2)
            for sgn in (1, -1):
                nb = _neighbour(flat, e, sgn)
                rows.append(flat[unknown_idx])
                cols.append(nb[unknown_idx])
                vals.append(a[unknown_idx])
            diag -= 2 * a
    rows.append(flat[unknown_idx])
    cols.append(flat[unknown_idx])
    vals.append(diag[unknown_idx])
    N = flat.size
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(N, N))


def solve_pucci(f, boundary: Callable, sign: str, ell: Ellipticity, spec: GridSpec,
                cfg: SolverConfig | None = None, relaxation: float = 1.0) -> SolveResult:
    """Solve ``P^sign(D^2 u) = f`` in 2-D with Dirichlet data on the boundary ring.

    Policy iteration: freeze the optimal frame and coefficients at the current
    iterate, solve the resulting linear M-matrix system, repeat until the sup
    norm of the update is below ``residual_tolerance`` or the policy is stable.
    """
    if spec.ndim != 2:
        raise ValueError("solve_pucci is 2-D only")
    if sign not in ("plus", "minus"):
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    if not (0 < relaxation <= 1):
        raise ValueError("relaxation must lie in (0, 1]")
    cfg = cfg or SolverConfig()
    fv = _as_field(f, spec)
    unknown = spec.interior
    flat = np.arange(spec.cells_per_axis**2).reshape(spec.shape)
    U = _boundary_values(boundary, spec)
    U[~spec.mask] = 0.0
    U_known = U.ravel().copy()
    U_known[unknown.ravel()] = 0.0
    uidx = flat[unknown]
    log: list[dict] = []
    converged = False
    it = 0
    update = np.inf
    prev_policy = None
    while it < cfg.max_iterations:
        _, which, coefs = pucci_operator(U, spec, ell, sign)
        policy = (which[unknown], *(c[unknown] for fc in coefs for c in fc))
        A = _policy_matrix(spec, which, coefs, unknown, flat)
        A_uu = A[uidx][:, uidx]
        rhs = fv[unknown] - A[uidx] @ U_known
        x = spsolve(A_uu.tocsc(), rhs)
        new = U.copy()
        new[unknown] = (1 - relaxation) * U[unknown] + relaxation * x
        update = float(np.max(np.abs(new - U)[unknown]))
        U = new
        it += 1
        log.append({"iteration": it, "sup_update": update})
        stable = prev_policy is not None and all(
            np.array_equal(a, b) for a, b in zip(policy, prev_policy))
        prev_policy = policy
        if update <= cfg.residual_tolerance or (stable and relaxation == 1.0):
            converged = True
            break
    u = GridFunction(spec, np.where(spec.mask, U, np.nan))
    if not converged:
        warnings.warn(f"Pucci solve stopped with sup update {update:.3g}", ConvergenceWarning,
                      stacklevel=2)
    return SolveResult(u, converged, update, it, log)


# -- residual report -----------------------------------------------------------


@dataclass
class ResidualReport:
    violations: int
    checked: int
    worst_margin: float
    tau: float
    locations: np.ndarray

    @property
    def ok(self) -> bool:
        return self.violations == 0


def residual_report(u: GridFunction, f, gamma: float, ell: Ellipticity,
                    C: float = 10.0) -> ResidualReport:
    """Check both singular inequalities on finite differences of ``u``.

    Only Hessian-valid nodes with ``|grad_h u| > h`` are checked. A node
    violates when ``lower > tau`` or ``upper < -tau`` with ``tau = C h``. The
    margin reported is ``max(lower, -upper)``.
    """
    spec = u.spec
    fv = _as_field(f, spec)
    grad, hess, valid = fd_derivatives(u)
    gnorm = np.linalg.norm(np.where(valid[..., None], grad, 0.0), axis=-1)
    check = valid & (gnorm > spec.h)
    tau = C * spec.h
    if not np.any(check):
        return ResidualReport(0, 0, -np.inf, tau, np.empty((0, spec.ndim)))
    lo, hi = singular_residual(grad[check], hess[check], fv[check], gamma, ell)
    margin = np.maximum(lo, -hi)
    bad = margin > tau
    locs = spec.coords[check][bad]
    return ResidualReport(int(bad.sum()), int(check.sum()), float(margin.max()), tau, locs)
