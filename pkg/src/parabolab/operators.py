"""Pucci extremal operators, the singular inequality residuals and the p-Laplacian.

All functions broadcast over leading axes: a Hessian argument has shape
``(..., n, n)`` and a gradient ``(..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Ellipticity",
    "SingularPointError",
    "symmetrize",
    "sym_eigvals",
    "pucci_eval",
    "singular_residual",
    "p_laplace_eval",
]


@dataclass(frozen=True)
class Ellipticity:
    """Ellipticity constants ``0 < lam <= Lam``."""

    lam: float = 1.0
    Lam: float = 1.0

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam < np.inf):
            raise ValueError(f"need 0 < lambda <= Lambda < inf, got {self.lam}, {self.Lam}")


class SingularPointError(ValueError):
    """Raised when the p-Laplacian is evaluated where the gradient vanishes."""


def check_gamma(gamma: float) -> float:
    if not (0 <= gamma < 1):
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    return float(gamma)


def symmetrize(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def sym_eigvals(X) -> np.ndarray:
    """Eigenvalues of symmetric matrices, ascending, shape ``(..., n)``.

    Closed form for ``n <= 2``, LAPACK for ``n = 3``.
    """
    X = symmetrize(X)
    n = X.shape[-1]
    if n == 1:
        return X[..., 0, :].copy()
    if n == 2:
        a, b, d = X[..., 0, 0], X[..., 0, 1], X[..., 1, 1]
        mean = 0.5 * (a + d)
        rad = np.hypot(0.5 * (a - d), b)
        return np.stack([mean - rad, mean + rad], axis=-1)
    return np.linalg.eigvalsh(X)


def pucci_eval(X, ell: Ellipticity, sign: str) -> np.ndarray | float:
    """Maximal (``sign='plus'``) or minimal (``'minus'``) Pucci operator.

    ``P+ = lam * sum(neg eigs) + Lam * sum(pos eigs)`` and
    ``P- = lam * sum(pos eigs) + Lam * sum(neg eigs)``.
    """
    e = sym_eigvals(X)
    pos = np.sum(np.where(e > 0, e, 0.0), axis=-1)
    neg = np.sum(np.where(e < 0, e, 0.0), axis=-1)
    if sign == "plus":
        out = ell.lam * neg + ell.Lam * pos
    elif sign == "minus":
        out = ell.lam * pos + ell.Lam * neg
    else:
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    return out[()] if np.ndim(out) == 0 else out


def _pow_gamma(s: np.ndarray, gamma: float) -> np.ndarray:
    # 0**0 == 1 and 0**gamma == 0 for gamma > 0, as numpy already does
    return np.power(s, gamma)


def singular_residual(grad, hess, f_val, gamma: float, ell: Ellipticity):
    """Residuals of the two-sided singular inequality in multiplied form.

    Returns
    -------
    lower : ``P-(hess) - |grad| - |grad|^gamma * f``; a subsolution needs ``<= 0``.
    upper : ``P+(hess) + |grad| - |grad|^gamma * f``; a supersolution needs ``>= 0``.
    """
    check_gamma(gamma)
    grad = np.asarray(grad, dtype=float)
    s = np.linalg.norm(grad, axis=-1)
    rhs = _pow_gamma(s, gamma) * np.asarray(f_val, dtype=float)
    lower = pucci_eval(hess, ell, "minus") - s - rhs
    upper = pucci_eval(hess, ell, "plus") + s - rhs
    return lower, upper


def p_laplace_eval(grad, hess, p: float, singular: str = "raise"):
    """Non-divergence form of ``div(|Du|^{p-2} Du)``.

    ``|g|^{p-2} (tr H - (2-p) <H g^, g^>)`` with ``g^ = g/|g|``.

    Parameters
    ----------
    singular : {'raise', 'nan'}
        What to do where ``grad == 0``: raise :class:`SingularPointError`
        or return NaN at those points.
    """
    if not (1 < p <= 2):
        raise ValueError(f"p must lie in (1, 2], got {p}")
    grad = np.asarray(grad, dtype=float)
    hess = symmetrize(hess)
    s = np.linalg.norm(grad, axis=-1)
    zero = s == 0
    if np.any(zero) and singular == "raise":
        raise SingularPointError("gradient vanishes: p-Laplacian is singular here")
    safe = np.where(zero, 1.0, s)
    ghat = grad / safe[..., None]
    trace = np.trace(hess, axis1=-2, axis2=-1)
    radial = np.einsum("...i,...ij,...j->...", ghat, hess, ghat)
    out = safe ** (p - 2) * (trace - (2 - p) * radial)
    out = np.where(zero, np.nan, out)
    return out[()] if np.ndim(out) == 0 else out
