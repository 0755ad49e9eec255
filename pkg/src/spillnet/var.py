"""Equation-wise OLS estimation of a VAR(p) with intercept."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from spillnet.errors import EstimationError
from spillnet.panel import Panel, StandardizedPanel

RANK_TOL = 1e-10


class NonStationaryWarning(UserWarning):
    """Estimated companion matrix has spectral radius >= 1."""


@dataclass(frozen=True, eq=False)
class VarFit:
    """Estimated VAR(p): y_t = c + sum_l phi[l-1] y_{t-l} + e_t.

    Attributes:
        intercept: (m,) intercept vector.
        phi: (p, m, m) lag coefficient matrices, ``phi[0]`` is the first lag.
        residuals: (T - p, m) residuals for t = p+1..T.
        sigma: (m, m) residual covariance with divisor T - p.
        t_len: Number of observations the model was fitted on.
        mu: Unconditional mean, or None when I - sum(phi) is singular.
    """

    intercept: np.ndarray
    phi: np.ndarray
    residuals: np.ndarray
    sigma: np.ndarray
    t_len: int
    mu: np.ndarray | None

    @property
    def p_lag(self) -> int:
        return self.phi.shape[0]

    @property
    def m_dim(self) -> int:
        return self.phi.shape[1]

    def to_dict(self) -> dict:
        return {
            "p": self.p_lag,
            "c": self.intercept.tolist(),
            "phi": self.phi.tolist(),
            "sigma": self.sigma.tolist(),
            "mu": None if self.mu is None else self.mu.tolist(),
            "t_len": self.t_len,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_array(data) -> np.ndarray:
    if isinstance(data, (Panel, StandardizedPanel)):
        return data.observations
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def lag_design(y: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (X, Y) with X = [1, y_{t-1}, ..., y_{t-p}] for t = p..T-1."""
    t_len = y.shape[0]
    cols = [np.ones((t_len - p, 1))]
    cols += [y[p - l : t_len - l] for l in range(1, p + 1)]
    return np.hstack(cols), y[p:]


def ols(x: np.ndarray, y: np.ndarray, solver: str = "svd") -> np.ndarray:
    """Least squares; rejects rank-deficient designs.

    ``solver="svd"`` uses an SVD-based solver. ``solver="gram"`` solves the
    normal equations through a Cholesky factor, which is several times faster
    for the many small refits of the rolling evaluation; it falls back to the
    SVD path when the Gram matrix is poorly conditioned.
    """
    if solver == "gram":
        coef = _gram_solve(x, y)
        if coef is not None:
            return coef
    elif solver != "svd":
        raise EstimationError(f"unknown solver {solver!r}")
    coef, _, _, sv = np.linalg.lstsq(x, y, rcond=None)
    if sv.size == 0 or sv[-1] < RANK_TOL * sv[0] or sv.size < x.shape[1]:
        raise EstimationError("rank-deficient design: regressors are (nearly) collinear")
    return coef


def _gram_solve(x: np.ndarray, y: np.ndarray) -> np.ndarray | None:
    gram = x.T @ x
    try:
        chol = cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    d = np.abs(np.diag(chol[0]))
    # diag of the factor tracks singular values of x loosely; stay well clear of RANK_TOL
    if d.min() < 1e-4 * d.max():
        return None
    return cho_solve(chol, x.T @ y, check_finite=False)


def unconditional_mean(intercept: np.ndarray, phi: np.ndarray) -> np.ndarray | None:
    m = intercept.shape[0]
    lhs = np.eye(m) - phi.sum(axis=0)
    if np.linalg.cond(lhs) > 1e12:
        return None
    return np.linalg.solve(lhs, intercept)


def fit_var(panel, p: int, warn_nonstationary: bool = True, solver: str = "svd") -> VarFit:
    """Fit a VAR(p) by equation-wise OLS.

    Args:
        panel: A :class:`StandardizedPanel`, :class:`Panel` or (T, m) array.
        p: Lag order, >= 1.
        warn_nonstationary: Emit :class:`NonStationaryWarning` when the
            companion radius is >= 1. Rolling windows switch this off.
        solver: "svd" (default) or "gram"; see :func:`ols`.

    Raises:
        EstimationError: T <= m*p + 1, or a rank-deficient design.
    """
    y = _as_array(panel)
    if p < 1:
        raise EstimationError(f"lag order must be >= 1, got {p}")
    t_len, m = y.shape
    if t_len <= m * p + 1:
        raise EstimationError(f"too few observations: T={t_len} but a VAR({p}) in {m} series needs T > {m * p + 1}")
    x, yy = lag_design(y, p)
    coef = ols(x, yy, solver)
    resid = yy - x @ coef
    intercept = coef[0].copy()
    phi = coef[1:].reshape(p, m, m).transpose(0, 2, 1).copy()
    sigma = resid.T @ resid / (t_len - p)
    sigma = 0.5 * (sigma + sigma.T)
    fit = VarFit(intercept, phi, resid, sigma, t_len, unconditional_mean(intercept, phi))
    if not warn_nonstationary:
        return fit
    radius = companion_spectral_radius(fit)
    if radius >= 1:
        warnings.warn(f"estimated VAR is not stationary (companion radius {radius:.4f})", NonStationaryWarning, stacklevel=2)
    return fit


def companion_matrix(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 2:
        phi = phi[None]
    p, m, _ = phi.shape
    comp = np.zeros((m * p, m * p))
    comp[:m, :] = np.hstack(list(phi))
    comp[m:, :-m] = np.eye(m * (p - 1))
    return comp


def companion_spectral_radius(fit_or_phi) -> float:
    """Largest eigenvalue modulus of the mp x mp companion matrix."""
    phi = fit_or_phi.phi if isinstance(fit_or_phi, VarFit) else fit_or_phi
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(phi)))))


def one_step_mean(fit: VarFit, recent) -> np.ndarray:
    """Conditional mean c + sum_l phi_l y_{S+1-l}.

    ``recent`` is p x m, most recent observation first.
    """
    recent = np.asarray(recent, dtype=float)
    if recent.ndim == 1 and fit.p_lag == 1:
        recent = recent[None]
    if recent.shape != (fit.p_lag, fit.m_dim):
        raise EstimationError(f"recent history must have shape {(fit.p_lag, fit.m_dim)}, got {recent.shape}")
    return fit.intercept + np.einsum("lij,lj->i", fit.phi, recent)
