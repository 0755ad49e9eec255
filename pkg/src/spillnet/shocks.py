"""Structural shock identification: Cholesky factor or a user-supplied map."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import solve_triangular

from spillnet.errors import IdentificationError

PIVOT_TOL = 1e-12
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ShockMap:
    """Impact matrix P with Sigma = P P'; residual e = P xi."""

    p_matrix: np.ndarray
    kind: Literal["cholesky", "user_supplied"]

    @property
    def m_dim(self) -> int:
        return self.p_matrix.shape[0]

    @property
    def is_lower(self) -> bool:
        return bool(np.all(np.triu(self.p_matrix, 1) == 0))


def _check_square(a: np.ndarray, name: str) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise IdentificationError(f"{name} must be a square matrix, got shape {a.shape}")


def cholesky_factor(sigma) -> ShockMap:
    """Lower-triangular P with P P' = sigma, built column by column.

    P_jj = sqrt(s_jj - sum_{k<j} P_jk^2) and
    P_ij = (s_ij - sum_{k<j} P_ik P_jk) / P_jj for i > j. Entries whose
    inputs are exact zeros stay exact zeros, so block-diagonal inputs give
    block-diagonal factors.
    """
    sigma = np.asarray(sigma, dtype=float)
    _check_square(sigma, "sigma")
    if not np.allclose(sigma, sigma.T, rtol=0, atol=SYMMETRY_TOL):
        raise IdentificationError("sigma is not symmetric")
    m = sigma.shape[0]
    scale = float(np.max(np.diag(sigma))) if m else 0.0
    tol = PIVOT_TOL * scale if scale > 0 else PIVOT_TOL
    p = np.zeros((m, m))
    for j in range(m):
        pivot = sigma[j, j] - np.dot(p[j, :j], p[j, :j])
        if not pivot > tol:
            raise IdentificationError(f"sigma is not positive definite at pivot {j + 1}")
        p[j, j] = math.sqrt(pivot)
        p[j + 1 :, j] = (sigma[j + 1 :, j] - p[j + 1 :, :j] @ p[j, :j]) / p[j, j]
    p.setflags(write=False)
    return ShockMap(p, "cholesky")


def validate_user_map(p_matrix, sigma, tol: float = 1e-6) -> ShockMap:
    """Accept any invertible P that reproduces sigma to within ``tol``."""
    p_matrix = np.asarray(p_matrix, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    _check_square(p_matrix, "P")
    _check_square(sigma, "sigma")
    if p_matrix.shape != sigma.shape:
        raise IdentificationError(f"P has shape {p_matrix.shape}, sigma has shape {sigma.shape}")
    sv = np.linalg.svd(p_matrix, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise IdentificationError("user-supplied P is singular")
    gap = np.abs(p_matrix @ p_matrix.T - sigma)
    worst = np.unravel_index(np.argmax(gap), gap.shape)
    if gap[worst] > tol:
        i, j = worst
        raise IdentificationError(
            f"P P' does not reproduce sigma: worst entry ({i + 1}, {j + 1}) off by {gap[worst]:.3g} > tol {tol:g}"
        )
    p_matrix = p_matrix.copy()
    p_matrix.setflags(write=False)
    return ShockMap(p_matrix, "user_supplied")


def recover_shocks(shock_map: ShockMap, residual) -> np.ndarray:
    """xi = P^{-1} e. Accepts an m-vector or an (n, m) stack of residuals."""
    e = np.asarray(residual, dtype=float)
    pm = shock_map.p_matrix
    if e.shape[-1] != pm.shape[0]:
        raise IdentificationError(f"residual has {e.shape[-1]} components, map has {pm.shape[0]}")
    rhs = e.T if e.ndim == 2 else e
    if shock_map.is_lower:
        if np.any(np.diag(pm) == 0):
            raise IdentificationError("P is singular")
        out = solve_triangular(pm, rhs, lower=True)
    else:
        try:
            out = np.linalg.solve(pm, rhs)
        except np.linalg.LinAlgError:
            raise IdentificationError("P is singular") from None
    return out.T if e.ndim == 2 else out
