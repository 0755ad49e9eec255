"""Forecast error variance decompositions with orthogonal (FEVD) and
correlated (GFEVD) shocks.

Contributions are the un-normalized numerators: for FEVD
``phi2[i, j] = sum_h (Psi_h P)[i, j]**2``; for GFEVD
``psi2[i, j] = sum_h (Psi_h Sigma)[i, j]**2 / Sigma[j, j]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

from spillnet.errors import DecompositionError
from spillnet.shocks import ShockMap, cholesky_factor
from spillnet.vma import VmaSequence

Kind = Literal["fevd", "gfevd"]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ContributionMatrix:
    values: np.ndarray
    kind: Kind
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def m_dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class FevdTable:
    """Variance shares; row i is the variable being forecast."""

    shares: np.ndarray
    kind: Kind
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "shares", _frozen(self.shares))

    @property
    def m_dim(self) -> int:
        return self.shares.shape[0]

    def to_json(self, labels=None, mask=None) -> str:
        doc = {"kind": self.kind, "horizon": self.horizon, "shares": self.shares.tolist()}
        if labels is not None:
            doc["labels"] = list(labels)
        if mask is not None:
            doc["mask"] = np.asarray(mask, dtype=int).tolist()
        return json.dumps(doc, sort_keys=True)


def _check_dims(vma: VmaSequence, m: int) -> None:
    if vma.m_dim != m:
        raise DecompositionError(f"VMA has dimension {vma.m_dim}, identification has {m}")


def forecast_error_variance(vma: VmaSequence, sigma) -> np.ndarray:
    """Diagonal of sum_h Psi_h Sigma Psi_h' (the H-step forecast error variances)."""
    sigma = np.asarray(sigma, dtype=float)
    _check_dims(vma, sigma.shape[0])
    return np.einsum("hij,jk,hik->i", vma.psi, sigma, vma.psi)


def fevd_contributions(vma: VmaSequence, shock_map: ShockMap) -> ContributionMatrix:
    _check_dims(vma, shock_map.m_dim)
    impulse = vma.psi @ shock_map.p_matrix
    return ContributionMatrix(np.sum(impulse**2, axis=0), "fevd", vma.horizon)


def fevd_table(
    contrib: ContributionMatrix,
    *,
    squared_denominator: bool = False,
    vma: VmaSequence | None = None,
    sigma=None,
) -> FevdTable:
    """theta[i, j] = phi2[i, j] / sum_l phi2[i, l].

    ``squared_denominator=True`` instead divides by
    ``sum_h (iota_i' Psi_h Sigma Psi_h' iota_i)**2``, the literal reading of
    the printed H-step display; kept only for audits, rows then do not sum
    to one. Needs ``vma`` and ``sigma``.
    """
    if contrib.kind != "fevd":
        raise DecompositionError("fevd_table needs FEVD contributions")
    if squared_denominator:
        if vma is None or sigma is None:
            raise DecompositionError("squared_denominator needs vma and sigma")
        per_h = np.einsum("hij,jk,hik->hi", vma.psi, np.asarray(sigma, float), vma.psi)
        denom = np.sum(per_h**2, axis=0)
    else:
        denom = contrib.values.sum(axis=1)
    if np.any(denom <= 0):
        i = int(np.argmin(denom))
        raise DecompositionError(f"row {i + 1} has zero forecast error variance")
    return FevdTable(contrib.values / denom[:, None], "fevd", contrib.horizon)


def gfevd_contributions(vma: VmaSequence, sigma) -> ContributionMatrix:
    sigma = np.asarray(sigma, dtype=float)
    _check_dims(vma, sigma.shape[0])
    diag = np.diag(sigma)
    if np.any(diag <= 0):
        j = int(np.argmin(diag))
        raise DecompositionError(f"sigma[{j + 1},{j + 1}] must be positive")
    response = vma.psi @ sigma
    return ContributionMatrix(np.sum(response**2, axis=0) / diag[None, :], "gfevd", vma.horizon)


def gfevd_table(contrib: ContributionMatrix, vma: VmaSequence, sigma) -> FevdTable:
    """vartheta[i, j] = psi2[i, j] / sum_h (Psi_h Sigma Psi_h')[i, i].

    Rows generally do not sum to one.
    """
    if contrib.kind != "gfevd":
        raise DecompositionError("gfevd_table needs GFEVD contributions")
    denom = forecast_error_variance(vma, sigma)
    if np.any(denom <= 0):
        i = int(np.argmin(denom))
        raise DecompositionError(f"row {i + 1} has zero forecast error variance")
    return FevdTable(contrib.values / denom[:, None], "gfevd", contrib.horizon)


def decompose(vma: VmaSequence, sigma, kind: Kind, shock_map: ShockMap | None = None) -> ContributionMatrix:
    """Contributions of either kind; FEVD uses ``shock_map`` (Cholesky by default)."""
    if kind == "fevd":
        if shock_map is None:
            shock_map = cholesky_factor(sigma)
        return fevd_contributions(vma, shock_map)
    if kind == "gfevd":
        return gfevd_contributions(vma, sigma)
    raise DecompositionError(f"unknown decomposition kind {kind!r}")


def share_table(contrib: ContributionMatrix, vma: VmaSequence, sigma) -> FevdTable:
    if contrib.kind == "fevd":
        return fevd_table(contrib)
    return gfevd_table(contrib, vma, sigma)
