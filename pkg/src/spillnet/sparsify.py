"""Information-criterion selection of the active spillover set.

For a contribution matrix with m series, the off-diagonal entries are ranked
in descending order and

    IC(k) = 2T log(m - sum_{l<=k} v_(l)) + k * lam,    k = 1..m^2-m

is minimized. The ``k_hat`` largest entries stay, the rest are zeroed;
diagonal entries are never candidates and are always kept.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from spillnet.decomposition import ContributionMatrix, Kind
from spillnet.errors import SelectionError


def offdiag_positions(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of off-diagonal cells in row-major order."""
    rows, cols = np.nonzero(~np.eye(m, dtype=bool))
    return rows, cols


def ranking(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Off-diagonal cells sorted by value, largest first.

    Ties keep row-major order (smaller row first, then smaller column).
    Returns (rows, cols, sorted_values).
    """
    m = values.shape[0]
    rows, cols = offdiag_positions(m)
    flat = values[rows, cols]
    order = np.argsort(-flat, kind="stable")
    return rows[order], cols[order], flat[order]


def ic_from_sorted(sorted_values: np.ndarray, m: int, t_len: int, lam: float, t_factor: bool = True) -> np.ndarray:
    base = m - np.cumsum(sorted_values)
    fit_scale = 2.0 * t_len if t_factor else 2.0
    ic = np.full(base.shape, np.inf)
    # once the base turns non-positive the fit term is undefined for that k and every larger k
    bad = np.nonzero(base <= 0)[0]
    stop = bad[0] if bad.size else base.size
    ks = np.arange(1, base.size + 1)
    ic[:stop] = fit_scale * np.log(base[:stop]) + ks[:stop] * lam
    return ic


@dataclass(frozen=True, eq=False)
class IcTrace:
    k_values: np.ndarray
    ic_values: np.ndarray
    lam: float
    kind: Kind
    t_len: int

    def to_list(self) -> list:
        return [None if not math.isfinite(v) else float(v) for v in self.ic_values]


@dataclass(frozen=True, eq=False)
class SparseSelection:
    """Result of pruning a contribution matrix down to ``k_hat`` edges.

    ``active_set`` holds 0-based (row, column) pairs, row = receiving
    series, column = shock origin, in ranking order.
    """

    k_hat: int
    mask: np.ndarray
    masked_contrib: ContributionMatrix
    active_set: list[tuple[int, int]]
    trace: IcTrace | None = None

    @property
    def lam(self) -> float | None:
        return None if self.trace is None else self.trace.lam

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "lambda": self.lam,
            "active_set": [list(pair) for pair in self.active_set],
            "masked": self.masked_contrib.values.tolist(),
            "mask": self.mask.tolist(),
            "ic": None if self.trace is None else self.trace.to_list(),
            "index_base": 0,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def ic_curve(contrib: ContributionMatrix, t_len: int, lam: float, t_factor: bool = True) -> IcTrace:
    """IC(k) for k = 1..m^2-m; +inf where the log argument is not positive.

    ``t_factor=False`` drops the T in front of the log, the literal form of
    the printed GFEVD criterion (audit only).
    """
    if t_len < 2:
        raise SelectionError(f"t_len must be >= 2, got {t_len}")
    if lam < 0:
        raise SelectionError(f"lambda must be non-negative, got {lam}")
    m = contrib.m_dim
    if m < 2:
        raise SelectionError("selection needs at least 2 series")
    _, _, sorted_values = ranking(contrib.values)
    ic = ic_from_sorted(sorted_values, m, t_len, lam, t_factor)
    return IcTrace(np.arange(1, m * m - m + 1), ic, float(lam), contrib.kind, int(t_len))


def select_k(trace: IcTrace) -> int:
    """Smallest k attaining the minimum IC."""
    return int(trace.k_values[int(np.argmin(trace.ic_values))])


def mask_top_k(values: np.ndarray, k_hat: int) -> np.ndarray:
    m = values.shape[0]
    rows, cols, _ = ranking(values)
    mask = np.eye(m, dtype=int)
    mask[rows[:k_hat], cols[:k_hat]] = 1
    return mask


def apply_mask(contrib: ContributionMatrix, k_hat: int, trace: IcTrace | None = None) -> SparseSelection:
    m = contrib.m_dim
    if not 1 <= k_hat <= m * m - m:
        raise SelectionError(f"k_hat must lie in 1..{m * m - m}, got {k_hat}")
    rows, cols, _ = ranking(contrib.values)
    mask = np.eye(m, dtype=int)
    mask[rows[:k_hat], cols[:k_hat]] = 1
    mask.setflags(write=False)
    masked = ContributionMatrix(contrib.values * mask, contrib.kind, contrib.horizon)
    active = [(int(i), int(j)) for i, j in zip(rows[:k_hat], cols[:k_hat])]
    return SparseSelection(int(k_hat), mask, masked, active, trace)


def sparsify(contrib: ContributionMatrix, t_len: int, lam: float, t_factor: bool = True) -> SparseSelection:
    trace = ic_curve(contrib, t_len, lam, t_factor)
    return apply_mask(contrib, select_k(trace), trace)


def default_lambda(t_len: int, m: int | None = None, rule: str = "log") -> float:
    """``log T`` (rule "log") or ``log T / m`` (rule "log/m")."""
    if rule == "log":
        return math.log(t_len)
    if rule == "log/m":
        if not m:
            raise SelectionError("rule 'log/m' needs m")
        return math.log(t_len) / m
    raise SelectionError(f"unknown lambda rule {rule!r}")
