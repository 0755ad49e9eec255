"""Choice of the IC penalty by rolling one-step pseudo-out-of-sample MSFE.

Each window of exactly S = floor(alpha * T) rows is fitted, pruned with the
candidate penalty, and used to forecast the next row through the truncated
moving-average form restricted to the selected edges.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from spillnet.decomposition import Kind
from spillnet.errors import SpillnetError, TuningError
from spillnet.panel import Panel, StandardizedPanel
from spillnet.shocks import ShockMap, cholesky_factor, recover_shocks
from spillnet.sparsify import ic_from_sorted, ranking
from spillnet.var import VarFit, fit_var, one_step_mean
from spillnet.vma import VmaSequence, vma_coefficients

DEFAULT_CONSTANTS = {
    ("fevd", True): (0.1, 0.2, 0.3, 0.4, 0.5, 0.6),
    ("fevd", False): (1.0, 2.0, 3.0, 4.0, 5.0, 6.0),
    ("gfevd", True): (0.2, 0.3, 0.4, 0.5, 0.6, 0.7),
    ("gfevd", False): (2.0, 3.0, 4.0, 5.0, 6.0, 7.0),
}


def default_constants(kind: Kind, horizon: int) -> tuple[float, ...]:
    """Grid of c in lambda = c log T / m; a finer grid is used when H = 1."""
    if kind not in ("fevd", "gfevd"):
        raise TuningError(f"unknown kind {kind!r}")
    return DEFAULT_CONSTANTS[(kind, horizon == 1)]


@dataclass(frozen=True)
class TuningConfig:
    """Settings for the rolling evaluation.

    Attributes:
        candidates: Penalty values to compare, in evaluation order.
        train_frac: alpha; the window size is floor(alpha * T).
        horizon: H, number of moving-average terms.
        p: VAR lag order.
        kind: "fevd" (Cholesky shocks) or "gfevd".
        constants: The c values behind ``candidates`` when built with
            :meth:`from_constants`, kept for reporting.
        t_factor: Passed to the IC; False gives the audit-only 2 log form.
    """

    candidates: tuple[float, ...]
    train_frac: float = 0.9
    horizon: int = 5
    p: int = 1
    kind: Kind = "gfevd"
    constants: tuple[float, ...] | None = None
    t_factor: bool = True

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(float(c) for c in self.candidates))
        if not self.candidates:
            raise TuningError("candidate grid is empty")
        if any(not math.isfinite(c) or c < 0 for c in self.candidates):
            raise TuningError("candidate penalties must be finite and non-negative")
        if not 0 < self.train_frac < 1:
            raise TuningError(f"train_frac must lie in (0, 1), got {self.train_frac}")
        if self.horizon < 1 or self.p < 1:
            raise TuningError("horizon and p must be >= 1")
        if self.kind not in ("fevd", "gfevd"):
            raise TuningError(f"unknown kind {self.kind!r}")
        if self.constants is not None and len(self.constants) != len(self.candidates):
            raise TuningError("constants and candidates differ in length")

    @classmethod
    def from_constants(cls, constants, t_len: int, m: int, **kwargs) -> "TuningConfig":
        """Candidates lambda = c log T / m, with T the full sample length."""
        constants = tuple(float(c) for c in constants)
        lams = tuple(c * math.log(t_len) / m for c in constants)
        return cls(candidates=lams, constants=constants, **kwargs)

    def window_size(self, t_len: int) -> int:
        return int(math.floor(self.train_frac * t_len))

    def validate(self, t_len: int, m: int) -> int:
        s = self.window_size(t_len)
        if s <= m * self.p + 1:
            raise TuningError(f"window size S={s} must exceed m*p+1={m * self.p + 1}")
        if s >= t_len:
            raise TuningError(f"window size S={s} leaves no evaluation rows (T={t_len})")
        if s - self.p < self.horizon - 1:
            raise TuningError(f"window size S={s} too short for {self.horizon - 1} lagged shocks")
        return s


@dataclass(frozen=True, eq=False)
class TuningReport:
    candidates: tuple[float, ...]
    msfe: tuple[float, ...]
    best_index: int
    forecast_errors: np.ndarray
    window_size: int
    t_len: int
    constants: tuple[float, ...] | None = None
    k_hats: np.ndarray = field(default=None)

    @property
    def lambda_star(self) -> float:
        return self.candidates[self.best_index]

    @property
    def c_star(self) -> float | None:
        return None if self.constants is None else self.constants[self.best_index]

    @property
    def msfe_per_candidate(self) -> list[tuple[float, float]]:
        return list(zip(self.candidates, self.msfe))

    def to_dict(self) -> dict:
        return {
            "candidates": list(self.candidates),
            "constants": None if self.constants is None else list(self.constants),
            "msfe": list(self.msfe),
            "lambda_star": self.lambda_star,
            "c_star": self.c_star,
            "best_index": self.best_index,
            "tie_rule": "first candidate attaining the minimum MSFE wins",
            "window_size": self.window_size,
            "t_len": self.t_len,
            "n_windows": int(self.forecast_errors.shape[0]),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def msfe_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "lambda", "c", "msfe"])
        for q, (lam, err) in enumerate(self.msfe_per_candidate):
            c = "" if self.constants is None else repr(self.constants[q])
            w.writerow([q, repr(lam), c, repr(err)])
        return buf.getvalue()


def forecast_weights(vma: VmaSequence, ident, kind: Kind) -> np.ndarray:
    """(H, m, m) loadings on the shocks: Psi_h P (fevd) or Psi_h Sigma / sigma_jj (gfevd)."""
    if kind == "fevd":
        p_matrix = ident.p_matrix if isinstance(ident, ShockMap) else np.asarray(ident, dtype=float)
        return vma.psi @ p_matrix
    sigma = np.asarray(ident, dtype=float)
    return (vma.psi @ sigma) / np.diag(sigma)[None, None, :]


def forecast_terms(weights: np.ndarray, shock_history: np.ndarray) -> np.ndarray:
    """terms[i, j] = sum_h weights[h, i, j] * shock_history[h, j], without the own
    contemporaneous term (h = 0, j = i)."""
    terms = np.einsum("hij,hj->ij", weights, shock_history)
    own = weights[0].diagonal() * shock_history[0]
    terms[np.diag_indices_from(terms)] -= own
    return terms


def sparse_forecast(fit: VarFit, vma: VmaSequence, ident, mask, shock_history, kind: Kind) -> np.ndarray:
    """One-step forecast from the masked moving-average form.

    Args:
        fit: Fitted VAR supplying the unconditional mean.
        vma: Psi_0..Psi_{H-1}.
        ident: ShockMap (fevd) or the residual covariance (gfevd).
        mask: m x m 0/1 edge indicator with unit diagonal.
        shock_history: H x m; row 0 holds the contemporaneous structural
            shocks (fevd) or residuals (gfevd), row h the ones h steps back.
        kind: "fevd" or "gfevd".
    """
    if fit.mu is None:
        raise TuningError("VAR has no finite unconditional mean")
    shock_history = np.asarray(shock_history, dtype=float)
    mask = np.asarray(mask)
    m = fit.m_dim
    if vma.m_dim != m or mask.shape != (m, m) or shock_history.shape != (vma.horizon, m):
        raise TuningError(
            f"dimension mismatch: m={m}, vma {vma.psi.shape}, mask {mask.shape}, shocks {shock_history.shape}"
        )
    terms = forecast_terms(forecast_weights(vma, ident, kind), shock_history)
    return fit.mu + (mask * terms).sum(axis=1)


@dataclass(frozen=True, eq=False)
class _WindowState:
    """Everything about one window that does not depend on the penalty."""

    mu: np.ndarray
    terms: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    sorted_values: np.ndarray
    target: np.ndarray


def _window_state(y: np.ndarray, start: int, s: int, cfg: TuningConfig) -> _WindowState:
    train = y[start : start + s]
    target = y[start + s]
    try:
        fit = fit_var(train, cfg.p, warn_nonstationary=False, solver="gram")
        if fit.mu is None:
            raise TuningError("VAR has no finite unconditional mean")
        vma = vma_coefficients(fit.phi, cfg.horizon)
        recent = train[::-1][: cfg.p]
        innovation = target - one_step_mean(fit, recent)
        lagged = fit.residuals[::-1][: cfg.horizon - 1]
        history = np.vstack([innovation[None], lagged])
        if cfg.kind == "fevd":
            ident = cholesky_factor(fit.sigma)
            history = recover_shocks(ident, history)
            weights = forecast_weights(vma, ident, "fevd")
            contrib = np.sum(weights**2, axis=0)
        else:
            weights = forecast_weights(vma, fit.sigma, "gfevd")
            contrib = np.sum((vma.psi @ fit.sigma) ** 2, axis=0) / np.diag(fit.sigma)[None, :]
    except SpillnetError as exc:
        raise TuningError(f"window starting at row {start + 1} (rows {start + 1}..{start + s}): {exc}") from exc
    rows, cols, sorted_values = ranking(contrib)
    return _WindowState(fit.mu, forecast_terms(weights, history), rows, cols, sorted_values, target)


def _window_errors(y: np.ndarray, start: int, s: int, cfg: TuningConfig) -> tuple[np.ndarray, np.ndarray]:
    """Forecast errors (Q, m) and selected k (Q,) for every candidate."""
    st = _window_state(y, start, s, cfg)
    m = y.shape[1]
    diag = np.diag(st.terms)
    errors = np.empty((len(cfg.candidates), m))
    k_hats = np.empty(len(cfg.candidates), dtype=int)
    for q, lam in enumerate(cfg.candidates):
        ic = ic_from_sorted(st.sorted_values, m, s, lam, cfg.t_factor)
        k = int(np.argmin(ic)) + 1
        # diagonal contributions are always kept; add the selected off-diagonal terms to them
        forecast = st.mu + diag.copy()
        np.add.at(forecast, st.rows[:k], st.terms[st.rows[:k], st.cols[:k]])
        errors[q] = st.target - forecast
        k_hats[q] = k
    return errors, k_hats


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("SPILLNET_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _observations(panel) -> np.ndarray:
    if isinstance(panel, (Panel, StandardizedPanel)):
        return np.asarray(panel.observations, dtype=float)
    y = np.asarray(panel, dtype=float)
    if y.ndim != 2:
        raise TuningError(f"panel must be 2-D, got shape {y.shape}")
    return y


def select_lambda(panel, cfg: TuningConfig, threads: int | None = None) -> TuningReport:
    """Evaluate every candidate over all T - S windows and keep the best.

    The panel is used as given; standardize it once beforehand. Windows
    run on ``threads`` workers (default: ``SPILLNET_THREADS`` or the core
    count) and are reduced in window order, so results do not depend on the
    worker count.
    """
    y = _observations(panel)
    t_len, m = y.shape
    s = cfg.validate(t_len, m)
    starts = range(t_len - s)
    workers = _resolve_threads(threads)
    if workers == 1:
        results = [_window_errors(y, t0, s, cfg) for t0 in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t0: _window_errors(y, t0, s, cfg), starts))
    errors = np.stack([r[0] for r in results], axis=1)  # (Q, windows, m)
    k_hats = np.stack([r[1] for r in results], axis=1)
    msfe = tuple(float(np.mean(errors[q] ** 2)) for q in range(errors.shape[0]))
    best = int(np.argmin(msfe))
    return TuningReport(cfg.candidates, msfe, best, errors[best], s, t_len, cfg.constants, k_hats)


def poos_msfe(panel, cfg: TuningConfig, lam: float, threads: int | None = None) -> float:
    """MSFE of a single penalty value under the rolling scheme in ``cfg``."""
    single = TuningConfig(
        candidates=(lam,),
        train_frac=cfg.train_frac,
        horizon=cfg.horizon,
        p=cfg.p,
        kind=cfg.kind,
        t_factor=cfg.t_factor,
    )
    return select_lambda(panel, single, threads).msfe[0]
