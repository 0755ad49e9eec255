"""Simulation designs, panel generation and selection-accuracy studies."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from spillnet.decomposition import ContributionMatrix, Kind, decompose
from spillnet.errors import SpillnetError
from spillnet.panel import Panel, standardize
from spillnet.sparsify import SparseSelection, default_lambda, sparsify
from spillnet.tuning import TuningConfig, default_constants, select_lambda
from spillnet.var import companion_matrix, companion_spectral_radius, fit_var
from spillnet.vma import vma_coefficients

PD_TOL = 1e-10
SHRINK = 0.9
BURN_IN = 1000


@dataclass(frozen=True)
class DgpSpec:
    """Design of a simulated VAR.

    Attributes:
        name: Preset name or "custom".
        block_sizes: Contiguous groups of series; within a group every pair is
            linked, singletons are isolated.
        p: Lag order.
        error_dist: "gaussian" or "student_t".
        nu: Degrees of freedom for student_t (> 2).
        weak_fill: Bound w; when set, zero entries of phi and sigma are
            replaced by U(-w, w) draws.
        sigma_rule: "rho" for the one-factor covariance, "diag_uniform" for
            an independent diagonal U(0.25, 1) covariance.
    """

    name: str
    block_sizes: tuple[int, ...]
    p: int = 1
    error_dist: str = "gaussian"
    nu: float = 4.0
    weak_fill: float | None = None
    sigma_rule: str = "rho"

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        if not self.block_sizes or any(b < 1 for b in self.block_sizes):
            raise SpillnetError("block sizes must be positive integers")
        if self.p < 1:
            raise SpillnetError(f"p must be >= 1, got {self.p}")
        if self.error_dist not in ("gaussian", "student_t"):
            raise SpillnetError(f"unknown error distribution {self.error_dist!r}")
        if self.error_dist == "student_t" and not self.nu > 2:
            raise SpillnetError(f"student_t needs nu > 2, got {self.nu}")
        if self.sigma_rule not in ("rho", "diag_uniform"):
            raise SpillnetError(f"unknown sigma rule {self.sigma_rule!r}")

    @property
    def m(self) -> int:
        return sum(self.block_sizes)

    def block_labels(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.block_sizes)), self.block_sizes)

    def active_set(self) -> list[tuple[int, int]]:
        """All ordered cross pairs inside each block, row-major."""
        g = self.block_labels()
        return [(i, j) for i in range(self.m) for j in range(self.m) if i != j and g[i] == g[j]]


_PRESETS = {
    "S1": dict(block_sizes=(4, 2, 2, 1, 1)),
    "S2": dict(block_sizes=(6, 1, 1, 1, 1)),
    "L1": dict(block_sizes=(8, 4, 2, 2, 1, 1, 1, 1)),
    "L2": dict(block_sizes=(10, 4) + (1,) * 6),
    "L3": dict(block_sizes=(2,) * 5 + (1,) * 10),
    "L4": dict(block_sizes=(1,) * 20, sigma_rule="diag_uniform"),
    "D1": dict(block_sizes=(8, 4, 2, 2, 1, 1, 1, 1), weak_fill=0.1),
    "D2": dict(block_sizes=(10, 4) + (1,) * 6, weak_fill=0.1),
    "H1": dict(block_sizes=(8, 4, 2, 2, 1, 1, 1, 1), error_dist="student_t", nu=4.0),
    "H2": dict(block_sizes=(10, 4) + (1,) * 6, error_dist="student_t", nu=4.0),
}

PRESET_NAMES = tuple(_PRESETS)


def dgp_spec(name: str, p: int = 1) -> DgpSpec:
    key = name.upper()
    if key not in _PRESETS:
        raise SpillnetError(f"unknown design {name!r}; choose one of {', '.join(_PRESETS)}")
    return DgpSpec(name=key, p=p, **_PRESETS[key])


@dataclass(frozen=True, eq=False)
class TrueModel:
    phi: np.ndarray
    sigma: np.ndarray
    active_set: list[tuple[int, int]]
    spectral_radius: float
    spec: DgpSpec

    @property
    def m_dim(self) -> int:
        return self.sigma.shape[0]


def _shrink_to_stationary(phi: np.ndarray) -> np.ndarray:
    while companion_spectral_radius(phi) >= 1:
        phi = phi * SHRINK
    return phi


def _mix_to_pd(sigma: np.ndarray) -> np.ndarray:
    m = sigma.shape[0]
    omega = 1.0
    while np.linalg.eigvalsh(sigma)[0] <= PD_TOL:
        omega *= SHRINK
        sigma = omega * sigma + (1 - omega) * np.eye(m)
    return sigma


def generate_model(spec: DgpSpec, rng: np.random.Generator) -> TrueModel:
    m, p = spec.m, spec.p
    same = spec.block_labels()[:, None] == spec.block_labels()[None, :]
    phi = rng.uniform(-1, 1, size=(p, m, m)) * same[None]
    phi = _shrink_to_stationary(phi)
    if spec.sigma_rule == "diag_uniform":
        sigma = np.diag(rng.uniform(0.25, 1, size=m))
    else:
        rho = rng.uniform(-1, 1, size=m)
        sigma = np.eye(m) + np.outer(rho, rho) - np.diag(rho**2)
        sigma = np.where(same, sigma, 0.0)
        sigma = _mix_to_pd(sigma)
    if spec.weak_fill is not None:
        w = spec.weak_fill
        phi = np.where(phi == 0, rng.uniform(-w, w, size=phi.shape), phi)
        fill = rng.uniform(-w, w, size=(m, m))
        fill = np.triu(fill, 1) + np.triu(fill, 1).T
        sigma = np.where(sigma == 0, fill, sigma)
        phi = _shrink_to_stationary(phi)
        sigma = _mix_to_pd(sigma)
    return TrueModel(phi, sigma, spec.active_set(), companion_spectral_radius(phi), spec)


def simulate_panel(model: TrueModel, t_len: int, rng: np.random.Generator, burn_in: int = BURN_IN) -> Panel:
    """Zero-intercept path from a zero start; the first ``burn_in`` rows are dropped."""
    spec = model.spec
    m, p = model.m_dim, model.phi.shape[0]
    n = burn_in + t_len
    chol = np.linalg.cholesky(model.sigma)
    z = rng.standard_normal((n, m))
    if spec.error_dist == "student_t":
        nu = spec.nu
        chi = rng.chisquare(nu, size=n)
        z = z * math.sqrt((nu - 2) / nu) / np.sqrt(chi / nu)[:, None]
    eps = z @ chol.T
    y = np.zeros((n + p, m))
    stacked = np.hstack(list(model.phi))  # m x mp, lag 1 first
    for t in range(n):
        lags = y[t : t + p][::-1].reshape(-1)
        y[t + p] = stacked @ lags + eps[t]
    return Panel.from_array(y[p + burn_in :])


def stationary_variance(phi: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Diagonal of the population covariance of y_t."""
    phi = np.asarray(phi, dtype=float)
    p, m, _ = phi.shape
    comp = companion_matrix(phi)
    q = np.zeros((m * p, m * p))
    q[:m, :m] = sigma
    gamma = solve_discrete_lyapunov(comp, q)
    return np.diag(gamma)[:m].copy()


def true_contributions(model: TrueModel, horizon: int, kind: Kind) -> ContributionMatrix:
    """Population contributions of the model rescaled to unit-variance series."""
    scale = np.sqrt(stationary_variance(model.phi, model.sigma))
    phi = model.phi / scale[None, :, None] * scale[None, None, :]
    sigma = model.sigma / np.outer(scale, scale)
    return decompose(vma_coefficients(phi, horizon), sigma, kind)


def cdr_metrics(est_active, true_active, m: int) -> tuple[float | None, float, float]:
    """(CDR1, CDR0, CDRa); CDR1 is None when the true active set is empty."""
    est = set(map(tuple, est_active))
    truth = set(map(tuple, true_active))
    n_off = m * m - m
    hits = len(est & truth)
    n_true_inactive = n_off - len(truth)
    correct_zero = n_off - len(est | truth)
    cdr1 = hits / len(truth) if truth else None
    cdr0 = correct_zero / n_true_inactive if n_true_inactive else None
    return cdr1, cdr0, (hits + correct_zero) / n_off


def sparsity_loss_metrics(selection: SparseSelection, truth_contrib: ContributionMatrix) -> tuple[float, float, float]:
    """(SP, VL_a, VL_o) of a selection against true FEVD contributions."""
    if truth_contrib.kind != "fevd":
        raise SpillnetError("variance-loss measures need FEVD (orthogonal shock) contributions")
    mask = np.asarray(selection.mask)
    m = mask.shape[0]
    if truth_contrib.m_dim != m:
        raise SpillnetError(f"selection has {m} series, truth has {truth_contrib.m_dim}")
    off = ~np.eye(m, dtype=bool)
    pruned = off & (mask == 0)
    v = truth_contrib.values
    lost = float(v[pruned].sum())
    return float(pruned.sum() / (m * m - m)), lost / float(v.sum()), lost / float(v[off].sum())


@dataclass(frozen=True)
class StudyConfig:
    """One Monte Carlo study; every (T, H, kind) combination is a cell.

    Attributes:
        dgp: Preset design name.
        p: Lag order of the design and of the fitted VAR.
        t_lens: Sample sizes.
        horizons: Forecast horizons H.
        kinds: "fevd" and/or "gfevd".
        replications: Number of replications.
        seed: Master seed.
        train_frac: alpha for the rolling tuning windows.
        grid: Constants c in lambda = c log T / m; None uses the default grid.
        lambda_rule: "tuned", "log" (lambda = log T) or "log/m".
        hold_fixed: Draw the model once and reuse it in every replication.
        burn_in: Discarded start-up rows.
    """

    dgp: str = "S1"
    p: int = 1
    t_lens: tuple[int, ...] = (2000,)
    horizons: tuple[int, ...] = (5,)
    kinds: tuple[str, ...] = ("gfevd",)
    replications: int = 100
    seed: int = 0
    train_frac: float = 0.9
    grid: tuple[float, ...] | None = None
    lambda_rule: str = "tuned"
    hold_fixed: bool = False
    burn_in: int = BURN_IN

    def __post_init__(self):
        for name in ("t_lens", "horizons", "kinds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(c) for c in self.grid))
        if self.replications < 1:
            raise SpillnetError("replications must be >= 1")
        if self.lambda_rule not in ("tuned", "log", "log/m"):
            raise SpillnetError(f"unknown lambda rule {self.lambda_rule!r}")
        for k in self.kinds:
            if k not in ("fevd", "gfevd"):
                raise SpillnetError(f"unknown kind {k!r}")
        dgp_spec(self.dgp, self.p)

    def cells(self) -> list[tuple[int, int, str]]:
        return list(itertools.product(self.t_lens, self.horizons, self.kinds))


_INT_KEYS = {"p", "replications", "seed", "burn_in"}
_KEY_ALIASES = {"t": "t_lens", "t_len": "t_lens", "h": "horizons", "kind": "kinds", "reps": "replications", "alpha": "train_frac"}


def parse_study(text: str) -> StudyConfig:
    """Read ``key = value`` lines; lists are comma separated, ``#`` starts a comment."""
    values: dict = {}
    names = {f.name for f in StudyConfig.__dataclass_fields__.values()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpillnetError(f"study config line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = _KEY_ALIASES.get(key.lower(), key.lower())
        if key not in names:
            raise SpillnetError(f"study config line {lineno}: unknown key {key!r}")
        items = [v.strip() for v in val.split(",") if v.strip()]
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in ("t_lens", "horizons"):
                values[key] = tuple(int(v) for v in items)
            elif key == "kinds":
                values[key] = tuple(v.lower() for v in items)
            elif key == "grid":
                values[key] = tuple(float(v) for v in items) or None
            elif key == "train_frac":
                values[key] = float(val)
            elif key == "hold_fixed":
                values[key] = val.lower() in ("1", "true", "yes", "on")
            else:
                values[key] = val
        except ValueError:
            raise SpillnetError(f"study config line {lineno}: bad value {val!r} for {key}") from None
    return StudyConfig(**values)


def replication_seeds(seed: int, replications: int) -> list[np.random.SeedSequence]:
    """Child 0 drives a held-fixed model; child r + 1 drives replication r."""
    return np.random.SeedSequence(seed).spawn(replications + 1)


def _select(panel, t_len: int, horizon: int, kind: str, cfg: StudyConfig):
    m = panel.m_dim
    fit = fit_var(panel, cfg.p, warn_nonstationary=False)
    contrib = decompose(vma_coefficients(fit.phi, horizon), fit.sigma, kind)
    c_star = None
    if cfg.lambda_rule == "tuned":
        grid = cfg.grid or default_constants(kind, horizon)
        tcfg = TuningConfig.from_constants(grid, t_len, m, train_frac=cfg.train_frac, horizon=horizon, p=cfg.p, kind=kind)
        report = select_lambda(panel, tcfg, threads=1)
        lam, c_star = report.lambda_star, report.c_star
    else:
        lam = default_lambda(t_len, m, cfg.lambda_rule)
    return sparsify(contrib, t_len, lam), lam, c_star


def run_replication(cfg: StudyConfig, rep: int) -> list[dict]:
    """All cells of one replication; a pure function of (cfg, rep)."""
    seeds = replication_seeds(cfg.seed, cfg.replications)
    spec = dgp_spec(cfg.dgp, cfg.p)
    model_seed, data_seed = seeds[rep + 1].spawn(2)
    if cfg.hold_fixed:
        model_seed = seeds[0]
    model = generate_model(spec, np.random.default_rng(model_seed))
    rows = []
    for t_len in cfg.t_lens:
        try:
            panel = standardize(simulate_panel(model, t_len, np.random.default_rng(data_seed), cfg.burn_in))
            for horizon in cfg.horizons:
                truth_fevd = true_contributions(model, horizon, "fevd") if "fevd" in cfg.kinds else None
                for kind in cfg.kinds:
                    sel, lam, c_star = _select(panel, t_len, horizon, kind, cfg)
                    cdr1, cdr0, cdra = cdr_metrics(sel.active_set, model.active_set, model.m_dim)
                    if kind == "fevd":
                        sp, vla, vlo = sparsity_loss_metrics(sel, truth_fevd)
                    else:
                        sp = (model.m_dim**2 - model.m_dim - sel.k_hat) / (model.m_dim**2 - model.m_dim)
                        vla = vlo = None
                    rows.append(
                        dict(
                            rep=rep, t_len=t_len, horizon=horizon, kind=kind, k_hat=sel.k_hat,
                            lam=lam, c_star=c_star, cdr1=cdr1, cdr0=cdr0, cdra=cdra,
                            sp=sp, vl_a=vla, vl_o=vlo,
                        )
                    )
        except SpillnetError as exc:
            raise SpillnetError(f"replication {rep} (T={t_len}): {exc}") from exc
    return rows


METRICS = ("cdr1", "cdr0", "cdra", "sp", "vl_a", "vl_o", "k_hat")


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


@dataclass(frozen=True, eq=False)
class McReport:
    config: StudyConfig
    rows: list[dict] = field(default_factory=list)

    def cell_rows(self, t_len: int, horizon: int, kind: str) -> list[dict]:
        return [r for r in self.rows if (r["t_len"], r["horizon"], r["kind"]) == (t_len, horizon, kind)]

    def means(self) -> list[dict]:
        out = []
        for t_len, horizon, kind in self.config.cells():
            rows = self.cell_rows(t_len, horizon, kind)
            cell = dict(dgp=self.config.dgp, p=self.config.p, t_len=t_len, horizon=horizon, kind=kind, replications=len(rows))
            cell.update({k: _mean(r[k] for r in rows) for k in METRICS})
            out.append(cell)
        return out

    def cell_mean(self, t_len: int, horizon: int, kind: str, metric: str) -> float | None:
        return _mean(r[metric] for r in self.cell_rows(t_len, horizon, kind))

    def cstar_histogram(self) -> list[dict]:
        out = []
        for t_len, horizon, kind in self.config.cells():
            counts = Counter(r["c_star"] for r in self.cell_rows(t_len, horizon, kind) if r["c_star"] is not None)
            for c in sorted(counts):
                out.append(dict(t_len=t_len, horizon=horizon, kind=kind, c=c, count=counts[c]))
        return out

    def to_json(self) -> str:
        doc = {"config": asdict(self.config), "means": self.means(), "replications": self.rows, "cstar_histogram": self.cstar_histogram()}
        return json.dumps(doc, sort_keys=True)

    def rows_csv(self) -> str:
        return _csv(self.rows, ["rep", "t_len", "horizon", "kind", "k_hat", "lam", "c_star", *METRICS[:-1]])

    def cstar_csv(self) -> str:
        return _csv(self.cstar_histogram(), ["t_len", "horizon", "kind", "c", "count"])


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r[c] is None else repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("SPILLNET_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def run_study(cfg: StudyConfig, workers: int | None = None) -> McReport:
    """Run every replication and collect rows in replication order.

    Replication r uses its own seed stream spawned from ``cfg.seed``, so the
    report does not depend on ``workers``.
    """
    reps = range(cfg.replications)
    n = _resolve_workers(workers)
    if n == 1 or cfg.replications == 1:
        chunks = [run_replication(cfg, r) for r in reps]
    else:
        with ProcessPoolExecutor(max_workers=min(n, cfg.replications)) as pool:
            chunks = list(pool.map(run_replication, itertools.repeat(cfg), reps))
    return McReport(cfg, [row for chunk in chunks for row in chunk])


def run_cell(dgp: str, p: int, t_len: int, horizon: int, kind: str, replications: int, seed: int = 0, workers: int | None = None, **kwargs) -> McReport:
    cfg = StudyConfig(dgp=dgp, p=p, t_lens=(t_len,), horizons=(horizon,), kinds=(kind,), replications=replications, seed=seed, **kwargs)
    return run_study(cfg, workers)


__all__ = [
    "DgpSpec", "TrueModel", "StudyConfig", "McReport", "PRESET_NAMES", "dgp_spec", "generate_model",
    "simulate_panel", "stationary_variance", "true_contributions", "cdr_metrics", "sparsity_loss_metrics",
    "parse_study", "replication_seeds", "run_replication", "run_study", "run_cell",
]
