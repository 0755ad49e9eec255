"""Command-line entry point: ``spillnet {estimate,tune,simulate,export}``.

Exit status is 0 on success, 1 for bad input or a failed pipeline step and
2 for an unexpected internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from spillnet.decomposition import decompose, fevd_contributions, share_table
from spillnet.errors import SpillnetError
from spillnet.metrics import spillover_summary, table_csv, table_dot, table_json
from spillnet.montecarlo import PRESET_NAMES, StudyConfig, parse_study, run_study
from spillnet.panel import Panel, load_panel, residualize_on_factor, standardize
from spillnet.shocks import ShockMap, validate_user_map
from spillnet.sparsify import default_lambda, sparsify
from spillnet.tuning import TuningConfig, default_constants, select_lambda
from spillnet.var import fit_var
from spillnet.vma import vma_coefficients

THREADS_ENV = "SPILLNET_THREADS"


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write(out: Path, name: str, text: str) -> None:
    try:
        (out / name).write_text(text)
    except OSError as exc:
        raise SpillnetError(f"cannot write {out / name}: {exc.strerror}") from exc


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SpillnetError(f"cannot create output directory {out}: {exc.strerror}") from exc
    return out


def _threads(value: int | None) -> int:
    if value is not None:
        if value < 1:
            raise SpillnetError("--threads must be >= 1")
        return value
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SpillnetError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def sample_path() -> Path:
    """Bundled 10-series sample panel."""
    return Path(str(resources.files("spillnet") / "data" / "sample_s1.csv"))


def _load(args) -> Panel:
    path = sample_path() if args.sample else args.input
    if path is None:
        raise SpillnetError("give --input PATH or --sample")
    panel = load_panel(path, has_header=not args.no_header, date_column=args.date_column, require_var=True)
    if args.factor_col is not None:
        panel = _residualize(panel, args.factor_col)
    return panel


def _residualize(panel: Panel, col: str) -> Panel:
    if col in panel.labels:
        j = panel.labels.index(col)
    else:
        try:
            j = int(col) - 1
        except ValueError:
            raise SpillnetError(f"--factor-col {col!r} matches no column label") from None
        if not 0 <= j < panel.m_dim:
            raise SpillnetError(f"--factor-col {col} is out of range 1..{panel.m_dim}")
    rest = [k for k in range(panel.m_dim) if k != j]
    if len(rest) < 2:
        raise SpillnetError("at least 2 series must remain after removing the factor column")
    return residualize_on_factor(panel.select(rest), panel.observations[:, j])


def _parse_floats(text: str, what: str) -> list[float]:
    """Comma/whitespace separated numbers, or a file holding them."""
    path = Path(text)
    if path.is_file():
        text = path.read_text()
    tokens = [t for t in text.replace(",", " ").split() if t]
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise SpillnetError(f"{what} must be numbers, got {text!r}") from None
    if not values:
        raise SpillnetError(f"{what} is empty")
    return values


def _tuning_config(args, t_len: int, m: int) -> TuningConfig:
    common = dict(train_frac=args.alpha, horizon=args.H, p=args.p, kind=args.kind)
    if args.grid_scale == "lambda":
        return TuningConfig(candidates=tuple(_parse_floats(args.grid, "--grid")), **common)
    constants = _parse_floats(args.grid, "--grid") if args.grid else default_constants(args.kind, args.H)
    return TuningConfig.from_constants(constants, t_len, m, **common)


def _user_map(path: str, raw_sigma: np.ndarray, scales: np.ndarray) -> ShockMap:
    try:
        p_raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise SpillnetError(f"cannot read --user-p {path}: {exc}") from None
    checked = validate_user_map(p_raw, raw_sigma)
    # the model is fitted on standardized series, so rescale the rows of P
    return ShockMap(checked.p_matrix / scales[:, None], "user_supplied")


def cmd_estimate(args) -> int:
    out = _out_dir(args.out)
    panel = _load(args)
    std = standardize(panel)
    t_len, m = std.t_len, std.m_dim
    fit = fit_var(std, args.p)
    vma = vma_coefficients(fit.phi, args.H)
    if args.user_p is not None:
        if args.kind != "fevd":
            raise SpillnetError("--user-p applies to --kind fevd only")
        raw_sigma = fit.sigma * np.outer(std.scales, std.scales)
        contrib = fevd_contributions(vma, _user_map(args.user_p, raw_sigma, std.scales))
    else:
        contrib = decompose(vma, fit.sigma, args.kind)

    tuning = None
    if args.grid is not None:
        tuning = select_lambda(std, _tuning_config(args, t_len, m), _threads(args.threads))
        lam, source = tuning.lambda_star, "tuned"
    elif args.lam in ("log", "log/m"):
        lam, source = default_lambda(t_len, m, args.lam), args.lam
    else:
        try:
            lam, source = float(args.lam), "given"
        except ValueError:
            raise SpillnetError(f"--lambda must be a number, 'log' or 'log/m', got {args.lam!r}") from None

    sel = sparsify(contrib, t_len, lam)
    table = share_table(contrib, vma, fit.sigma)
    labels = list(std.labels)
    use_mask = not args.no_mask_indices
    summary = spillover_summary(table, sel.mask, use_mask)

    selection = sel.to_dict()
    selection.update(labels=labels, kind=args.kind, horizon=args.H, p=args.p, t_len=t_len, lambda_source=source)
    if tuning is not None:
        selection["tuning"] = tuning.to_dict()
    summary_doc = summary.to_dict(labels)
    summary_doc.update(indices_on="masked" if use_mask else "dense", units="percent", index_base=0)

    _write(out, "fevd_table.csv", table_csv(table, sel.mask, labels, use_mask))
    table_doc = json.loads(table_json(table, sel.mask, labels, use_mask))
    table_doc.update(kind=args.kind, horizon=args.H)
    _write(out, "fevd_table.json", _dump(table_doc))
    _write(out, "selection.json", _dump(selection))
    _write(out, "summary.json", _dump(summary_doc))
    _write(out, "network.dot", table_dot(table, sel.mask, labels, use_mask))
    _write(out, "var_fit.json", _dump(fit.to_dict()))
    print(f"k_hat={sel.k_hat} lambda={lam:.6g} total_index={summary.total_index:.2f} -> {out}")
    return 0


def cmd_tune(args) -> int:
    out = _out_dir(args.out)
    std = standardize(_load(args))
    report = select_lambda(std, _tuning_config(args, std.t_len, std.m_dim), _threads(args.threads))
    _write(out, "tuning.json", _dump(report.to_dict()))
    _write(out, "tuning_msfe.csv", report.msfe_csv())
    print(f"lambda_star={report.lambda_star:.6g} msfe={report.msfe[report.best_index]:.6g} -> {out}")
    return 0


def _study_config(args) -> StudyConfig:
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise SpillnetError(f"cannot read study config {args.config}: {exc.strerror}") from None
        return parse_study(text)
    if args.grid_scale != "c":
        raise SpillnetError("simulate reads --grid as constants c only")
    grid = _parse_floats(args.grid, "--grid") if args.grid else None
    return StudyConfig(
        dgp=args.dgp,
        p=args.p,
        t_lens=tuple(int(x) for x in _parse_floats(args.T, "--T")),
        horizons=(args.H,),
        kinds=(args.kind,),
        replications=args.reps,
        seed=args.seed,
        train_frac=args.alpha,
        grid=grid,
        lambda_rule=args.lambda_rule,
        hold_fixed=args.hold_fixed,
    )


def cmd_simulate(args) -> int:
    out = _out_dir(args.out)
    report = run_study(_study_config(args), _threads(args.threads))
    _write(out, "mc_report.json", report.to_json() + "\n")
    _write(out, "mc_report.csv", report.rows_csv())
    _write(out, "cstar_hist.csv", report.cstar_csv())
    for cell in report.means():
        shown = {k: cell[k] for k in ("cdr1", "cdr0", "cdra", "sp", "vl_a", "vl_o")}
        text = " ".join(f"{k}={'n/a' if v is None else f'{v:.3f}'}" for k, v in shown.items())
        print(f"{cell['dgp']} T={cell['t_len']} H={cell['horizon']} {cell['kind']}: {text}")
    return 0


def cmd_export(args) -> int:
    try:
        doc = json.loads(Path(args.input).read_text())
    except OSError:
        raise SpillnetError(f"input file not found: {args.input}") from None
    except json.JSONDecodeError as exc:
        raise SpillnetError(f"{args.input} is not valid JSON: {exc}") from None
    if "shares" not in doc:
        raise SpillnetError(f"{args.input} has no 'shares' table")
    shares = np.asarray(doc["shares"], dtype=float)
    mask = doc.get("mask")
    labels = doc.get("labels")
    render = {"csv": table_csv, "json": table_json, "dot": table_dot}[args.format]
    text = render(shares, mask, labels, not args.no_mask_indices)
    if args.out is None:
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        try:
            out.write_text(text)
        except OSError as exc:
            raise SpillnetError(f"cannot write {out}: {exc.strerror}") from None
    return 0


def _add_panel_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="CSV panel, one column per series")
    src.add_argument("--sample", action="store_true", help="use the bundled 10-series sample panel")
    p.add_argument("--no-header", action="store_true", help="the CSV has no label row")
    p.add_argument("--date-column", action="store_true", help="the first CSV column holds dates or row labels")
    p.add_argument("--factor-col", help="label or 1-based index of a common-factor column; the other series are replaced by residuals on it")


def _add_model_flags(p: argparse.ArgumentParser, default_kind: str = "gfevd") -> None:
    p.add_argument("--p", type=int, default=1, help="VAR lag order (default 1)")
    p.add_argument("--H", type=int, default=10, help="forecast horizon, number of moving-average terms (default 10)")
    p.add_argument("--kind", choices=("fevd", "gfevd"), default=default_kind, help="Cholesky FEVD or generalized FEVD")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", help="candidate values, comma separated or a file; constants c by default")
    p.add_argument(
        "--grid-scale",
        choices=("c", "lambda"),
        default="c",
        help="read --grid as constants c with lambda = c log T / m (default) or as raw lambda values",
    )
    p.add_argument("--alpha", type=float, default=0.9, help="training fraction; windows hold floor(alpha T) rows (default 0.9)")
    p.add_argument("--threads", type=int, help=f"worker count (default: ${THREADS_ENV} or all cores)")


class _Parser(argparse.ArgumentParser):
    """Usage errors are user errors: exit 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spillnet", description="Sparse variance-decomposition spillover networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="fit, decompose, prune and write tables")
    _add_panel_flags(est)
    _add_model_flags(est)
    est.add_argument(
        "--lambda",
        dest="lam",
        default="log",
        help="IC penalty: a number, 'log' (log T, default) or 'log/m'; ignored when --grid is given",
    )
    _add_grid_flags(est)
    est.add_argument("--user-p", help="CSV with an m x m impact matrix P (P P' = Sigma) replacing the Cholesky factor")
    est.add_argument("--no-mask-indices", action="store_true", help="compute FIX/TIX/NIX on the dense table")
    est.add_argument("--out", default="spillnet_out", help="output directory")
    est.set_defaults(func=cmd_estimate)

    tune = sub.add_parser("tune", help="pick the IC penalty by rolling one-step forecasts")
    _add_panel_flags(tune)
    _add_model_flags(tune)
    _add_grid_flags(tune)
    tune.add_argument("--out", default="spillnet_out", help="output directory")
    tune.set_defaults(func=cmd_tune)

    sim = sub.add_parser("simulate", help="Monte Carlo study on a preset design")
    sim.add_argument("--config", help="study file of key = value lines; overrides the flags below")
    sim.add_argument("--dgp", default="S1", choices=PRESET_NAMES, help="preset design")
    _add_model_flags(sim)
    sim.set_defaults(H=5)
    sim.add_argument("--T", default="2000", help="sample size(s), comma separated")
    sim.add_argument("--reps", type=int, default=100, help="replications")
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--lambda-rule", choices=("tuned", "log", "log/m"), default="tuned", help="how lambda is chosen")
    sim.add_argument("--hold-fixed", action="store_true", help="draw the true model once for all replications")
    _add_grid_flags(sim)
    sim.add_argument("--out", default="spillnet_out", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    exp = sub.add_parser("export", help="re-render a fevd_table.json as csv, json or dot")
    exp.add_argument("--input", required=True, help="fevd_table.json written by estimate")
    exp.add_argument("--format", choices=("csv", "json", "dot"), default="csv")
    exp.add_argument("--no-mask-indices", action="store_true", help="compute FIX/TIX/NIX on the dense table")
    exp.add_argument("--out", help="output file (default: stdout)")
    exp.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpillnetError as exc:
        print(f"spillnet: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"spillnet: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
