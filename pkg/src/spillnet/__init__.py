"""Sparse connectedness networks from VAR variance decompositions.

Pipeline: load and standardize a panel, fit a VAR(p), build moving-average
coefficients, decompose forecast error variances (Cholesky FEVD or
generalized FEVD), prune off-diagonal contributions with an information
criterion, and summarize the surviving network.
"""

from spillnet.decomposition import (
    ContributionMatrix,
    FevdTable,
    decompose,
    fevd_contributions,
    fevd_table,
    gfevd_contributions,
    gfevd_table,
    share_table,
)
from spillnet.errors import SpillnetError
from spillnet.metrics import SpilloverSummary, export_table, spillover_summary
from spillnet.panel import Panel, StandardizedPanel, load_panel, standardize
from spillnet.shocks import ShockMap, cholesky_factor, recover_shocks, validate_user_map
from spillnet.sparsify import IcTrace, SparseSelection, apply_mask, ic_curve, select_k, sparsify
from spillnet.tuning import TuningConfig, TuningReport, poos_msfe, select_lambda, sparse_forecast
from spillnet.var import VarFit, fit_var
from spillnet.vma import VmaSequence, vma_coefficients

__version__ = "0.1.0"

__all__ = [
    "ContributionMatrix", "FevdTable", "IcTrace", "Panel", "ShockMap", "SparseSelection",
    "SpilloverSummary", "SpillnetError", "StandardizedPanel", "TuningConfig", "TuningReport",
    "VarFit", "VmaSequence", "apply_mask", "cholesky_factor", "decompose", "export_table",
    "fevd_contributions", "fevd_table", "fit_var", "gfevd_contributions", "gfevd_table",
    "ic_curve", "load_panel", "poos_msfe", "recover_shocks", "select_k", "select_lambda",
    "share_table", "sparse_forecast", "sparsify", "spillover_summary", "standardize",
    "validate_user_map", "vma_coefficients",
]
