"""Loading, validating, standardizing and residualizing time-series panels."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from spillnet.errors import PanelError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Panel:
    """A T x m observation matrix with one label per series.

    Column order is meaningful: Cholesky identification depends on it.

    Attributes:
        observations: Array of shape (T, m); rows are time.
        labels: Series names, unique.
        row_labels: Optional opaque row tags (e.g. dates), never parsed.
    """

    observations: np.ndarray
    labels: tuple[str, ...]
    row_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim != 2:
            raise PanelError(f"observations must be 2-D, got shape {obs.shape}")
        t_len, m_dim = obs.shape
        if t_len < 1 or m_dim < 1:
            raise PanelError(f"panel must have T >= 1 and m >= 1, got {obs.shape}")
        if not np.all(np.isfinite(obs)):
            r, c = np.argwhere(~np.isfinite(obs))[0]
            raise PanelError(f"missing value at row {r + 1}, column {c + 1}")
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != m_dim:
            raise PanelError(f"{len(labels)} labels for {m_dim} series")
        if len(set(labels)) != len(labels):
            raise PanelError(f"series labels must be unique: {labels}")
        if self.row_labels is not None and len(self.row_labels) != t_len:
            raise PanelError(f"{len(self.row_labels)} row labels for {t_len} rows")
        object.__setattr__(self, "observations", _frozen(obs))
        object.__setattr__(self, "labels", labels)
        if self.row_labels is not None:
            object.__setattr__(self, "row_labels", tuple(str(s) for s in self.row_labels))

    @property
    def t_len(self) -> int:
        return self.observations.shape[0]

    @property
    def m_dim(self) -> int:
        return self.observations.shape[1]

    @classmethod
    def from_array(cls, data, labels: Sequence[str] | None = None) -> "Panel":
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if labels is None:
            labels = [f"y{j + 1}" for j in range(data.shape[1])]
        return cls(data, tuple(labels))

    def select(self, columns: Sequence[int]) -> "Panel":
        return Panel(
            self.observations[:, list(columns)],
            tuple(self.labels[j] for j in columns),
            self.row_labels,
        )


@dataclass(frozen=True, eq=False)
class StandardizedPanel:
    """A panel whose columns have unit sample variance.

    ``scales`` holds the raw per-series standard deviations, so
    ``panel.observations * scales`` recovers the raw data.
    """

    panel: Panel
    scales: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        scales = np.asarray(self.scales, dtype=float)
        if scales.shape != (self.panel.m_dim,):
            raise PanelError(f"expected {self.panel.m_dim} scales, got shape {scales.shape}")
        if np.any(scales <= 0):
            raise PanelError("scales must be strictly positive")
        object.__setattr__(self, "scales", _frozen(scales))

    @property
    def observations(self) -> np.ndarray:
        return self.panel.observations

    @property
    def labels(self) -> tuple[str, ...]:
        return self.panel.labels

    @property
    def t_len(self) -> int:
        return self.panel.t_len

    @property
    def m_dim(self) -> int:
        return self.panel.m_dim


def load_panel(
    path,
    has_header: bool = True,
    date_column: bool = False,
    require_var: bool = False,
) -> Panel:
    """Read a rectangular numeric CSV into a :class:`Panel`.

    Args:
        path: CSV file (UTF-8, comma separated, '.' decimal point).
        has_header: First row holds series labels.
        date_column: First column holds opaque row labels, excluded from
            the numeric data.
        require_var: Reject panels with fewer than two series.

    Raises:
        PanelError: missing file, ragged rows, blank or non-numeric cells.
    """
    path = Path(path)
    if not path.is_file():
        raise PanelError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise PanelError(f"{path}: empty file")

    header = None
    if has_header:
        header, rows = rows[0], rows[1:]
    if not rows:
        raise PanelError(f"{path}: no data rows")

    width = len(header) if header is not None else len(rows[0])
    offset = 1 if date_column else 0
    values = []
    row_labels = [] if date_column else None
    # row numbers in messages are 1-based data rows; columns are 1-based data columns
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise PanelError(f"{path}: ragged row {r}: expected {width} cells, found {len(row)}")
        if date_column:
            row_labels.append(row[0].strip())
        parsed = []
        for c, cell in enumerate(row[offset:], start=1):
            cell = cell.strip()
            if cell == "":
                raise PanelError(f"{path}: missing value at row {r}, column {c}")
            try:
                x = float(cell)
            except ValueError:
                raise PanelError(f"{path}: non-numeric value {cell!r} at row {r}, column {c}") from None
            if not math.isfinite(x):
                raise PanelError(f"{path}: missing value at row {r}, column {c}")
            parsed.append(x)
        values.append(parsed)

    m_dim = width - offset
    if m_dim < 1:
        raise PanelError(f"{path}: no numeric columns")
    if require_var and m_dim < 2:
        raise PanelError(f"{path}: a VAR needs at least 2 data columns, found {m_dim}")
    if header is not None:
        labels = tuple(h.strip() for h in header[offset:])
    else:
        labels = tuple(f"y{j + 1}" for j in range(m_dim))
    return Panel(np.array(values, dtype=float), labels, tuple(row_labels) if row_labels is not None else None)


def write_panel(panel: Panel, path, date_header: str = "date") -> None:
    """Write a panel as CSV; values use ``repr`` so reloading is exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = list(panel.labels)
        if panel.row_labels is not None:
            head = [date_header] + head
        w.writerow(head)
        for t in range(panel.t_len):
            row = [repr(float(x)) for x in panel.observations[t]]
            if panel.row_labels is not None:
                row = [panel.row_labels[t]] + row
            w.writerow(row)


def standardize(panel: Panel | StandardizedPanel) -> StandardizedPanel:
    """Scale every column to unit sample variance (denominator T-1).

    The mean is kept; the VAR intercept absorbs location.
    """
    if isinstance(panel, StandardizedPanel):
        panel = panel.panel
    if panel.t_len < 2:
        raise PanelError("standardization needs at least 2 observations")
    sd = panel.observations.std(axis=0, ddof=1)
    bad = [panel.labels[j] for j in range(panel.m_dim) if not sd[j] > 0]
    if bad:
        raise PanelError(f"zero-variance series cannot be standardized: {', '.join(bad)}")
    scaled = Panel(panel.observations / sd, panel.labels, panel.row_labels)
    return StandardizedPanel(scaled, sd)


def residualize_on_factor(panel: Panel, factor) -> Panel:
    """Replace each column by its OLS residuals on ``[1, factor]``."""
    factor = np.asarray(factor, dtype=float).ravel()
    if factor.shape[0] != panel.t_len:
        raise PanelError(f"factor has length {factor.shape[0]}, panel has T={panel.t_len}")
    if np.ptp(factor) == 0:
        raise PanelError("factor is constant and collinear with the intercept")
    design = np.column_stack([np.ones_like(factor), factor])
    coef, *_ = np.linalg.lstsq(design, panel.observations, rcond=None)
    resid = panel.observations - design @ coef
    return Panel(resid, panel.labels, panel.row_labels)
