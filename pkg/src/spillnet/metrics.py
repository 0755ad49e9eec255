"""Spillover indices, degree counts and table/graph export."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from spillnet.decomposition import FevdTable
from spillnet.errors import SpillnetError


@dataclass(frozen=True, eq=False)
class SpilloverSummary:
    """Indices in percent; row i receives, column j sends.

    Attributes:
        total_index: Sum of off-diagonal shares divided by m, in percent.
        fix: FROM index, off-diagonal row sums.
        tix: TO index, off-diagonal column sums.
        nix: tix - fix.
        in_deg: Selected incoming edges per row.
        out_deg: Selected outgoing edges per column.
    """

    total_index: float
    fix: np.ndarray
    tix: np.ndarray
    nix: np.ndarray
    in_deg: np.ndarray
    out_deg: np.ndarray

    def to_dict(self, labels=None) -> dict:
        doc = {
            "total_index": self.total_index,
            "fix": self.fix.tolist(),
            "tix": self.tix.tolist(),
            "nix": self.nix.tolist(),
            "in_deg": self.in_deg.tolist(),
            "out_deg": self.out_deg.tolist(),
        }
        if labels is not None:
            doc["labels"] = list(labels)
        return doc


def _shares(table) -> np.ndarray:
    return np.asarray(table.shares if isinstance(table, FevdTable) else table, dtype=float)


def _mask_for(shares: np.ndarray, mask) -> np.ndarray:
    m = shares.shape[0]
    if mask is None:
        return np.ones((m, m), dtype=int)
    mask = np.asarray(mask)
    if mask.shape != shares.shape:
        raise SpillnetError(f"mask has shape {mask.shape}, table has shape {shares.shape}")
    mask = (mask != 0).astype(int)
    np.fill_diagonal(mask, 1)
    return mask


def spillover_summary(table, mask=None, use_mask: bool = True) -> SpilloverSummary:
    """FIX/TIX/NIX, total index and degrees.

    Args:
        table: :class:`FevdTable` or an m x m array of shares (fractions).
        mask: 0/1 edge indicator; None means every edge is kept.
        use_mask: Compute the indices on the masked table (pruned cells count
            as zero). With False the indices use the dense table while the
            degrees still come from ``mask``.
    """
    shares = _shares(table)
    if shares.ndim != 2 or shares.shape[0] != shares.shape[1]:
        raise SpillnetError(f"table must be square, got shape {shares.shape}")
    mask = _mask_for(shares, mask)
    m = shares.shape[0]
    off = ~np.eye(m, dtype=bool)
    work = shares * mask if use_mask else shares
    work = np.where(off, work, 0.0) * 100.0
    fix = work.sum(axis=1)
    tix = work.sum(axis=0)
    edges = np.where(off, mask, 0)
    return SpilloverSummary(
        total_index=float(work.sum() / m),
        fix=fix,
        tix=tix,
        nix=tix - fix,
        in_deg=edges.sum(axis=1),
        out_deg=edges.sum(axis=0),
    )


def _labels(m: int, labels) -> list[str]:
    if labels is None:
        return [f"y{i + 1}" for i in range(m)]
    labels = [str(x) for x in labels]
    if len(labels) != m:
        raise SpillnetError(f"{len(labels)} labels for {m} series")
    return labels


def table_csv(table, mask=None, labels=None, use_mask: bool = True) -> str:
    """Percent table with one decimal, a FIX column and TIX/IN/OUT rows.

    Cells are shown unmasked; the mask only enters through the indices and
    degrees. The TIX row ends with the total index.
    """
    shares = _shares(table)
    m = shares.shape[0]
    names = _labels(m, labels)
    summ = spillover_summary(shares, mask, use_mask)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["to/from", *names, "FIX"])
    for i in range(m):
        w.writerow([names[i], *(f"{100 * v:.1f}" for v in shares[i]), f"{summ.fix[i]:.1f}"])
    w.writerow(["TIX", *(f"{v:.1f}" for v in summ.tix), f"{summ.total_index:.1f}"])
    w.writerow(["IN", *(str(v) for v in summ.in_deg), ""])
    w.writerow(["OUT", *(str(v) for v in summ.out_deg), ""])
    return buf.getvalue()


def read_table_csv(text: str) -> tuple[list[str], np.ndarray]:
    """Parse the share block of :func:`table_csv` back into fractions."""
    rows = list(csv.reader(io.StringIO(text)))
    names = rows[0][1:-1]
    m = len(names)
    shares = np.array([[float(c) for c in r[1 : m + 1]] for r in rows[1 : m + 1]]) / 100.0
    return names, shares


def table_json(table, mask=None, labels=None, use_mask: bool = True) -> str:
    shares = _shares(table)
    m = shares.shape[0]
    doc = {
        "labels": _labels(m, labels),
        "shares": shares.tolist(),
        "mask": _mask_for(shares, mask).tolist(),
        "summary": spillover_summary(shares, mask, use_mask).to_dict(),
        "indices_on": "masked" if use_mask else "dense",
    }
    return json.dumps(doc, sort_keys=True)


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def table_dot(table, mask=None, labels=None, use_mask: bool = True) -> str:
    """Directed graph: edge j -> i for every selected off-diagonal cell (i, j).

    Edges carry ``weight`` (the share); nodes carry ``mass`` (TIX + FIX, in
    percent) and ``net_sign`` (+1, 0 or -1 for NIX).
    """
    shares = _shares(table)
    m = shares.shape[0]
    names = _labels(m, labels)
    mask = np.zeros((m, m), dtype=int) if mask is None else _mask_for(shares, mask)
    summ = spillover_summary(shares, mask, use_mask)
    lines = ["digraph spillover {"]
    for i, name in enumerate(names):
        mass = float(summ.tix[i] + summ.fix[i])
        sign = int(np.sign(round(summ.nix[i], 12)))
        lines.append(f"  {_dot_id(name)} [mass={mass!r}, net_sign={sign}];")
    for i in range(m):
        for j in range(m):
            if i != j and mask[i, j]:
                lines.append(f"  {_dot_id(names[j])} -> {_dot_id(names[i])} [weight={float(shares[i, j])!r}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


EXPORTERS = {"csv": table_csv, "json": table_json, "dot": table_dot}


def export_table(table, mask, path, fmt: str | None = None, labels=None, use_mask: bool = True) -> Path:
    """Write the table as csv, json or dot (format taken from the suffix if not given).

    For dot, ``mask=None`` means no edges.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt not in EXPORTERS:
        raise SpillnetError(f"unknown export format {fmt!r}; choose csv, json or dot")
    text = EXPORTERS[fmt](table, mask, labels, use_mask)
    try:
        path.write_text(text)
    except OSError as exc:
        raise SpillnetError(f"cannot write {path}: {exc.strerror}") from exc
    return path
