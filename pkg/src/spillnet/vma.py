"""Truncated moving-average coefficients of a VAR."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from spillnet.errors import DecompositionError


@dataclass(frozen=True, eq=False)
class VmaSequence:
    """psi[h] is the h-th moving-average matrix, h = 0..H-1; psi[0] = I."""

    psi: np.ndarray

    @property
    def horizon(self) -> int:
        return self.psi.shape[0]

    @property
    def m_dim(self) -> int:
        return self.psi.shape[1]

    def to_json(self) -> str:
        return json.dumps({"horizon": self.horizon, "psi": self.psi.tolist()})


def vma_coefficients(phi, horizon: int) -> VmaSequence:
    """Psi_0 = I, Psi_l = sum_{k=1..p} Phi_k Psi_{l-k} (Psi_j = 0 for j < 0)."""
    if horizon < 1:
        raise DecompositionError(f"horizon must be >= 1, got {horizon}")
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 2:
        phi = phi[None]
    p, m, _ = phi.shape
    psi = np.zeros((horizon, m, m))
    psi[0] = np.eye(m)
    for l in range(1, horizon):
        acc = np.zeros((m, m))
        for k in range(1, min(p, l) + 1):
            acc += phi[k - 1] @ psi[l - k]
        psi[l] = acc
    psi.setflags(write=False)
    return VmaSequence(psi)
