"""State containers shared by the constraint solver and the integrator."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass
class PotentialField:
    """Nodal potentials: phi1 on [0, L] (phi1[0] is grounded), phi2 on [L1, L]."""

    phi1: np.ndarray
    phi2: np.ndarray
    anchor: float

    def copy(self) -> "PotentialField":
        return PotentialField(self.phi1.copy(), self.phi2.copy(), float(self.anchor))


@dataclass
class CellState:
    """Electrolyte nodal values c1 (n_x,), solid mode coefficients cs (3, n_c, n_modes)."""

    c1: np.ndarray
    cs: np.ndarray
    phi: PotentialField | None = None

    def copy(self) -> "CellState":
        return CellState(self.c1.copy(), self.cs.copy(), None if self.phi is None else self.phi.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.c1, self.cs.ravel()])

    @classmethod
    def from_flat(cls, y, n_x, shape, phi=None) -> "CellState":
        y = np.asarray(y, dtype=float)
        return cls(y[:n_x].copy(), y[n_x:].reshape(shape).copy(), phi)

    def with_phi(self, phi) -> "CellState":
        return replace(self, phi=phi)
