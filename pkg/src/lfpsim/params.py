"""Physical parameters, saturation/observer settings and rate corrections."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError


class Direction(enum.Enum):
    CHARGE = "charge"
    DISCHARGE = "discharge"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, Direction):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown direction {value!r}") from None

    @classmethod
    def of_current(cls, current: float, previous: "Direction") -> "Direction":
        # discharge is positive current; rest keeps the last direction
        if current > 0:
            return cls.DISCHARGE
        if current < 0:
            return cls.CHARGE
        return previous


@dataclass(frozen=True)
class ParameterSet:
    """Cell constants in SI units. Region-specific values carry _sep/_cat."""

    l_cat: float = 72e-6
    l_sep: float = 675e-6
    R_bin: tuple = (1.44e-7, 2.70e-7, 5.42e-7)
    R_gas: float = 8.3145
    F: float = 96485.0
    t_plus0: float = 0.363
    eps_e_sep: float = 0.6
    eps_e_cat: float = 0.5
    k_eff_sep: float = 0.6042
    k_eff_cat: float = 0.4596
    sigma_eff: float = 6.75
    De_eff_sep: float = 4.028e-10
    De_eff_cat: float = 3.677e-10
    D_solid: float = 4.21e-18
    c_s_max: float = 22.860e3
    i0: float = 3.25e-2
    T: float = 298.15
    c_ini: float = 1000.0
    i_f: float = 10.0
    beta_f: float = 0.5
    eps_s_bin: tuple = (1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0)
    area: float = 1.202e-4
    capacity: float = 2.31e-3 * 3600.0

    def __post_init__(self):
        object.__setattr__(self, "R_bin", tuple(float(r) for r in self.R_bin))
        object.__setattr__(self, "eps_s_bin", tuple(float(e) for e in self.eps_s_bin))
        if len(self.R_bin) != 3 or len(self.eps_s_bin) != 3:
            raise ConfigError("R_bin and eps_s_bin need exactly three entries")
        positive = (
            "l_cat", "l_sep", "R_gas", "F", "k_eff_sep", "k_eff_cat", "sigma_eff",
            "De_eff_sep", "De_eff_cat", "D_solid", "c_s_max", "T", "c_ini",
            "i_f", "area", "capacity",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")
        if self.i0 < 0:
            raise ConfigError("i0 must be nonnegative")
        if any(r <= 0 for r in self.R_bin):
            raise ConfigError("particle radii must be strictly positive")
        if any(e <= 0 for e in self.eps_s_bin) or sum(self.eps_s_bin) > 1.0 + 1e-12:
            raise ConfigError("eps_s_bin entries must be positive with sum <= 1")
        for name in ("t_plus0", "beta_f", "eps_e_sep", "eps_e_cat"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")

    @property
    def L1(self) -> float:
        return self.l_sep

    @property
    def L(self) -> float:
        return self.l_sep + self.l_cat

    @property
    def a_bin(self) -> np.ndarray:
        """Specific interfacial area 3*eps_s/R per bin (1/m)."""
        return 3.0 * np.asarray(self.eps_s_bin) / np.asarray(self.R_bin)

    @property
    def i_1c(self) -> float:
        """Current density (A/m^2) that passes the nominal capacity in one hour."""
        return self.capacity / (3600.0 * self.area)

    @property
    def kappa_d(self) -> float:
        """Linearized diffusion-potential coefficient 2RT(1-t+)/(F c_ini), V m^3/mol."""
        return 2.0 * self.R_gas * self.T * (1.0 - self.t_plus0) / (self.F * self.c_ini)

    @property
    def solid_capacity(self) -> float:
        """Lithium the cathode solid can hold per electrode area, mol/m^2."""
        return sum(self.eps_s_bin) * self.l_cat * self.c_s_max


@dataclass(frozen=True)
class SaturationParams:
    g: float = 1.0
    h0: float = 2.0
    h1: float = 3.0
    a0: float = 1.0
    b0: float = 2.0251
    eps0: float = 1e-4

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"saturation parameter {f.name} must be strictly positive")


# omega0, omega1, omega2 (discharge), omega3, omega4 (charge) by C-rate
DEFAULT_RATE_TABLE = {
    2.0: (1.1, 1.2, 1.0, 1.5, 1.95),
    1.0: (0.9, 0.96, 0.8, 1.0, 1.3),
    0.5: (1.0, 0.6, 0.5, 0.75, 0.75),
    0.2: (1.2, 0.4, 0.3, 0.85, 0.35),
    0.1: (1.3, 0.3, 0.3, 1.0, 0.4),
}


@dataclass(frozen=True)
class RateCorrections:
    table: dict = field(default_factory=lambda: dict(DEFAULT_RATE_TABLE))
    fallback: bool = True

    def __post_init__(self):
        clean = {}
        for rate, row in self.table.items():
            row = tuple(float(w) for w in row)
            if len(row) != 5 or any(w <= 0 for w in row):
                raise ConfigError(f"rate row {rate}: need five positive coefficients")
            clean[float(rate)] = row
        if not clean:
            raise ConfigError("rate correction table is empty")
        object.__setattr__(self, "table", clean)

    def lookup(self, rate: float) -> tuple:
        rate = abs(float(rate))
        for key, row in self.table.items():
            if abs(key - rate) <= 1e-9 * max(1.0, key):
                return row
        if not self.fallback:
            raise ConfigError(f"C-rate {rate:g} not tabulated and fallback disabled")
        nearest = min(self.table, key=lambda k: (abs(k - rate), k))
        return self.table[nearest]
