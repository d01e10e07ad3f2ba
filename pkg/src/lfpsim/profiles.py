"""Applied current profiles (A/m^2, discharge positive)."""
from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .params import Direction, ParameterSet


@dataclass(frozen=True)
class ConstantCRate:
    rate: float
    direction: Direction = Direction.DISCHARGE

    def __post_init__(self):
        if not np.isfinite(self.rate) or self.rate < 0:
            raise ConfigError("C-rate must be finite and nonnegative")
        object.__setattr__(self, "direction", Direction.parse(self.direction))

    def current(self, t: float, params: ParameterSet) -> float:
        sign = 1.0 if self.direction is Direction.DISCHARGE else -1.0
        return sign * self.rate * params.i_1c

    def end_time(self) -> float | None:
        return 3600.0 / self.rate if self.rate > 0 else None


@dataclass(frozen=True)
class PiecewiseSchedule:
    """Step profile: ``steps[i] = (t_start, I)`` holds until the next start.

    Past the last start the final value is held.
    """

    steps: tuple

    def __post_init__(self):
        steps = tuple((float(t), float(i)) for t, i in self.steps)
        if not steps:
            raise ConfigError("schedule needs at least one step")
        times = [t for t, _ in steps]
        if times[0] != 0.0:
            raise ConfigError("schedule must start at t = 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("schedule times must be strictly increasing")
        if not all(np.isfinite(i) for _, i in steps):
            raise ConfigError("schedule currents must be finite")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "_times", times)

    @classmethod
    def from_csv(cls, path) -> "PiecewiseSchedule":
        """Read ``t_start_s, current_A_m2`` rows; lines starting with '#' are ignored."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"schedule file not found: {path}")
        rows = []
        with path.open(newline="") as fh:
            for row in csv.reader(line for line in fh if not line.lstrip().startswith("#")):
                if not row:
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise ConfigError(f"bad schedule row {row!r} in {path}") from None
                    # header line
        return cls(tuple(rows))

    def current(self, t: float, params: ParameterSet | None = None) -> float:
        k = bisect.bisect_right(self._times, t) - 1
        return self.steps[max(k, 0)][1]

    def end_time(self) -> float | None:
        return self._times[-1] if len(self._times) > 1 else None


def profile_eval(profile, t: float, params: ParameterSet | None = None) -> float:
    if t < 0:
        raise ConfigError("profile time must be nonnegative")
    return profile.current(t, params or ParameterSet())


def make_profile(spec: dict, base_dir: Path | None = None):
    """Build a profile from its config mapping."""
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return ConstantCRate(float(spec.get("rate", 1.0)), Direction.parse(spec.get("direction", "discharge")))
    if kind == "schedule":
        if "steps" in spec and spec["steps"] is not None:
            return PiecewiseSchedule(tuple(tuple(s) for s in spec["steps"]))
        path = spec.get("file")
        if not path:
            raise ConfigError("schedule profile needs 'steps' or 'file'")
        path = Path(path)
        if not path.is_absolute() and base_dir is not None and not path.exists():
            path = base_dir / path
        if not path.exists():
            bundled = Path(__file__).parent / "data" / path.name
            if bundled.exists():
                path = bundled
        return PiecewiseSchedule.from_csv(path)
    raise ConfigError(f"unknown profile kind {kind!r}")
