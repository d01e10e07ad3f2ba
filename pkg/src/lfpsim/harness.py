"""Configuration, single runs, CSV trajectories and the batch studies."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import io
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .basis import Discretization
from .dynamics import CellModel, IntegratorConfig, Record, RunSummary, Simulation
from .errors import ConfigError, LfpsimError
from .params import Direction, ParameterSet, RateCorrections, SaturationParams
from .profiles import ConstantCRate, make_profile

log = logging.getLogger(__name__)

CSV_MAGIC = "# lfpsim-trajectory v1"
COLUMNS = ("t_s", "I_A_m2", "V_V", "soc", "y_surf_1", "y_surf_2", "y_surf_3", "c_e_0_mol_m3",
           "c_e_L_mol_m3", "charge_C_m2", "residual", "newton_iters")

_PARAM_KEYS = {f.name for f in dataclasses.fields(ParameterSet)}
_SAT_KEYS = {f.name for f in dataclasses.fields(SaturationParams)}

DEFAULTS = {
    "params": {},
    "saturation": {},
    "grid": {"N1": 4, "N2": 4, "N3": 6, "n_quad": None},
    "integrator": {"dt": 0.5, "Dt": 3.0, "method": "rk4", "rtol": 1e-6, "atol": 1e-9,
                   "residual_trigger": 1e-3},
    "profile": {"kind": "constant", "rate": 1.0, "direction": "discharge", "steps": None, "file": None},
    "stop": {"t_end": None, "v_min": 2.0, "v_max": 4.2},
    "model": {"stoich_mode": "logistic", "rate_corrections": False, "rate_table": None,
              "soc_init": None, "c_e_init": None},
    "output": {"path": None, "wall_clock": False},
}


def _merge(base: dict, update: dict, where="") -> dict:
    out = copy.deepcopy(base)
    for key, val in (update or {}).items():
        path = f"{where}{key}"
        if key not in out:
            allowed = {"params": _PARAM_KEYS, "saturation": _SAT_KEYS}.get(where.rstrip("."))
            if allowed is None or key not in allowed:
                raise ConfigError(f"unknown config key {path!r}")
            out[key] = val
        elif isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {path!r} must be a mapping")
            out[key] = _merge(out[key], val, path + ".")
        else:
            out[key] = val
    return out


def _number(val, key):
    # YAML 1.1 reads exponent forms without a dot (1e-10) as strings
    if isinstance(val, str):
        try:
            return float(val)
        except ValueError:
            raise ConfigError(f"{key} must be numeric, got {val!r}") from None
    return val


@dataclass(frozen=True)
class SimulationConfig:
    """Validated run configuration; ``raw`` keeps the full nested mapping."""

    raw: dict
    params: ParameterSet
    saturation: SaturationParams
    n_sep: int
    n_cat: int
    n_modes: int
    n_quad: int | None
    integrator: IntegratorConfig
    profile: object
    t_end: float
    v_window: tuple
    stoich_mode: str
    rate_corrections: RateCorrections | None
    soc_init: float
    c_e_init: float | None
    output: Path | None
    wall_clock_column: bool
    base_dir: Path | None = None

    @classmethod
    def from_dict(cls, data: dict | None = None, base_dir: Path | None = None) -> "SimulationConfig":
        raw = _merge(DEFAULTS, data or {})
        p = raw["params"]
        for section in (p, raw["saturation"]):
            for key, val in section.items():
                section[key] = _number(val, key)
        for key in ("R_bin", "eps_s_bin"):
            if key in p:
                p[key] = tuple(_number(v, key) for v in p[key])
        try:
            params = ParameterSet(**p)
            sat = SaturationParams(**raw["saturation"])
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        g = raw["grid"]
        n = {}
        for key in ("N1", "N2", "N3"):
            val = g[key]
            if not isinstance(val, int) or isinstance(val, bool) or val < 1:
                raise ConfigError(f"grid.{key} must be an integer >= 1")
            n[key] = val
        integ = {}
        for k, v in raw["integrator"].items():
            if k == "method":
                integ[k] = str(v)
            elif v is not None or k != "residual_trigger":
                try:
                    integ[k] = float(v)
                except (TypeError, ValueError):
                    raise ConfigError(f"integrator.{k} must be numeric") from None
            else:
                integ[k] = None
        integ = IntegratorConfig(**integ)
        profile = make_profile(raw["profile"], base_dir)
        s = raw["stop"]
        t_end = s["t_end"] if s["t_end"] is not None else profile.end_time()
        if t_end is None or not (float(t_end) > 0 and math.isfinite(float(t_end))):
            raise ConfigError("stop.t_end is required when the profile has no natural end")
        v_window = (float(s["v_min"]), float(s["v_max"]))
        if not v_window[0] < v_window[1]:
            raise ConfigError("stop.v_min must be below stop.v_max")
        m = raw["model"]
        if m["stoich_mode"] not in ("logistic", "clamp"):
            raise ConfigError("model.stoich_mode must be 'logistic' or 'clamp'")
        rc = None
        if m["rate_corrections"]:
            rc = RateCorrections(m["rate_table"]) if m["rate_table"] else RateCorrections()
        soc_init = m["soc_init"]
        if soc_init is None:
            soc_init = 0.05 if _first_direction(profile, params) is Direction.CHARGE else 0.95
        soc_init = float(soc_init)
        if not 0.0 <= soc_init <= 1.0:
            raise ConfigError("model.soc_init must lie in [0, 1]")
        out = raw["output"]["path"]
        return cls(raw, params, sat, n["N1"], n["N2"], n["N3"], g["n_quad"], integ, profile,
                   float(t_end), v_window, m["stoich_mode"], rc, soc_init,
                   None if m["c_e_init"] is None else float(m["c_e_init"]),
                   None if out is None else Path(out), bool(raw["output"]["wall_clock"]), base_dir)

    @classmethod
    def load(cls, path) -> "SimulationConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict(data, path.parent)

    def with_overrides(self, assignments) -> "SimulationConfig":
        """Apply ``section.key=value`` strings; values are parsed as YAML scalars."""
        data = copy.deepcopy(self.raw)
        for item in assignments or ():
            key, sep, value = item.partition("=")
            if not sep or not key:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            parts = key.strip().split(".")
            try:
                parsed = yaml.safe_load(value)
            except yaml.YAMLError:
                raise ConfigError(f"cannot parse override value {value!r}") from None
            node = data
            for part in parts[:-1]:
                if part not in node or not isinstance(node[part], dict):
                    raise ConfigError(f"unknown config key {key!r}")
                node = node[part]
            node[parts[-1]] = parsed
        return SimulationConfig.from_dict(data, self.base_dir)

    def replace(self, **sections) -> "SimulationConfig":
        """Copy with whole sections updated, e.g. ``replace(grid={"N3": 8})``."""
        data = copy.deepcopy(self.raw)
        for name, update in sections.items():
            if name not in data:
                raise ConfigError(f"unknown config section {name!r}")
            data[name] = _merge(data[name], update, name + ".")
        return SimulationConfig.from_dict(data, self.base_dir)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def discretization(self) -> Discretization:
        return Discretization.build(self.params, self.saturation, self.n_sep, self.n_cat,
                                    self.n_modes, self.n_quad)


def _first_direction(profile, params) -> Direction:
    if isinstance(profile, ConstantCRate):
        return profile.direction
    for _, current in profile.steps:
        if current:
            return Direction.of_current(current, Direction.DISCHARGE)
    return Direction.DISCHARGE


# runs -----------------------------------------------------------------------

@dataclass
class RunResult:
    records: list
    summary: RunSummary
    checksum: str
    error: str | None = None


def _metadata_lines(cfg: SimulationConfig) -> list:
    p = cfg.params
    return [
        CSV_MAGIC,
        f"# foil/electrolyte defaults: i_f={p.i_f!r} A/m2, beta_f={p.beta_f!r}, c_ini={p.c_ini!r} mol/m3",
        f"# grid: N1={cfg.n_sep} N2={cfg.n_cat} N3={cfg.n_modes}; dt={cfg.integrator.dt!r} s, "
        f"Dt={cfg.integrator.Dt!r} s, method={cfg.integrator.method}",
        "# sign convention: positive current is discharge",
    ]


def _fmt(x) -> str:
    return repr(float(x))


def format_csv(records, cfg: SimulationConfig, diagnostic: str | None = None) -> str:
    buf = io.StringIO()
    for line in _metadata_lines(cfg):
        buf.write(line + "\n")
    cols = COLUMNS + (("wall_clock_s",) if cfg.wall_clock_column else ())
    buf.write(",".join(cols) + "\n")
    for r in records:
        row = [_fmt(r.t), _fmt(r.I), _fmt(r.V), _fmt(r.soc), *(_fmt(y) for y in r.y_surf),
               _fmt(r.c_e_0), _fmt(r.c_e_L), _fmt(r.charge), _fmt(r.residual), str(int(r.newton_iters))]
        if cfg.wall_clock_column:
            row.append(_fmt(r.wall_clock))
        buf.write(",".join(row) + "\n")
    if diagnostic:
        buf.write(f"# diagnostic: {diagnostic}\n")
    return buf.getvalue()


def write_atomic(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path) -> list:
    """Parse a trajectory file back into Records (wall_clock is NaN when absent)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_MAGIC:
        raise ConfigError(f"{path} is not an lfpsim trajectory file")
    body = [ln for ln in lines if not ln.startswith("#")]
    header = body[0].split(",")
    if tuple(header[:len(COLUMNS)]) != COLUMNS:
        raise ConfigError(f"unexpected columns in {path}")
    has_wall = len(header) > len(COLUMNS)
    out = []
    for ln in body[1:]:
        v = ln.split(",")
        out.append(Record(float(v[0]), float(v[1]), float(v[2]), float(v[3]),
                          (float(v[4]), float(v[5]), float(v[6])), float(v[7]), float(v[8]),
                          float(v[9]), float(v[10]), int(v[11]),
                          float(v[12]) if has_wall else float("nan")))
    return out


def checksum(records) -> str:
    """Hash of every deterministic record field (wall clock excluded)."""
    h = hashlib.sha256()
    for r in records:
        vals = [r.t, r.I, r.V, r.soc, *r.y_surf, r.c_e_0, r.c_e_L, r.charge, r.residual]
        h.update(np.asarray(vals, dtype="<f8").tobytes())
        h.update(int(r.newton_iters).to_bytes(4, "little"))
    return h.hexdigest()


def run(cfg: SimulationConfig, output=None, emit=None) -> RunResult:
    """Simulate one configuration; writes the CSV when an output path is set.

    On solver or numeric failure the partial trajectory is written with a
    trailing diagnostic row and the exception is re-raised.
    """
    disc = cfg.discretization()
    model = CellModel(disc, cfg.stoich_mode, cfg.rate_corrections)
    sim = Simulation(model, cfg.profile, cfg.integrator, cfg.soc_init, cfg.c_e_init, cfg.t_end,
                     cfg.v_window)
    records = []

    def sink(rec):
        records.append(rec)
        if emit:
            emit(rec)

    out = output if output is not None else cfg.output
    try:
        summary = sim.run(sink)
    except LfpsimError as exc:
        if out is not None:
            write_atomic(out, format_csv(records, cfg, f"{type(exc).__name__} at t={sim.t!r}: {exc}"))
        raise
    if out is not None:
        write_atomic(out, format_csv(records, cfg))
    return RunResult(records, summary, checksum(records))


def summary_dict(result: RunResult) -> dict:
    s = dataclasses.asdict(result.summary)
    s["checksum"] = result.checksum
    if result.records:
        s["final_voltage"] = result.records[-1].V
    return s


# studies --------------------------------------------------------------------

def _row_worker(args):
    cfg_dict, base_dir, out = args
    return run(SimulationConfig.from_dict(cfg_dict, base_dir), output=out)


def _run_many(cfgs, workers=1, out_paths=None):
    out_paths = out_paths or [None] * len(cfgs)
    if workers <= 1 or len(cfgs) <= 1:
        return [run(c, output=o) for c, o in zip(cfgs, out_paths)]
    jobs = [(c.to_dict(), c.base_dir, o) for c, o in zip(cfgs, out_paths)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_row_worker, jobs))


def _columns(records):
    t = np.array([r.t for r in records])
    return t, {
        "V": np.array([r.V for r in records]),
        "y_surf": np.array([r.y_surf for r in records]),
        "c_e": np.array([(r.c_e_0, r.c_e_L) for r in records]),
    }


def _on_common_grid(a_records, b_records):
    ta, ca = _columns(a_records)
    tb, cb = _columns(b_records)
    common, ia, ib = np.intersect1d(np.round(ta, 9), np.round(tb, 9), return_indices=True)
    return common, {k: ca[k][ia] for k in ca}, {k: cb[k][ib] for k in cb}


def rmse(a, b) -> float:
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def _row_path(out_dir, name):
    return None if out_dir is None else Path(out_dir) / f"{name}.csv"


def convergence_study(cfg: SimulationConfig, orders=(4, 6, 8), reference=30, workers=1, out_dir=None):
    """Voltage, surface-stoichiometry and electrolyte RMSE of each N3 against a reference order."""
    orders = [int(n) for n in orders]
    if reference <= max(orders):
        raise ConfigError("reference order must exceed every studied order")
    ns = orders + [int(reference)]
    cfgs = [cfg.replace(grid={"N3": n}) for n in ns]
    results = _run_many(cfgs, workers, [_row_path(out_dir, f"N3_{n}") for n in ns])
    ref = results[-1]
    rows = []
    for n, res in zip(ns, results):
        _, a, b = _on_common_grid(res.records, ref.records)
        rows.append({"N3": n, "rmse_V": rmse(a["V"], b["V"]), "rmse_y_surf": rmse(a["y_surf"], b["y_surf"]),
                     "rmse_c_e": rmse(a["c_e"], b["c_e"]), "wall_clock": res.summary.wall_clock,
                     "checksum": res.checksum})
    return rows


def dt_study(cfg: SimulationConfig, periods=(12.0, 6.0, 3.0, 1.0), reference=0.5, workers=1, out_dir=None):
    """Max and RMS voltage deviation of each correction period from a reference period."""
    periods = [float(d) for d in periods]
    if reference > min(periods):
        raise ConfigError("reference period must not exceed any studied period")
    ds = periods + [float(reference)]
    cfgs = [cfg.replace(integrator={"Dt": d}) for d in ds]
    results = _run_many(cfgs, workers, [_row_path(out_dir, f"Dt_{d:g}") for d in ds])
    ref = results[-1]
    rows = []
    for d, res in zip(ds, results):
        _, a, b = _on_common_grid(res.records, ref.records)
        dv = np.abs(a["V"] - b["V"])
        rows.append({"Dt": d, "max_dV": float(dv.max()), "rms_dV": rmse(a["V"], b["V"]),
                     "corrections": res.summary.corrections, "checksum": res.checksum})
    return rows


def timing_report(cfgs, labels=None, workers=1):
    """Wall clock against simulated duration for each configuration."""
    labels = labels or [str(i) for i in range(len(cfgs))]
    results = _run_many(list(cfgs), workers)
    rows = []
    for label, c, res in zip(labels, cfgs, results):
        s = res.summary
        rows.append({"label": label, "simulated_s": s.t_final, "wall_clock_s": s.wall_clock,
                     "ratio": s.wall_clock / s.t_final if s.t_final > 0 else float("nan"),
                     "corrections": s.corrections,
                     "expected_corrections": int(math.floor(s.t_final / c.integrator.Dt)),
                     "N3": c.n_modes, "checksum": res.checksum})
    return rows
