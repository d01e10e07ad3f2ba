"""Reduced ODE right-hand side, potential propagation, observer and time stepping.

Between corrections the potentials are carried as ODE states: their rate is
the chain rule of the implicit constraint map, with dI/dt supplied by the
saturated high-gain observer. Every ``Dt`` seconds (and whenever the current
changes sign) the constraints are re-solved and the potentials replaced.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from . import kernels
from .basis import Discretization
from .constraints import ConstraintSolver
from .errors import ConfigError, NumericError
from .kinetics import PLAIN_ALPHA, foil_potential, rated_alpha_coefficients
from .params import Direction, RateCorrections
from .state import CellState, PotentialField

log = logging.getLogger(__name__)

METHODS = ("rk4", "rk23", "algebraic")
BOUND_ABORT = 1e12


@dataclass
class ObserverState:
    xhat1: float  # current estimate, A/m^2
    xhat2: float  # derivative estimate, A/(m^2 s)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.5
    Dt: float = 3.0
    method: str = "rk4"
    rtol: float = 1e-6
    atol: float = 1e-9
    # extra correction when the constraint residual exceeds this times max(1, |I|); None disables
    residual_trigger: float | None = 1e-3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"integrator method must be one of {METHODS}")
        if self.residual_trigger is not None and not self.residual_trigger > 0:
            raise ConfigError("residual_trigger must be positive or null")
        if not (0 < self.dt <= self.Dt):
            raise ConfigError("need 0 < dt <= Dt")
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("tolerances must be positive")


# observer -----------------------------------------------------------------

def observer_matrices(sp):
    M = np.array([[-sp.g * sp.h1, 1.0], [-sp.g ** 2 * sp.h0, 0.0]])
    L = np.array([sp.g * sp.h1, sp.g ** 2 * sp.h0])
    return M, L


@lru_cache(maxsize=64)
def _foh_propagator(g, h0, h1, dt):
    # augmented state [x1, x2, u, du/dt] with a linear input over the step
    A = np.zeros((4, 4))
    A[0, 0], A[0, 1], A[0, 2] = -g * h1, 1.0, g * h1
    A[1, 0], A[1, 2] = -g * g * h0, g * g * h0
    A[2, 3] = 1.0
    return scipy.linalg.expm(A * dt)


def observer_step(obs: ObserverState, current: float, dt: float, sp, current_start=None) -> ObserverState:
    """Exact update over ``dt`` for an input linear from ``current_start`` to ``current``.

    Without ``current_start`` the input is held at ``current``.
    """
    if not dt > 0:
        raise ConfigError("observer step needs dt > 0")
    i0 = current if current_start is None else current_start
    E = _foh_propagator(sp.g, sp.h0, sp.h1, float(dt))
    z = E @ np.array([obs.xhat1, obs.xhat2, i0, (current - i0) / dt])
    return ObserverState(float(z[0]), float(z[1]))


# model ----------------------------------------------------------------------

class CellModel:
    """Discretized cell: right-hand side, potential rate, outputs."""

    def __init__(self, disc: Discretization, stoich_mode="logistic",
                 rate_corrections: RateCorrections | None = None):
        self.disc = disc
        self.params = disc.params
        self.sp = disc.sat_params
        self.solver = ConstraintSolver(disc, stoich_mode)
        self.stoich_mode = stoich_mode
        self.logistic = self.solver.logistic
        self.rate_corrections = rate_corrections
        p = self.params
        self.n_x = disc.n_x
        self.n_c = disc.n_c
        self.cs_shape = (3, disc.n_c, disc.n_modes)
        self.n_cs = int(np.prod(self.cs_shape))
        self.V, self.dV, self.wr2, self.inv_norm, self.surf = disc.stacked()
        self.norm = 1.0 / self.inv_norm
        s = disc.structs
        self.K = s.stiffness_eps_De
        self.m_lumped = s.mass_eps_lumped
        self.inj = s.injection
        self.cat_w = s.cathode_weights
        self.e_fac = (1.0 - p.t_plus0) / p.F
        R = np.asarray(p.R_bin)
        # surface source (R^2/F) v_m(R)/norm_m per bin and mode
        self.src_solid = (R ** 2 / p.F)[:, None] * self.surf * self.inv_norm
        self.inv_cmax = 1.0 / p.c_s_max
        self.eps_s = np.asarray(p.eps_s_bin)
        self._alpha_cache = {}

    # helpers
    def split(self, y):
        return y[:self.n_x], y[self.n_x:self.n_x + self.n_cs].reshape(self.cs_shape)

    def alpha_coef(self, direction: Direction, current: float) -> tuple:
        if self.rate_corrections is None:
            return PLAIN_ALPHA
        rate = abs(current) / self.params.i_1c
        key = (direction, rate)
        coef = self._alpha_cache.get(key)
        if coef is None:
            coef = rated_alpha_coefficients(direction, rate, self.rate_corrections)
            self._alpha_cache[key] = coef
        return coef

    def uniform_state(self, soc: float, c_e: float | None = None) -> CellState:
        if not 0.0 <= soc <= 1.0:
            raise ConfigError("initial soc must lie in [0, 1]")
        c1 = np.full(self.n_x, self.params.c_ini if c_e is None else float(c_e))
        cs = np.zeros(self.cs_shape)
        # mode 0 is the constant function
        cs[:, :, 0] = soc * self.params.c_s_max / self.surf[:, 0][:, None]
        return CellState(c1, cs)

    # right-hand side
    def rhs_terms(self, c1, cs, terms, current, alpha_coef, lam=0.0):
        """State derivative given precomputed reaction terms."""
        load = self.e_fac * (current * self.inj)
        load[self.solver.N1:] += self.e_fac * (self.cat_w * terms.q)
        stiff = self.K @ c1
        if lam:
            mc = lam * (self.m_lumped * c1)
            stiff = (stiff + mc) - mc
        c1dot = (load - stiff) / self.m_lumped
        flux = kernels.solid_flux(cs, self.V, self.dV, self.wr2, self.inv_norm, self.params.D_solid,
                                  self.inv_cmax, self.sp.a0, self.logistic, alpha_coef)
        if lam:
            n = lam * self.nonlinear_projection(cs)
            flux = (flux + n) - n
        csdot = self.src_solid[:, None, :] * terms.ibar[:, :, None] - flux
        if not np.all(np.isfinite(c1dot)):
            raise NumericError("non-finite electrolyte rate")
        if not np.all(np.isfinite(csdot)):
            raise NumericError("non-finite solid rate")
        return c1dot, csdot

    def nonlinear_projection(self, cs):
        """Projection of the reconstructed concentration field onto each mode."""
        c = np.einsum("bnm,bqm->bnq", cs, self.V)
        return np.einsum("bnq,bq,bqm->bnm", c, self.wr2, self.V) * self.inv_norm[:, None, :]

    def energy(self, cs, alpha_coef=PLAIN_ALPHA) -> float:
        """Discrete analogue of the weighted gradient seminorm of the solid field."""
        flux = kernels.solid_flux(cs, self.V, self.dV, self.wr2, self.inv_norm, 1.0,
                                  self.inv_cmax, self.sp.a0, self.logistic, alpha_coef)
        return float(np.sqrt(max(0.0, np.sum(cs * flux * self.norm[:, None, :]))))

    def rhs(self, state: CellState, phi: PotentialField, current, direction=Direction.DISCHARGE,
            lam=0.0):
        u = self.solver.pack(phi)
        terms = self.solver.reaction_terms(state.cs, u, direction)
        return self.rhs_terms(state.c1, state.cs, terms, current,
                              self.alpha_coef(direction, current), lam)

    def augmented_rate(self, z, current, didt, direction, alpha_coef):
        """d/dt of [c1, cs, u] with the potentials propagated by the chain rule."""
        c1, cs = self.split(z)
        u = z[self.n_x + self.n_cs:]
        sol = self.solver
        terms = sol.reaction_terms(cs, u, direction)
        c1dot, csdot = self.rhs_terms(c1, cs, terms, current, alpha_coef)
        b = sol.state_derivative(terms, c1dot, csdot)
        b[-1] += didt
        J = sol.jacobian_from(terms)
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(b))):
            raise NumericError("non-finite potential propagation")
        try:
            udot = -np.linalg.solve(J, b)
        except np.linalg.LinAlgError:
            raise NumericError("singular constraint Jacobian during propagation") from None
        return np.concatenate([c1dot, csdot.ravel(), udot])

    # outputs
    def c1_at_zero(self, c1) -> float:
        return self.solver.c1_at_zero(c1)

    def cell_voltage(self, c1, u, current) -> float:
        phi2_L = u[self.solver.sl_phi2][-1]
        return float(phi2_L - foil_potential(current, self.c1_at_zero(c1), self.params))

    def soc(self, cs) -> float:
        c0 = cs[:, :, 0] * self.surf[:, 0][:, None]
        total = self.eps_s @ (c0 @ self.cat_w)
        return float(total / (self.eps_s.sum() * self.cat_w.sum() * self.params.c_s_max))

    def surface_stoich_at_L(self, cs):
        c = np.einsum("bm,bm->b", cs[:, -1, :], self.surf)
        r = c * self.inv_cmax
        if self.logistic:
            return 1.0 / (1.0 + np.exp(-self.sp.a0 * r))
        return np.clip(r, 1e-6, 1.0 - 1e-6)

    def electrolyte_inventory(self, c1) -> float:
        """Integral of eps_e * c1 under the lumped mass."""
        return float(self.m_lumped @ c1)

    def solid_inventory(self, cs) -> float:
        """Solid lithium per electrode area, mol/m^2."""
        c0 = cs[:, :, 0] * self.surf[:, 0][:, None]
        return float(self.eps_s @ (c0 @ self.cat_w))

    def min_concentration(self, cs) -> float:
        return float(np.min(np.einsum("bnm,bqm->bnq", cs, self.V)))


# functional API ------------------------------------------------------------

def rhs(model: CellModel, state: CellState, phi: PotentialField, current, direction=Direction.DISCHARGE,
        lam=0.0):
    return model.rhs(state, phi, current, direction, lam)


def potential_rate(model: CellModel, state: CellState, phi: PotentialField, current, didt,
                   dc1, dcs, sensitivities=None, direction=Direction.DISCHARGE):
    """Chain-rule rate X dc/dt + w dI/dt, unpacked to a PotentialField."""
    sens = sensitivities or model.solver.sensitivity(state.c1, state.cs, model.solver.pack(phi),
                                                     current, direction)
    du = sens.apply(dc1, dcs) + sens.w * didt
    return model.solver.unpack(du)


def cell_voltage(model: CellModel, state: CellState, current) -> float:
    return model.cell_voltage(state.c1, model.solver.pack(state.phi), current)


def soc(model: CellModel, state: CellState) -> float:
    return model.soc(state.cs)


# integrator -----------------------------------------------------------------

@dataclass
class Record:
    t: float
    I: float
    V: float
    soc: float
    y_surf: tuple
    c_e_0: float
    c_e_L: float
    charge: float
    residual: float
    newton_iters: int
    wall_clock: float


@dataclass
class RunSummary:
    t_final: float
    final_soc: float
    total_coulombs: float
    wall_clock: float
    corrections: int
    steps: int
    stop_reason: str
    electrolyte_drift: float
    solid_change: float
    newton_failures: int = 0
    triggered_corrections: int = 0


class Simulation:
    """Drives one run: state, observer, correction schedule and record emission."""

    def __init__(self, model: CellModel, profile, cfg: IntegratorConfig, soc_init: float,
                 c_e_init: float | None = None, t_end: float | None = None,
                 v_window=(2.0, 4.2)):
        self.model = model
        self.profile = profile
        self.cfg = cfg
        self.params = model.params
        self.sp = model.sp
        self.t_end = t_end
        self.v_window = v_window
        state = model.uniform_state(soc_init, c_e_init)
        self.c = np.concatenate([state.c1, state.cs.ravel()])
        self.t = 0.0
        I0 = self.current(0.0)
        self.direction = Direction.of_current(I0, getattr(profile, "direction", Direction.DISCHARGE))
        self.obs = ObserverState(I0, 0.0)
        self.u = None
        self.last_iters = 0
        self.corrections = 0
        self.triggered = 0
        self.steps = 0
        self.charge = 0.0
        self._warned_negative = False
        self._elapsed = 0.0
        self.newton_failures = 0

    def current(self, t):
        return self.profile.current(t, self.params)

    def initialize(self):
        """Solve the initial potentials from the equilibrium guess (idempotent)."""
        if self.u is None:
            self.u = self._solve(self.c, self.current(self.t), None)
        return self

    @property
    def state(self) -> CellState:
        c1, cs = self.model.split(self.c)
        phi = None if self.u is None else self.model.solver.unpack(self.u)
        return CellState(c1.copy(), cs.copy(), phi)

    # pieces
    def _solve(self, c, current, guess, check_cond=False):
        c1, cs = self.model.split(c)
        u, info = self.model.solver.solve(c1, cs, current, self.direction, guess, check_cond)
        self.last_iters = info.iterations
        if check_cond:
            log.debug("t=%g Jacobian condition %.3e", self.t, info.condition)
        return u

    def correct(self):
        self.u = self._solve(self.c, self.current(self.t), self.u, check_cond=True)
        self.corrections += 1
        self._elapsed = 0.0

    def residual_norm(self, current) -> float:
        c1, cs = self.model.split(self.c)
        return float(np.max(np.abs(self.model.solver.residual(c1, cs, self.u, current, self.direction))))

    def record(self, wall0, residual=None) -> Record:
        m = self.model
        c1, cs = m.split(self.c)
        I = self.current(self.t)
        y = m.surface_stoich_at_L(cs)
        if residual is None:
            residual = self.residual_norm(I)
        return Record(self.t, I, m.cell_voltage(c1, self.u, I), m.soc(cs), tuple(float(v) for v in y),
                      m.c1_at_zero(c1), float(c1[-1]), self.charge, residual,
                      self.last_iters, time.perf_counter() - wall0)

    def _observer_stages(self, t, h):
        I0, Im, I1 = self.current(t), self.current(t + 0.5 * h), self.current(t + h)
        om = observer_step(self.obs, Im, 0.5 * h, self.sp, I0)
        o1 = observer_step(om, I1, 0.5 * h, self.sp, Im)
        return (I0, Im, I1), (self.obs, om, o1)

    def _rk4(self, h):
        m = self.model
        t = self.t
        (I0, Im, I1), (o0, om, o1) = self._observer_stages(t, h)
        d = self.direction
        ac = m.alpha_coef(d, I0)
        z = np.concatenate([self.c, self.u])
        k1 = m.augmented_rate(z, I0, o0.xhat2, d, ac)
        k2 = m.augmented_rate(z + 0.5 * h * k1, Im, om.xhat2, d, ac)
        k3 = m.augmented_rate(z + 0.5 * h * k2, Im, om.xhat2, d, ac)
        k4 = m.augmented_rate(z + h * k3, I1, o1.xhat2, d, ac)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        n = self.c.size
        self.c, self.u = z[:n], z[n:]
        self.obs = o1
        self.charge += h / 6.0 * (I0 + 4.0 * Im + I1)

    def _rk4_algebraic(self, h):
        # potentials re-solved at every stage: the pure constraint-consistent path
        m = self.model
        t = self.t
        d = self.direction
        I0, Im, I1 = self.current(t), self.current(t + 0.5 * h), self.current(t + h)
        ac = m.alpha_coef(d, I0)

        def f(c, I):
            self.u = self._solve(c, I, self.u)
            c1, cs = m.split(c)
            terms = m.solver.reaction_terms(cs, self.u, d)
            c1d, csd = m.rhs_terms(c1, cs, terms, I, ac)
            return np.concatenate([c1d, csd.ravel()])

        c = self.c
        k1 = f(c, I0)
        k2 = f(c + 0.5 * h * k1, Im)
        k3 = f(c + 0.5 * h * k2, Im)
        k4 = f(c + h * k3, I1)
        self.c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        self.u = self._solve(self.c, I1, self.u)
        self.obs = observer_step(self.obs, I1, h, self.sp, I0)
        self.charge += h / 6.0 * (I0 + 4.0 * Im + I1)

    def _rk23_interval(self, span, t_eval):
        """Adaptive integration of [c, u, xhat] over one correction interval."""
        m = self.model
        d = self.direction
        M, L = observer_matrices(self.sp)
        ac = m.alpha_coef(d, self.current(self.t))
        n = self.c.size
        nu = self.u.size

        def f(t, z):
            I = self.current(t)
            xh = z[n + nu:n + nu + 2]
            dz = m.augmented_rate(z[:n + nu], I, xh[1], d, ac)
            return np.concatenate([dz, M @ xh + L * I, [I]])

        z0 = np.concatenate([self.c, self.u, [self.obs.xhat1, self.obs.xhat2, self.charge]])
        sol = solve_ivp(f, span, z0, method="RK23", t_eval=t_eval, rtol=self.cfg.rtol,
                        atol=self.cfg.atol, max_step=self.cfg.Dt)
        if sol.status != 0:
            raise NumericError(f"adaptive integrator failed: {sol.message}")
        return sol

    # driver
    def run(self, emit=None) -> RunSummary:
        wall0 = time.perf_counter()
        cfg = self.cfg
        m = self.model
        self.initialize()
        c1, cs = m.split(self.c)
        e0, s0 = m.electrolyte_inventory(c1), m.solid_inventory(cs)
        stop = "time"
        t_end = self.t_end
        if t_end is None or not np.isfinite(t_end):
            raise ConfigError("a finite end time is required")
        n_steps = int(np.ceil(t_end / cfg.dt - 1e-9))
        per_corr = max(1, int(round(cfg.Dt / cfg.dt)))
        rec = self.record(wall0)
        if emit:
            emit(rec)
        if not self._voltage_ok(rec.V):
            stop = "voltage"
            n_steps = 0
        k = 0
        while k < n_steps:
            self._switch_direction()
            if cfg.method == "rk23":
                k, stop = self._run_rk23_block(k, n_steps, per_corr, wall0, emit)
                if stop != "time":
                    break
                continue
            h = min(cfg.dt, t_end - self.t)
            if cfg.method == "rk4":
                self._rk4(h)
            else:
                self._rk4_algebraic(h)
            k += 1
            self.steps += 1
            self.t = k * cfg.dt if k < n_steps else t_end
            self._elapsed += h
            if cfg.method == "rk4" and (k % per_corr == 0 or k == n_steps):
                self.correct()
            self._switch_direction()
            res = self._maybe_trigger()
            self._check_bounds()
            rec = self.record(wall0, res)
            if emit:
                emit(rec)
            if not self._voltage_ok(rec.V):
                stop = "voltage"
                break
        c1, cs = m.split(self.c)
        e1 = m.electrolyte_inventory(c1)
        return RunSummary(self.t, m.soc(cs), self.charge * self.params.area,
                          time.perf_counter() - wall0, self.corrections, self.steps, stop,
                          (e1 - e0) / e0, m.solid_inventory(cs) - s0, self.newton_failures, self.triggered)

    def _run_rk23_block(self, k, n_steps, per_corr, wall0, emit):
        cfg = self.cfg
        k_end = min(n_steps, (k // per_corr + 1) * per_corr)
        ts = [min(j * cfg.dt, self.t_end) for j in range(k + 1, k_end + 1)]
        sol = self._rk23_interval((self.t, ts[-1]), ts)
        n, nu = self.c.size, self.u.size
        stop = "time"
        for j, t in enumerate(ts):
            z = sol.y[:, j]
            self.c, self.u = z[:n].copy(), z[n:n + nu].copy()
            self.obs = ObserverState(float(z[n + nu]), float(z[n + nu + 1]))
            self.charge = float(z[-1])
            self.t = t
            self.steps += 1
            if j == len(ts) - 1:
                self.correct()
                self._switch_direction()
            self._check_bounds()
            rec = self.record(wall0)
            if emit:
                emit(rec)
            if not self._voltage_ok(rec.V):
                stop = "voltage"
                break
        return k_end, stop

    def _maybe_trigger(self):
        """Correct early if the propagated potentials have left the constraint set.

        Returns the residual norm that now holds, for the trajectory record.
        """
        I = self.current(self.t)
        res = self.residual_norm(I)
        tol = self.cfg.residual_trigger
        if tol is not None and self._elapsed > 0 and res > tol * max(1.0, abs(I)):
            self.triggered += 1
            self.correct()
            res = self.residual_norm(I)
        return res

    def _switch_direction(self):
        # sign flips change the branch of the OCP and activity factor; re-solve right away
        new_dir = Direction.of_current(self.current(self.t), self.direction)
        if new_dir is not self.direction:
            self.direction = new_dir
            self.correct()

    def _voltage_ok(self, V) -> bool:
        lo, hi = self.v_window
        return lo <= V <= hi

    def _check_bounds(self):
        m = self.model
        c1, cs = m.split(self.c)
        size = float(np.max(np.abs(self.c)))
        if not np.isfinite(size) or size > BOUND_ABORT:
            raise NumericError(f"state norm {size:.3e} exceeds bound at t = {self.t:g} s")
        if self._elapsed == 0.0:
            energy = m.energy(cs)
            log.debug("t=%g |c|=%.4e energy=%.4e", self.t, size, energy)
            if not np.isfinite(energy) or energy > BOUND_ABORT:
                raise NumericError(f"solid gradient energy {energy:.3e} exceeds bound at t = {self.t:g} s")
        if not self._warned_negative and (np.min(c1) < 0 or m.min_concentration(cs) < 0):
            self._warned_negative = True
            log.warning("negative reconstructed concentration at t = %g s; continuing", self.t)


def step(sim: Simulation):
    """Advance one inner step (no correction); the adaptive method steps with RK4 here."""
    sim.initialize()
    h = sim.cfg.dt
    if sim.cfg.method == "algebraic":
        sim._rk4_algebraic(h)
    else:
        sim._rk4(h)
    sim.t += h
    sim.steps += 1
    sim._elapsed += h
    return sim


def correct(sim: Simulation):
    sim.initialize()
    sim.correct()
    return sim
