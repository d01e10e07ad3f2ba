"""Potential constraints: integral residual, analytic Jacobian, Newton solve.

Unknowns are packed as ``u = [phi1[1:], phi2, anchor]``; phi1[0] = 0 is the
ground and never appears. The three residual blocks are

* k (phi1 - O1) at every free electrolyte node,
* sigma (phi2 - anchor) - (double integral of the reaction) on the cathode,
* I + (total reaction), the current balance.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from . import kernels
from .basis import Discretization
from .errors import NumericError, SingularJacobianError, SolverError
from .kinetics import ocp, surface_stoichiometry
from .params import Direction
from .state import CellState, PotentialField

log = logging.getLogger(__name__)

COND_WARN = 1e12


def _cumulative_operators(x):
    """Matrices giving int_{x0}^{x_j} q and the double integral for a nodal linear q."""
    n = x.size
    dh = np.diff(x)
    C1 = np.zeros((n, n))
    C2 = np.zeros((n, n))
    for j in range(1, n):
        h = dh[j - 1]
        C1[j] = C1[j - 1]
        C1[j, j - 1] += 0.5 * h
        C1[j, j] += 0.5 * h
        C2[j] = C2[j - 1] + h * C1[j - 1]
        C2[j, j - 1] += h * h / 3.0
        C2[j, j] += h * h / 6.0
    return C1, C2


@dataclass
class ReactionTerms:
    c_surf: np.ndarray      # (3, n_c)
    ibar: np.ndarray        # (3, n_c)
    dibar_deta: np.ndarray  # (3, n_c)
    dibar_dcs: np.ndarray   # (3, n_c)
    q: np.ndarray           # sum_k a_k ibar_k per cathode node
    s: np.ndarray           # sum_k a_k dibar_k/deta per cathode node


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    condition: float = float("nan")


class Sensitivity:
    """Implicit-function derivatives of the potentials at one (c, phi, I).

    ``apply(dc1, dcs)`` returns the potential change for a state change and
    ``w`` is the potential change per unit current, both in packed layout.
    """

    def __init__(self, solver, lu, terms):
        self._solver = solver
        self._lu = lu
        self._terms = terms
        rhs = np.zeros(solver.n_u)
        rhs[-1] = 1.0
        self.w = -scipy.linalg.lu_solve(lu, rhs)

    def apply(self, dc1, dcs) -> np.ndarray:
        return -scipy.linalg.lu_solve(self._lu, self._solver.state_derivative(self._terms, dc1, dcs))

    def matrix(self) -> np.ndarray:
        """Dense potentials-by-state matrix, column by column (diagnostics only)."""
        s = self._solver
        n_cs = 3 * s.n_c * s.disc.n_modes
        cols = []
        for k in range(s.n_x + n_cs):
            e = np.zeros(s.n_x + n_cs)
            e[k] = 1.0
            cols.append(self.apply(e[: s.n_x], e[s.n_x:].reshape(3, s.n_c, -1)))
        return np.stack(cols, axis=1)


class ConstraintSolver:
    def __init__(self, disc: Discretization, stoich_mode="logistic", tol=1e-8, max_iter=50,
                 max_halvings=8):
        self.disc = disc
        p = disc.params
        sp = disc.sat_params
        g = disc.grid
        self.logistic = {"logistic": 1, "clamp": 0}[stoich_mode]
        self.stoich_mode = stoich_mode
        self.tol = tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.n_x = g.n_nodes
        self.n_c = g.n_cat + 1
        self.N1 = g.n_sep
        self.n_u = (self.n_x - 1) + self.n_c + 1
        self.a_bin = p.a_bin
        self.kappa = p.kappa_d
        self.sigma = p.sigma_eff
        self.f = p.F / (2.0 * p.R_gas * p.T)
        self.inv_cmax = 1.0 / p.c_s_max
        self.surf = disc.stacked()[4]
        self.b0 = disc.structs.injection

        x = g.nodes
        C1, C2 = _cumulative_operators(g.cathode_nodes)
        self.C1, self.C2 = C1, C2
        self.wtrap = disc.structs.cathode_weights.copy()
        gfac = np.minimum(x, p.L1) / p.k_eff_sep + np.maximum(x - p.L1, 0.0) / p.k_eff_cat
        G = np.outer(gfac, self.wtrap)
        G[self.N1:] -= C2 / p.k_eff_cat
        self.G = G
        self.kscale = np.where(np.arange(self.n_x) <= self.N1, p.k_eff_sep, p.k_eff_cat)

        n1 = self.n_x - 1
        self.sl_phi1 = slice(0, n1)
        self.sl_phi2 = slice(n1, n1 + self.n_c)
        self.i_anchor = n1 + self.n_c
        k = self.kscale[1:]
        P = np.zeros((self.n_u, self.n_c))
        P[self.sl_phi1] = -k[:, None] * G[1:]
        P[self.sl_phi2] = -C2
        P[self.i_anchor] = self.wtrap
        self.P = P
        # largest total current the saturated kinetics can carry
        self.kinetic_limit = 2.0 * p.i0 * np.sinh(sp.b0) * self.a_bin.sum() * self.wtrap.sum()
        E = np.zeros((self.n_c, self.n_u))
        for j in range(self.n_c):
            E[j, self.N1 + j - 1] = -1.0
            E[j, n1 + j] = 1.0
        self.E = E
        J0 = np.zeros((self.n_u, self.n_u))
        J0[self.sl_phi1, self.sl_phi1] = np.diag(k)
        J0[self.sl_phi2, self.sl_phi2] = self.sigma * np.eye(self.n_c)
        J0[self.sl_phi2, self.i_anchor] = -self.sigma
        self.J0 = J0

    # packing -----------------------------------------------------------
    def pack(self, phi: PotentialField) -> np.ndarray:
        return np.concatenate([phi.phi1[1:], phi.phi2, [phi.anchor]])

    def unpack(self, u) -> PotentialField:
        phi1 = np.concatenate([[0.0], u[self.sl_phi1]])
        return PotentialField(phi1, np.array(u[self.sl_phi2]), float(u[self.i_anchor]))

    def c1_at_zero(self, c1) -> float:
        """Mollified electrolyte concentration next to the foil."""
        return float(self.b0 @ c1)

    # pieces ------------------------------------------------------------
    def reaction_terms(self, cs, u, direction: Direction) -> ReactionTerms:
        phi1_cat = u[self.N1 - 1:self.N1 - 1 + self.n_c]
        gap = np.ascontiguousarray(u[self.sl_phi2] - phi1_cat)
        p = self.disc.params
        sp = self.disc.sat_params
        c_surf, ibar, di, dcs = kernels.reaction(
            np.ascontiguousarray(cs), self.surf, gap, p.i0, self.f, sp.a0, sp.b0,
            self.inv_cmax, self.logistic, int(direction is Direction.CHARGE))
        q = self.a_bin @ ibar
        s = self.a_bin @ di
        return ReactionTerms(c_surf, ibar, di, dcs, q, s)

    def residual_from(self, c1, u, current, terms: ReactionTerms) -> np.ndarray:
        r = np.empty(self.n_u)
        c1bar = self.c1_at_zero(c1)
        k = self.kscale[1:]
        r[self.sl_phi1] = k * (u[self.sl_phi1] + self.kappa * (c1[1:] - c1bar))
        r[self.sl_phi2] = self.sigma * (u[self.sl_phi2] - u[self.i_anchor])
        r[self.i_anchor] = current
        r += self.P @ terms.q
        return r

    def jacobian_from(self, terms: ReactionTerms) -> np.ndarray:
        return self.J0 + (self.P * terms.s) @ self.E

    def state_derivative(self, terms: ReactionTerms, dc1, dcs) -> np.ndarray:
        """d(residual)/d(state) applied to (dc1, dcs)."""
        out = np.zeros(self.n_u)
        dc1 = np.asarray(dc1, dtype=float)
        out[self.sl_phi1] = self.kscale[1:] * self.kappa * (dc1[1:] - self.b0 @ dc1)
        dsurf = np.einsum("bnm,bm->bn", np.asarray(dcs, dtype=float), self.surf)
        dq = self.a_bin @ (terms.dibar_dcs * dsurf)
        out += self.P @ dq
        return out

    # public API --------------------------------------------------------
    def residual(self, c1, cs, u, current, direction=Direction.DISCHARGE):
        terms = self.reaction_terms(cs, u, direction)
        return self.residual_from(c1, u, current, terms)

    def jacobian(self, c1, cs, u, current=0.0, direction=Direction.DISCHARGE):
        return self.jacobian_from(self.reaction_terms(cs, u, direction))

    def equilibrium_guess(self, cs, direction=Direction.DISCHARGE) -> np.ndarray:
        """phi1 = 0 and phi2 = U at the mean surface stoichiometry."""
        u = np.zeros(self.n_u)
        terms = self.reaction_terms(cs, u, direction)
        y = surface_stoichiometry(terms.c_surf.mean(), self.disc.params, self.disc.sat_params,
                                  self.stoich_mode)
        U = float(ocp(y, direction))
        u[self.sl_phi2] = U
        u[self.i_anchor] = U
        return u

    def solve(self, c1, cs, current, direction=Direction.DISCHARGE, guess=None, check_cond=False):
        """Damped Newton on the packed residual; returns (u, SolveInfo)."""
        u = self.equilibrium_guess(cs, direction) if guess is None else np.array(guess, dtype=float)
        tol = self.tol * max(1.0, abs(current))
        if abs(current) >= self.kinetic_limit:
            raise SolverError(f"current {current:g} A/m^2 exceeds the saturated kinetic limit "
                              f"{self.kinetic_limit:.4g} A/m^2", residual=abs(current), iterations=0)
        terms = self.reaction_terms(cs, u, direction)
        if self._saturated(terms):
            u = self._balance_shift(c1, cs, u, current, direction)
            terms = self.reaction_terms(cs, u, direction)
        r = self.residual_from(c1, u, current, terms)
        norm = np.max(np.abs(r))
        cond = float("nan")
        it = 0
        polished = False
        while True:
            if norm <= tol:
                if polished:
                    break
                polished = True
            elif it >= self.max_iter:
                raise SolverError(f"Newton did not converge in {self.max_iter} iterations "
                                  f"(residual {norm:.3e})", residual=norm, iterations=it)
            J = self.jacobian_from(terms)
            if check_cond:
                cond = np.linalg.cond(J)
                if cond > COND_WARN:
                    log.warning("constraint Jacobian condition number %.3e", cond)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                    du = scipy.linalg.solve(J, -r, check_finite=False)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
                raise SingularJacobianError("constraint Jacobian is singular",
                                            residual=norm, iterations=it) from None
            if not np.all(np.isfinite(du)):
                raise SingularJacobianError("constraint Jacobian is numerically singular",
                                            residual=norm, iterations=it)
            it += 1
            lam = 1.0
            for _ in range(self.max_halvings + 1):
                u_try = u + lam * du
                t_try = self.reaction_terms(cs, u_try, direction)
                r_try = self.residual_from(c1, u_try, current, t_try)
                n_try = np.max(np.abs(r_try))
                if n_try < norm or (polished and n_try <= norm):
                    break
                lam *= 0.5
            else:
                if norm <= tol:
                    break
                raise SolverError(f"line search failed (residual {norm:.3e})",
                                  residual=norm, iterations=it)
            u, terms, r, norm = u_try, t_try, r_try, n_try
            if polished:
                break
        if not np.all(np.isfinite(u)):
            raise NumericError("non-finite potentials from Newton solve")
        return u, SolveInfo(it, float(norm), float(cond))

    def _saturated(self, terms) -> bool:
        # Newton steps are useless where the rate derivative has collapsed
        bound = 2.0 * self.disc.params.i0 * np.sinh(self.disc.sat_params.b0)
        return bool(np.max(np.abs(terms.ibar)) > 0.99 * bound)

    def _balance_shift(self, c1, cs, u, current, direction):
        """Shift phi2 and the anchor together until the current balance holds."""
        base = u.copy()

        def balance(delta):
            v = base.copy()
            v[self.sl_phi2] += delta
            v[self.i_anchor] += delta
            return current + self.wtrap @ self.reaction_terms(cs, v, direction).q

        lo, hi = -1.0, 1.0
        f_lo, f_hi = balance(lo), balance(hi)
        while f_lo > 0 or f_hi < 0:
            if hi > 100.0:
                raise SolverError(f"current {current:g} A/m^2 exceeds the saturated kinetic limit",
                                  residual=float(min(abs(f_lo), abs(f_hi))), iterations=0)
            lo, hi = 2 * lo, 2 * hi
            f_lo, f_hi = balance(lo), balance(hi)
        delta = scipy.optimize.brentq(balance, lo, hi, xtol=1e-12)
        base[self.sl_phi2] += delta
        base[self.i_anchor] += delta
        return base

    def phi2_end_slope(self, cs, u, direction=Direction.DISCHARGE) -> float:
        """d(phi2)/dx at x = L from the integrated reaction."""
        q = self.reaction_terms(cs, u, direction).q
        return float(self.C1[-1] @ q) / self.sigma

    def dump(self, path, c1, cs, u, current, direction=Direction.DISCHARGE):
        """Write residual, unknowns and Jacobian rows to a CSV file for debugging."""
        terms = self.reaction_terms(cs, u, direction)
        r = self.residual_from(c1, u, current, terms)
        J = self.jacobian_from(terms)
        header = "row,unknown,residual," + ",".join(f"J{j}" for j in range(self.n_u))
        lines = [header]
        for i in range(self.n_u):
            lines.append(",".join([str(i), repr(float(u[i])), repr(float(r[i]))]
                                  + [repr(float(v)) for v in J[i]]))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def sensitivity(self, c1, cs, u, current=0.0, direction=Direction.DISCHARGE) -> Sensitivity:
        terms = self.reaction_terms(cs, u, direction)
        J = self.jacobian_from(terms)
        lu = scipy.linalg.lu_factor(J, check_finite=True)
        if np.min(np.abs(np.diag(lu[0]))) == 0.0:
            raise SingularJacobianError("constraint Jacobian is singular")
        return Sensitivity(self, lu, terms)


# functional wrappers around a solver instance ----------------------------

def residual(solver: ConstraintSolver, state: CellState, phi: PotentialField, current,
             direction=Direction.DISCHARGE):
    return solver.residual(state.c1, state.cs, solver.pack(phi), current, direction)


def jacobian(solver: ConstraintSolver, state: CellState, phi: PotentialField, current=0.0,
             direction=Direction.DISCHARGE):
    return solver.jacobian(state.c1, state.cs, solver.pack(phi), current, direction)


def solve_potentials(solver: ConstraintSolver, state: CellState, current, guess=None,
                     direction=Direction.DISCHARGE):
    g = None if guess is None else solver.pack(guess)
    u, info = solver.solve(state.c1, state.cs, current, direction, g)
    return solver.unpack(u), info


def potential_sensitivities(solver: ConstraintSolver, state: CellState, phi: PotentialField,
                            current=0.0, direction=Direction.DISCHARGE) -> Sensitivity:
    return solver.sensitivity(state.c1, state.cs, solver.pack(phi), current, direction)
