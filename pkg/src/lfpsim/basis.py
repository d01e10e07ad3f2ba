"""Reduced-order discretization: radial eigenmodes and linear splines in x."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NumericError
from .params import ParameterSet, SaturationParams


def _tan_residual(g):
    return abs(math.tan(g) - g)


@lru_cache(maxsize=None)
def _positive_root(j: int) -> float:
    lo, hi = j * math.pi, j * math.pi + 0.5 * math.pi
    # sin - g cos has no pole in the bracket, unlike tan - g
    g = brentq(lambda x: math.sin(x) - x * math.cos(x), lo + 1e-12, hi,
               xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    best = g
    for cand in (np.nextafter(g, -np.inf), np.nextafter(g, np.inf)):
        if lo < cand < hi and _tan_residual(cand) < _tan_residual(best):
            best = float(cand)
    return best


def eigenroots(n: int) -> np.ndarray:
    """gamma_0 = 0 followed by the first n - 1 positive roots of tan(g) = g."""
    if n < 1:
        raise ConfigError("number of radial modes must be at least 1")
    return np.array([0.0] + [_positive_root(j) for j in range(1, n)])


@dataclass(frozen=True, eq=False)
class RadialBasis:
    """Neumann eigenmodes of the spherical Laplacian on [0, R] with quadrature.

    ``values``/``derivs`` hold v_j and dv_j/dr at the quadrature nodes with
    shape (n_quad, n_modes); ``surface`` is v_j(R).
    """

    n_modes: int
    R: float
    gamma: np.ndarray
    norm: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    surface: np.ndarray

    @classmethod
    def build(cls, R: float, n_modes: int, n_quad: int | None = None) -> "RadialBasis":
        gamma = eigenroots(n_modes)
        n_quad = 4 * n_modes if n_quad is None else int(n_quad)
        t, w = np.polynomial.legendre.leggauss(n_quad)
        nodes = 0.5 * R * (t + 1.0)
        weights = 0.5 * R * w
        proto = cls(n_modes, R, gamma, np.empty(0), nodes, weights,
                    np.empty(0), np.empty(0), np.empty(0))
        norm = radial_mass(proto)
        j = np.arange(n_modes)
        values = np.stack([radial_eval(k, nodes, proto) for k in j], axis=1)
        derivs = np.stack([radial_derivative(k, nodes, proto) for k in j], axis=1)
        surface = np.array([radial_eval(k, R, proto) for k in j], dtype=float)
        return cls(n_modes, R, gamma, norm, nodes, weights, values, derivs, surface)

    @property
    def eigenvalues(self) -> np.ndarray:
        """(gamma_j / R)^2, the decay rates per unit diffusivity."""
        return (self.gamma / self.R) ** 2

    def concentration(self, coeffs, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        v = np.stack([radial_eval(k, r, self) for k in range(self.n_modes)], axis=-1)
        return np.asarray(coeffs) @ v.T


def radial_eval(j: int, r, basis: RadialBasis):
    """v_0 = 1 and v_j = sin(gamma_j r / R) / r, with the r -> 0 limit gamma_j / R."""
    r = np.asarray(r, dtype=float)
    if j == 0:
        return np.ones_like(r)
    k = basis.gamma[j] / basis.R
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, np.sin(k * safe) / safe, k)


def radial_derivative(j: int, r, basis: RadialBasis):
    r = np.asarray(r, dtype=float)
    if j == 0:
        return np.zeros_like(r)
    k = basis.gamma[j] / basis.R
    x = k * r
    safe = np.where(x > 1e-3, r, 1.0)
    exact = (k * safe * np.cos(k * safe) - np.sin(k * safe)) / (safe * safe)
    series = -(k ** 3) * r / 3.0 * (1.0 - x * x / 10.0)
    return np.where(x > 1e-3, exact, series)


def radial_mass(basis: RadialBasis) -> np.ndarray:
    """Diagonal of the r^2-weighted mass: R^3/3 for j = 0, (R/2)(1 - sin 2g / 2g) otherwise."""
    g = basis.gamma
    out = np.empty_like(g)
    out[0] = basis.R ** 3 / 3.0
    gp = g[1:]
    out[1:] = 0.5 * basis.R * (1.0 - np.sin(2.0 * gp) / (2.0 * gp))
    return out


def radial_nonlinear_apply(coeffs, alpha, basis: RadialBasis, diffusivity: float):
    """Galerkin projection of the variable-alpha radial flux.

    out_i = (1/norm_i) int_0^R r^2 alpha(c) D (dv_i/dr)(dc/dr) dr, where
    ``alpha`` maps concentrations at the quadrature nodes to activity factors.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    c = coeffs @ basis.values.T
    dc = coeffs @ basis.derivs.T
    a = np.asarray(alpha(c), dtype=float)
    integrand = a * dc * (basis.weights * basis.nodes ** 2) * diffusivity
    out = (integrand @ basis.derivs) / basis.norm
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite radial flux projection")
    return out


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    nodes: np.ndarray
    n_sep: int
    n_cat: int
    h: np.ndarray
    De_eff: np.ndarray
    k_eff: np.ndarray
    eps_e: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def interface(self) -> int:
        """Index of the node at x = L1."""
        return self.n_sep

    @property
    def cathode_nodes(self) -> np.ndarray:
        return self.nodes[self.n_sep:]

    @property
    def in_cathode(self) -> np.ndarray:
        return np.arange(self.n_nodes) >= self.n_sep


@dataclass(frozen=True, eq=False)
class GalerkinStructures:
    mass: np.ndarray
    mass_eps: np.ndarray
    mass_eps_lumped: np.ndarray
    stiffness_De: np.ndarray
    stiffness_eps_De: np.ndarray
    stiffness_k: np.ndarray
    injection: np.ndarray
    cathode_weights: np.ndarray
    reaction_zone: np.ndarray


def _element_mass(h, coef):
    n = h.size + 1
    out = np.zeros((n, n))
    local = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    for e, (he, ce) in enumerate(zip(h, coef)):
        out[e:e + 2, e:e + 2] += ce * he * local
    return out


def _element_stiffness(h, coef):
    n = h.size + 1
    out = np.zeros((n, n))
    local = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for e, (he, ce) in enumerate(zip(h, coef)):
        out[e:e + 2, e:e + 2] += ce / he * local
    return out


def _hat_integrals_on(nodes, lo, hi):
    """Exact integrals of each hat function over [lo, hi]."""
    out = np.zeros(nodes.size)
    for e in range(nodes.size - 1):
        a, b = nodes[e], nodes[e + 1]
        s, t = max(a, lo), min(b, hi)
        if t <= s:
            continue
        he = b - a
        # left hat (b - x)/he and right hat (x - a)/he are linear: midpoint rule is exact
        m = 0.5 * (s + t)
        out[e] += (t - s) * (b - m) / he
        out[e + 1] += (t - s) * (m - a) / he
    return out


def build_spatial(n_sep: int, n_cat: int, params: ParameterSet, eps0: float = 1e-4):
    """Uniform linear-spline grid: n_sep elements on [0, L1] and n_cat on [L1, L].

    ``eps0`` sets the width eps0*L of the mollified current injection at x = 0.
    """
    if n_sep < 1 or n_cat < 1:
        raise ConfigError("need at least one element per region")
    sep = np.linspace(0.0, params.L1, n_sep + 1)
    cat = np.linspace(params.L1, params.L, n_cat + 1)
    nodes = np.concatenate([sep, cat[1:]])
    h = np.diff(nodes)
    region_cat = np.arange(h.size) >= n_sep
    De = np.where(region_cat, params.De_eff_cat, params.De_eff_sep)
    k = np.where(region_cat, params.k_eff_cat, params.k_eff_sep)
    eps = np.where(region_cat, params.eps_e_cat, params.eps_e_sep)
    grid = SpatialGrid(nodes, n_sep, n_cat, h, De, k, eps)

    if eps0 <= 0:
        raise ConfigError("eps0 must be positive")
    width = eps0 * params.L
    mass = _element_mass(h, np.ones_like(h))
    mass_eps = _element_mass(h, eps)
    injection = _hat_integrals_on(grid.nodes, 0.0, width) / width
    cat = grid.cathode_nodes
    cw = np.zeros(cat.size)
    dh = np.diff(cat)
    cw[:-1] += 0.5 * dh
    cw[1:] += 0.5 * dh
    structs = GalerkinStructures(
        mass=mass,
        mass_eps=mass_eps,
        mass_eps_lumped=mass_eps.sum(axis=1),
        stiffness_De=_element_stiffness(h, grid.De_eff),
        stiffness_eps_De=_element_stiffness(h, grid.eps_e * grid.De_eff),
        stiffness_k=_element_stiffness(h, grid.k_eff),
        injection=injection,
        cathode_weights=cw,
        reaction_zone=grid.in_cathode.copy(),
    )
    return grid, structs


@dataclass(frozen=True, eq=False)
class Discretization:
    """Everything geometric for one (N1, N2, N3) choice; immutable and shareable."""

    params: ParameterSet
    sat_params: SaturationParams
    grid: SpatialGrid
    structs: GalerkinStructures
    radial: tuple
    n_modes: int

    @classmethod
    def build(cls, params: ParameterSet, sp: SaturationParams, n_sep=4, n_cat=4, n_modes=6,
              n_quad=None) -> "Discretization":
        grid, structs = build_spatial(n_sep, n_cat, params, sp.eps0)
        radial = tuple(RadialBasis.build(R, n_modes, n_quad) for R in params.R_bin)
        return cls(params, sp, grid, structs, radial, n_modes)

    @property
    def n_x(self) -> int:
        return self.grid.n_nodes

    @property
    def n_c(self) -> int:
        return self.grid.n_cat + 1

    @property
    def n_state(self) -> int:
        return self.n_x + 3 * self.n_c * self.n_modes

    def stacked(self):
        """Per-bin quadrature tables stacked along a leading bin axis."""
        return _stack(self)

    def describe(self) -> dict:
        g = self.grid
        return {
            "nodes_m": g.nodes.tolist(),
            "elements": [
                {"h_m": float(h), "De_eff": float(d), "k_eff": float(k), "eps_e": float(e)}
                for h, d, k, e in zip(g.h, g.De_eff, g.k_eff, g.eps_e)
            ],
            "interface_index": g.interface,
            "radial": [
                {"R_m": b.R, "gamma": b.gamma.tolist(), "n_quad": int(b.nodes.size)}
                for b in self.radial
            ],
            "n_state": self.n_state,
        }


def _stack(disc):
    cache = disc.__dict__.get("_stacked")
    if cache is not None:
        return cache
    V = np.ascontiguousarray(np.stack([b.values for b in disc.radial]))
    dV = np.ascontiguousarray(np.stack([b.derivs for b in disc.radial]))
    wr2 = np.ascontiguousarray(np.stack([b.weights * b.nodes ** 2 for b in disc.radial]))
    inv_norm = np.ascontiguousarray(np.stack([1.0 / b.norm for b in disc.radial]))
    surf = np.ascontiguousarray(np.stack([b.surface for b in disc.radial]))
    out = (V, dV, wr2, inv_norm, surf)
    object.__setattr__(disc, "_stacked", out)
    return out
