"""Pointwise constitutive functions: saturations, OCP, activity factor, kinetics.

All functions accept scalars or numpy arrays and are pure.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .errors import ConfigError, DomainError, SolverError
from .params import Direction, ParameterSet, RateCorrections, SaturationParams

# alpha(y) = p0 e^{-25 y} + p1 e^{-p2 (1-y)} + p3 e^{-15 (1-y)} + p4 / (1 + (y - 1/2)^2)
PLAIN_ALPHA = (6.0, 15.0, 35.0, 0.0, 0.3)


def sat(s, p: SaturationParams):
    """Odd logistic saturation 2 b0 / (1 + e^{-a0 s}) - b0, range (-b0, b0)."""
    # identical to the logistic form, without overflow for large |s|
    return p.b0 * np.tanh(0.5 * p.a0 * np.asarray(s, dtype=float))


def sat_derivative(s, p: SaturationParams):
    with np.errstate(over="ignore"):
        sech = 1.0 / np.cosh(0.5 * p.a0 * np.asarray(s, dtype=float))
    return 0.5 * p.a0 * p.b0 * sech * sech


def sat_y(s, a0: float):
    return expit(a0 * np.asarray(s, dtype=float))


def mollifier(x, x0: float, eps0: float):
    """Piecewise-constant unit bump on [x0 - eps0*x0, x0]."""
    if eps0 <= 0:
        raise ConfigError("mollifier width eps0 must be positive")
    x = np.asarray(x, dtype=float)
    lo = x0 - eps0 * x0
    return np.where((x >= lo) & (x <= x0), 1.0 / (eps0 * x0), 0.0)


def boundary_mollifier(x, length: float, eps0: float):
    """Unit bump on [0, eps0*length], used to average the electrolyte at x = 0."""
    if eps0 <= 0:
        raise ConfigError("mollifier width eps0 must be positive")
    x = np.asarray(x, dtype=float)
    w = eps0 * length
    return np.where((x >= 0.0) & (x <= w), 1.0 / w, 0.0)


def _check_open_unit(y):
    y = np.asarray(y, dtype=float)
    if np.any(~((y > 0.0) & (y < 1.0))):
        raise DomainError("stoichiometry must lie in (0, 1)")
    return y


def _ocp(y, direction):
    if direction is Direction.CHARGE:
        return 3.4510 - 0.009 * y + 0.6687 * np.exp(-35.0 * y) - 0.5 * np.exp(-210.0 * (1.0 - y))
    return 3.4077 - 0.020269 * y + 0.5 * np.exp(-200.0 * y) - 0.9 * np.exp(-30.0 * (1.0 - y))


def _ocp_derivative(y, direction):
    if direction is Direction.CHARGE:
        return -0.009 - 35.0 * 0.6687 * np.exp(-35.0 * y) - 210.0 * 0.5 * np.exp(-210.0 * (1.0 - y))
    return -0.020269 - 200.0 * 0.5 * np.exp(-200.0 * y) - 30.0 * 0.9 * np.exp(-30.0 * (1.0 - y))


def ocp(y, direction: Direction):
    """Open-circuit potential of the LFP electrode (V)."""
    return _ocp(_check_open_unit(y), Direction.parse(direction))


def ocp_derivative(y, direction: Direction):
    return _ocp_derivative(_check_open_unit(y), Direction.parse(direction))


def _check_closed_unit(y):
    y = np.asarray(y, dtype=float)
    if np.any(~((y >= 0.0) & (y <= 1.0))):
        raise DomainError("stoichiometry must lie in [0, 1]")
    return y


def alpha_from_coefficients(y, coef):
    p0, p1, p2, p3, p4 = coef
    d = y - 0.5
    return (
        p0 * np.exp(-25.0 * y)
        + p1 * np.exp(-p2 * (1.0 - y))
        + p3 * np.exp(-15.0 * (1.0 - y))
        + p4 / (1.0 + d * d)
    )


def activity_correction(y):
    return alpha_from_coefficients(_check_closed_unit(y), PLAIN_ALPHA)


def rated_alpha_coefficients(direction: Direction, rate: float, table: RateCorrections) -> tuple:
    w0, w1, w2, w3, w4 = table.lookup(rate)
    if Direction.parse(direction) is Direction.DISCHARGE:
        return (9.0, 15.0 * w0, 30.0, 3.0 * w1, 0.2 * w2)
    return (9.0 * w3, 15.0, 30.0, 0.0, 0.2 * w4)


def activity_correction_rated(y, direction: Direction, rate: float, table: RateCorrections):
    """Rate-dependent activity factor with coefficients from the correction table."""
    coef = rated_alpha_coefficients(direction, rate, table)
    return alpha_from_coefficients(_check_closed_unit(y), coef)


def exchange_current(eta_bar, params: ParameterSet, sp: SaturationParams, in_reaction_zone=True):
    """Saturated Butler-Volmer rate 2 i0 sinh(sat(F eta / 2RT)), zero outside the zone."""
    f = params.F / (2.0 * params.R_gas * params.T)
    val = 2.0 * params.i0 * np.sinh(sat(f * np.asarray(eta_bar, dtype=float), sp))
    return np.where(in_reaction_zone, val, 0.0)


def exchange_current_derivative(eta_bar, params: ParameterSet, sp: SaturationParams):
    f = params.F / (2.0 * params.R_gas * params.T)
    s = f * np.asarray(eta_bar, dtype=float)
    return 2.0 * params.i0 * np.cosh(sat(s, sp)) * sat_derivative(s, sp) * f


def exchange_current_bound(params: ParameterSet, sp: SaturationParams) -> float:
    return 2.0 * params.i0 * math.sinh(sp.b0)


def surface_stoichiometry(c_surf, params: ParameterSet, sp: SaturationParams, mode="logistic"):
    """Map surface concentration to stoichiometry in (0, 1).

    ``mode="logistic"`` composes with sat_y; ``mode="clamp"`` clips the raw
    ratio into [1e-6, 1 - 1e-6].
    """
    ratio = np.asarray(c_surf, dtype=float) / params.c_s_max
    if mode == "logistic":
        return sat_y(ratio, sp.a0)
    if mode == "clamp":
        return np.clip(ratio, CLAMP_MARGIN, 1.0 - CLAMP_MARGIN)
    raise ConfigError(f"unknown stoichiometry mode {mode!r}")


CLAMP_MARGIN = 1e-6


def foil_residual(phi, current, c1_at_0, params: ParameterSet):
    f = params.F / (params.R_gas * params.T)
    b = params.beta_f
    scale = params.i_f * (c1_at_0 / params.c_ini) ** (1.0 - b)
    return scale * (math.exp((1.0 - b) * f * phi) - math.exp(-b * f * phi)) - current


def foil_potential(current: float, c1_at_0: float, params: ParameterSet, closed_form=True) -> float:
    """Overpotential of the lithium counter electrode that carries ``current``.

    For beta_f = 1/2 the asinh closed form is used unless ``closed_form`` is
    False, in which case the bracketed root-find runs regardless.
    """
    if not c1_at_0 > 0:
        raise DomainError("electrolyte concentration at the foil must be positive")
    if current == 0.0:
        return 0.0
    scale = params.i_f * (c1_at_0 / params.c_ini) ** (1.0 - params.beta_f)
    rt_f = params.R_gas * params.T / params.F
    if closed_form and abs(params.beta_f - 0.5) < 1e-15:
        return 2.0 * rt_f * math.asinh(current / (2.0 * scale))
    return _foil_root(current, c1_at_0, params)


def _foil_root(current, c1_at_0, params):
    rt_f = params.R_gas * params.T / params.F
    scale = params.i_f * (c1_at_0 / params.c_ini) ** (1.0 - params.beta_f)
    # the map is strictly increasing; widen until the root is bracketed
    width = rt_f * (1.0 + math.asinh(abs(current) / scale))
    lo, hi = -width, width
    for _ in range(60):
        if foil_residual(lo, current, c1_at_0, params) < 0 < foil_residual(hi, current, c1_at_0, params):
            break
        lo, hi = 2 * lo, 2 * hi
    try:
        phi, info = brentq(foil_residual, lo, hi, args=(current, c1_at_0, params),
                           xtol=1e-15, rtol=4 * np.finfo(float).eps, full_output=True)
    except ValueError as exc:
        raise SolverError(f"foil kinetics root-find failed: {exc}") from None
    res = abs(foil_residual(phi, current, c1_at_0, params))
    if not info.converged or res > 1e-10 * max(1.0, abs(current)):
        raise SolverError("foil kinetics root-find did not converge", residual=res)
    return phi
