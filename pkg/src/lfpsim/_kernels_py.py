"""Numpy reference versions of the compiled kernels (same signatures)."""
import numpy as np

CLAMP_MARGIN = 1e-6


def _stoich(ratio, a0, logistic):
    if logistic:
        y = 0.5 * (1.0 + np.tanh(0.5 * a0 * ratio))
        return y, a0 * y * (1.0 - y)
    y = np.clip(ratio, CLAMP_MARGIN, 1.0 - CLAMP_MARGIN)
    inside = (ratio > CLAMP_MARGIN) & (ratio < 1.0 - CLAMP_MARGIN)
    return y, inside.astype(float)


def solid_flux(coeffs, V, dV, wr2, inv_norm, diffusivity, inv_cmax, a0, logistic, alpha_coef):
    c = np.einsum("bnm,bqm->bnq", coeffs, V)
    dc = np.einsum("bnm,bqm->bnq", coeffs, dV)
    y, _ = _stoich(c * inv_cmax, a0, logistic)
    p0, p1, p2, p3, p4 = alpha_coef
    d = y - 0.5
    alpha = (p0 * np.exp(-25.0 * y) + p1 * np.exp(-p2 * (1.0 - y))
             + p3 * np.exp(-15.0 * (1.0 - y)) + p4 / (1.0 + d * d))
    g = alpha * dc * wr2[:, None, :] * diffusivity
    return np.einsum("bnq,bqm->bnm", g, dV) * inv_norm[:, None, :]


def reaction(coeffs, surf, phi_gap, i0, f, a0, b0, inv_cmax, logistic, charge):
    cs = np.einsum("bnm,bm->bn", coeffs, surf)
    y, dy = _stoich(cs * inv_cmax, a0, logistic)
    if charge:
        e1 = np.exp(-35.0 * y)
        e2 = np.exp(-210.0 * (1.0 - y))
        U = 3.4510 - 0.009 * y + 0.6687 * e1 - 0.5 * e2
        dU = -0.009 - 35.0 * 0.6687 * e1 - 210.0 * 0.5 * e2
    else:
        e1 = np.exp(-200.0 * y)
        e2 = np.exp(-30.0 * (1.0 - y))
        U = 3.4077 - 0.020269 * y + 0.5 * e1 - 0.9 * e2
        dU = -0.020269 - 200.0 * 0.5 * e1 - 30.0 * 0.9 * e2
    s = f * (phi_gap[None, :] - U)
    t = np.tanh(0.5 * a0 * s)
    st = b0 * t
    ibar = 2.0 * i0 * np.sinh(st)
    with np.errstate(over="ignore"):
        sech = 1.0 / np.cosh(0.5 * a0 * s)
    dibar = 2.0 * i0 * np.cosh(st) * (0.5 * a0 * b0 * sech * sech) * f
    dcs = -dibar * dU * dy * inv_cmax
    return cs, ibar, dibar, dcs
