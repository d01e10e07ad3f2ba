# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the per-particle inner loops in ``_kernels_py``."""
import numpy as np
from libc.math cimport exp, sinh, cosh, tanh

cdef double CLAMP_MARGIN = 1e-6


cdef inline double _stoich(double ratio, double a0, int logistic, double* dy) nogil:
    cdef double y
    if logistic:
        y = 0.5 * (1.0 + tanh(0.5 * a0 * ratio))
        dy[0] = a0 * y * (1.0 - y)
        return y
    if ratio <= CLAMP_MARGIN:
        dy[0] = 0.0
        return CLAMP_MARGIN
    if ratio >= 1.0 - CLAMP_MARGIN:
        dy[0] = 0.0
        return 1.0 - CLAMP_MARGIN
    dy[0] = 1.0
    return ratio


def solid_flux(const double[:, :, ::1] coeffs, const double[:, :, ::1] V,
               const double[:, :, ::1] dV, const double[:, ::1] wr2,
               const double[:, ::1] inv_norm, double diffusivity, double inv_cmax,
               double a0, int logistic, alpha_coef):
    cdef Py_ssize_t nb = coeffs.shape[0], nn = coeffs.shape[1], nm = coeffs.shape[2]
    cdef Py_ssize_t nq = V.shape[1]
    cdef Py_ssize_t b, n, q, m
    cdef double c, dc, y, d, alpha, g, dy
    cdef double p0 = alpha_coef[0], p1 = alpha_coef[1], p2 = alpha_coef[2]
    cdef double p3 = alpha_coef[3], p4 = alpha_coef[4]
    out_arr = np.zeros((nb, nn, nm))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for b in range(nb):
            for n in range(nn):
                for q in range(nq):
                    c = 0.0
                    dc = 0.0
                    for m in range(nm):
                        c = c + coeffs[b, n, m] * V[b, q, m]
                        dc = dc + coeffs[b, n, m] * dV[b, q, m]
                    y = _stoich(c * inv_cmax, a0, logistic, &dy)
                    d = y - 0.5
                    alpha = (p0 * exp(-25.0 * y) + p1 * exp(-p2 * (1.0 - y))
                             + p3 * exp(-15.0 * (1.0 - y)) + p4 / (1.0 + d * d))
                    g = alpha * dc * wr2[b, q] * diffusivity
                    for m in range(nm):
                        out[b, n, m] += g * dV[b, q, m]
                for m in range(nm):
                    out[b, n, m] *= inv_norm[b, m]
    return out_arr


def reaction(const double[:, :, ::1] coeffs, const double[:, ::1] surf,
             const double[::1] phi_gap, double i0, double f, double a0, double b0,
             double inv_cmax, int logistic, int charge):
    cdef Py_ssize_t nb = coeffs.shape[0], nn = coeffs.shape[1], nm = coeffs.shape[2]
    cdef Py_ssize_t b, n, m
    cdef double cs, y, dy, e1, e2, U, dU, s, t, st, sh
    cs_arr = np.empty((nb, nn))
    ib_arr = np.empty((nb, nn))
    di_arr = np.empty((nb, nn))
    dc_arr = np.empty((nb, nn))
    cdef double[:, ::1] cs_v = cs_arr, ib = ib_arr, di = di_arr, dcs = dc_arr
    with nogil:
        for b in range(nb):
            for n in range(nn):
                cs = 0.0
                for m in range(nm):
                    cs = cs + coeffs[b, n, m] * surf[b, m]
                y = _stoich(cs * inv_cmax, a0, logistic, &dy)
                if charge:
                    e1 = exp(-35.0 * y)
                    e2 = exp(-210.0 * (1.0 - y))
                    U = 3.4510 - 0.009 * y + 0.6687 * e1 - 0.5 * e2
                    dU = -0.009 - 35.0 * 0.6687 * e1 - 210.0 * 0.5 * e2
                else:
                    e1 = exp(-200.0 * y)
                    e2 = exp(-30.0 * (1.0 - y))
                    U = 3.4077 - 0.020269 * y + 0.5 * e1 - 0.9 * e2
                    dU = -0.020269 - 200.0 * 0.5 * e1 - 30.0 * 0.9 * e2
                s = f * (phi_gap[n] - U)
                t = tanh(0.5 * a0 * s)
                st = b0 * t
                cs_v[b, n] = cs
                ib[b, n] = 2.0 * i0 * sinh(st)
                # sech^2 rather than 1 - t^2: stays nonzero deep in saturation
                sh = 1.0 / cosh(0.5 * a0 * s)
                di[b, n] = 2.0 * i0 * cosh(st) * (0.5 * a0 * b0 * sh * sh) * f
                dcs[b, n] = -di[b, n] * dU * dy * inv_cmax
    return cs_arr, ib_arr, di_arr, dc_arr
