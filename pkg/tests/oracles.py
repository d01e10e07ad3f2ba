"""Independent reference computations used to freeze expected values.

Nothing here imports the package's numerical code; each oracle uses a
different algorithm (bisection, adaptive quadrature, eigen-decomposition)
from the implementation under test.
"""
import math

import numpy as np
from scipy.integrate import quad


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < 1e-16 * max(1.0, abs(mid)):
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def tan_root(j):
    """j-th positive root of tan(g) = g by bisection of g cos g - sin g."""
    return bisect(lambda g: g * math.cos(g) - math.sin(g), j * math.pi + 1e-9, j * math.pi + math.pi / 2 - 1e-9)


def radial_norm_quad(gamma, R):
    if gamma == 0.0:
        return quad(lambda r: r * r, 0, R)[0]
    k = gamma / R
    return quad(lambda r: math.sin(k * r) ** 2, 0, R, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def radial_cross_quad(gi, gj, R):
    def v(g, r):
        return 1.0 if g == 0.0 else math.sin(g * r / R) / r
    return quad(lambda r: r * r * v(gi, r) * v(gj, r), 0, R, epsabs=1e-14, epsrel=1e-12, limit=400)[0]


def foil_bisect(current, c1, i_f=10.0, beta=0.5, c_ini=1000.0, R=8.3145, T=298.15, F=96485.0):
    f = F / (R * T)
    scale = i_f * (c1 / c_ini) ** (1 - beta)
    g = lambda phi: scale * (math.exp((1 - beta) * f * phi) - math.exp(-beta * f * phi)) - current
    return bisect(g, -2.0, 2.0)


def observer_closed_form(g, h0, h1, x0, input_fn_poly, t):
    """Exact solution of x' = M x + L u for u(t) = a + b t via eigen-decomposition.

    For polynomial inputs of degree <= 1 the forced response is a particular
    polynomial solution; the homogeneous part decays with the eigenvalues of M.
    """
    a, b = input_fn_poly
    M = np.array([[-g * h1, 1.0], [-g * g * h0, 0.0]])
    L = np.array([g * h1, g * g * h0])
    # particular solution x_p = p + q t: q = -M^{-1} L b, p = M^{-1}(q - L a)
    Minv = np.linalg.inv(M)
    q = -Minv @ (L * b)
    p = Minv @ (q - L * a)
    lam, V = np.linalg.eig(M)
    c = np.linalg.solve(V, np.asarray(x0, float) - p)
    hom = (V @ (c * np.exp(lam * t))).real
    return p + q * t + hom


def ocp_charge(y):
    return 3.4510 - 0.009 * y + 0.6687 * math.exp(-35 * y) - 0.5 * math.exp(-210 * (1 - y))


def ocp_discharge(y):
    return 3.4077 - 0.020269 * y + 0.5 * math.exp(-200 * y) - 0.9 * math.exp(-30 * (1 - y))
