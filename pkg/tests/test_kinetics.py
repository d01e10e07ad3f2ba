import math

import numpy as np
import pytest

from lfpsim import ConfigError, Direction, DomainError, ParameterSet, RateCorrections, SaturationParams
from lfpsim.kinetics import (activity_correction, activity_correction_rated, boundary_mollifier,
                             exchange_current, exchange_current_bound, exchange_current_derivative,
                             foil_potential, foil_residual, mollifier, ocp, ocp_derivative, sat,
                             sat_derivative, sat_y, surface_stoichiometry)
from lfpsim.params import DEFAULT_RATE_TABLE

from oracles import foil_bisect, ocp_charge, ocp_discharge

SP = SaturationParams()
P = ParameterSet()


class TestParameters:
    def test_defaults_and_derived(self):
        assert P.L1 == pytest.approx(675e-6)
        assert P.L == pytest.approx(747e-6)
        assert np.all(P.a_bin > 0) and np.all(np.isfinite(P.a_bin))
        assert P.i_1c == pytest.approx(2.31e-3 / 1.202e-4, rel=1e-12)

    @pytest.mark.parametrize("field,value", [("l_cat", 0.0), ("t_plus0", 1.0), ("beta_f", 0.0),
                                             ("eps_e_sep", 1.2), ("D_solid", -1.0)])
    def test_invalid_parameters_rejected(self, field, value):
        with pytest.raises(ConfigError):
            ParameterSet(**{field: value})

    def test_eps_s_sum_bounded(self):
        with pytest.raises(ConfigError):
            ParameterSet(eps_s_bin=(0.5, 0.4, 0.3))

    @pytest.mark.parametrize("field", ["g", "h0", "h1", "a0", "b0", "eps0"])
    def test_saturation_params_positive(self, field):
        with pytest.raises(ConfigError):
            SaturationParams(**{field: 0.0})

    def test_direction_parsing(self):
        assert Direction.parse("Charge") is Direction.CHARGE
        with pytest.raises(ConfigError):
            Direction.parse("sideways")
        assert Direction.of_current(0.0, Direction.CHARGE) is Direction.CHARGE
        assert Direction.of_current(1.0, Direction.CHARGE) is Direction.DISCHARGE

    def test_rate_table_matches_source(self):
        rc = RateCorrections()
        assert rc.lookup(1.0) == (0.9, 0.96, 0.8, 1.0, 1.3)
        assert rc.lookup(0.1) == (1.3, 0.3, 0.3, 1.0, 0.4)
        assert rc.lookup(0.15) in (DEFAULT_RATE_TABLE[0.1], DEFAULT_RATE_TABLE[0.2])
        assert rc.lookup(5.0) == DEFAULT_RATE_TABLE[2.0]

    def test_rate_table_without_fallback(self):
        with pytest.raises(ConfigError):
            RateCorrections(fallback=False).lookup(0.3)

    def test_rate_table_rejects_nonpositive(self):
        with pytest.raises(ConfigError):
            RateCorrections({1.0: (1, 1, 0, 1, 1)})


class TestSaturations:
    def test_sat_values(self):
        assert sat(0.0, SP) == 0.0
        assert sat(1.0, SP) == pytest.approx(2.0251 * (1 - math.exp(-1)) / (1 + math.exp(-1)), abs=1e-14)
        assert sat(1.0, SP) == pytest.approx(0.9358, abs=1e-4)
        assert sat(1e6, SP) == pytest.approx(SP.b0)

    def test_sat_matches_logistic_form(self):
        s = np.linspace(-30, 30, 301)
        logistic = 2 * SP.b0 / (1 + np.exp(-SP.a0 * s)) - SP.b0
        assert np.max(np.abs(sat(s, SP) - logistic)) < 1e-13

    def test_sat_odd_bounded_increasing(self):
        s = np.linspace(-50, 50, 10001)
        v = sat(s, SP)
        assert np.all(np.abs(v) <= SP.b0)
        assert np.all(np.abs(sat(np.linspace(-15, 15, 101), SP)) < SP.b0)
        assert np.array_equal(sat(-s, SP), -v)
        assert np.all(np.diff(sat(np.linspace(-15, 15, 1001), SP)) > 0)

    def test_sat_derivative_fd(self):
        s = np.linspace(-5, 5, 41)
        h = 1e-6
        fd = (sat(s + h, SP) - sat(s - h, SP)) / (2 * h)
        assert np.max(np.abs(fd - sat_derivative(s, SP))) < 1e-8
        # stays strictly positive far into saturation
        assert sat_derivative(80.0, SP) > 0

    def test_sat_y(self):
        assert sat_y(0.0, 1.0) == 0.5
        assert sat_y(1.0, 1.0) == pytest.approx(0.7310585786300049, abs=1e-15)
        assert sat_y(800.0, 1.0) == 1.0
        s = np.linspace(-30, 30, 1001)
        v = sat_y(s, 1.0)
        assert np.all((v > 0) & (v < 1)) and np.all(np.diff(v) > 0)


class TestMollifiers:
    def test_normalization_and_support(self):
        x0, e = 72e-6, 1e-4
        x = np.linspace(x0 * (1 - 2 * e), x0 * 1.0001, 200001)
        m = mollifier(x, x0, e)
        assert np.trapezoid(m, x) == pytest.approx(1.0, rel=1e-3)
        assert np.all(m[x < x0 * (1 - e)] == 0)

    def test_height(self):
        assert mollifier(72e-6, 72e-6, 1e-4) == pytest.approx(1.3889e8, rel=1e-4)

    def test_boundary_variant(self):
        L = 747e-6
        x = np.linspace(0, 2e-4 * L, 100001)
        assert np.trapezoid(boundary_mollifier(x, L, 1e-4), x) == pytest.approx(1.0, rel=1e-3)

    @pytest.mark.parametrize("fn", [lambda: mollifier(0.1, 1.0, 0.0), lambda: boundary_mollifier(0.1, 1.0, -1.0)])
    def test_rejects_nonpositive_width(self, fn):
        with pytest.raises(ConfigError):
            fn()


class TestOcp:
    def test_midpoint_values(self):
        assert ocp(0.5, Direction.CHARGE) == pytest.approx(3.44650, abs=1e-4)
        assert ocp(0.5, Direction.DISCHARGE) == pytest.approx(3.39756, abs=1e-4)

    @pytest.mark.parametrize("y", [0.01, 0.2, 0.5, 0.77, 0.99])
    def test_against_oracle(self, y):
        assert ocp(y, Direction.CHARGE) == pytest.approx(ocp_charge(y), abs=1e-14)
        assert ocp(y, Direction.DISCHARGE) == pytest.approx(ocp_discharge(y), abs=1e-14)

    @pytest.mark.parametrize("y", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_domain(self, y):
        with pytest.raises(DomainError):
            ocp(y, Direction.CHARGE)

    @pytest.mark.parametrize("d", [Direction.CHARGE, Direction.DISCHARGE])
    def test_derivative_fd(self, d):
        y = np.linspace(0.02, 0.98, 49)
        h = 1e-7
        fd = (ocp(y + h, d) - ocp(y - h, d)) / (2 * h)
        assert np.max(np.abs(fd - ocp_derivative(y, d))) < 1e-5

    def test_deterministic(self):
        assert ocp(0.3, Direction.CHARGE) - ocp(0.3, Direction.CHARGE) == 0.0


class TestActivity:
    def test_values(self):
        assert activity_correction(0.5) == pytest.approx(0.30002, abs=1e-4)
        assert activity_correction(0.0) == pytest.approx(6 + 15 * math.exp(-35) + 0.24, abs=1e-12)
        assert activity_correction(0.0) == pytest.approx(6.24, abs=1e-4)

    def test_bounds_on_dense_grid(self):
        # true range is about [0.284, 15.24]; the 15 e^{-35(1-y)} term dominates near y = 1
        a = activity_correction(np.linspace(0, 1, 10_000))
        assert np.all(a > 0)
        assert a.min() >= 0.2
        assert a.max() <= 16.0
        assert a.max() == pytest.approx(15.24, abs=0.01)

    def test_domain(self):
        with pytest.raises(DomainError):
            activity_correction(1.01)

    def test_rated_values(self):
        rc = RateCorrections()
        assert activity_correction_rated(0.5, Direction.DISCHARGE, 1.0, rc) == pytest.approx(0.16163, abs=1e-5)
        assert activity_correction_rated(0.0, Direction.CHARGE, 1.0, rc) == pytest.approx(9.2080, abs=1e-4)

    def test_rated_identity_rows(self):
        ones = RateCorrections({r: (1, 1, 1, 1, 1) for r in (0.1, 1.0, 2.0)})
        y = np.linspace(0, 1, 11)
        base = activity_correction_rated(y, Direction.CHARGE, 0.1, ones)
        for rate in (1.0, 2.0):
            assert np.array_equal(activity_correction_rated(y, Direction.CHARGE, rate, ones), base)

    def test_rated_unknown_rate_without_fallback(self):
        with pytest.raises(ConfigError):
            activity_correction_rated(0.5, Direction.CHARGE, 0.7, RateCorrections(fallback=False))


class TestKinetics:
    def test_exchange_current(self):
        assert exchange_current(0.0, P, SP) == 0.0
        assert exchange_current(0.3, P, SP, in_reaction_zone=False) == 0.0
        bound = exchange_current_bound(P, SP)
        assert bound == pytest.approx(0.2420, abs=1e-4)
        eta = np.linspace(-20, 20, 2001)
        assert np.all(np.abs(exchange_current(eta, P, SP)) <= bound)

    def test_exchange_current_derivative(self):
        eta = np.linspace(-0.3, 0.3, 31)
        h = 1e-7
        fd = (exchange_current(eta + h, P, SP) - exchange_current(eta - h, P, SP)) / (2 * h)
        assert np.allclose(fd, exchange_current_derivative(eta, P, SP), rtol=1e-6, atol=1e-10)

    def test_surface_stoichiometry(self):
        assert surface_stoichiometry(0.0, P, SP) == 0.5
        assert surface_stoichiometry(P.c_s_max, P, SP) == pytest.approx(0.7311, abs=1e-4)
        c = np.linspace(0, P.c_s_max, 100)
        assert np.all(np.diff(surface_stoichiometry(c, P, SP)) > 0)
        y = surface_stoichiometry(np.array([-1.0, 0.5, 2.0]) * P.c_s_max, P, SP, mode="clamp")
        assert y[0] == 1e-6 and y[1] == 0.5 and y[2] == 1 - 1e-6
        with pytest.raises(ConfigError):
            surface_stoichiometry(1.0, P, SP, mode="other")


class TestFoil:
    def test_zero_and_odd(self):
        assert foil_potential(0.0, P.c_ini, P) == 0.0
        for i in (0.5, 19.22, 200.0):
            assert foil_potential(-i, P.c_ini, P) == -foil_potential(i, P.c_ini, P)

    @pytest.mark.parametrize("current,c1", [(19.22, 1000.0), (-5.0, 800.0), (60.0, 1300.0), (1e-3, 10.0)])
    def test_residual_and_oracle(self, current, c1):
        phi = foil_potential(current, c1, P)
        assert abs(foil_residual(phi, current, c1, P)) < 1e-10 * max(1.0, abs(current))
        assert phi == pytest.approx(foil_bisect(current, c1), abs=1e-12)

    def test_closed_form_matches_root_find(self):
        for i in np.linspace(-100, 100, 41):
            a = foil_potential(i, 950.0, P, closed_form=True)
            b = foil_potential(i, 950.0, P, closed_form=False)
            assert abs(a - b) < 1e-9

    def test_asymmetric_beta_uses_root_find(self):
        p = ParameterSet(beta_f=0.3)
        phi = foil_potential(10.0, 1000.0, p)
        assert abs(foil_residual(phi, 10.0, 1000.0, p)) < 1e-10 * 10
        assert phi == pytest.approx(foil_bisect(10.0, 1000.0, beta=0.3), abs=1e-12)

    def test_rejects_nonpositive_concentration(self):
        with pytest.raises(DomainError):
            foil_potential(1.0, 0.0, P)
