import cmath
import math

import numpy as np
import pytest

from schottkytau.numerics import QuadratureConfig, circle_path, contour_integral
from schottkytau.taufn import (
    CoordinatePath,
    Genus1HurwitzFamily,
    NormalizedGenus2Family,
    TauError,
    TauValue,
    compatibility_check,
    dlog_tau,
    dlog_tau_all,
    genus1_point,
    genus1_tau,
    hurwitz_dlog_tau,
    integrate_tau,
    isomonodromic_tau48,
)
from schottkytau.zograf import log_eta

from test_forms import eisenstein_e2

ETA_I = math.gamma(0.25) / (2.0 * math.pi ** 0.75)


class TestGenus1ClosedForm:
    def test_value_at_i(self):
        tv = genus1_tau(1j)
        assert abs(cmath.exp(tv.log_tau) - ETA_I ** 2) < 1e-12
        assert abs(cmath.exp(tv.log_tau) - 0.590170) < 1e-6

    def test_two_term_expansion_at_5i(self):
        tv = genus1_tau(5j)
        q = cmath.exp(2j * cmath.pi * 5j)
        lead = cmath.exp(-5 * cmath.pi / 6) * (1 - 2 * q + q ** 2 * 0)
        assert abs(cmath.exp(tv.log_tau) / lead - 1) < 1e-12

    def test_modular_property_of_eta48(self):
        # eta(-1/tau) = sqrt(-i tau) eta(tau), so tau24 picks up (-i tau)^24
        tau = 2j
        lhs = genus1_tau(-1.0 / tau).tau24
        rhs = (-1j * tau) ** 24 * genus1_tau(tau).tau24
        assert abs(lhs / rhs - 1) < 1e-10


class TestIsomonodromic:
    def test_reciprocal(self):
        assert isomonodromic_tau48(2.0) == 0.5

    def test_modulus_product_one(self):
        t24 = 0.3 + 0.4j
        assert abs(abs(isomonodromic_tau48(t24)) * abs(t24) - 1.0) < 1e-15

    def test_zero_rejected(self):
        with pytest.raises(TauError):
            isomonodromic_tau48(0.0)

    def test_genus1_inverse_power(self):
        tv = genus1_tau(0.2 + 1.1j)
        assert abs(isomonodromic_tau48(tv.tau24) - 1.0 / tv.tau24) < 1e-15


class TestTauODEGenus1:
    def test_b_derivative_matches_eta_squared(self):
        tau0 = 1.3j
        pt = genus1_point(tau0)
        val = dlog_tau(pt, 1)  # B-direction: s = a-cycle
        expected = 1j * cmath.pi / 6.0 * eisenstein_e2(tau0)
        assert abs(val - expected) < 1e-5

    def test_b_derivative_generic_tau(self):
        tau0 = 0.21 + 1.02j
        pt = genus1_point(tau0)
        val = dlog_tau(pt, 1)
        expected = 1j * cmath.pi / 6.0 * eisenstein_e2(tau0)
        assert abs(val - expected) < 1e-5

    def test_a_direction_reported_but_finite(self):
        # the scaling-direction derivative is computed, not asserted against
        # a closed form (the eta^2 slice fixes A = 1)
        pt = genus1_point(1.1j)
        val = dlog_tau(pt, 0)
        assert np.isfinite(val.real) and np.isfinite(val.imag)


def _genus1_resolver(max_length=None):
    def resolve(zeta, hint=None):
        A, B = complex(zeta[0]), complex(zeta[1])
        return genus1_point(B / A, A=A, max_length=max_length)

    return resolve


def genus1_path(b0, b1, n=8):
    resolve = _genus1_resolver()
    samples = [resolve([1.0, b0 + (b1 - b0) * k / n]) for k in range(n + 1)]
    return CoordinatePath(samples=samples, resolver=resolve)


class TestIntegrateTau:
    def test_zero_length_path(self):
        pt = genus1_point(1.2j)
        path = CoordinatePath(samples=[pt, pt], resolver=_genus1_resolver())
        tv = integrate_tau(path)
        assert tv.log_tau == 0j
        assert tv.tau24 == 1.0 + 0j

    def test_genus1_b_path_matches_eta(self):
        b0, b1 = 1.2j, 0.2 + 1.4j
        path = genus1_path(b0, b1, n=8)
        tv = integrate_tau(path)
        expected = 2.0 * (log_eta(b1)[0] - log_eta(b0)[0])
        assert abs(tv.log_tau - expected) < 1e-5

    def test_step_control_violation(self):
        resolve = _genus1_resolver()
        p0 = resolve([1.0, 1.2j])
        p1 = resolve([1.0, 1.2j + 0.4])
        with pytest.raises(TauError):
            CoordinatePath(samples=[p0, p1], resolver=resolve)


class TestContourRadiusIndependence:
    def test_zero_cycle_radius_halving(self):
        fam = NormalizedGenus2Family(max_length=8)
        params = np.array([0.028 + 0.006j, 0.032 - 0.004j, -2.0, 1.0, 0.35 + 0.2j])
        pt = fam.point(params)
        from schottkytau.taufn import _ode_integrand

        z2 = pt.form.zero_data[1]["z"]
        base_path = pt.cycle_paths[("s_zero", 1)]
        tight = QuadratureConfig(target_tolerance=1e-12)
        v1 = contour_integral(_ode_integrand(pt), base_path, tight).value
        # halve the radius
        r = abs(base_path(0.0) - z2)
        v2 = contour_integral(_ode_integrand(pt), circle_path(z2, r / 2), tight).value
        assert abs(v1 - v2) < 1e-9


class TestGenus2Compatibility:
    def test_all_directional_values_finite(self):
        fam = NormalizedGenus2Family(max_length=8)
        params = np.array([0.028 + 0.006j, 0.032 - 0.004j, -2.0, 1.0, 0.35 + 0.2j])
        pt = fam.point(params)
        vals = dlog_tau_all(pt)
        assert vals.shape == (5,)
        assert np.all(np.isfinite(vals.view(float)))

    def test_mixed_partials_small(self):
        fam = NormalizedGenus2Family(max_length=8)
        params = np.array([0.028 + 0.006j, 0.032 - 0.004j, -2.0, 1.0, 0.35 + 0.2j])
        pt = fam.point(params)
        resolver = fam.resolver(params)
        pairs = [(0, 1), (2, 3), (1, 4)]
        resid = compatibility_check(pt, pairs, 1e-4, resolver)
        assert resid < 1e-3


class TestHurwitzMode:
    PARAMS = np.array([0.13 + 1.02j, 0.5, -0.62 + 0.1j, 0.0])

    def test_four_coordinates(self):
        fam = Genus1HurwitzFamily()
        pt = fam.point(self.PARAMS)
        assert pt.coordinates.shape == (4,)
        assert pt.mode == "hurwitz"

    def test_derivatives_finite_and_stable_under_radius(self):
        fam = Genus1HurwitzFamily()
        pt = fam.point(self.PARAMS)
        from schottkytau.taufn import _ode_integrand

        v = hurwitz_dlog_tau(pt, 0)
        assert np.isfinite(v.real)
        base_path = pt.cycle_paths[("s_ram", 0)]
        z = pt.critical_points[0]
        r = abs(base_path(0.0) - z)
        v2 = (1j / (12 * math.pi)) * contour_integral(
            _ode_integrand(pt), circle_path(z, r / 2)).value
        assert abs(v - v2) < 1e-8

    def test_translation_covariance(self):
        fam = Genus1HurwitzFamily()
        pt0 = fam.point(self.PARAMS)
        shifted = self.PARAMS.copy()
        shifted[3] = 0.7 - 0.2j
        pt1 = fam.point(shifted)
        assert np.max(np.abs((pt1.coordinates - pt0.coordinates)
                             - (shifted[3] - self.PARAMS[3]))) < 1e-10
        for i in range(4):
            assert abs(hurwitz_dlog_tau(pt1, i) - hurwitz_dlog_tau(pt0, i)) < 1e-8
