import math

import numpy as np
import pytest

from schottkytau.numerics import (
    AnnulusRegion,
    QuadratureConfig,
    TruncationReport,
    circle_path,
    contour_integral,
    holomorphic_fd,
    limit_extrapolate,
    pairwise_sum,
    polyline_path,
    region_integral_excised,
    segment_path,
)


class TestContourIntegral:
    def test_residue_one_over_z(self):
        rep = contour_integral(lambda z: 1.0 / z, circle_path(0, 1.0))
        assert rep.converged
        assert abs(rep.value - 2j * np.pi) < 1e-10

    def test_holomorphic_z(self):
        rep = contour_integral(lambda z: z, circle_path(0, 1.0))
        assert abs(rep.value) < 1e-12

    def test_one_over_z_cubed(self):
        rep = contour_integral(lambda z: z ** -3, circle_path(0, 1.0))
        assert abs(rep.value) < 1e-10

    def test_random_polynomials_integrate_to_zero(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            coeffs = rng.normal(size=5) + 1j * rng.normal(size=5)
            rep = contour_integral(lambda z: np.polyval(coeffs, z), circle_path(0.3 + 0.2j, 1.7))
            assert rep.converged
            assert abs(rep.value) < 1e-9

    def test_segment_endpoints(self):
        p = segment_path(1.0, 2.0 + 1j)
        assert abs(p(0.0) - 1.0) < 1e-15
        assert abs(p(1.0) - (2.0 + 1j)) < 1e-15
        rep = contour_integral(lambda z: np.ones_like(z), p)
        assert abs(rep.value - (1.0 + 1j)) < 1e-12

    def test_polyline(self):
        p = polyline_path([0, 1, 1 + 1j])
        rep = contour_integral(lambda z: np.ones_like(z), p)
        assert abs(rep.value - (1 + 1j)) < 1e-12

    def test_nonconvergence_reported_not_silent(self):
        # integrable but nasty oscillation with a tiny subdivision budget
        cfg = QuadratureConfig(target_tolerance=1e-14, max_subdivisions=2)
        rep = contour_integral(lambda z: np.exp(40.0 / (z + 1.5)), circle_path(0, 1.0), cfg)
        assert not rep.converged

    def test_report_invariants(self):
        rep = contour_integral(lambda z: 1.0 / z, circle_path(0, 1.0))
        assert rep.error_estimate >= 0
        assert rep.terms_used > 0
        with pytest.raises(ValueError):
            TruncationReport(value=0j, error_estimate=-1.0, terms_used=3, converged=True)
        with pytest.raises(ValueError):
            TruncationReport(value=0j, error_estimate=0.0, terms_used=0, converged=True)


class TestRegionIntegral:
    def test_annulus_area(self):
        region = AnnulusRegion(0.5, 1.0)
        rep = region_integral_excised(lambda z: np.ones_like(z), region,
                                      cfg=QuadratureConfig(target_tolerance=1e-8))
        assert abs(rep.value - np.pi * 0.75) < 1e-6

    def test_inverse_square_log(self):
        delta = 0.1
        region = AnnulusRegion(delta, 1.0)
        rep = region_integral_excised(lambda z: 1.0 / np.abs(z) ** 2, region,
                                      cfg=QuadratureConfig(target_tolerance=1e-7, max_subdivisions=8000))
        assert abs(rep.value - 2 * np.pi * math.log(1 / delta)) < 1e-4

    def test_excision(self):
        region = AnnulusRegion(0.0 + 1e-12, 1.0)  # effectively the unit disc
        rep = region_integral_excised(lambda z: np.ones_like(z), region,
                                      excisions=[(0.4, 0.2)],
                                      cfg=QuadratureConfig(target_tolerance=1e-7))
        assert abs(rep.value - (np.pi - np.pi * 0.04)) < 1e-5

    def test_overlapping_excisions_rejected(self):
        region = AnnulusRegion(0.1, 1.0)
        with pytest.raises(ValueError):
            region_integral_excised(lambda z: np.ones_like(z), region,
                                    excisions=[(0.4, 0.2), (0.5, 0.2)])

    def test_determinism(self):
        region = AnnulusRegion(0.3, 1.0)
        f = lambda z: np.exp(z) / np.abs(z)
        r1 = region_integral_excised(f, region)
        r2 = region_integral_excised(f, region)
        assert r1.value == r2.value
        assert r1.error_estimate == r2.error_estimate

    def test_membership_quadtree_fallback(self):
        from schottkytau.numerics import MembershipRegion

        square = MembershipRegion((0.0, 1.0, 0.0, 1.0),
                                  lambda z: (z.real > 0) & (z.real < 1) & (z.imag > 0) & (z.imag < 1))
        rep = region_integral_excised(lambda z: z.real * z.imag, square,
                                      cfg=QuadratureConfig(target_tolerance=1e-6))
        assert abs(rep.value - 0.25) < 1e-8

        disc = MembershipRegion((-1.0, 1.0, -1.0, 1.0), lambda z: np.abs(z) < 1.0)
        rep = region_integral_excised(lambda z: np.ones_like(z), disc,
                                      cfg=QuadratureConfig(target_tolerance=1e-3, max_subdivisions=4000))
        assert abs(rep.value - np.pi) < 5e-3


class TestLimitExtrapolate:
    def test_pure_power(self):
        a, b = 1.7 - 0.3j, 2.5
        samples = [(e, a + b * e ** 2) for e in (0.1, 0.05, 0.025)]
        limit, resid = limit_extrapolate(samples, model="power")
        assert abs(limit - a) < 1e-10
        assert resid < 1e-10

    def test_power_log(self):
        a, b = 0.25 + 1j, -3.0
        samples = [(e, a + b * e * math.log(e)) for e in (0.1, 0.05, 0.025, 0.0125)]
        limit, resid = limit_extrapolate(samples, model="power-log")
        assert abs(limit - a) < 1e-10

    def test_constant_sequence(self):
        samples = [(e, 4.2 + 0j) for e in (0.1, 0.05, 0.025)]
        limit, resid = limit_extrapolate(samples)
        assert limit == 4.2 + 0j
        assert resid < 1e-14

    def test_requires_three_decreasing(self):
        with pytest.raises(ValueError):
            limit_extrapolate([(0.1, 1.0), (0.05, 1.0)])
        with pytest.raises(ValueError):
            limit_extrapolate([(0.05, 1.0), (0.1, 1.0), (0.025, 1.0)])


class TestHolomorphicFD:
    def test_square(self):
        d, cr = holomorphic_fd(lambda w: w * w, 1.0, 1e-5)
        assert abs(d - 2.0) < 1e-8
        assert cr < 1e-8

    def test_modulus_squared_detected(self):
        d, cr = holomorphic_fd(lambda w: abs(w) ** 2, 1.0, 1e-5)
        assert abs(cr - 1.0) < 1e-6  # d|w|^2/dwbar = w = 1 here

    def test_exp_richardson(self):
        d, cr = holomorphic_fd(np.exp, 0.3 + 0.1j, 1e-3, richardson=True)
        assert abs(d - np.exp(0.3 + 0.1j)) < 1e-9


def test_pairwise_sum_matches_fsum():
    rng = np.random.default_rng(3)
    xs = list(rng.normal(size=101) + 1j * rng.normal(size=101))
    s = pairwise_sum(xs)
    assert abs(s - (math.fsum(x.real for x in xs) + 1j * math.fsum(x.imag for x in xs))) < 1e-12
