import cmath
import math

import numpy as np
import pytest

from schottkytau.schottky import genus1_group
from schottkytau.zograf import (
    ConvergenceGateError,
    QSeriesConfig,
    eta,
    eta_product_log,
    f_holomorphy_check,
    f_product,
    log_eta,
)

from test_schottky import genus2_group

ETA_I_CLOSED_FORM = math.gamma(0.25) / (2.0 * math.pi ** 0.75)


class TestEta:
    def test_eta_at_i(self):
        val, cfg = eta(1j)
        assert abs(val - ETA_I_CLOSED_FORM) < 1e-13
        assert cfg.tail_bound < 1e-15

    def test_q_to_zero_limit(self):
        tau = 40j
        val, _ = eta(tau)
        q24 = cmath.exp(2j * cmath.pi * tau / 24.0)
        assert abs(val / q24 - 1.0) < 1e-12

    def test_pentagonal_number_cross_check(self):
        q = 0.3
        lp, _ = eta_product_log(q, QSeriesConfig.for_q(q, target=1e-18))
        direct = sum((-1) ** k * q ** (k * (3 * k - 1) // 2)
                     for k in range(-12, 13))
        assert abs(cmath.exp(lp) - direct) < 1e-12

    def test_modular_transform_power_24(self):
        tau = 2j
        e1, _ = eta(-1.0 / tau)
        e2, _ = eta(tau)
        assert abs(e1 ** 24 - (-1j * tau) ** 12 * e2 ** 24) < 1e-10

    def test_tail_bound_honored(self):
        q = 0.5
        cfg_small = QSeriesConfig.for_q(q, target=1e-8)
        lp1, _ = eta_product_log(q, cfg_small)
        lp2, _ = eta_product_log(q, QSeriesConfig.for_q(q, target=1e-18))
        assert abs(lp1 - lp2) <= cfg_small.tail_bound

    def test_upper_half_plane_required(self):
        with pytest.raises(ValueError):
            log_eta(1.0 - 0.5j)


class TestFProduct:
    def test_genus1_square_of_euler_product(self):
        tau = 0.1 + 0.9j
        q = cmath.exp(2j * cmath.pi * tau)
        grp = genus1_group(q)
        res = f_product(grp, 6)
        lp, _ = eta_product_log(q)
        assert abs(res.log_value - 2.0 * lp) < 1e-12
        assert res.classes_used == 2

    def test_empty_enumeration_gives_one(self):
        grp = genus1_group(0.3)
        res = f_product(grp, 0)
        assert res.value == 1.0 + 0j

    def test_genus2_convergence_trend(self):
        grp = genus2_group()
        logs = {}
        for L in (6, 8, 10, 12):
            logs[L] = f_product(grp, L, delta_gate=0.3).log_value
        d1 = abs(logs[8] - logs[6])
        d2 = abs(logs[10] - logs[8])
        d3 = abs(logs[12] - logs[10])
        assert d2 <= d1 / 2.0
        assert d3 <= d2 / 2.0

    def test_delta_gate(self):
        grp = genus2_group()
        with pytest.raises(ConvergenceGateError):
            f_product(grp, 4, delta_gate=1.2)

    def test_conjugation_invariance(self):
        from schottkytau.moebius import MoebiusMap, compose
        from schottkytau.schottky import MarkedSchottkyGroup

        base = genus2_group()
        h = MoebiusMap(1.0, 0.2j, 0.1, 1.0)
        conj = MarkedSchottkyGroup(
            [compose(compose(h, g), h.inverse()) for g in base.generators])
        r1 = f_product(base, 6, delta_gate=0.3)
        r2 = f_product(conj, 6, delta_gate=0.3)
        assert abs(r1.value - r2.value) < 1e-8

    def test_inner_truncation_honors_tail_bound(self):
        grp = genus1_group(0.4 + 0.1j)
        r1 = f_product(grp, 4, inner_target=1e-6)
        r2 = f_product(grp, 4, inner_target=1e-17)
        cfg = QSeriesConfig.for_q(abs(0.4 + 0.1j), target=1e-6)
        assert abs(r1.log_value - r2.log_value) <= 2 * cfg.tail_bound


class TestHolomorphy:
    def test_genus1_family_derivative_matches_qseries(self):
        tau0 = 0.05 + 1.1j

        def family(w):
            return genus1_group(cmath.exp(2j * cmath.pi * (tau0 + w)))

        deriv, cr = f_holomorphy_check(family, 0.0, max_word_length=6, step=1e-4)
        # d log F / d tau = d/d tau [2 sum log(1 - q^m)]
        h = 1e-6
        lp = lambda t: eta_product_log(cmath.exp(2j * cmath.pi * t))[0]
        expected = (lp(tau0 + h) - lp(tau0 - h)) / (2 * h) * 2.0
        assert abs(deriv - expected) < 1e-6
        assert cr < 1e-7

    def test_genus2_family_cr_residual(self):
        from schottkytau.moebius import from_fixed_points_and_multiplier
        from schottkytau.schottky import MarkedSchottkyGroup
        import math as _m

        def family(w):
            L1 = from_fixed_points_and_multiplier(
                0.0, complex(_m.inf, 0.0), (0.028 + 0.006j) * (1.0 + w))
            L2 = from_fixed_points_and_multiplier(1.0, -2.0, 0.032 - 0.004j)
            return MarkedSchottkyGroup([L1, L2])

        deriv, cr = f_holomorphy_check(family, 0.0, max_word_length=8, step=1e-4)
        assert cr < 1e-4
