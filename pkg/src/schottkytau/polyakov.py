"""The regularized Polyakov integral.

For a 1-form h dz and a background metric e^phi |dz|^2 on the same surface,
with psi = phi - 2i theta and e^{i theta} = h/|h|,

    I = lim_d [ int_{X_d} |psi_z|^2 d2z
                + (i/2) sum_zeros oint_{S_d(z_k)} (phi - 2 log|h|)/(zbar - zbar_k) dzbar ]
        - pi sum_zeros (phi - log|htilde_k|)(z_k),

the circles carrying the orientation induced from the excised surface
(clockwise). Meromorphic forms with simple poles add pole circles with weight
-i and point terms +2 pi (phi + 2 log|htilde_j|)(z_j). Everything is
evaluated in the plane chart over a fundamental domain; psi_z transforms with
weight (1,0), making the bulk density invariant.

Only the genus-1 flat unit-area metric ships as a provider; higher-genus
hyperbolic densities are an extension point.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .numerics import (
    AnnulusRegion,
    QuadratureConfig,
    TruncationReport,
    circle_path,
    contour_integral,
    limit_extrapolate,
    region_integral_excised,
)
from .schottky import fundamental_domain

__all__ = [
    "PolyakovError",
    "MetricProvider",
    "Genus1FlatMetric",
    "FlatChartMetric",
    "PhaseField",
    "regularized_I",
    "regularized_I_meromorphic",
    "local_chart_contribution",
    "dI_formula",
]


class PolyakovError(Exception):
    pass


class MetricProvider:
    """Chart density phi with phi(gamma z) + log|gamma'|^2 = phi(z)."""

    def phi(self, z):
        raise NotImplementedError

    def phi_z(self, z):
        raise NotImplementedError

    def phi_zz(self, z):
        raise NotImplementedError

    def invariance_certificate(self, group, n_samples=16, rng_seed=2):
        rng = np.random.default_rng(rng_seed)
        dom = fundamental_domain(group)
        probe = dom.interior_point()
        worst = 0.0
        for _ in range(n_samples):
            z = probe * (1.0 + 0.1 * (rng.random() - 0.5)) * cmath.exp(
                2j * math.pi * rng.random())
            gamma = group.letter_map(int(rng.choice(group.alphabet())))
            lhs = self.phi(gamma(z)) + math.log(abs(gamma.deriv(z)) ** 2)
            worst = max(worst, abs(lhs - self.phi(z)))
        return worst


class Genus1FlatMetric(MetricProvider):
    """The unit-area flat metric of the torus C^*/(z ~ qz):

    phi(z) = -2 log|z| - log(2 pi ell), ell = -log|q|.
    """

    def __init__(self, group):
        if group.genus != 1:
            raise PolyakovError("flat provider is genus-1 only")
        q = group.classifications()[0].loxodromic.multiplier
        self.q = q
        self.ell = -math.log(abs(q))
        self._const = math.log(2.0 * math.pi * self.ell)

    def phi(self, z):
        return -2.0 * np.log(np.abs(z)) - self._const

    def phi_z(self, z):
        return -1.0 / np.asarray(z, dtype=complex)

    def phi_zz(self, z):
        return 1.0 / np.asarray(z, dtype=complex) ** 2


class FlatChartMetric(MetricProvider):
    """phi identically zero: the bare chart metric for one-chart fixtures."""

    def phi(self, z):
        return np.zeros(np.shape(z))

    def phi_z(self, z):
        return np.zeros(np.shape(z), dtype=complex)

    def phi_zz(self, z):
        return np.zeros(np.shape(z), dtype=complex)


class PhaseField:
    """theta = arg h bookkeeping: 2i theta_z = h_z/h, psi_z = phi_z - h_z/h."""

    def __init__(self, form, metric):
        self.form = form
        self.metric = metric

    def psi_z(self, zs):
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        h, h1 = self.form.evaluate_many(zs, 1)
        return self.metric.phi_z(zs) - h1 / h

    def two_i_theta_z(self, zs):
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        h, h1 = self.form.evaluate_many(zs, 1)
        return h1 / h

    def log_abs_h(self, zs):
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        h, = self.form.evaluate_many(zs, 0)
        return np.log(np.abs(h))

    def theta_z_identity_defect(self, zs):
        """|2i theta_z - h_z/h| with theta_z from branch-safe FD of arg h."""
        worst = 0.0
        for z in np.atleast_1d(zs):
            z = complex(z)
            eps = 1e-6 * max(abs(z), 1.0)
            h0 = self.form.h(z)
            # local increment of theta = arg h, unwrapped against h(z)
            dth = lambda w: cmath.log(self.form.h(w) / h0).imag
            tx = (dth(z + eps) - dth(z - eps)) / (2 * eps)
            ty = (dth(z + 1j * eps) - dth(z - 1j * eps)) / (2 * eps)
            theta_z = 0.5 * (tx - 1j * ty)
            direct = self.two_i_theta_z(np.array([z]))[0]
            worst = max(worst, abs(2j * theta_z - direct))
        return worst


def _circle_term(phase, center, delta, pole=False, cfg=None):
    """(i/2) oint (phi - 2 log|h|)/(zbar - zbarc) dzbar, clockwise circle.

    Pole circles (eq. for the meromorphic case) carry weight -i instead.
    """
    cfg = cfg or QuadratureConfig()
    path = circle_path(center, delta, clockwise=True)

    def integrand_conj(zs):
        # integrate f dzbar as conj(conj(f) dz): supply conj factors
        vals = (phase.metric.phi(zs) - 2.0 * phase.log_abs_h(zs))
        return np.conj(vals / (np.conj(zs) - np.conj(center)))

    rep = contour_integral(integrand_conj, path, cfg)
    weight = -1j if pole else 0.5j
    return weight * np.conj(rep.value), rep


def regularized_I(form, metric, cfg=None, region=None):
    """I(X, Phi) for a holomorphic form; delta-extrapolated TruncationReport."""
    cfg = cfg or QuadratureConfig()
    phase = PhaseField(form, metric)
    zeros = form.zero_data
    if zeros is None:
        from .forms import find_zeros

        zeros = find_zeros(form, cfg=cfg)
    if region is None:
        region = _fundamental_region(form.group)
    return _regularized_core(phase, region, zeros, [], cfg)


def regularized_I_meromorphic(form, metric, pole_data, cfg=None, region=None,
                              zero_data=None):
    """I(X, d lambda): simple-pole corrections per the meromorphic recipe."""
    cfg = cfg or QuadratureConfig()
    for rec in pole_data:
        if abs(rec["dlog_h_tilde"]) > 1e-6:
            raise PolyakovError(
                "pole fails the no-residue condition (log htilde)_z = 0; "
                "only simple poles of lambda are supported")
    phase = PhaseField(form, metric)
    if zero_data is None:
        raise PolyakovError("zero_data (ramification bookkeeping) required")
    if region is None:
        region = _fundamental_region(form.group)
    return _regularized_core(phase, region, zero_data, pole_data, cfg)


def _fundamental_region(group):
    if group.genus == 1:
        c_out = group.circles[0]
        c_in = group.circles[1]
        if abs(c_out.center) > 1e-12 or abs(c_in.center) > 1e-12:
            raise PolyakovError("genus-1 region assumes concentric circles")
        return AnnulusRegion(c_in.radius, c_out.radius)
    raise PolyakovError("no metric provider at genus >= 2; supply a region")


def _regularized_core(phase, region, zeros, poles, cfg):
    marked = list(zeros) + list(poles)
    samples = []
    reports = []
    for delta in cfg.limit_grid:
        bulk = region_integral_excised(
            lambda zs: np.abs(phase.psi_z(zs)) ** 2,
            region,
            excisions=[(rec["z"], delta) for rec in marked],
            cfg=cfg)
        total = bulk.value
        reports.append(bulk)
        for rec in zeros:
            val, rep = _circle_term(phase, rec["z"], delta, pole=False, cfg=cfg)
            total += val
            reports.append(rep)
        for rec in poles:
            val, rep = _circle_term(phase, rec["z"], delta, pole=True, cfg=cfg)
            total += val
            reports.append(rep)
        samples.append((delta, total))
    for rec in zeros:
        z = rec["z"]
        total_pt = -math.pi * (float(phase.metric.phi(np.array([z]))[0])
                               - math.log(abs(rec["h_tilde"])))
        samples = [(d, v + total_pt) for d, v in samples]
    for rec in poles:
        z = rec["z"]
        total_pt = 2.0 * math.pi * (float(phase.metric.phi(np.array([z]))[0])
                                    + 2.0 * math.log(abs(rec["h_tilde"])))
        samples = [(d, v + total_pt) for d, v in samples]
    if len(samples) >= 3:
        limit, resid = limit_extrapolate(samples, model="power")
    else:
        limit, resid = samples[-1][1], abs(samples[-1][1] - samples[0][1])
    quad_err = max(r.error_estimate for r in reports)
    err = resid + quad_err
    converged = all(r.converged for r in reports) and err <= 100 * cfg.target_tolerance
    return TruncationReport(value=limit, error_estimate=err,
                            terms_used=sum(r.terms_used for r in reports),
                            converged=converged)


def local_chart_contribution(h_exponent, coefficient=1.0, delta=1e-2,
                             outer=1.0, cfg=None):
    """One-chart fixture: phi = 0, h = coefficient * z^h_exponent on |z| < outer.

    Returns the pieces (bulk, circle, point, total) of the local contribution
    at the single marked point 0; exponent 1 is a simple zero, -2 a double
    pole of the associated d lambda.
    """
    cfg = cfg or QuadratureConfig(target_tolerance=1e-10)
    if h_exponent not in (1, -2):
        raise PolyakovError("fixture supports a simple zero (1) or pole (-2)")
    n = h_exponent
    c = complex(coefficient)

    class _Chart:
        class metric:
            @staticmethod
            def phi(z):
                return np.zeros(np.shape(z))

        @staticmethod
        def psi_z(zs):
            return -n / np.asarray(zs, dtype=complex)

        @staticmethod
        def log_abs_h(zs):
            return math.log(abs(c)) + n * np.log(np.abs(zs))

    chart = _Chart()
    region = AnnulusRegion(delta, outer)
    bulk = region_integral_excised(
        lambda zs: np.abs(chart.psi_z(zs)) ** 2, region, cfg=cfg)
    circ, _ = _circle_term(chart, 0.0, delta, pole=(n == -2), cfg=cfg)
    if n == 1:
        point = -math.pi * (0.0 - math.log(abs(c)))
    else:
        point = 2.0 * math.pi * (0.0 + 2.0 * math.log(abs(c)))
    total = bulk.value + circ + point
    return {"bulk": bulk.value, "circle": circ, "point": point, "total": total}


def dI_formula(form, metric, mu, deformation_data, cfg=None):
    """The holomorphic variation functional of I.

    value = 2 lim int (phi_zz - phi_z^2/2 - S(h)) mu d2z
            + pi sum_k (3 fdot_z + (3/2)(log ht_k)^dot + (3/2)(log ht_k)_z fdot
                        - (1/2)(log ht_k)_z f_z zdot_k)(z_k)

    with S(h) = h_zz/h - (3/2)(h_z/h)^2 = 2 theta_z^2 + 2i theta_zz and
    f_z = 1 at the basepoint. deformation_data supplies fdot, fdot_z and the
    per-zero dotted quantities; an empty zero set drops the sum.
    """
    cfg = cfg or QuadratureConfig()

    def integrand(zs):
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        h, h1, h2 = form.evaluate_many(zs, 2)
        s_h = h2 / h - 1.5 * (h1 / h) ** 2
        quad = metric.phi_zz(zs) - 0.5 * metric.phi_z(zs) ** 2 - s_h
        return quad * mu(zs)

    seed = mu.seed
    region = AnnulusRegion(0.0 + 1e-9, seed.radius * 1.001, center=seed.center)
    bulk = region_integral_excised(integrand, region, cfg=cfg)
    total = 2.0 * bulk.value
    zeros = form.zero_data or []
    for k, rec in enumerate(zeros):
        d = deformation_data[k]
        total += math.pi * (3.0 * d["fdot_z"]
                            + 1.5 * d["dlog_htilde_dot"]
                            + 1.5 * rec["dlog_h_tilde"] * d["fdot"]
                            - 0.5 * rec["dlog_h_tilde"] * d["zdot"])
    return total
