"""The Bergman tau function.

log tau_B is defined only along paths, as the line integral of the one-form
whose components are the contour integrals

    d log tau_B / d zeta_i = (i / 12 pi) oint_{s_i} (R_B - R_Phi) / h dz

with s_i = -b_i, s_{g+i} = a_i, and small positive circles around the zeros
p_2..p_m for the remaining coordinates. Only tau_B^24 is global; the module
reports log values per path and the 24th power, never a global branch.

Genus-1 closed form: tau_B = eta(tau)^2. The isomonodromic tau function obeys
tau_I^48 = 1/tau_B^24.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .forms import (
    AbelianDifferential,
    FormsError,
    Genus1TwoPoleMap,
    SurfaceForms,
    find_zeros,
    hurwitz_coordinates,
    projective_connection_of_form,
)
from .moebius import from_fixed_points_and_multiplier
from .numerics import QuadratureConfig, circle_path, contour_integral, polyline_path
from .schottky import Circle, MarkedSchottkyGroup, genus1_group
from .zograf import log_eta

__all__ = [
    "TauError",
    "TauValue",
    "CoordinatePath",
    "dlog_tau",
    "dlog_tau_all",
    "hurwitz_dlog_tau",
    "integrate_tau",
    "compatibility_check",
    "genus1_tau",
    "isomonodromic_tau48",
    "genus1_point",
    "NormalizedGenus2Family",
    "Genus1HurwitzFamily",
]

_TAU_FACTOR = 1j / (12.0 * math.pi)


class TauError(Exception):
    pass


@dataclass(frozen=True)
class TauValue:
    log_tau: complex
    tau24: complex
    path: object = None


def isomonodromic_tau48(tau24):
    """tau_I^48 = tau_B^{-24}."""
    tau24 = complex(tau24)
    if tau24 == 0:
        raise TauError("tau_B^24 vanishes; reciprocal undefined")
    return 1.0 / tau24


def genus1_tau(tau):
    """Closed form tau_B = eta(tau)^2 on the A = 1 slice."""
    le, _ = log_eta(tau)
    log_tau = 2.0 * le
    return TauValue(log_tau=log_tau, tau24=cmath.exp(24.0 * log_tau))


# ---------------------------------------------------------------------------
# the defining one-form
# ---------------------------------------------------------------------------


def _ode_integrand(point):
    """z -> (R_B - R_Phi)/h for a resolved Hurwitz point (either mode)."""
    surface = point.surface
    form = point.form

    def f(zs):
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        h, h1, h2 = form.evaluate_many(zs, 2)
        r_phi = h2 / h - 1.5 * (h1 / h) ** 2
        return (surface.rb_many(zs) - r_phi) / h

    return f


def _s_cycle_path(point, i):
    """The cycle s_i of the tau system as a parametrized path."""
    g = point.form.group.genus
    n = len(point.coordinates)
    if point.mode == "hurwitz":
        return point.cycle_paths[("s_ram", i)]
    if i < g:
        verts = point.cycle_paths[("b", i + 1)]
        return polyline_path(list(reversed(verts)))  # s_i = -b_i
    if i < 2 * g:
        return point.cycle_paths[("a", i - g + 1)]
    j = i - 2 * g + 1
    if ("s_zero", j) not in point.cycle_paths:
        raise TauError(f"no zero cycle {j} stored on the point")
    return point.cycle_paths[("s_zero", j)]


def dlog_tau(point, i, cfg=None):
    """Directional derivative of log tau_B along coordinate i."""
    cfg = cfg or QuadratureConfig()
    path = _s_cycle_path(point, i)
    rep = contour_integral(_ode_integrand(point), path, cfg)
    if not rep.converged:
        raise TauError(f"tau ODE contour for coordinate {i} did not converge")
    return _TAU_FACTOR * rep.value


def dlog_tau_all(point, cfg=None):
    return np.array([dlog_tau(point, i, cfg)
                     for i in range(len(point.coordinates))])


def hurwitz_dlog_tau(point, i, cfg=None):
    """Meromorphic-mode derivative d log tau_B / d lambda_i (same contour engine)."""
    if point.mode != "hurwitz":
        raise TauError("hurwitz_dlog_tau requires a hurwitz-mode point")
    return dlog_tau(point, i, cfg)


# ---------------------------------------------------------------------------
# resolved points: genus 1 direct chart
# ---------------------------------------------------------------------------


def genus1_point(B, A=1.0, max_length=None, cfg=None):
    """Resolved abelian point at genus 1 with coordinates (A, B), B = tau."""
    from .forms import HurwitzPoint

    B = complex(B)
    A = complex(A)
    q = cmath.exp(2j * cmath.pi * B)
    if max_length is None:
        max_length = max(6, int(16.0 / max(-math.log10(abs(q)), 0.2)) + 2)
    grp = genus1_group(q)
    sf = SurfaceForms(grp, max_length, cfg)
    form = sf.differential([A])
    find_zeros(form, cfg=cfg)
    pt = hurwitz_coordinates(sf, form, cfg)
    return pt


# ---------------------------------------------------------------------------
# coordinate paths and integration
# ---------------------------------------------------------------------------


@dataclass
class CoordinatePath:
    """Piecewise-linear path in coordinate space with resolved sample points.

    ``resolver`` maps a coordinate vector (plus a warm-start hint) to a
    resolved point; samples must change by at most 5% per step in every
    active coordinate (relative to the path's own scale).
    """

    samples: list
    resolver: object

    def __post_init__(self):
        if len(self.samples) < 2:
            raise TauError("path needs at least two samples")
        coords = [np.asarray(p.coordinates) for p in self.samples]
        scale = np.maximum(np.max(np.abs(np.stack(coords)), axis=0), 1e-12)
        for a, b in zip(coords, coords[1:]):
            rel = np.abs(b - a) / scale
            if np.max(rel) > 0.05 + 1e-12:
                raise TauError(
                    f"path step {np.max(rel):.3f} exceeds the 5% step control; "
                    "refine the sample sequence")


_PATH_GAUSS = np.polynomial.legendre.leggauss(4)


def integrate_tau(path, cfg=None):
    """log tau_B along the coordinate path, by per-segment Gauss quadrature
    of sum_i dlog_tau_i dzeta_i; tau24 = exp(24 log)."""
    cfg = cfg or QuadratureConfig()
    total = 0j
    samples = path.samples
    for p0, p1 in zip(samples, samples[1:]):
        z0 = np.asarray(p0.coordinates)
        z1 = np.asarray(p1.coordinates)
        dz = z1 - z0
        if np.max(np.abs(dz)) == 0.0:
            continue
        nodes, weights = _PATH_GAUSS
        for t, w in zip(nodes, weights):
            tt = 0.5 * (t + 1.0)
            pt = path.resolver(z0 + tt * dz, hint=p0)
            dl = dlog_tau_all(pt, cfg)
            total += 0.5 * w * complex(np.dot(dl, dz))
    return TauValue(log_tau=total, tau24=cmath.exp(24.0 * total), path=path)


def compatibility_check(point, pairs, fd_step, resolver, cfg=None):
    """max_ij |d_j(dlog_i) - d_i(dlog_j)| by central differences in coordinates."""
    cfg = cfg or QuadratureConfig()
    zeta0 = np.asarray(point.coordinates)
    scale = np.maximum(np.abs(zeta0), 1.0)
    if fd_step > 0.05 * float(np.min(scale)):
        import warnings

        warnings.warn("fd_step large relative to coordinate scale")
    cache = {}

    def dl_at(shift_idx, sign):
        key = (shift_idx, sign)
        if key not in cache:
            zeta = zeta0.copy()
            zeta[shift_idx] += sign * fd_step
            pt = resolver(zeta, hint=point)
            cache[key] = dlog_tau_all(pt, cfg)
        return cache[key]

    worst = 0.0
    for i, j in pairs:
        didj = (dl_at(j, +1)[i] - dl_at(j, -1)[i]) / (2.0 * fd_step)
        djdi = (dl_at(i, +1)[j] - dl_at(i, -1)[j]) / (2.0 * fd_step)
        worst = max(worst, abs(didj - djdi))
    return worst


# ---------------------------------------------------------------------------
# genus-2 normalized family and the coordinate -> parameter inverse problem
# ---------------------------------------------------------------------------


class NormalizedGenus2Family:
    """Genus-2 groups L_1 = q1 z, L_2 with fixed points (1, rho), plus a form.

    Parameters are p = (q1, q2, rho, c1, c2); coordinates are the abelian
    (A_1, A_2, B_1, B_2, Z_1). The inverse map runs Newton with a frozen
    forward-difference Jacobian, warm-starting zero searches from the hint.
    """

    def __init__(self, max_length=8, outer_radius=3.0, cfg=None):
        self.max_length = max_length
        self.outer_radius = outer_radius
        self.cfg = cfg or QuadratureConfig()
        self._jac = None
        self._jac_params = None

    def group(self, params):
        q1, q2, rho = params[0], params[1], params[2]
        L1 = from_fixed_points_and_multiplier(0.0, complex(math.inf, 0.0), q1)
        L2 = from_fixed_points_and_multiplier(1.0, rho, q2)
        gi = L2.inverse()
        R = self.outer_radius
        circles = (
            Circle(0j, R, disc_outside=True),
            Circle(-L2.d / L2.c, 1.0 / abs(L2.c)),
            Circle(0j, R * abs(q1)),
            Circle(-gi.d / gi.c, 1.0 / abs(gi.c)),
        )
        return MarkedSchottkyGroup([L1, L2], circles, normalized=True)

    def point(self, params, zero_seeds=None):
        params = np.asarray(params, dtype=complex)
        grp = self.group(params)
        sf = SurfaceForms(grp, self.max_length, self.cfg)
        form = sf.differential(params[3:5])
        if zero_seeds is not None:
            _newton_zeros_from_seeds(form, zero_seeds)
        else:
            find_zeros(form, cfg=self.cfg)
        return hurwitz_coordinates(sf, form, self.cfg)

    def coordinates(self, params, zero_seeds=None):
        return np.asarray(self.point(params, zero_seeds).coordinates)

    def jacobian(self, params, step=1e-6, zero_seeds=None):
        params = np.asarray(params, dtype=complex)
        base_pt = self.point(params, zero_seeds)
        base = np.asarray(base_pt.coordinates)
        seeds = [rec["z"] for rec in base_pt.form.zero_data]
        J = np.empty((5, 5), dtype=complex)
        for k in range(5):
            pk = params.copy()
            pk[k] += step
            J[:, k] = (self.coordinates(pk, seeds) - base) / step
        self._jac = J
        self._jac_params = params.copy()
        return J

    def solve(self, target, params0, zero_seeds=None, max_iter=8, tol=1e-10):
        """Damped Newton for coordinates(params) = target with frozen Jacobian."""
        params = np.asarray(params0, dtype=complex).copy()
        if self._jac is None:
            self.jacobian(params, zero_seeds=zero_seeds)
        J = self._jac
        pt = self.point(params, zero_seeds)
        seeds = [rec["z"] for rec in pt.form.zero_data]
        for _ in range(max_iter):
            resid = np.asarray(pt.coordinates) - np.asarray(target)
            err = float(np.max(np.abs(resid)))
            if err < tol:
                return params, pt
            step = np.linalg.solve(J, resid)
            # damping: cap the parameter step to stay on the family chart
            cap = 0.2 * np.maximum(np.abs(params), 0.05)
            scale = float(np.max(np.abs(step) / cap))
            if scale > 1.0:
                step = step / scale
            params = params - step
            pt = self.point(params, seeds)
            seeds = [rec["z"] for rec in pt.form.zero_data]
        resid = float(np.max(np.abs(np.asarray(pt.coordinates) - np.asarray(target))))
        if resid > 100 * tol:
            raise TauError(f"inverse problem stalled at residual {resid:.2e}")
        return params, pt

    def resolver(self, params0):
        """Coordinate-space resolver closure for paths and FD checks."""
        state = {"params": np.asarray(params0, dtype=complex)}

        def resolve(zeta, hint=None):
            seeds = None
            if hint is not None and getattr(hint.form, "zero_data", None):
                seeds = [rec["z"] for rec in hint.form.zero_data]
            params, pt = self.solve(zeta, state["params"], zero_seeds=seeds)
            state["params"] = params
            return pt

        return resolve


def _newton_zeros_from_seeds(form, seeds, steps=12):
    zeros = []
    for z in seeds:
        z = complex(z)
        for _ in range(steps):
            h, h1 = form._derivs(z, 1)
            dz = h / h1
            z -= dz
            if abs(dz) < 1e-13:
                break
        zeros.append(z)
    zeros.sort(key=lambda z: (abs(z), math.atan2(z.imag, z.real)))
    data = []
    for z in zeros:
        h, h1, h2 = form._derivs(z, 2)
        data.append({"z": z, "h_tilde": h1, "dlog_h_tilde": h2 / (2.0 * h1)})
    form.zero_data = data
    return data


# ---------------------------------------------------------------------------
# genus-1 meromorphic (Hurwitz) family
# ---------------------------------------------------------------------------


class Genus1HurwitzFamily:
    """Degree-2 maps on the torus: params (tau, p1, p2, shift) -> 4 critical values."""

    def __init__(self, cfg=None):
        self.cfg = cfg or QuadratureConfig()
        self._jac = None

    def point(self, params):
        from .forms import HurwitzPoint

        tau, p1, p2, shift = (complex(v) for v in params)
        q = cmath.exp(2j * cmath.pi * tau)
        grp = genus1_group(q)
        lam = Genus1TwoPoleMap(q, p1, p2, shift=shift)
        sf = SurfaceForms(grp, max(6, int(16.0 / max(-math.log10(abs(q)), 0.2)) + 2),
                          self.cfg)
        form = AbelianDifferential(sf, lambda_map=lam)
        crits = lam.critical_points(grp)
        lam_vals = [lam.lam(z) for z in crits]
        radius = _ram_circle_radius(grp, crits)
        paths = {("s_ram", i): circle_path(z, radius) for i, z in enumerate(crits)}
        pt = HurwitzPoint(mode="hurwitz", coordinates=np.asarray(lam_vals),
                          cycle_paths=paths, surface=sf, form=form)
        pt.critical_points = crits
        pt.lambda_map = lam
        return pt

    def coordinates(self, params):
        return np.asarray(self.point(params).coordinates)

    def jacobian(self, params, step=1e-6):
        params = np.asarray(params, dtype=complex)
        base = self.coordinates(params)
        J = np.empty((4, 4), dtype=complex)
        for k in range(4):
            pk = params.copy()
            pk[k] += step
            J[:, k] = (self.coordinates(pk) - base) / step
        self._jac = J
        return J

    def solve(self, target, params0, max_iter=10, tol=1e-10):
        params = np.asarray(params0, dtype=complex).copy()
        if self._jac is None:
            self.jacobian(params)
        pt = self.point(params)
        for _ in range(max_iter):
            resid = np.asarray(pt.coordinates) - np.asarray(target)
            if float(np.max(np.abs(resid))) < tol:
                return params, pt
            step = np.linalg.solve(self._jac, resid)
            cap = 0.1 * np.maximum(np.abs(params), 0.1)
            scale = float(np.max(np.abs(step) / cap))
            if scale > 1.0:
                step = step / scale
            params = params - step
            pt = self.point(params)
        resid = float(np.max(np.abs(np.asarray(pt.coordinates) - np.asarray(target))))
        if resid > 100 * tol:
            raise TauError(f"hurwitz inverse problem stalled at {resid:.2e}")
        return params, pt

    def resolver(self, params0):
        state = {"params": np.asarray(params0, dtype=complex)}

        def resolve(zeta, hint=None):
            params, pt = self.solve(zeta, state["params"])
            state["params"] = params
            return pt

        return resolve


def _ram_circle_radius(group, points):
    sep = []
    for i, z in enumerate(points):
        for j in range(i + 1, len(points)):
            sep.append(abs(z - points[j]))
        sep.append(abs(abs(z) - abs(group.circles[1].radius)))
        sep.append(abs(1.0 - abs(z)))
    return min(sep) / 3.0
