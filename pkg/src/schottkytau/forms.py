"""Poincare series on Schottky groups.

Holomorphic differentials come from the classical coset series
v_j(z) = sum f_j(gamma z) gamma'(z) over representatives of <L_j>\\Gamma,
with f_j(w) = 1/(w - att_j) - 1/(w - rep_j); the Bergman bidifferential from
the full group series B(z, w) = sum_gamma gamma'(w)/(z - gamma w)^2, whose
coincidence regularization gives the Bergman projective connection
R_B(z) = 6 sum_{gamma != id} gamma'(z)/(z - gamma z)^2. All series converge
in the exponent-of-convergence < 1 regime and are summed shell by shell with
a geometric tail estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .moebius import INF, is_inf
from .numerics import (
    QuadratureConfig,
    TruncationReport,
    circle_path,
    contour_integral,
    pairwise_sum,
    polyline_path,
)
from .schottky import MarkedSchottkyGroup, SchottkyError, fundamental_domain

__all__ = [
    "FormsError",
    "NearPoleError",
    "StratumError",
    "PathConstructionError",
    "SeriesContext",
    "AbelianDifferential",
    "PeriodMatrix",
    "HurwitzPoint",
    "SurfaceForms",
    "holomorphic_basis",
    "bergman_bidifferential",
    "bergman_projective_connection",
    "projective_connection_of_form",
    "period_matrix",
    "find_zeros",
    "hurwitz_coordinates",
    "route_segment",
    "Genus1TwoPoleMap",
]


class FormsError(Exception):
    pass


class NearPoleError(FormsError):
    pass


class StratumError(FormsError):
    """Zero count violates the stratum (boundary zero or collision)."""


class PathConstructionError(FormsError):
    pass


# ---------------------------------------------------------------------------
# shell context: cached matrices in flat arrays
# ---------------------------------------------------------------------------


class SeriesContext:
    """Flattened shell matrices of a group with first-letter masks."""

    def __init__(self, group, max_length):
        self.group = group
        self.max_length = max_length
        shells = group.shells(max_length)
        self.a = np.concatenate([s["mats"][:, 0, 0] for s in shells])
        self.b = np.concatenate([s["mats"][:, 0, 1] for s in shells])
        self.c = np.concatenate([s["mats"][:, 1, 0] for s in shells])
        self.d = np.concatenate([s["mats"][:, 1, 1] for s in shells])
        self.first = np.concatenate([s["letters"][:, 0] for s in shells])
        self.shell_of = np.concatenate(
            [np.full(s["last"].shape[0], k + 1, dtype=np.int32)
             for k, s in enumerate(shells)])
        self.n_words = self.a.shape[0]

    def not_starting_with(self, j):
        """Mask for coset representatives of <L_j> \\ Gamma (identity excluded here)."""
        return (self.first != j) & (self.first != -j)

    def eval_point(self, z):
        """gamma z, and derivatives gamma', gamma'', gamma''' at z, vectorized."""
        u = self.c * z + self.d
        gz = (self.a * z + self.b) / u
        gp = 1.0 / (u * u)
        gpp = -2.0 * self.c * gp / u
        gppp = 6.0 * self.c ** 2 * gp / (u * u)
        return gz, gp, gpp, gppp

    def eval_batch(self, zs, order=2):
        """Orbit data for a 1D batch of points: arrays of shape (n_words, nz).

        order 0 returns (gz, gp); order 1 adds gpp; order 2 adds gppp.
        """
        zs = np.asarray(zs, dtype=complex)
        u = np.multiply.outer(self.c, zs) + self.d[:, None]
        gz = (np.multiply.outer(self.a, zs) + self.b[:, None]) / u
        gp = 1.0 / (u * u)
        out = [gz, gp]
        if order >= 1:
            out.append(-2.0 * self.c[:, None] * gp / u)
        if order >= 2:
            out.append(6.0 * (self.c ** 2)[:, None] * gp / (u * u))
        return out

    def batch_chunk(self):
        """Points per chunk keeping the (n_words, nz) workspaces modest."""
        return max(1, int(3.0e6 / max(self.n_words, 1)))


def _shell_tail_estimate(shell_sums):
    """Geometric tail estimate from the trailing shell magnitudes.

    Heuristic, not a rigorous bound: uses the worse of the last two shell
    decay ratios plus a safety factor, since shell sums oscillate.
    """
    mags = [abs(s) for s in shell_sums]
    if len(mags) < 2 or mags[-1] == 0.0:
        return 0.0
    ratios = [mags[i + 1] / mags[i] for i in range(len(mags) - 1) if mags[i] > 0]
    ratio = max(ratios[-2:]) if ratios else 0.5
    ratio = min(ratio, 0.9)
    return 4.0 * mags[-1] * ratio / (1.0 - ratio)


# ---------------------------------------------------------------------------
# differentials
# ---------------------------------------------------------------------------


def _fixed_point_pair(group, j):
    lox = group.classifications()[j - 1].loxodromic
    return lox.fixed_attracting, lox.fixed_repelling


def _f_terms(w, att, rep, order):
    """f, f', f'' of f(w) = 1/(w-att) - 1/(w-rep), handling infinite fixed points."""
    if is_inf(rep):
        da = w - att
        f = 1.0 / da
        if order == 0:
            return (f,)
        fp = -1.0 / da ** 2
        if order == 1:
            return f, fp
        return f, fp, 2.0 / da ** 3
    if is_inf(att):
        dr = w - rep
        f = -1.0 / dr
        if order == 0:
            return (f,)
        fp = 1.0 / dr ** 2
        if order == 1:
            return f, fp
        return f, fp, -2.0 / dr ** 3
    da = w - att
    dr = w - rep
    f = 1.0 / da - 1.0 / dr
    if order == 0:
        return (f,)
    fp = -1.0 / da ** 2 + 1.0 / dr ** 2
    if order == 1:
        return f, fp
    return f, fp, 2.0 / da ** 3 - 2.0 / dr ** 3


class _RawBasisForm:
    """Coset Poincare series for one generator's elementary differential."""

    def __init__(self, ctx, j):
        self.ctx = ctx
        self.j = j
        self.att, self.rep = _fixed_point_pair(ctx.group, j)
        self.mask = ctx.not_starting_with(j)

    def derivs_from_orbit(self, zs, orbit, order):
        """(h, h_z, h_zz)[:order+1] as (nz,) arrays given shared orbit data."""
        gz = orbit[0][self.mask]
        gp = orbit[1][self.mask]
        fid = _f_terms(zs, self.att, self.rep, order)
        ft = _f_terms(gz, self.att, self.rep, order)
        out = [fid[0] + np.sum(ft[0] * gp, axis=0)]
        if order >= 1:
            gpp = orbit[2][self.mask]
            out.append(fid[1] + np.sum(ft[1] * gp ** 2 + ft[0] * gpp, axis=0))
        if order >= 2:
            gppp = orbit[3][self.mask]
            out.append(fid[2] + np.sum(
                ft[2] * gp ** 3 + 3.0 * ft[1] * gp * gpp + ft[0] * gppp, axis=0))
        return tuple(out)

    def h_derivs(self, z, order=0):
        """(h, h_z, h_zz)[:order+1] at a single complex point."""
        ctx = self.ctx
        orbit = ctx.eval_batch(np.array([z]), order)
        res = self.derivs_from_orbit(np.array([z]), orbit, order)
        return tuple(complex(v[0]) for v in res)


@dataclass
class PeriodMatrix:
    tau: np.ndarray
    a_normalization_residual: float

    def symmetry_defect(self):
        return float(np.max(np.abs(self.tau - self.tau.T)))

    def im_positive_definite(self):
        eig = np.linalg.eigvalsh(0.5 * (self.tau.imag + self.tau.imag.T))
        return bool(np.all(eig > 0)), eig


class AbelianDifferential:
    """Evaluator for a 1-form h(z) dz on the Schottky cover.

    Holomorphic case: h = sum_j coefficients[j] * omega_j with omega the
    a-normalized basis. Meromorphic case: h = lambda_z of a supplied map.
    Zero / pole bookkeeping lives in zero_data / pole_data.
    """

    def __init__(self, surface, coefficients=None, lambda_map=None):
        self.surface = surface
        self.group = surface.group
        if (coefficients is None) == (lambda_map is None):
            raise FormsError("exactly one of coefficients / lambda_map required")
        self.kind = "holomorphic" if coefficients is not None else "meromorphic"
        self.coefficients = (np.asarray(coefficients, dtype=complex)
                             if coefficients is not None else None)
        self.lambda_map = lambda_map
        self.zero_data = None
        self.pole_data = None

    def h(self, z):
        return self._derivs(z, 0)[0]

    def h_z(self, z):
        return self._derivs(z, 1)[1]

    def h_zz(self, z):
        return self._derivs(z, 2)[2]

    def _derivs(self, z, order):
        if self.kind == "meromorphic":
            return self.lambda_map.h_derivs(z, order)
        res = self.evaluate_many(np.array([z]), order)
        return tuple(complex(v[0]) for v in res)

    def evaluate_many(self, zs, order=0):
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        if self.kind == "meromorphic":
            cols = [self.lambda_map.h_derivs(complex(z), order) for z in zs]
            return tuple(np.array([c[k] for c in cols]) for k in range(order + 1))
        coef = self.surface.normalization() @ self.coefficients
        outs = self.surface.raw_derivs_batch(zs, order)
        return tuple(
            sum(coef[j] * outs[j][k] for j in range(len(outs)))
            for k in range(order + 1))

    def invariance_defect(self, n_samples=32, rng_seed=11):
        """max |h(gamma z) gamma'(z) - h(z)| over sampled (gamma, z) pairs."""
        rng = np.random.default_rng(rng_seed)
        dom = fundamental_domain(self.group)
        probe = dom.interior_point()
        worst = 0.0
        letters = self.group.alphabet()
        for _ in range(n_samples):
            z = probe * (1.0 + 0.12 * (rng.random() - 0.5)) * np.exp(
                2j * np.pi * rng.random())
            if not bool(dom.contains(z)):
                continue
            gamma = self.group.letter_map(int(rng.choice(letters)))
            lhs = self.h(gamma(z)) * gamma.deriv(z)
            worst = max(worst, abs(lhs - self.h(z)))
        return worst


class SurfaceForms:
    """Basis, periods and kernels of one marked group at one truncation."""

    def __init__(self, group, max_length=8, cfg=None):
        if not group.normalized:
            raise FormsError("SurfaceForms requires a normalized group")
        self.group = group
        self.max_length = max_length
        self.cfg = cfg or QuadratureConfig()
        self._ctx = None
        self._raw = None
        self._norm = None
        self._norm_residual = None
        self._a_paths = None
        self._b_paths = None

    def ctx(self):
        if self._ctx is None:
            self._ctx = SeriesContext(self.group, self.max_length)
        return self._ctx

    def raw_forms(self):
        if self._raw is None:
            self._raw = [_RawBasisForm(self.ctx(), j)
                         for j in range(1, self.group.genus + 1)]
        return self._raw

    def a_paths(self):
        """a_i realized as the circle C_{-i}, counterclockwise."""
        if self._a_paths is None:
            self._a_paths = [
                circle_path(self.group.circle_for_letter(-i).center,
                            self.group.circle_for_letter(-i).radius)
                for i in range(1, self.group.genus + 1)]
        return self._a_paths

    def normalization(self):
        """Matrix X with omega_k = sum_j X[j, k] v_j and a-periods delta_ik."""
        if self._norm is None:
            g = self.group.genus
            A = np.empty((g, g), dtype=complex)
            for i in range(g):
                for j in range(g):
                    rep = contour_integral(
                        lambda zs, jj=j: self.raw_derivs_batch(
                            np.atleast_1d(np.asarray(zs, dtype=complex)), 0)[jj][0],
                        self.a_paths()[i], self.cfg)
                    A[i, j] = rep.value
            X = np.linalg.solve(A, np.eye(g, dtype=complex))
            self._norm = X
            self._norm_residual = float(np.max(np.abs(A @ X - np.eye(g))))
        return self._norm

    def normalization_residual(self):
        self.normalization()
        return self._norm_residual

    def basis(self):
        """The g a-normalized holomorphic differentials."""
        return [AbelianDifferential(self, coefficients=np.eye(self.group.genus)[k])
                for k in range(self.group.genus)]

    def differential(self, coefficients):
        return AbelianDifferential(self, coefficients=coefficients)

    def b_paths(self):
        """b_i realized as routed polylines z0 -> L_i z0 with z0 on C_i."""
        if self._b_paths is None:
            paths = []
            margin = 0.1 * min(c.radius for c in self.group.circles)
            for i in range(1, self.group.genus + 1):
                c_i = self.group.circle_for_letter(i)
                L = self.group.generators[i - 1]
                z0 = _basepoint_on_circle(self.group, i)
                z1 = L(z0)
                verts = route_segment(self.group, z0, z1, margin,
                                      endpoint_letters=(i, -i))
                paths.append(verts)
            self._b_paths = paths
        return self._b_paths

    def form_on_path(self, form, vertices, cfg=None):
        path = polyline_path(vertices)
        rep = contour_integral(
            lambda zs: form.evaluate_many(zs, 0)[0], path, cfg or self.cfg)
        return rep

    def raw_derivs_batch(self, zs, order):
        """Per-raw-form derivative arrays sharing one orbit evaluation.

        Returns a list over j of tuples of (nz,) arrays; the orbit data is
        computed in chunks to bound the (n_words, nz) workspaces.
        """
        zs = np.asarray(zs, dtype=complex)
        ctx = self.ctx()
        forms = self.raw_forms()
        chunk = ctx.batch_chunk()
        pieces = [[] for _ in forms]
        for start in range(0, zs.shape[0], chunk):
            zc = zs[start:start + chunk]
            orbit = ctx.eval_batch(zc, order)
            for j, f in enumerate(forms):
                pieces[j].append(f.derivs_from_orbit(zc, orbit, order))
        return [tuple(np.concatenate([p[k] for p in piece])
                      for k in range(order + 1)) for piece in pieces]

    def rb(self, z):
        """R_B at one point through the cached shell context."""
        return complex(self.rb_many(np.array([z]))[0])

    def rb_many(self, zs):
        """R_B on a batch of points: 6 sum 1/(c z^2 + (d-a) z - b)^2."""
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        ctx = self.ctx()
        out = np.empty(zs.shape, dtype=complex)
        chunk = ctx.batch_chunk()
        for start in range(0, zs.shape[0], chunk):
            zc = zs[start:start + chunk]
            t = (np.multiply.outer(ctx.c, zc * zc)
                 + np.multiply.outer(ctx.d - ctx.a, zc) - ctx.b[:, None])
            if np.min(np.abs(t)) < 1e-10:
                raise NearPoleError("R_B evaluation too close to the limit set")
            out[start:start + chunk] = 6.0 * np.sum(1.0 / (t * t), axis=0)
        return out


def holomorphic_basis(group, max_length=8, cfg=None):
    """Normalized basis evaluators; refuses when the convergence gate fails."""
    from .schottky import delta_estimate

    delta, _ = delta_estimate(group, max_length=min(max_length, 7))
    if delta >= 1.0:
        raise FormsError(f"series gate failed: delta estimate {delta:.3f} >= 1")
    sf = SurfaceForms(group, max_length, cfg)
    return sf.basis()


def _basepoint_on_circle(group, i):
    """A point on C_i far from the other circles (top of the circle by default)."""
    c_i = group.circle_for_letter(i)
    others = [group.circle_for_letter(s) for s in group.alphabet() if s != i]
    best, best_d = None, -1.0
    for t in np.linspace(0, 2 * np.pi, 32, endpoint=False):
        z = c_i.center + c_i.radius * np.exp(1j * t)
        d = min((abs(z - c.center) - c.radius if not c.disc_outside
                 else c.radius - abs(z - c.center)) for c in others)
        if d > best_d:
            best, best_d = z, d
    return complex(best)


def route_segment(group, p, q, margin, endpoint_letters=(), max_rounds=8):
    """Polyline from p to q through the ordinary set, avoiding all pairing
    discs inflated by ``margin``; discs owning the endpoints are exempt near
    their endpoint. Returns the vertex list."""
    circles = []
    for s in group.alphabet():
        c = group.circle_for_letter(s)
        if c.disc_outside:
            continue  # endpoints are always inside the outer circle already
        circles.append((s, c))
    verts = [complex(p), complex(q)]
    for _ in range(max_rounds):
        changed = False
        k = 0
        while k < len(verts) - 1:
            a, b = verts[k], verts[k + 1]
            seg = b - a
            L2 = abs(seg) ** 2
            for s, c in circles:
                r_inf = c.radius + margin
                t = ((c.center - a) * seg.conjugate()).real / L2 if L2 > 0 else 0.0
                exempt = s in endpoint_letters
                t_lo, t_hi = (0.12, 0.88) if exempt else (0.0, 1.0)
                if not (t_lo < t < t_hi):
                    continue
                foot = a + t * seg
                d = abs(foot - c.center)
                if d >= r_inf:
                    continue
                if d < 1e-12:
                    direction = 1j * seg / abs(seg)
                else:
                    direction = (foot - c.center) / d
                w = c.center + direction * (c.radius + 2.0 * margin)
                verts.insert(k + 1, w)
                changed = True
                break
            k += 1
        if not changed:
            return verts
    raise PathConstructionError("could not route path around circles")


# ---------------------------------------------------------------------------
# Bergman kernel and projective connections
# ---------------------------------------------------------------------------


def bergman_bidifferential(group, z, w, max_length=8, with_report=False):
    """Coefficient of B(z, w) dz dw including the identity term 1/(z-w)^2."""
    ctx = SeriesContext(group, max_length)
    z = complex(z)
    w = complex(w)
    # gamma'(w)/(z - gamma w)^2 = 1/t^2 with t = (cw+d) z - (aw+b); the
    # combined form stays finite on deep shells where the factors overflow
    t = (ctx.c * w + ctx.d) * z - (ctx.a * w + ctx.b)
    with np.errstate(over="ignore", invalid="ignore"):
        pole_gap = np.abs(t) * np.abs(1.0 / (ctx.c * w + ctx.d))
    if abs(z - w) < 1e-8 or np.nanmin(pole_gap) < 1e-8:
        raise NearPoleError("z within 1e-8 of the orbit of w")
    terms = 1.0 / t ** 2
    shell_sums = [complex(np.sum(terms[ctx.shell_of == k]))
                  for k in range(1, max_length + 1)]
    value = 1.0 / (z - w) ** 2 + pairwise_sum(shell_sums)
    if not with_report:
        return value
    tail = _shell_tail_estimate(shell_sums)
    return TruncationReport(value=value, error_estimate=tail,
                            terms_used=ctx.n_words + 1,
                            converged=tail <= QuadratureConfig().target_tolerance)


def bergman_projective_connection(group, z, max_length=8, with_report=False):
    """R_B(z) = 6 sum_{gamma != id} gamma'(z) / (z - gamma z)^2."""
    ctx = SeriesContext(group, max_length)
    z = complex(z)
    # gamma'/(z - gamma z)^2 = 1/t^2, t = c z^2 + (d - a) z - b (stable form)
    t = ctx.c * z * z + (ctx.d - ctx.a) * z - ctx.b
    if np.min(np.abs(t)) < 1e-10:
        raise NearPoleError("z too close to a translate of itself (limit set?)")
    terms = 6.0 / t ** 2
    shell_sums = [complex(np.sum(terms[ctx.shell_of == k]))
                  for k in range(1, max_length + 1)]
    value = pairwise_sum(shell_sums)
    if not with_report:
        return value
    tail = _shell_tail_estimate(shell_sums)
    return TruncationReport(value=value, error_estimate=tail,
                            terms_used=ctx.n_words,
                            converged=tail <= QuadratureConfig().target_tolerance)


def projective_connection_of_form(form, z):
    """R(z) = h_zz/h - (3/2)(h_z/h)^2, the Schwarzian of the form's primitive."""
    h, h1, h2 = form._derivs(complex(z), 2)
    if abs(h) < 1e-12:
        raise NearPoleError(f"form vanishes (or blows up) at z={z}; singular point")
    return h2 / h - 1.5 * (h1 / h) ** 2


def period_matrix(surface, cfg=None):
    """tau_ij = oint_{b_i} omega_j over the routed b-paths."""
    g = surface.group.genus
    tau = np.empty((g, g), dtype=complex)
    basis = surface.basis()
    for i, verts in enumerate(surface.b_paths()):
        for j, omega in enumerate(basis):
            rep = surface.form_on_path(omega, verts, cfg)
            if not rep.converged:
                raise PathConstructionError(
                    f"b-period quadrature ({i}, {j}) did not converge")
            tau[i, j] = rep.value
    return PeriodMatrix(tau=tau, a_normalization_residual=surface.normalization_residual())


# ---------------------------------------------------------------------------
# zeros of a differential
# ---------------------------------------------------------------------------


def _boundary_winding(form, group, cfg):
    """(1/2 pi i) oint_{dD} h'/h dz with the canonical boundary orientation.

    Only has to resolve an integer, so the tolerance is capped at 1e-3.
    """
    total = 0.0 + 0.0j
    count_cfg = QuadratureConfig(target_tolerance=max(cfg.target_tolerance, 1e-3),
                                 max_subdivisions=cfg.max_subdivisions)

    def logderiv(zs):
        h, h1 = form.evaluate_many(zs, 1)
        return h1 / h

    for s in group.alphabet():
        c = group.circle_for_letter(s)
        # outer circle (disc outside) gets ccw, bounded discs cw
        path = circle_path(c.center, c.radius, clockwise=not c.disc_outside)
        rep = contour_integral(logderiv, path, count_cfg)
        if not rep.converged:
            raise StratumError("argument-principle contour did not converge; "
                               "zero may sit on the domain boundary")
        total += rep.value
    return total / (2j * np.pi)


def find_zeros(form, seed_grid=48, newton_steps=40, cfg=None):
    """Zeros of a holomorphic differential in the fundamental domain.

    Argument-principle count first, then Newton refinement from a coarse grid;
    a count different from 2g-2 raises StratumError suggesting a generic
    perturbation of the coefficients.
    """
    group = form.group
    cfg = cfg or QuadratureConfig()
    g = group.genus
    expected = 2 * g - 2
    count = _boundary_winding(form, group, cfg)
    if abs(count - expected) > 0.1:
        raise StratumError(
            f"argument principle counts {count:.3f} zeros, expected {expected}; "
            "perturb the coefficients to reach the generic stratum")
    if expected == 0:
        form.zero_data = []
        return []
    dom = fundamental_domain(group)
    outer = next(c for c in group.circles if c.disc_outside)
    lo_x = outer.center.real - outer.radius
    hi_x = outer.center.real + outer.radius
    lo_y = outer.center.imag - outer.radius
    hi_y = outer.center.imag + outer.radius
    xs = np.linspace(lo_x, hi_x, seed_grid)
    ys = np.linspace(lo_y, hi_y, seed_grid)
    zz = list((xs[None, :] + 1j * ys[:, None]).ravel())
    # zeros like to hide against the circles: add rings hugging each boundary
    for c in group.circles:
        rs = (np.array([0.97, 0.90]) if c.disc_outside
              else np.array([1.03, 1.12, 1.35]))
        for r in rs:
            zz.extend(c.center + c.radius * r * np.exp(
                2j * np.pi * np.arange(64) / 64))
    zz = np.asarray(zz)
    zz = zz[dom.contains(zz, margin=1e-6)]
    # cheap magnitude scan on a short-truncation surrogate
    surrogate = form
    if form.kind == "holomorphic" and form.surface.max_length > 5:
        light = SurfaceForms(group, 5, cfg)
        surrogate = AbelianDifferential(light, coefficients=form.coefficients)
    hv = np.abs(surrogate.evaluate_many(zz, 0)[0])
    order = np.argsort(hv)
    escape = 10.0 * (abs(outer.center) + outer.radius)
    zeros = []
    for idx in order[: max(24 * expected, 96)]:
        z = complex(zz[idx])
        ok = False
        for _ in range(newton_steps):
            h, h1 = form._derivs(z, 1)
            step = h / h1
            z = z - step
            if abs(z) > escape:
                break  # running to the artificial double zero at infinity
            if abs(step) < 1e-13:
                ok = True
                break
        if not ok:
            continue
        try:
            z, _ = dom.reduce(z)
        except SchottkyError:
            continue
        # polish once more in the domain chart
        for _ in range(8):
            h, h1 = form._derivs(z, 1)
            z = z - h / h1
        if not bool(dom.contains(z, margin=-1e-9)):
            continue
        if all(abs(z - z0) > 1e-7 for z0 in zeros):
            zeros.append(z)
        if len(zeros) == expected:
            break
    if len(zeros) != expected:
        raise StratumError(
            f"Newton found {len(zeros)} zeros, argument principle says {expected}")
    zeros.sort(key=lambda z: (abs(z), math.atan2(z.imag, z.real)))
    data = []
    for z in zeros:
        h, h1, h2 = form._derivs(z, 2)
        if abs(h1) < 1e-10:
            raise StratumError(f"zero at {z} looks non-simple (h' ~ {abs(h1):.2e})")
        data.append({"z": z, "h_tilde": h1, "dlog_h_tilde": h2 / (2.0 * h1)})
    form.zero_data = data
    return data


# ---------------------------------------------------------------------------
# Hurwitz-space coordinates
# ---------------------------------------------------------------------------


@dataclass
class HurwitzPoint:
    mode: str                     # "abelian" | "hurwitz"
    coordinates: np.ndarray       # (A_i, B_i, Z_j) or (lambda_1..lambda_m)
    cycle_paths: dict
    surface: object
    form: AbelianDifferential

    def coordinate_names(self):
        g = self.form.group.genus
        if self.mode == "abelian":
            names = [f"A{i + 1}" for i in range(g)] + [f"B{i + 1}" for i in range(g)]
            names += [f"Z{j + 1}" for j in range(len(self.coordinates) - 2 * g)]
            return names
        return [f"lambda{i + 1}" for i in range(len(self.coordinates))]


def hurwitz_coordinates(surface, form, cfg=None):
    """Coordinates (A_i, B_i, Z_j) of a holomorphic form, with cycle paths.

    A_i over the a-circles, B_i over the routed b-paths, Z_j along routed
    paths from the first zero to the others. The s-cycles of the tau ODE are
    stored alongside: s_i = -b_i, s_{g+i} = a_i, s_{2g+j} = small circle
    around zero j+1.
    """
    cfg = cfg or QuadratureConfig()
    group = surface.group
    g = group.genus
    zeros = form.zero_data if form.zero_data is not None else find_zeros(form, cfg=cfg)
    m = len(zeros)
    paths = {}
    coords = []
    for i in range(g):
        rep = contour_integral(lambda zs: form.evaluate_many(zs, 0)[0],
                               surface.a_paths()[i], cfg)
        coords.append(rep.value)
        paths[("a", i + 1)] = surface.a_paths()[i]
    for i, verts in enumerate(surface.b_paths()):
        rep = surface.form_on_path(form, verts, cfg)
        coords.append(rep.value)
        paths[("b", i + 1)] = verts
    margin = 0.1 * min(c.radius for c in group.circles)
    for j in range(1, m):
        verts = route_segment(group, zeros[0]["z"], zeros[j]["z"], margin)
        rep = surface.form_on_path(form, verts, cfg)
        coords.append(rep.value)
        paths[("l", j)] = verts
    # s-cycles around zeros 2..m
    radius = _zero_circle_radius(group, zeros)
    for j in range(1, m):
        paths[("s_zero", j)] = circle_path(zeros[j]["z"], radius)
    return HurwitzPoint(mode="abelian", coordinates=np.asarray(coords),
                        cycle_paths=paths, surface=surface, form=form)


def _zero_circle_radius(group, zeros):
    sep = []
    for i in range(len(zeros)):
        for j in range(i + 1, len(zeros)):
            sep.append(abs(zeros[i]["z"] - zeros[j]["z"]))
        for c in group.circles:
            d = abs(zeros[i]["z"] - c.center) - c.radius
            if c.disc_outside:
                d = c.radius - abs(zeros[i]["z"] - c.center)
            sep.append(abs(d))
    return min(sep) / 3.0 if sep else 0.1


# ---------------------------------------------------------------------------
# genus-1 meromorphic fixture: degree-2 map with two simple poles
# ---------------------------------------------------------------------------


class Genus1TwoPoleMap:
    """lambda(z) = shift + sum_n [ 1/(1 - q^n z/p1) - 1/(1 - q^n z/p2) ].

    A degree-2 elliptic function on the torus C^*/(z ~ qz) with simple poles
    on the orbits of p1 and p2; d lambda has double poles with zero residue.
    """

    def __init__(self, q, p1, p2, shift=0j, tol=1e-15):
        self.q = complex(q)
        self.p1 = complex(p1)
        self.p2 = complex(p2)
        self.shift = complex(shift)
        if not 0 < abs(self.q) < 1:
            raise FormsError("need 0 < |q| < 1")
        self.N = max(6, int(math.log(tol) / math.log(abs(self.q))) + 2)
        self.kind = "meromorphic"

    def _pole_terms(self, z, p, order):
        """Partial sums over the q-orbit; z may be a scalar or an array."""
        z = np.asarray(z, dtype=complex)
        n = np.arange(-self.N, self.N + 1)
        qn = (self.q ** n.astype(complex))[:, None]
        u = 1.0 - qn * z[None, ...].reshape(qn.shape[0], -1) / p
        lam = 1.0 / u
        out = [lam]
        if order >= 1:
            out.append((qn / p) / u ** 2)
        if order >= 2:
            out.append(2.0 * (qn / p) ** 2 / u ** 3)
        if order >= 3:
            out.append(6.0 * (qn / p) ** 3 / u ** 4)
        return [np.sum(v, axis=0).reshape(z.shape) for v in out]

    def lam(self, z):
        scalar = np.isscalar(z) or np.ndim(z) == 0
        t1 = self._pole_terms(z, self.p1, 0)
        t2 = self._pole_terms(z, self.p2, 0)
        val = self.shift + t1[0] - t2[0]
        return complex(val) if scalar else val

    def h_derivs(self, z, order=0):
        """Derivatives of h = lambda_z: (h, h_z, h_zz) = (lam', lam'', lam''')."""
        scalar = np.isscalar(z) or np.ndim(z) == 0
        t1 = self._pole_terms(z, self.p1, order + 1)
        t2 = self._pole_terms(z, self.p2, order + 1)
        out = tuple(t1[k] - t2[k] for k in range(1, order + 2))
        if scalar:
            return tuple(complex(v) for v in out)
        return out

    def h_derivs_many(self, zs, order=0):
        return self.h_derivs(np.atleast_1d(np.asarray(zs, dtype=complex)), order)

    def critical_points(self, group, seed_grid=64):
        """The m = 4 zeros of lambda_z in the fundamental annulus."""
        dom = fundamental_domain(group)
        r_in = abs(self.q)
        rng = np.exp(np.linspace(math.log(r_in * 1.02), math.log(0.98), seed_grid // 2))
        th = np.linspace(-math.pi, math.pi, seed_grid, endpoint=False)
        zz = (rng[:, None] * np.exp(1j * th[None, :])).ravel()
        hv = np.abs([self.h_derivs(z, 0)[0] for z in zz])
        order = np.argsort(hv)
        crits = []
        for idx in order[:64]:
            z = complex(zz[idx])
            ok = False
            for _ in range(60):
                h, h1 = self.h_derivs(z, 1)
                step = h / h1
                z -= step
                if abs(step) < 1e-13:
                    ok = True
                    break
            if not ok:
                continue
            # reduce into the fundamental annulus
            while abs(z) >= 1.0:
                z *= self.q
            while abs(z) < r_in:
                z /= self.q
            if all(abs(z - c) > 1e-7 for c in crits):
                crits.append(z)
            if len(crits) == 4:
                break
        if len(crits) != 4:
            raise StratumError(f"expected 4 simple critical points, found {len(crits)}")
        crits.sort(key=lambda z: (abs(z), math.atan2(z.imag, z.real)))
        return crits

    def critical_values(self, group):
        return [self.lam(z) for z in self.critical_points(group)]

    def pole_data(self, group):
        """Poles of d lambda in the annulus with their h-tilde bookkeeping.

        Near a pole p: h(z) = (z - p)^{-2} * htilde(z); the no-residue
        condition of the two-differential is (log htilde)_z(p) = 0.
        """
        out = []
        for p in (self.p1, self.p2):
            z = complex(p)
            while abs(z) >= 1.0:
                z *= self.q
            while abs(z) < abs(self.q):
                z /= self.q
            # htilde(s) = h(s)(s-z)^2 is analytic near the pole; read off its
            # value and log-derivative by trapezoidal Cauchy integrals
            r = 0.05 * min(abs(z) * (1.0 - abs(self.q)), abs(z - self._other(p)))
            nodes = z + r * np.exp(2j * np.pi * np.arange(64) / 64)
            ht_vals = np.array([self.h_derivs(s, 0)[0] * (s - z) ** 2 for s in nodes])
            ht = np.mean(ht_vals)                       # (1/2pi i) oint ht/(s-z)
            ht_p = np.mean(ht_vals * (nodes - z) ** -1) # coefficient of (s-z)
            out.append({"z": z, "h_tilde": ht, "dlog_h_tilde": ht_p / ht})
        return out

    def _other(self, p):
        return self.p2 if p == self.p1 else self.p1
