"""Shared quadrature, series-control, extrapolation and finite-difference machinery.

Every routine here returns a :class:`TruncationReport` (value, error estimate,
work counter, convergence flag) rather than a bare number, and all reductions
run in a canonical deterministic order so repeated runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TruncationReport",
    "QuadratureConfig",
    "NumericsError",
    "NonFiniteSampleError",
    "ParametricPath",
    "circle_path",
    "segment_path",
    "polyline_path",
    "contour_integral",
    "region_integral_excised",
    "MembershipRegion",
    "AnnulusRegion",
    "limit_extrapolate",
    "holomorphic_fd",
    "pairwise_sum",
]


class NumericsError(Exception):
    """Base error for the numerics module."""


class NonFiniteSampleError(NumericsError):
    """An integrand sample came back NaN or infinite; names the parameter value."""

    def __init__(self, where, value):
        self.where = where
        self.value = value
        super().__init__(f"non-finite integrand sample {value!r} at parameter {where!r}")


@dataclass(frozen=True)
class TruncationReport:
    """Value of a truncated computation together with its accuracy bookkeeping."""

    value: complex
    error_estimate: float
    terms_used: int
    converged: bool

    def __post_init__(self):
        if self.error_estimate < 0:
            raise ValueError("error_estimate must be nonnegative")
        if self.terms_used <= 0:
            raise ValueError("terms_used must be positive for a nonempty computation")


@dataclass(frozen=True)
class QuadratureConfig:
    """Numerical parameters shared by the integration and limit routines.

    ``excision_radius`` is the delta of the regularized surface integrals and
    ``limit_grid`` the decreasing epsilon/delta grid fed to the extrapolators.
    """

    target_tolerance: float = 1e-6
    max_subdivisions: int = 2000
    excision_radius: float = 1e-2
    limit_grid: tuple = (0.1, 0.05, 0.025)

    def __post_init__(self):
        if self.target_tolerance <= 0:
            raise ValueError("target_tolerance must be positive")
        if self.excision_radius <= 0:
            raise ValueError("excision_radius must be positive")
        grid = tuple(self.limit_grid)
        if any(b >= a for a, b in zip(grid, grid[1:])) or any(g <= 0 for g in grid):
            raise ValueError("limit_grid must be strictly decreasing toward 0")
        object.__setattr__(self, "limit_grid", grid)


def pairwise_sum(terms):
    """Sum a list of complex numbers by a fixed pairwise tree.

    The tree shape depends only on the length, so parallel producers merged in
    canonical index order give bit-identical results run to run.
    """
    items = list(terms)
    if not items:
        return 0.0 + 0.0j
    while len(items) > 1:
        nxt = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


# ---------------------------------------------------------------------------
# paths and contour integration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametricPath:
    """Piecewise-smooth curve t -> z(t) on [0, 1] with derivative."""

    point: Callable[[np.ndarray], np.ndarray]
    velocity: Callable[[np.ndarray], np.ndarray]
    closed: bool = False

    def __call__(self, t):
        return self.point(np.asarray(t))

    def reversed(self):
        return ParametricPath(
            point=lambda t: self.point(1.0 - np.asarray(t)),
            velocity=lambda t: -self.velocity(1.0 - np.asarray(t)),
            closed=self.closed,
        )


def circle_path(center, radius, clockwise=False):
    sgn = -1.0 if clockwise else 1.0

    def point(t):
        return center + radius * np.exp(2j * np.pi * sgn * np.asarray(t))

    def velocity(t):
        return 2j * np.pi * sgn * radius * np.exp(2j * np.pi * sgn * np.asarray(t))

    return ParametricPath(point, velocity, closed=True)


def segment_path(a, b):
    a = complex(a)
    b = complex(b)

    def point(t):
        return a + (b - a) * np.asarray(t)

    def velocity(t):
        return (b - a) * np.ones_like(np.asarray(t, dtype=float)) * (1.0 + 0j)

    return ParametricPath(point, velocity)


def polyline_path(vertices):
    """Concatenation of straight segments through ``vertices``, uniform in t."""
    vs = [complex(v) for v in vertices]
    if len(vs) < 2:
        raise ValueError("polyline needs at least two vertices")
    n = len(vs) - 1
    vs_arr = np.asarray(vs)

    def point(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = np.clip(t * n, 0.0, n - 1e-15)
        k = np.floor(s).astype(int)
        frac = s - k
        out = vs_arr[k] + (vs_arr[k + 1] - vs_arr[k]) * frac
        return out if out.shape != (1,) else out[0]

    def velocity(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = np.clip(t * n, 0.0, n - 1e-15)
        k = np.floor(s).astype(int)
        out = (vs_arr[k + 1] - vs_arr[k]) * n
        return out if out.shape != (1,) else out[0]

    closed = abs(vs[0] - vs[-1]) < 1e-14
    return ParametricPath(point, velocity, closed=closed)


# Gauss-Kronrod 7-15 nodes/weights on [-1, 1].
_GK_NODES = np.array([
    -0.9914553711208126, -0.9491079123427585, -0.8648644233597691,
    -0.7415311855993945, -0.5860872354676911, -0.4058451513773972,
    -0.2077849550078985, 0.0, 0.2077849550078985, 0.4058451513773972,
    0.5860872354676911, 0.7415311855993945, 0.8648644233597691,
    0.9491079123427585, 0.9914553711208126,
])
_GK_WEIGHTS = np.array([
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278, 0.2044329400752989,
    0.1903505780647854, 0.1690047266392679, 0.1406532597155259,
    0.1047900103222502, 0.0630920926299786, 0.0229353220105292,
])
_G7_WEIGHTS = np.array([
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
    0.1294849661688697,
])
_G7_IDX = np.arange(1, 15, 2)


def _gk_panel(g, a, b):
    """One Gauss-Kronrod 7-15 panel of a complex function g on [a, b]."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    ts = mid + half * _GK_NODES
    vals = np.asarray(g(ts), dtype=complex)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteSampleError(ts[bad], vals[bad])
    k15 = half * np.sum(_GK_WEIGHTS * vals)
    g7 = half * np.sum(_G7_WEIGHTS * vals[_G7_IDX])
    err = (200.0 * abs(k15 - g7)) ** 1.5 if abs(k15 - g7) > 0 else 0.0
    err = min(err, abs(k15 - g7) * 200.0) if err else 0.0
    # fall back to the raw difference when the scaled heuristic underflows
    err = max(err, abs(k15 - g7) * 1e-3)
    return k15, err


def adaptive_quad(g, a, b, tol, max_subdivisions):
    """Deterministic adaptive Gauss-Kronrod integration of complex-valued g.

    Worst-panel bisection with stable tie-breaking; panel results are summed
    left-to-right pairwise at the end.
    """
    panels = []  # entries (a, b, value, err)
    val, err = _gk_panel(g, a, b)
    panels.append([a, b, val, err])
    n_eval = 15
    splits = 0
    while splits < max_subdivisions:
        total_err = math.fsum(p[3] for p in panels)
        if total_err <= tol:
            break
        # worst panel; ties broken by leftmost start for determinism
        worst = max(range(len(panels)), key=lambda i: (panels[i][3], -panels[i][0]))
        pa, pb, _, _ = panels[worst]
        mid = 0.5 * (pa + pb)
        v1, e1 = _gk_panel(g, pa, mid)
        v2, e2 = _gk_panel(g, mid, pb)
        panels[worst] = [pa, mid, v1, e1]
        panels.insert(worst + 1, [mid, pb, v2, e2])
        n_eval += 30
        splits += 1
    panels.sort(key=lambda p: p[0])
    total = pairwise_sum([p[2] for p in panels])
    total_err = math.fsum(p[3] for p in panels)
    return total, total_err, n_eval, total_err <= tol


def contour_integral(f, path, cfg=None):
    """Adaptive estimate of the contour integral of ``f`` along ``path``.

    ``f`` must be finite on the path; pole excision is the caller's job.
    """
    cfg = cfg or QuadratureConfig()

    def g(ts):
        zs = path.point(ts)
        return np.asarray(f(zs), dtype=complex) * path.velocity(ts)

    value, err, n, ok = adaptive_quad(g, 0.0, 1.0, cfg.target_tolerance, cfg.max_subdivisions)
    return TruncationReport(value=value, error_estimate=err, terms_used=n, converged=ok)


# ---------------------------------------------------------------------------
# 2D regions and excised integrals
# ---------------------------------------------------------------------------

_INSIDE, _OUTSIDE, _STRADDLE = 1, 0, 2


class MembershipRegion:
    """2D integration region given by a bounding box and a membership predicate.

    ``contains`` takes a complex array and returns a boolean array. Cell
    classification samples a 4x4 lattice plus corners, so thin features below
    the final cell size are accounted to the straddle error budget.
    """

    def __init__(self, bbox, contains):
        self.bbox = tuple(float(v) for v in bbox)  # (x0, x1, y0, y1)
        self._contains = contains

    def contains(self, z):
        return self._contains(np.asarray(z, dtype=complex))

    def cell_state(self, x0, x1, y0, y1):
        xs = np.linspace(x0, x1, 5)
        ys = np.linspace(y0, y1, 5)
        zz = (xs[None, :] + 1j * ys[:, None]).ravel()
        inside = self.contains(zz)
        if inside.all():
            return _INSIDE
        if not inside.any():
            return _OUTSIDE
        return _STRADDLE


class RadialFenceRegion:
    """Region r_lo(theta) <= |z - center| <= r_hi(theta) around a center.

    The boundary curves are coordinate lines of the nested polar rule, so the
    region is integrated boundary-exactly: adaptive quadrature in theta of
    radial Gauss panels. Excised discs cut intervals out of each ray.
    """

    def __init__(self, r_lo, r_hi, center=0j):
        self.center = complex(center)
        self._lo = r_lo if callable(r_lo) else (lambda th, v=float(r_lo): np.full_like(np.asarray(th, dtype=float), v))
        self._hi = r_hi if callable(r_hi) else (lambda th, v=float(r_hi): np.full_like(np.asarray(th, dtype=float), v))

    def radial_bounds(self, theta):
        th = np.asarray(theta, dtype=float)
        return np.asarray(self._lo(th), dtype=float), np.asarray(self._hi(th), dtype=float)

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        w = z - self.center
        th = np.angle(w)
        lo, hi = self.radial_bounds(th)
        r = np.abs(w)
        return (r > lo) & (r < hi)


class AnnulusRegion(RadialFenceRegion):
    """Annulus r_in < |z - center| < r_out."""

    def __init__(self, r_in, r_out, center=0j):
        super().__init__(float(r_in), float(r_out), center)
        self.r_in = float(r_in)
        self.r_out = float(r_out)


def _rect_disc_state(x0, x1, y0, y1, center, radius):
    """State of a rectangle against the KEPT region outside a disc."""
    cx, cy = center.real, center.imag
    dx = max(0.0, x0 - cx, cx - x1)
    dy = max(0.0, y0 - cy, cy - y1)
    dmin = math.hypot(dx, dy)
    dmax = math.hypot(max(abs(x0 - cx), abs(x1 - cx)), max(abs(y0 - cy), abs(y1 - cy)))
    if dmin >= radius:
        return _INSIDE      # rectangle entirely outside the excised disc
    if dmax <= radius:
        return _OUTSIDE     # rectangle swallowed by the excision
    return _STRADDLE


_CELL_GL_N = 4
_cell_nodes, _cell_weights = np.polynomial.legendre.leggauss(_CELL_GL_N)


def _cell_gauss(f, x0, x1, y0, y1):
    hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
    xs = 0.5 * (x0 + x1) + hx * _cell_nodes
    ys = 0.5 * (y0 + y1) + hy * _cell_nodes
    zz = xs[None, :] + 1j * ys[:, None]
    vals = np.asarray(f(zz.ravel()), dtype=complex).reshape(zz.shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSampleError(zz.ravel()[int(np.flatnonzero(~np.isfinite(vals.ravel()))[0])], "nan/inf")
    w = _cell_weights[None, :] * _cell_weights[:, None]
    return hx * hy * np.sum(w * vals)


def _check_excisions(excisions):
    excisions = [(complex(c), float(r)) for c, r in excisions]
    for i in range(len(excisions)):
        for j in range(i + 1, len(excisions)):
            ci, ri = excisions[i]
            cj, rj = excisions[j]
            if abs(ci - cj) < ri + rj:
                raise ValueError(f"overlapping excision discs {i} and {j}")
    return excisions


def _ray_intervals(center, theta, lo, hi, excisions):
    """Kept r-intervals of the ray center + r*e^{i theta} after disc cuts."""
    cuts = []
    e_it = complex(math.cos(theta), math.sin(theta))
    for c, rho in excisions:
        u = c - center
        m = (u * e_it.conjugate()).real
        disc = m * m - (abs(u) ** 2 - rho * rho)
        if disc <= 0:
            continue
        s = math.sqrt(disc)
        cuts.append((m - s, m + s))
    cuts.sort()
    intervals = []
    cur = lo
    for a, b in cuts:
        if b <= cur or a >= hi:
            continue
        if a > cur:
            intervals.append((cur, min(a, hi)))
        cur = max(cur, b)
        if cur >= hi:
            break
    if cur < hi:
        intervals.append((cur, hi))
    return [(a, b) for a, b in intervals if b - a > 1e-15]


def _radial_region_integral(f, region, excisions, cfg):
    """Nested polar quadrature for RadialFenceRegion: exact boundary lines."""
    inner_tol = cfg.target_tolerance / (4.0 * math.pi)
    inner_err_acc = [0.0]
    center = region.center

    def f_of_theta(thetas):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        out = np.empty(thetas.shape, dtype=complex)
        for k, th in enumerate(thetas):
            lo, hi = region.radial_bounds(th)
            lo, hi = float(lo), float(hi)
            e_it = complex(math.cos(th), math.sin(th))

            def rad(rs):
                zs = center + np.asarray(rs, dtype=float) * e_it
                return np.asarray(f(zs), dtype=complex) * np.asarray(rs, dtype=float)

            total = 0.0 + 0.0j
            for a, b in _ray_intervals(center, th, lo, hi, excisions):
                v, e, _, _ = adaptive_quad(rad, a, b, inner_tol, 40)
                total += v
                inner_err_acc[0] = max(inner_err_acc[0], e)
            out[k] = total
        return out

    value, outer_err, n, ok = adaptive_quad(
        f_of_theta, -math.pi, math.pi, cfg.target_tolerance, cfg.max_subdivisions)
    err = outer_err + inner_err_acc[0] * 2.0 * math.pi
    return TruncationReport(value=value, error_estimate=err, terms_used=n,
                            converged=ok and err <= 10 * cfg.target_tolerance)


def region_integral_excised(f, region, excisions=(), cfg=None):
    """2D adaptive integral of ``f`` over ``region`` minus the excised discs.

    Regions with radial boundary descriptions use a nested polar rule whose
    coordinate lines follow the boundary exactly. Generic membership regions
    fall back to quadtree cell subdivision: cells fully inside get a tensor
    Gauss rule refined on a parent-vs-children comparison, boundary-straddling
    cells are refined until the unresolved fraction enters the error budget.
    Summation order is canonical, so results are deterministic.
    """
    cfg = cfg or QuadratureConfig()
    excisions = _check_excisions(excisions)
    if isinstance(region, RadialFenceRegion):
        return _radial_region_integral(f, region, excisions, cfg)

    def state(x0, x1, y0, y1):
        s = region.cell_state(x0, x1, y0, y1)
        if s == _OUTSIDE:
            return _OUTSIDE
        for c, r in excisions:
            ds = _rect_disc_state(x0, x1, y0, y1, c, r)
            if ds == _OUTSIDE:
                return _OUTSIDE
            if ds == _STRADDLE:
                s = _STRADDLE
        return s

    x0, x1, y0, y1 = region.bbox
    contributions = []
    err_budget = 0.0
    n_cells = 0
    # stack of (cell, depth); children pushed in fixed order -> canonical traversal
    stack = [(x0, x1, y0, y1, 0)]
    max_depth = 11
    while stack:
        cx0, cx1, cy0, cy1, depth = stack.pop()
        s = state(cx0, cx1, cy0, cy1)
        if s == _OUTSIDE:
            continue
        n_cells += 1
        if n_cells > cfg.max_subdivisions * 64:
            return TruncationReport(
                value=pairwise_sum(contributions),
                error_estimate=max(err_budget, cfg.target_tolerance * 10),
                terms_used=n_cells, converged=False)
        area = (cx1 - cx0) * (cy1 - cy0)
        if s == _STRADDLE:
            if depth >= max_depth or area < cfg.target_tolerance ** 1.5:
                # resolved fraction: count by fine sampling, charge the rest to error
                xs = np.linspace(cx0, cx1, 9)[1::2]
                ys = np.linspace(cy0, cy1, 9)[1::2]
                zz = (xs[None, :] + 1j * ys[:, None]).ravel()
                keep = region.contains(zz)
                for c, r in excisions:
                    keep &= np.abs(zz - c) >= r
                if keep.any():
                    vals = np.asarray(f(zz[keep]), dtype=complex)
                    contributions.append(np.sum(vals) * area / zz.size)
                    err_budget += float(np.max(np.abs(vals)) if vals.size else 0.0) * area / 2
                continue
            mx, my = 0.5 * (cx0 + cx1), 0.5 * (cy0 + cy1)
            stack.extend([
                (mx, cx1, my, cy1, depth + 1), (cx0, mx, my, cy1, depth + 1),
                (mx, cx1, cy0, my, depth + 1), (cx0, mx, cy0, my, depth + 1),
            ])
            continue
        # interior cell: parent vs 2x2 children Gauss comparison
        coarse = _cell_gauss(f, cx0, cx1, cy0, cy1)
        mx, my = 0.5 * (cx0 + cx1), 0.5 * (cy0 + cy1)
        fine = (_cell_gauss(f, cx0, mx, cy0, my) + _cell_gauss(f, mx, cx1, cy0, my)
                + _cell_gauss(f, cx0, mx, my, cy1) + _cell_gauss(f, mx, cx1, my, cy1))
        disc = abs(fine - coarse)
        local_tol = cfg.target_tolerance * max(area / ((x1 - x0) * (y1 - y0)), 1e-3)
        if disc > local_tol and depth < max_depth:
            stack.extend([
                (mx, cx1, my, cy1, depth + 1), (cx0, mx, my, cy1, depth + 1),
                (mx, cx1, cy0, my, depth + 1), (cx0, mx, cy0, my, depth + 1),
            ])
            continue
        contributions.append(fine)
        err_budget += disc / 15.0
    total = pairwise_sum(contributions)
    ok = err_budget <= cfg.target_tolerance * 10
    return TruncationReport(value=total, error_estimate=err_budget,
                            terms_used=max(n_cells, 1), converged=ok)


# ---------------------------------------------------------------------------
# limits and derivatives
# ---------------------------------------------------------------------------


def limit_extrapolate(samples, model="power"):
    """Extrapolate samples (parameter, value) to parameter -> 0.

    ``model='power'`` fits a + b*eps^p with p read off the sample differences
    (Richardson style); ``model='power-log'`` fits a + b*eps*log(eps) + c*eps.
    Returns (limit, residual); inconsistent samples are still extrapolated but
    show up in the residual.
    """
    pts = [(float(e), complex(v)) for e, v in samples]
    if len(pts) < 3:
        raise ValueError("need at least 3 samples")
    eps = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])
    if not np.all(np.diff(eps) < 0):
        raise ValueError("parameters must be strictly decreasing")

    if model == "power-log":
        basis = np.column_stack([np.ones_like(eps), eps * np.log(eps), eps])
        coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
        fit = basis @ coef
        residual = float(np.max(np.abs(fit - vals)))
        return complex(coef[0]), residual
    if model != "power":
        raise ValueError(f"unknown model {model!r}")

    d1 = vals[:-1] - vals[1:]
    scale = float(np.max(np.abs(vals))) or 1.0
    if np.max(np.abs(d1)) < 1e-14 * scale:
        return complex(np.mean(vals)), float(np.max(np.abs(vals - np.mean(vals))))
    # estimated order from the last three samples (assumes geometric-ish grid)
    r = eps[-3] / eps[-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = d1[-2] / d1[-1] if abs(d1[-1]) > 0 else 0.0
    p = math.log(abs(ratio)) / math.log(r) if abs(ratio) > 0 else 1.0
    p = min(max(p, 0.25), 8.0)
    best = None
    for p_try in sorted({round(p), 1.0, 2.0, p}, key=lambda q: abs(q - p)):
        if p_try <= 0:
            continue
        basis = np.column_stack([np.ones_like(eps), eps ** p_try])
        coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
        resid = float(np.max(np.abs(basis @ coef - vals)))
        if best is None or resid < best[1]:
            best = (complex(coef[0]), resid)
    return best


def holomorphic_fd(g, w0, step, richardson=False):
    """Central-difference complex derivative with a Cauchy-Riemann diagnostic.

    Returns (dg/dw, |dg/dwbar|); the second number is ~0 for holomorphic g and
    order-one when g genuinely depends on the conjugate variable.
    """
    w0 = complex(w0)

    def stencil(h):
        gx = (g(w0 + h) - g(w0 - h)) / (2.0 * h)
        gy = (g(w0 + 1j * h) - g(w0 - 1j * h)) / (2.0 * h)
        return 0.5 * (gx - 1j * gy), 0.5 * (gx + 1j * gy)

    d1, cr1 = stencil(step)
    if not richardson:
        return d1, abs(cr1)
    d2, cr2 = stencil(step / 2.0)
    return (4.0 * d2 - d1) / 3.0, abs((4.0 * cr2 - cr1) / 3.0)
