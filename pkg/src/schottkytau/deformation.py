"""Quasiconformal deformation machinery, to first order.

A compactly supported Beltrami seed on the fundamental domain is spread over
the group orbit by mu(gamma z) conj(gamma') / gamma' = mu(z); the normalized
deformation field is the classical potential

    fdot(z) = -(1/pi) iint mu(zeta) z(z-1) / (zeta (zeta-1)(zeta-z)) dA,

fixing 0, 1, infinity, with the integral summed over the translated copies of
the seed support. Deformed generators follow from the first-order conjugation
relation f_w o L = L(w) o f_w.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .moebius import MoebiusMap, classify
from .numerics import QuadratureConfig
from .schottky import MarkedSchottkyGroup, SchottkyError, fundamental_domain

__all__ = [
    "DeformationError",
    "BumpSeed",
    "BeltramiDifferential",
    "invariant_beltrami",
    "f_dot",
    "DeformationField",
    "deformed_group",
]


class DeformationError(Exception):
    pass


class BumpSeed:
    """Smooth radial bump A exp(1 - 1/(1 - t^2)), t = |z - center|/radius."""

    def __init__(self, center, radius, amplitude=1.0):
        self.center = complex(center)
        self.radius = float(radius)
        self.amplitude = complex(amplitude)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        t2 = np.abs(z - self.center) ** 2 / self.radius ** 2
        out = np.zeros(z.shape, dtype=complex)
        inside = t2 < 1.0
        with np.errstate(divide="ignore", over="ignore"):
            out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
        return out

    def sup(self):
        return abs(self.amplitude)


class BeltramiDifferential:
    """Gamma-invariant extension of a compactly supported seed."""

    def __init__(self, seed, group, max_word_length=12, tail=1e-8):
        self.seed = seed
        self.group = group
        dom = fundamental_domain(group)
        # support must sit strictly inside the fundamental domain
        probes = seed.center + seed.radius * np.exp(
            2j * np.pi * np.arange(16) / 16)
        if not bool(np.all(dom.contains(probes, margin=1e-9))):
            raise DeformationError("seed support touches the domain boundary")
        if seed.sup() >= 1.0:
            raise DeformationError("sup |mu| must be < 1")
        self._dom = dom
        self._translates = self._collect_translates(max_word_length, tail)

    def _collect_translates(self, max_len, tail):
        """Group elements whose copy of the support is larger than the cutoff."""
        out = [(MoebiusMap(1, 0, 0, 1), 1.0)]
        shells = self.group.shells(max_len)
        center = self.seed.center
        kept_any = True
        for shell in shells:
            if not kept_any:
                break
            kept_any = False
            for m in shell["mats"]:
                g = MoebiusMap(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
                scale = abs(g.deriv(center))
                if scale * self.seed.radius > tail * self.seed.radius:
                    out.append((g, scale))
                    kept_any = True
        return out

    def __call__(self, z):
        """mu at arbitrary points of the ordinary set (sum of translates)."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(np.shape(z), dtype=complex)
        for g, _ in self._translates:
            gi = g.inverse()
            w = gi(z) if isinstance(z, np.ndarray) else gi(complex(z))
            # mu(z) = mu_seed(gi z) * conj(gi') / gi'
            gp = gi.deriv(z)
            out = out + self.seed(w) * np.conj(gp) / gp
        return out

    def sup(self):
        return self.seed.sup()

    def invariance_defect(self, n_samples=32, rng_seed=3):
        rng = np.random.default_rng(rng_seed)
        worst = 0.0
        letters = self.group.alphabet()
        for _ in range(n_samples):
            z = (self.seed.center
                 + self.seed.radius * 0.8 * math.sqrt(rng.random())
                 * cmath.exp(2j * math.pi * rng.random()))
            gamma = self.group.letter_map(int(rng.choice(letters)))
            gp = gamma.deriv(z)
            lhs = self(gamma(z)) * np.conj(gp) / gp
            worst = max(worst, abs(lhs - self(z)))
        return worst


def invariant_beltrami(seed, group, **kw):
    return BeltramiDifferential(seed, group, **kw)


# quadrature grid on the unit disc for the seed integrals: tensor Gauss in
# (radius^2, angle), exact for the smooth bump to high order
_N_RAD, _N_ANG = 24, 48
_rad_nodes, _rad_weights = np.polynomial.legendre.leggauss(_N_RAD)


def _disc_grid(center, radius):
    r = np.sqrt(0.5 * (_rad_nodes + 1.0))  # sqrt distributes nodes as area
    w_r = 0.5 * _rad_weights
    th = 2.0 * np.pi * (np.arange(_N_ANG) + 0.5) / _N_ANG
    w_th = 2.0 * np.pi / _N_ANG
    zz = center + radius * (r[:, None] * np.exp(1j * th[None, :]))
    ww = (w_r[:, None] * w_th * radius ** 2) * np.ones((1, _N_ANG))
    return zz.ravel(), ww.ravel()


class DeformationField:
    """Evaluator of fdot with fdot(0) = fdot(1) = 0 and fdot = o(z^2) at inf."""

    def __init__(self, mu):
        self.mu = mu
        zz, ww = _disc_grid(mu.seed.center, mu.seed.radius)
        vals = mu.seed(zz)
        keep = np.abs(vals) > 0
        self._nodes = zz[keep]
        self._weights = ww[keep]
        self._vals = vals[keep]

    def _kernel_sum(self, z, kernel):
        """Sum over translates of iint mu(s) gamma'(s)^2 K(gamma s, z) dA(s)."""
        total = 0j
        for g, _ in self.mu._translates:
            gs = g(self._nodes)
            gp = g.deriv(self._nodes)
            total += np.sum(self._weights * self._vals * gp ** 2 * kernel(gs, z))
        return total

    def value(self, z):
        z = complex(z)

        def K(zeta, z0):
            return z0 * (z0 - 1.0) / (zeta * (zeta - 1.0) * (zeta - z0))

        near = self._near_translate(z)
        if near is None:
            return -self._kernel_sum(z, K) / math.pi
        return self._value_near(z, near)

    def d_z(self, z):
        """fdot_z away from the support (kernel derivative in z)."""
        z = complex(z)
        if self._near_translate(z) is not None:
            # finite difference fallback inside/near the support
            h = 1e-5 * max(1.0, abs(z))
            return (self.value(z + h) - self.value(z - h)) / (2.0 * h)

        def Kz(zeta, z0):
            # d/dz0 [ z0(z0-1) / (zeta(zeta-1)(zeta-z0)) ]
            num = (2.0 * z0 - 1.0) * (zeta - z0) + z0 * (z0 - 1.0)
            return num / (zeta * (zeta - 1.0) * (zeta - z0) ** 2)

        return -self._kernel_sum(z, Kz) / math.pi

    def d_zbar(self, z, step=1e-4):
        """Numerical dbar fdot; equals mu at smooth interior points."""
        z = complex(z)
        fx = (self.value(z + step) - self.value(z - step)) / (2.0 * step)
        fy = (self.value(z + 1j * step) - self.value(z - 1j * step)) / (2.0 * step)
        return 0.5 * (fx + 1j * fy)

    def _near_translate(self, z):
        for g, _ in self.mu._translates:
            if abs(z - g(self.mu.seed.center)) < 1.5 * self.mu.seed.radius * abs(
                    g.deriv(self.mu.seed.center)) + 1e-12:
                return g
        return None

    def _value_near(self, z, g_near):
        """Split off the singular translate and integrate it on a polar grid
        centred at z, where the 1/(zeta - z) factor is integrable."""

        def K(zeta, z0):
            return z0 * (z0 - 1.0) / (zeta * (zeta - 1.0) * (zeta - z0))

        total = 0j
        for g, _ in self.mu._translates:
            if g is not g_near:
                gs = g(self._nodes)
                gp = g.deriv(self._nodes)
                total += np.sum(self._weights * self._vals * gp ** 2 * K(gs, z))
        # singular piece: integrate mu(zeta) K(zeta, z) over the translated
        # support in a polar grid around z
        gi = g_near.inverse()
        c_im = g_near(self.mu.seed.center)
        r_im = abs(g_near.deriv(self.mu.seed.center)) * self.mu.seed.radius
        R = abs(z - c_im) + 1.2 * r_im
        nr, na = 48, 64
        rr = R * (np.arange(nr) + 0.5) / nr
        th = 2.0 * np.pi * (np.arange(na) + 0.5) / na
        zeta = z + rr[:, None] * np.exp(1j * th[None, :])
        w = (R / nr) * (2.0 * np.pi / na) * rr[:, None] * np.ones((1, na))
        mu_here = self.mu.seed(gi(zeta.ravel()))
        gpi = gi.deriv(zeta.ravel())
        mu_inv = mu_here * np.conj(gpi) / gpi
        kern = np.where(np.abs(zeta.ravel() - z) > 1e-14,
                        K(zeta.ravel(), z) * (zeta.ravel() - z),
                        0.0) / np.where(np.abs(zeta.ravel() - z) > 1e-14,
                                        (zeta.ravel() - z), 1.0)
        total += np.sum(w.ravel() * mu_inv * kern)
        return -total / math.pi


def f_dot(mu, z):
    """Normalized first-order deformation field at z (convenience wrapper)."""
    return DeformationField(mu).value(z)


def _fit_velocity_matrix(L, field, sample_points):
    """sl2 velocity (adot, bdot, cdot, ddot) from W(z) = fdot(Lz) - L'(z) fdot(z).

    Solves W(z)(cz+d)^2 = (adot z + bdot)(cz+d) - (az+b)(cdot z + ddot) in the
    least-squares sense with the unit-determinant constraint built in.
    """
    rows, rhs = [], []
    for z in sample_points:
        w = field.value(L(z)) - L.deriv(z) * field.value(z)
        u = L.c * z + L.d
        rows.append([z * u, u, -(L.a * z + L.b) * z, -(L.a * z + L.b)])
        rhs.append(w * u * u)
    # det constraint: adot d + a ddot - bdot c - b cdot = 0
    rows.append([L.d, -L.c, -L.b, L.a])
    rhs.append(0j)
    A = np.asarray(rows)
    b = np.asarray(rhs)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.max(np.abs(A @ sol - b)))
    return sol, resid


def deformed_group(group, mu, w, field=None, sample_ring=2.2):
    """First-order deformed group: L_r(w) = L_r + w Ldot_r, renormalized.

    Exact to O(w^2); raises when the step makes a generator non-loxodromic.
    """
    w = complex(w)
    if abs(w) * mu.sup() > 0.1:
        raise DeformationError("deformation step too large: |w| sup|mu| > 0.1")
    field = field or DeformationField(mu)
    new_gens = []
    for L in group.generators:
        pts = [sample_ring * cmath.exp(2j * math.pi * k / 7 + 0.3j) for k in range(7)]
        sol, _ = _fit_velocity_matrix(L, field, pts)
        adot, bdot, cdot, ddot = sol
        try:
            Lw = MoebiusMap(L.a + w * adot, L.b + w * bdot,
                            L.c + w * cdot, L.d + w * ddot)
        except Exception as exc:
            raise DeformationError(f"degenerate deformed generator: {exc}")
        if classify(Lw).kind != "loxodromic":
            raise DeformationError("deformed generator left the loxodromic locus")
        new_gens.append(Lw)
    out = MarkedSchottkyGroup(new_gens, normalized=False)
    from .schottky import validate_and_normalize

    return validate_and_normalize(out)
