"""Marked Schottky groups.

A group is given by ordered loxodromic generators L_1..L_g together with 2g
circles pairing under L_r(exterior of disc_r) = disc_{-r}. After the 0/infty/1
normalization the repelling fixed point of L_1 sits at infinity, so disc_1 is
the unbounded side of C_1 and every other disc is a bounded one; the common
exterior D of all discs is then a bounded fundamental domain.

Letters are integers: +r for L_r, -r for L_r^{-1}. Word enumeration, shell
matrices for Poincare series and primitive conjugacy classes (oriented: gamma
and gamma^{-1} count separately) are all produced in a canonical order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .moebius import (
    classify_entries,
    raw_map,
    INF,
    MoebiusMap,
    classify,
    compose,
    is_inf,
    map_three_points,
    projective_distance,
)

__all__ = [
    "Circle",
    "MarkedSchottkyGroup",
    "SchottkyError",
    "CircleConditionError",
    "NonLoxodromicError",
    "ReductionBudgetError",
    "ReducedWord",
    "PrimitiveClass",
    "FundamentalDomain",
    "validate_and_normalize",
    "enumerate_words",
    "word_count",
    "shell_matrices",
    "primitive_classes",
    "delta_estimate",
    "fundamental_domain",
    "genus1_group",
]


class SchottkyError(Exception):
    pass


class NonLoxodromicError(SchottkyError):
    pass


class CircleConditionError(SchottkyError):
    pass


class ReductionBudgetError(SchottkyError):
    """Point could not be pulled into the fundamental domain within budget."""


@dataclass(frozen=True)
class Circle:
    """Circle |z - center| = radius; ``disc_outside`` marks which side is the
    paired disc (True means the disc is the unbounded side plus infinity)."""

    center: complex
    radius: float
    disc_outside: bool = False

    def in_disc(self, z, margin=0.0):
        r = np.abs(np.asarray(z, dtype=complex) - self.center)
        if self.disc_outside:
            return r >= self.radius - margin
        return r <= self.radius + margin

    def boundary_points(self, n):
        t = np.arange(n) * (2.0 * np.pi / n)
        return self.center + self.radius * np.exp(1j * t)


def _map_circle(g, circle):
    """Image of a circle under a Moebius map, tracking the disc side."""
    pts = circle.boundary_points(3)
    w1, w2, w3 = (g(complex(p)) for p in pts)
    if any(is_inf(w) for w in (w1, w2, w3)):
        raise SchottkyError("circle maps through infinity; no line support")
    # circumcenter of the image triangle
    ax, ay = w1.real, w1.imag
    bx, by = w2.real, w2.imag
    cx, cy = w3.real, w3.imag
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-13 * max(abs(w1 - w2), 1.0) ** 2:
        raise SchottkyError("image circle degenerates to a line")
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    center = complex(ux, uy)
    radius = abs(w1 - center)
    # disc side: map an interior probe of the source disc
    if circle.disc_outside:
        probe = circle.center + 2.0 * circle.radius
    else:
        probe = circle.center
    img = g(complex(probe))
    outside = is_inf(img) or abs(img - center) > radius
    return Circle(center, radius, disc_outside=outside)


def _discs_disjoint(c1, c2):
    if c1.disc_outside and c2.disc_outside:
        return False
    if c1.disc_outside:
        c1, c2 = c2, c1
    if c2.disc_outside:
        # bounded disc c1 strictly inside the circle of c2
        return abs(c1.center - c2.center) + c1.radius < c2.radius
    return abs(c1.center - c2.center) > c1.radius + c2.radius


class MarkedSchottkyGroup:
    """Ordered free generators plus optional pairing circles."""

    def __init__(self, generators, circles=None, normalized=False):
        self.generators = tuple(generators)
        self.genus = len(self.generators)
        if self.genus < 1:
            raise SchottkyError("need at least one generator")
        self.circles = tuple(circles) if circles is not None else None
        self.normalized = bool(normalized)
        self._classifications = None
        self._shells = {}  # word length -> dict of arrays
        self._letter_maps = None

    # letters are +r / -r for r in 1..g
    def letter_map(self, letter):
        if self._letter_maps is None:
            maps = {}
            for r, g in enumerate(self.generators, start=1):
                maps[r] = g
                maps[-r] = g.inverse()
            self._letter_maps = maps
        return self._letter_maps[letter]

    def circle_for_letter(self, letter):
        """C_letter: circles[r-1] for +r, circles[g+r-1] for -r."""
        if self.circles is None:
            raise SchottkyError("group carries no circles")
        r = abs(letter)
        return self.circles[r - 1] if letter > 0 else self.circles[self.genus + r - 1]

    def classifications(self):
        if self._classifications is None:
            self._classifications = tuple(classify(g) for g in self.generators)
        return self._classifications

    def multipliers(self):
        return tuple(c.loxodromic.multiplier for c in self.classifications())

    def alphabet(self):
        letters = []
        for r in range(1, self.genus + 1):
            letters.extend([r, -r])
        return letters

    def shells(self, max_length):
        """Group elements by reduced word length, as stacked 2x2 matrices.

        Returns a list of dicts with keys 'mats' (N,2,2), 'letters' (N,L)
        and 'last' (N,), index 0 = words of length 1, in canonical order.
        """
        if max_length in self._shells:
            return self._shells[max_length]
        have = max((k for k in self._shells if k <= max_length), default=0)
        shells = list(self._shells[have]) if have else []
        alphabet = self.alphabet()
        gen_mats = np.stack([self.letter_map(x).matrix() for x in alphabet])
        letter_index = {x: i for i, x in enumerate(alphabet)}
        if not shells:
            mats = gen_mats.copy()
            letters = np.array([[x] for x in alphabet], dtype=np.int8)
            shells.append({"mats": mats, "letters": letters,
                           "last": np.array(alphabet, dtype=np.int8)})
        while len(shells) < max_length:
            prev = shells[-1]
            mats_list, letters_list, last_list = [], [], []
            for x in alphabet:
                mask = prev["last"] != -x
                if not mask.any():
                    continue
                mats_list.append(prev["mats"][mask] @ gen_mats[letter_index[x]])
                letters_list.append(np.concatenate(
                    [prev["letters"][mask],
                     np.full((int(mask.sum()), 1), x, dtype=np.int8)], axis=1))
                last_list.append(np.full(int(mask.sum()), x, dtype=np.int8))
            shells.append({
                "mats": np.concatenate(mats_list),
                "letters": np.concatenate(letters_list),
                "last": np.concatenate(last_list),
            })
        self._shells[max_length] = shells
        return shells

    def __repr__(self):
        return f"MarkedSchottkyGroup(genus={self.genus}, normalized={self.normalized})"


@dataclass(frozen=True)
class ReducedWord:
    letters: tuple
    element: MoebiusMap

    def __len__(self):
        return len(self.letters)


@dataclass(frozen=True)
class PrimitiveClass:
    representative: ReducedWord
    multiplier: complex
    length: float
    holonomy: float


def word_count(genus, max_length):
    """Closed-form count of reduced words of length 1..max_length."""
    g2 = 2 * genus
    return sum(g2 * (g2 - 1) ** (k - 1) for k in range(1, max_length + 1))


def enumerate_words(group, max_length):
    """All reduced words of length 1..max_length, canonical order, once each."""
    for shell in group.shells(max_length):
        for row, mat in zip(shell["letters"], shell["mats"]):
            yield ReducedWord(tuple(int(x) for x in row),
                              MoebiusMap(mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]))


# ---------------------------------------------------------------------------
# validation / normalization
# ---------------------------------------------------------------------------


def _default_circles(group):
    """Isometric circles C_r = I(L_r), C_{-r} = I(L_r^{-1}).

    A generator fixing infinity (c = 0, i.e. the normalized L_1) gets annulus
    circles |z| = R and |z| = |q| R instead, with R chosen between the
    isometric circles of the remaining generators and the fixed point at 0.
    """
    cs = [None] * group.genus
    cs_neg = [None] * group.genus
    diag = []
    for k, g in enumerate(group.generators):
        if abs(g.c) < 1e-14:
            diag.append(k)
            continue
        cs[k] = Circle(-g.d / g.c, 1.0 / abs(g.c))
        gi = g.inverse()
        cs_neg[k] = Circle(-gi.d / gi.c, 1.0 / abs(gi.c))
    for k in diag:
        q = group.classifications()[k].loxodromic.multiplier
        others = [c for c in cs + cs_neg if c is not None]
        if not others:
            R = 1.0
        else:
            rho_max = max(abs(c.center) + c.radius for c in others)
            rho_min = min(abs(c.center) - c.radius for c in others)
            if rho_min <= 0 or abs(q) * rho_max >= rho_min:
                raise CircleConditionError(
                    "no annulus separates the diagonal generator from the rest")
            R = math.sqrt(rho_max * rho_min / abs(q))
        cs[k] = Circle(0j, R, disc_outside=True)
        cs_neg[k] = Circle(0j, abs(q) * R)
    return tuple(cs + cs_neg)


def _check_circles(group, tol=1e-9, samples=64):
    """Pairing and disjointness checks from the type invariant."""
    circles = group.circles
    g = group.genus
    discs = list(circles)
    if sum(1 for c in discs if c.disc_outside) > 1:
        raise CircleConditionError("more than one disc contains infinity")
    for i in range(2 * g):
        for j in range(i + 1, 2 * g):
            if not _discs_disjoint(discs[i], discs[j]):
                raise CircleConditionError(f"discs {i} and {j} are not disjoint")
    for r in range(1, g + 1):
        L = group.generators[r - 1]
        c_r = group.circle_for_letter(r)
        c_mr = group.circle_for_letter(-r)
        pts = c_r.boundary_points(samples)
        imgs = np.asarray([L(complex(p)) for p in pts])
        dev = np.max(np.abs(np.abs(imgs - c_mr.center) - c_mr.radius))
        if dev > tol * max(1.0, c_mr.radius):
            raise CircleConditionError(
                f"L_{r} does not map C_{r} onto C_{-r} (deviation {dev:.2e})")
        # orientation: exterior of disc_r must land inside disc_{-r}
        # (for an outside-disc the center is the natural exterior probe)
        probe = c_r.center if c_r.disc_outside else c_r.center + 2.5 * c_r.radius
        img = L(complex(probe))
        if not bool(c_mr.in_disc(img)):
            raise CircleConditionError(f"L_{r} maps the exterior of C_{r} to the wrong side")


def validate_and_normalize(group, tol=1e-9):
    """Conjugate the group to the 0/infty/1 fixed-point convention.

    L_1 gets attracting fixed point 0 and repelling fixed point infinity; for
    genus >= 2 the attracting fixed point of L_2 goes to 1. Circles are mapped
    along; missing circles are replaced by isometric circles when available.
    Groups failing the disjoint-circle condition are rejected, not repaired.
    """
    for k, c in enumerate(group.classifications()):
        if c.kind != "loxodromic":
            raise NonLoxodromicError(f"generator {k + 1} is {c.kind}")
    lox1 = group.classifications()[0].loxodromic
    if group.genus >= 2:
        w = group.classifications()[1].loxodromic.fixed_attracting
    else:
        # any third anchor works at genus 1; the group z -> qz is unchanged
        w = lox1.fixed_attracting + 1.0
        if group.circles is not None:
            c1 = group.circles[0]
            w = c1.center + c1.radius
    T = map_three_points(lox1.fixed_attracting, lox1.fixed_repelling, w)
    Ti = T.inverse()
    new_gens = [compose(compose(T, g), Ti) for g in group.generators]
    circles = group.circles
    if circles is not None:
        new_circles = tuple(_map_circle(T, c) for c in circles)
    else:
        tmp = MarkedSchottkyGroup(new_gens)
        if tmp.genus == 1:
            q = abs(classify(new_gens[0]).loxodromic.multiplier)
            new_circles = (Circle(0j, 1.0, disc_outside=True), Circle(0j, q))
        else:
            new_circles = _default_circles(tmp)
    out = MarkedSchottkyGroup(new_gens, new_circles, normalized=True)
    _check_circles(out, tol=tol)
    return out


def genus1_group(q):
    """The normalized cyclic group generated by z -> qz, |q| < 1."""
    q = complex(q)
    if not 0 < abs(q) < 1:
        raise SchottkyError("need 0 < |q| < 1")
    import cmath

    s = cmath.sqrt(q)
    L = MoebiusMap(s, 0, 0, 1 / s)
    circles = (Circle(0j, 1.0, disc_outside=True), Circle(0j, abs(q)))
    return MarkedSchottkyGroup([L], circles, normalized=True)


# ---------------------------------------------------------------------------
# primitive conjugacy classes
# ---------------------------------------------------------------------------


def _cyclically_reduced_shell(shell):
    mask = shell["letters"][:, 0] != -shell["letters"][:, -1]
    return shell["letters"][mask]


def _necklace_representatives(letters):
    """Rows that are the lexicographically least among their rotations and not
    proper powers. Vectorized over all words of one length."""
    n, k = letters.shape
    keep = np.ones(n, dtype=bool)
    primitive = np.ones(n, dtype=bool)
    for s in range(1, k):
        rot = np.roll(letters, -s, axis=1)
        # lexicographic comparison row-wise: sign of first differing entry
        diff = letters - rot
        first = np.argmax(diff != 0, axis=1)
        has_diff = diff[np.arange(n), first] != 0
        cmp = np.where(has_diff, np.sign(diff[np.arange(n), first]), 0)
        keep &= cmp <= 0          # a rotation strictly smaller -> not canonical
        primitive &= ~(cmp == 0)  # equal to a nontrivial rotation -> proper power
    return letters[keep & primitive]


def _letter_codes(letters, genus):
    """Map letters {+-1..+-g} to contiguous codes matching alphabet order."""
    a = np.asarray(letters, dtype=np.int64)
    return (np.abs(a) - 1) * 2 + (a < 0)


def primitive_classes(group, max_length):
    """One representative per oriented primitive conjugacy class, length <= max_length."""
    out = []
    gen_arr = np.stack([group.letter_map(x).matrix() for x in group.alphabet()])
    shells = group.shells(max_length)
    for k, shell in enumerate(shells, start=1):
        if k == 1:
            reps = shell["letters"]
        else:
            cyc = _cyclically_reduced_shell(shell)
            if cyc.size == 0:
                continue
            reps = _necklace_representatives(cyc)
        if reps.size == 0:
            continue
        # batched matrix fold along the word; entries stay relatively accurate
        # even when the recomputed determinant degenerates, so classification
        # runs on the raw entries under the det = 1 assumption
        codes = _letter_codes(reps, group.genus)
        mats = gen_arr[codes[:, 0]]
        for j in range(1, k):
            mats = mats @ gen_arr[codes[:, j]]
        for row, m in zip(reps, mats):
            cls = classify_entries(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
            if cls.kind != "loxodromic":
                raise SchottkyError(f"non-loxodromic class element {tuple(row)}")
            lox = cls.loxodromic
            el = raw_map(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
            out.append(PrimitiveClass(
                representative=ReducedWord(tuple(int(x) for x in row), el),
                multiplier=lox.multiplier, length=lox.length, holonomy=lox.holonomy))
    return out


# ---------------------------------------------------------------------------
# exponent of convergence
# ---------------------------------------------------------------------------


def delta_estimate(group, z0=None, max_length=8, n_s=12):
    """Exponent of convergence from spherical-derivative shell sums.

    Fits the growth rate of log S_k(s), S_k(s) = sum_{|gamma|=k} |gamma'|_sph^s,
    over the last shells at a grid of s values and bisects to the critical s.
    Returns (delta, quality) with quality the fit residual at the root.
    """
    if max_length < 4:
        raise SchottkyError("delta estimate needs word length >= 4")
    if z0 is None:
        z0 = _domain_probe(group)
    z0 = complex(z0)
    shells = group.shells(max_length)
    logs_per_shell = []
    for shell in shells:
        m = shell["mats"]
        den = m[:, 1, 0] * z0 + m[:, 1, 1]
        gz = (m[:, 0, 0] * z0 + m[:, 0, 1]) / den
        gp = 1.0 / den ** 2
        sph = np.abs(gp) * (1.0 + abs(z0) ** 2) / (1.0 + np.abs(gz) ** 2)
        logs_per_shell.append(np.log(sph))

    ks = np.arange(1, max_length + 1, dtype=float)
    tail = slice(max(0, max_length - 4), max_length)

    def slope(s):
        log_sums = np.array([
            _logsumexp(s * logs) for logs in logs_per_shell])
        kk = ks[tail]
        ss = log_sums[tail]
        a = np.polyfit(kk, ss, 1)
        return a[0], float(np.max(np.abs(np.polyval(a, kk) - ss)))

    s_grid = np.linspace(1e-3, 2.0, n_s)
    slopes = [slope(s)[0] for s in s_grid]
    if slopes[0] <= 0:
        return 0.0, slope(s_grid[0])[1]
    hi_idx = next((i for i, v in enumerate(slopes) if v <= 0), None)
    if hi_idx is None:
        return float(s_grid[-1]), slope(s_grid[-1])[1]
    lo, hi = s_grid[hi_idx - 1], s_grid[hi_idx]
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if slope(mid)[0] > 0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    return float(root), slope(root)[1]


def _logsumexp(x):
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def _domain_probe(group):
    """A point of the ordinary set well away from all discs."""
    if group.circles is not None:
        dom = fundamental_domain(group)
        return dom.interior_point()
    # no circles: pick a probe maximizing distance from all finite fixed points
    fps = []
    for c in group.classifications():
        for p in (c.loxodromic.fixed_attracting, c.loxodromic.fixed_repelling):
            if not is_inf(p):
                fps.append(p)
    if not fps:
        return 1.0 + 0.0j
    center = sum(fps) / len(fps)
    span = max(abs(p - center) for p in fps) + 1.0
    best, best_d = None, -1.0
    for r in (0.5, 1.0, 1.7):
        for t in np.linspace(0, 2 * np.pi, 24, endpoint=False):
            z = center + span * r * np.exp(1j * t)
            d = min(abs(z - p) for p in fps)
            if d > best_d:
                best, best_d = z, d
    return complex(best)


# ---------------------------------------------------------------------------
# fundamental domain
# ---------------------------------------------------------------------------


class FundamentalDomain:
    """Common exterior of the 2g pairing circles, with point reduction."""

    def __init__(self, group):
        if group.circles is None:
            raise SchottkyError("fundamental domain requires circles")
        self.group = group
        self.circles = group.circles
        self._letters = []
        g = group.genus
        for r in range(1, g + 1):
            self._letters.append(r)
        for r in range(1, g + 1):
            self._letters.append(-r)

    def contains(self, z, margin=0.0):
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=bool)
        for letter in self._letters:
            c = self.group.circle_for_letter(letter)
            out &= ~c.in_disc(z, margin=margin)
        return out

    def interior_point(self):
        """Deterministic probe point inside D."""
        cand = []
        outer = next((c for c in self.circles if c.disc_outside), None)
        if outer is not None:
            # ring just inside the outer circle
            for t in np.linspace(0, 2 * np.pi, 64, endpoint=False):
                cand.append(outer.center + 0.8 * outer.radius * np.exp(1j * t))
        bounded = [c for c in self.circles if not c.disc_outside]
        span = max((abs(c.center) + c.radius for c in bounded), default=1.0)
        for t in np.linspace(0, 2 * np.pi, 64, endpoint=False):
            cand.append(1.5 * span * np.exp(1j * t))
        for z in cand:
            if bool(self.contains(complex(z))):
                return complex(z)
        raise SchottkyError("no interior probe found; degenerate circle layout")

    def reduce(self, z, max_steps=200):
        """Pull z into the closed domain; returns (point, word letters used).

        The word w satisfies w(z) in D. Points too close to the limit set
        exhaust the budget and raise ReductionBudgetError.
        """
        z = complex(z)
        word = []
        for _ in range(max_steps):
            offending = None
            for letter in self._letters:
                c = self.group.circle_for_letter(letter)
                if bool(c.in_disc(z, margin=-1e-13)):
                    offending = letter
                    break
            if offending is None:
                return z, tuple(word)
            # z in disc_s exits via the pairing map of s
            if offending > 0:
                m = self.group.letter_map(offending)
                word.append(offending)
            else:
                m = self.group.letter_map(abs(offending)).inverse()
                word.append(offending)
            z = m(z)
            if is_inf(z):
                raise ReductionBudgetError("reduction passed through infinity")
        raise ReductionBudgetError(f"no reduction within {max_steps} steps")


def fundamental_domain(group):
    return FundamentalDomain(group)
