"""Fractional-linear transformations: algebra, classification, multiplier data.

Maps are stored as det-1 matrices up to sign; the sign is canonicalized so
equality and hashing behave. The multiplier of a loxodromic map is the
derivative at its attracting fixed point in an affine chart, so |q| < 1
always, length = -log|q| and holonomy = arg q.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "INF",
    "is_inf",
    "MoebiusMap",
    "LoxodromicData",
    "Classification",
    "MoebiusError",
    "PoleEvaluationError",
    "NumericallyDegenerateError",
    "compose",
    "apply",
    "derivative",
    "classify",
    "projective_distance",
    "from_fixed_points_and_multiplier",
    "map_three_points",
]

INF = complex(math.inf, 0.0)


def is_inf(z):
    return not (math.isfinite(z.real) and math.isfinite(z.imag)) if isinstance(z, complex) else not np.isfinite(z)


class MoebiusError(Exception):
    pass


class PoleEvaluationError(MoebiusError):
    """Derivative requested at the pole of the map."""


class NumericallyDegenerateError(MoebiusError):
    """Classification too close to the parabolic locus to be trusted."""


@dataclass(frozen=True)
class MoebiusMap:
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det == 0:
            raise MoebiusError("singular matrix")
        s = cmath.sqrt(det)
        a, b, c, d = self.a / s, self.b / s, self.c / s, self.d / s
        # canonical sign: first entry above noise gets argument in (-pi/2, pi/2]
        mag = max(abs(a), abs(b), abs(c), abs(d))
        for e in (a, b, c, d):
            if abs(e) > 1e-14 * mag:
                if e.real < 0 or (e.real == 0 and e.imag < 0):
                    a, b, c, d = -a, -b, -c, -d
                break
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    # -- algebra ------------------------------------------------------------

    def __matmul__(self, other):
        return MoebiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self):
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def trace_sq(self):
        return (self.a + self.d) ** 2

    # -- action -------------------------------------------------------------

    def __call__(self, z):
        if isinstance(z, np.ndarray):
            den = self.c * z + self.d
            with np.errstate(divide="ignore", invalid="ignore"):
                return (self.a * z + self.b) / den
        z = complex(z)
        if is_inf(z):
            return INF if self.c == 0 else self.a / self.c
        den = self.c * z + self.d
        if den == 0:
            return INF
        return (self.a * z + self.b) / den

    def deriv(self, z):
        if isinstance(z, np.ndarray):
            return 1.0 / (self.c * z + self.d) ** 2
        den = self.c * complex(z) + self.d
        if den == 0:
            raise PoleEvaluationError(f"derivative at pole z={z}")
        return 1.0 / den ** 2

    def __repr__(self):
        return f"MoebiusMap({self.a:.6g}, {self.b:.6g}, {self.c:.6g}, {self.d:.6g})"


IDENTITY = MoebiusMap(1, 0, 0, 1)


def raw_map(a, b, c, d):
    """MoebiusMap from entries already known to have unit determinant.

    Skips the sqrt(det) renormalization: for deep products of det-1 matrices
    the recomputed determinant is cancellation noise while the entries are
    relatively accurate, so renormalizing would corrupt the map.
    """
    m = object.__new__(MoebiusMap)
    object.__setattr__(m, "a", complex(a))
    object.__setattr__(m, "b", complex(b))
    object.__setattr__(m, "c", complex(c))
    object.__setattr__(m, "d", complex(d))
    return m


def compose(g, h):
    """Matrix product of two maps, renormalized to det 1."""
    return g @ h


def apply(g, z):
    return g(z)


def derivative(g, z):
    return g.deriv(z)


def projective_distance(g, h):
    """Max entry distance between the matrices, minimized over the sign choice."""
    m1 = np.array([g.a, g.b, g.c, g.d])
    m2 = np.array([h.a, h.b, h.c, h.d])
    return float(min(np.max(np.abs(m1 - m2)), np.max(np.abs(m1 + m2))))


@dataclass(frozen=True)
class LoxodromicData:
    fixed_attracting: complex
    fixed_repelling: complex
    multiplier: complex
    length: float
    holonomy: float

    def __post_init__(self):
        if not abs(self.multiplier) < 1:
            raise MoebiusError("multiplier convention requires |q| < 1")


@dataclass(frozen=True)
class Classification:
    kind: str  # identity | parabolic | elliptic | loxodromic
    loxodromic: LoxodromicData | None = None
    degenerate: bool = False


def classify_entries(a, b, c, d, degenerate_tol=1e-10):
    """Classification of a matrix of unit determinant given by raw entries.

    Everything is read off the eigenvalues lambda_{max,min} = (t +- s)/2,
    s = sqrt(t^2 - 4): multiplier q = lambda_min^2 = 1/lambda_max^2 and
    attracting fixed point (lambda_max - d)/c. The determinant is ASSUMED to
    be 1: for long products of det-1 generators the entries stay relatively
    accurate while the recomputed ad - bc is pure cancellation noise, so no
    renormalization is attempted here.
    """
    scale = max(abs(a), abs(b), abs(c), abs(d))
    off = max(abs(b), abs(c), abs(a - d))
    if off < 1e-14 * max(scale, 1.0):
        return Classification("identity")
    t = a + d
    gap = abs(t * t - 4.0)
    if gap == 0.0:
        return Classification("parabolic")
    if gap < degenerate_tol:
        return Classification("parabolic", degenerate=True)
    s = cmath.sqrt(t * t - 4.0)
    if (t.conjugate() * s).real < 0:
        s = -s
    lam_max = 0.5 * (t + s)          # aligned addition: no cancellation
    lam_min = 1.0 / lam_max          # unit determinant
    q = lam_min * lam_min
    if abs(abs(q) - 1.0) < degenerate_tol:
        return Classification("elliptic")
    if c != 0:
        att = (lam_max - d) / c
        rep = (lam_min - d) / c
    else:
        finite = b / (d - a)
        if abs(a) > abs(d):
            att, rep = INF, finite
        else:
            att, rep = finite, INF
    data = LoxodromicData(
        fixed_attracting=att,
        fixed_repelling=rep,
        multiplier=q,
        length=2.0 * math.log(abs(lam_max)),
        holonomy=cmath.phase(q),
    )
    return Classification("loxodromic", loxodromic=data)


def classify(g, degenerate_tol=1e-10):
    """Trace classification of a map; see classify_entries."""
    return classify_entries(g.a, g.b, g.c, g.d, degenerate_tol)


def from_fixed_points_and_multiplier(p_att, p_rep, q):
    """Loxodromic map with prescribed fixed points and multiplier |q| < 1."""
    q = complex(q)
    if not 0 < abs(q) < 1:
        raise MoebiusError("need 0 < |q| < 1")
    s = cmath.sqrt(q)
    diag = MoebiusMap(s, 0, 0, 1 / s)
    if is_inf(p_rep):
        conj = MoebiusMap(1, -p_att, 0, 1)  # p_att -> 0, inf -> inf
    elif is_inf(p_att):
        conj = MoebiusMap(0, 1, 1, -p_rep)  # inf -> 0, p_rep -> inf
    else:
        conj = MoebiusMap(1, -p_att, 1, -p_rep)
    return conj.inverse() @ diag @ conj


def map_three_points(z1, z2, z3, w1=0j, w2=INF, w3=1 + 0j):
    """Moebius map sending (z1, z2, z3) to (w1, w2, w3); INF allowed."""

    def to_01inf(a, b, c):
        # sends a->0, b->1, c->inf
        if is_inf(a):
            return MoebiusMap(0, b - c, 1, -c)
        if is_inf(b):
            return MoebiusMap(1, -a, 1, -c)
        if is_inf(c):
            return MoebiusMap(1, -a, 0, b - a)
        return MoebiusMap(b - c, -a * (b - c), b - a, -c * (b - a))

    m_z = to_01inf(z1, z3, z2)  # z1->0, z3->1, z2->inf
    m_w = to_01inf(w1, w3, w2)
    return m_w.inverse() @ m_z
