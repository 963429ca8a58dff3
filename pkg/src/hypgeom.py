"""
Hyperbolic Plane Geometry
=========================

Exact geometry of the upper half-plane model with base point o = i:
Möbius maps (normalized to determinant one, identified up to sign), points
of the plane, of its boundary circle and of the Riemann sphere, hyperbolic
distance, unit-speed geodesics, the geodesic flow in both (base, angle) and
Hopf (backward end, forward end, time) coordinates, and the Busemann
cocycle

    beta_xi(y, z) = lim_{t -> oo} dist(c(t), z) - dist(c(t), y)

for a geodesic ray c converging to xi. With this sign convention
beta_oo(y, z) = log(Im y / Im z).

All functions are pure; the array helpers at the bottom are the vectorized
workhorses used by the group, potential and measure modules.
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from constants import (
    BASE_POINT,
    BUSEMANN_CLOSED_FORM_TOL,
    BUSEMANN_STEP,
    BUSEMANN_T_MAX,
    BUSEMANN_TOL,
    CANONICAL_EPS,
    CHART_SWITCH,
    DET_TOL,
    ConvergenceError,
)

TWO_PI = 2.0 * math.pi


# ============================================================================
# MOBIUS MAPS
# ============================================================================

@dataclass(frozen=True)
class MobiusMap:
    """A 2x2 complex matrix of determinant one, acting by z -> (az+b)/(cz+d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1 + 0j, 0j, 0j, 1 + 0j)

    @classmethod
    def from_matrix(cls, m, normalize: bool = True) -> "MobiusMap":
        """
        Build a map from a 2x2 array-like.

        Args:
            m: 2x2 matrix
            normalize (bool): Divide by a square root of the determinant

        Raises:
            ValueError: If the matrix is singular
        """
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"Expected a 2x2 matrix, got shape {m.shape}")
        if normalize:
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            if abs(det) < 1e-300:
                raise ValueError("Singular matrix cannot define a Möbius map")
            m = m / np.sqrt(det)
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def trace(self) -> complex:
        return self.a + self.d

    def is_normalized(self, tol: float = DET_TOL) -> bool:
        return abs(self.det() - 1) <= tol

    def is_real(self, tol: float = 1e-12) -> bool:
        return all(abs(e.imag) <= tol for e in (self.a, self.b, self.c, self.d))

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        return MobiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "MobiusMap":
        det = self.det()
        return MobiusMap(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def canonical(self) -> "MobiusMap":
        """
        Deterministic representative of {M, -M}: the first entry with modulus
        above 1e-9 gets positive real part (positive imaginary part on ties).
        """
        for entry in (self.a, self.b, self.c, self.d):
            if abs(entry) > CANONICAL_EPS:
                flip = entry.real < -1e-15 or (abs(entry.real) <= 1e-15 and entry.imag < 0)
                if flip:
                    return MobiusMap(-self.a, -self.b, -self.c, -self.d)
                return self
        return self

    def distance(self, other: "MobiusMap") -> float:
        """Max entrywise distance between canonical forms."""
        return float(np.max(np.abs(self.canonical().matrix() - other.canonical().matrix())))

    def equals(self, other: "MobiusMap", tol: float = 1e-9) -> bool:
        """Equality up to global sign."""
        return self.distance(other) <= tol


def rotation(alpha: float) -> MobiusMap:
    """Elliptic map fixing o = i that turns tangent vectors at i by alpha."""
    c, s = math.cos(alpha / 2), math.sin(alpha / 2)
    return MobiusMap(c + 0j, s + 0j, -s + 0j, c + 0j)


def translation_frame(z: complex) -> MobiusMap:
    """Affine map x + y*w taking i to z (derivative y > 0)."""
    x, y = z.real, z.imag
    r = math.sqrt(y)
    return MobiusMap(r + 0j, x / r + 0j, 0j, 1 / r + 0j)


def hyperbolic_translation(length: float) -> MobiusMap:
    """Translation of the given length along the imaginary axis, towards oo."""
    h = math.exp(length / 2)
    return MobiusMap(h + 0j, 0j, 0j, 1 / h + 0j)


# ============================================================================
# POINTS
# ============================================================================

@dataclass(frozen=True)
class HPoint:
    """Interior point of the upper half-plane."""

    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)) or z.imag <= 0:
            raise ValueError(f"Not an interior point of the upper half-plane: {self.z!r}")
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class BoundaryPoint:
    """Point of the boundary circle R ∪ {oo}."""

    x: float = 0.0
    at_infinity: bool = False

    @classmethod
    def infinity(cls) -> "BoundaryPoint":
        return cls(0.0, True)

    @classmethod
    def from_homogeneous(cls, u0: float, u1: float) -> "BoundaryPoint":
        """
        Boundary point [u0 : u1]; a tiny second coordinate means oo.
        """
        if abs(u1) <= abs(u0) / CHART_SWITCH ** 2 or (u0 == 0 and u1 == 0):
            return cls.infinity()
        return cls(float(u0 / u1), False)

    def homogeneous(self) -> np.ndarray:
        """
        Real unit vector (u0, u1) with x = u0/u1. Points with |x| above the
        chart switch are built from 1/x to keep precision.
        """
        if self.at_infinity:
            return np.array([1.0, 0.0])
        if abs(self.x) > CHART_SWITCH:
            v = np.array([1.0, 1.0 / self.x])
        else:
            v = np.array([self.x, 1.0])
        return v / np.linalg.norm(v)

    def angle(self) -> float:
        """Visual angle of the point seen from o, in [0, 2pi)."""
        u0, u1 = self.homogeneous()
        return float((2.0 * math.atan2(-u1, u0)) % TWO_PI)

    @classmethod
    def from_angle(cls, alpha: float) -> "BoundaryPoint":
        return cls.from_homogeneous(math.cos(alpha / 2), -math.sin(alpha / 2))

    def to_proj(self) -> "ProjPoint":
        u0, u1 = self.homogeneous()
        return ProjPoint(complex(u0), complex(u1))


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """
    Point of the Riemann sphere CP^1 in homogeneous coordinates, stored as a
    unit vector whose larger coordinate is real and positive.
    """

    u0: complex
    u1: complex

    def __post_init__(self):
        v = np.array([complex(self.u0), complex(self.u1)])
        norm = np.linalg.norm(v)
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("Homogeneous coordinates must not both vanish")
        v = _phase_normalize(v / norm)
        object.__setattr__(self, "u0", complex(v[0]))
        object.__setattr__(self, "u1", complex(v[1]))

    @classmethod
    def from_chart(cls, w: complex) -> "ProjPoint":
        if w is None or not np.isfinite(w):
            return cls.infinity()
        return cls(complex(w), 1 + 0j)

    @classmethod
    def from_vector(cls, v) -> "ProjPoint":
        return cls(complex(v[0]), complex(v[1]))

    @classmethod
    def infinity(cls) -> "ProjPoint":
        return cls(1 + 0j, 0j)

    def vector(self) -> np.ndarray:
        return np.array([self.u0, self.u1], dtype=complex)

    def chart(self) -> complex:
        """Chart value u0/u1 (complex infinity when u1 = 0)."""
        if self.u1 == 0:
            return complex(math.inf, 0)
        return self.u0 / self.u1

    def chordal(self, other: "ProjPoint") -> float:
        """Fubini–Study chordal distance in [0, 1]."""
        return float(abs(self.u0 * other.u1 - self.u1 * other.u0))

    def is_real(self, tol: float = 0.0) -> bool:
        """True when the point lies on RP^1 (the boundary circle)."""
        return abs((self.u0 * self.u1.conjugate()).imag) <= tol

    def __eq__(self, other):
        if not isinstance(other, ProjPoint):
            return NotImplemented
        return self.chordal(other) <= 1e-12

    __hash__ = None


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    """Rotate a unit vector so that its largest coordinate is real positive."""
    k = int(np.argmax(np.abs(v)))
    phase = v[k] / abs(v[k])
    return v / phase


Point = Union[HPoint, BoundaryPoint, ProjPoint, complex]


def as_interior(p) -> complex:
    """Coerce an HPoint or complex to an interior complex coordinate."""
    if isinstance(p, HPoint):
        return p.z
    if isinstance(p, (BoundaryPoint, ProjPoint)):
        raise ValueError("Expected an interior point, got a boundary/sphere point")
    return HPoint(complex(p)).z


# ============================================================================
# ACTIONS AND DISTANCE
# ============================================================================

def mobius_apply(m: MobiusMap, p: Point):
    """
    Fractional-linear action on interior, boundary or sphere points.

    Real maps keep interior points interior and boundary points on the
    boundary circle; a non-real map sends interior and boundary points to
    points of the Riemann sphere.
    """
    if isinstance(p, ProjPoint):
        return ProjPoint.from_vector(m.matrix() @ p.vector())
    if isinstance(p, BoundaryPoint):
        v = m.matrix() @ p.homogeneous().astype(complex)
        if m.is_real():
            return BoundaryPoint.from_homogeneous(v[0].real, v[1].real)
        return ProjPoint.from_vector(v)
    z = as_interior(p)
    w = (m.a * z + m.b) / (m.c * z + m.d)
    if m.is_real():
        return HPoint(w)
    return ProjPoint.from_chart(w)


def derivative_argument(m: MobiusMap, z: complex) -> float:
    """arg of the complex derivative 1/(cz+d)^2 of a real map at z."""
    return -2.0 * math.atan2(((m.c * z + m.d)).imag, (m.c * z + m.d).real)


def hdist(z, w) -> float:
    """
    Hyperbolic distance arccosh(1 + |z-w|^2 / (2 Im z Im w)), evaluated in
    the cancellation-free form 2 asinh(|z-w| / (2 sqrt(Im z Im w))).
    """
    z, w = as_interior(z), as_interior(w)
    return float(2.0 * math.asinh(abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag))))


def frame_toward(z, target) -> MobiusMap:
    """
    Real map sending i to z whose upward direction at i is sent to the
    direction at z pointing to target (interior or boundary).

    Raises:
        ValueError: If target coincides with z
    """
    z = as_interior(z)
    a_z = translation_frame(z)
    inv = a_z.inverse()
    if isinstance(target, BoundaryPoint):
        u = inv.matrix() @ target.homogeneous().astype(complex)
        zeta = (u[0] - 1j * u[1]) / (u[0] + 1j * u[1])
    else:
        w = mobius_apply(inv, HPoint(as_interior(target))).z
        zeta = (w - 1j) / (w + 1j)
        if abs(zeta) < 1e-15:
            raise ValueError("Geodesic endpoints coincide")
    return a_z @ rotation(math.atan2(zeta.imag, zeta.real))


def geodesic_point(z, target, s: float) -> HPoint:
    """
    Point at signed arc length s on the unit-speed geodesic from z towards
    target (an interior point or a boundary point).
    """
    g = frame_toward(z, target)
    w = 1j * math.exp(s)
    return HPoint((g.a * w + g.b) / (g.c * w + g.d))


# ============================================================================
# BUSEMANN COCYCLE
# ============================================================================

def chart_at_infinity(xi: BoundaryPoint) -> MobiusMap:
    """Rotation about o sending xi to oo."""
    u0, u1 = xi.homogeneous()
    return MobiusMap(u0 + 0j, u1 + 0j, -u1 + 0j, u0 + 0j)


def busemann_closed_form(xi: BoundaryPoint, y, z) -> float:
    """
    beta_xi(y, z) = log(Im y |u0 - u1 z|^2 / (Im z |u0 - u1 y|^2)) for
    xi = [u0 : u1]; reduces to log(Im y / Im z) at xi = oo.
    """
    y, z = as_interior(y), as_interior(z)
    u0, u1 = xi.homogeneous()
    num = y.imag * abs(u0 - u1 * z) ** 2
    den = z.imag * abs(u0 - u1 * y) ** 2
    return float(math.log(num / den))


def busemann(xi: BoundaryPoint, y, z, tol: float = BUSEMANN_TOL,
             t_max: float = BUSEMANN_T_MAX) -> float:
    """
    Busemann cocycle as the limit of dist(c(t), z) - dist(c(t), y) along the
    ray c from y to xi, evaluated at t = 2, 4, ... until two successive
    values differ by less than tol, then checked against the closed form.

    Raises:
        ConvergenceError: If t_max is reached first or the closed form
            disagrees by more than 1e-8
    """
    y, z = as_interior(y), as_interior(z)
    k = chart_at_infinity(xi)
    yy = mobius_apply(k, HPoint(y)).z
    zz = mobius_apply(k, HPoint(z)).z

    def difference(t: float) -> float:
        c = complex(yy.real, yy.imag * math.exp(t))
        return hdist(c, zz) - t

    t = BUSEMANN_STEP
    previous = difference(t)
    increment = math.inf
    while t < t_max:
        t += BUSEMANN_STEP
        current = difference(t)
        increment = abs(current - previous)
        previous = current
        if increment < tol:
            break
    else:
        raise ConvergenceError("Busemann limit", tol, increment, f"t reached {t_max}")

    closed = math.log(yy.imag / zz.imag)
    if abs(previous - closed) > BUSEMANN_CLOSED_FORM_TOL:
        raise ConvergenceError("Busemann closed-form check", BUSEMANN_CLOSED_FORM_TOL,
                               abs(previous - closed))
    return previous


# ============================================================================
# UNIT TANGENT VECTORS AND GEODESIC FLOW
# ============================================================================

@dataclass(frozen=True)
class UnitTangent:
    """
    Unit tangent vector at an interior point; angle is the Euclidean
    direction in the half-plane chart. Hopf coordinates are
    (xi_minus, xi_plus, t) with t = beta_{xi_plus}(base, o).
    """

    base: HPoint
    angle: float

    def __post_init__(self):
        if not isinstance(self.base, HPoint):
            object.__setattr__(self, "base", HPoint(self.base))
        object.__setattr__(self, "angle", float(self.angle) % TWO_PI)

    def frame(self) -> MobiusMap:
        """Real map sending (i, upward) to this vector."""
        return translation_frame(self.base.z) @ rotation(self.angle - math.pi / 2)

    def hopf(self) -> Tuple[BoundaryPoint, BoundaryPoint, float]:
        g = self.frame()
        xi_plus = BoundaryPoint.from_homogeneous(g.a.real, g.c.real)
        xi_minus = BoundaryPoint.from_homogeneous(g.b.real, g.d.real)
        t = busemann_closed_form(xi_plus, self.base, BASE_POINT)
        return xi_minus, xi_plus, t

    @classmethod
    def from_hopf(cls, xi_minus: BoundaryPoint, xi_plus: BoundaryPoint, t: float) -> "UnitTangent":
        """
        Rebuild the vector on the geodesic from xi_minus to xi_plus at Hopf
        time t.

        Raises:
            ValueError: If the two endpoints coincide
        """
        p_plus = xi_plus.homogeneous()
        p_minus = xi_minus.homogeneous()
        det = p_plus[0] * p_minus[1] - p_plus[1] * p_minus[0]
        if abs(det) < 1e-14:
            raise ValueError("Hopf endpoints must be distinct")
        g = MobiusMap(p_plus[0] + 0j, p_minus[0] / det + 0j, p_plus[1] + 0j, p_minus[1] / det + 0j)
        o_pulled = mobius_apply(g.inverse(), HPoint(BASE_POINT)).z
        s = t + math.log(o_pulled.imag)
        w = 1j * math.exp(s)
        base = (g.a * w + g.b) / (g.c * w + g.d)
        return cls(HPoint(base), math.pi / 2 + derivative_argument(g, w))

    def forward_endpoint(self) -> BoundaryPoint:
        return self.hopf()[1]

    def backward_endpoint(self) -> BoundaryPoint:
        return self.hopf()[0]


def flow(v: UnitTangent, t: float) -> UnitTangent:
    """Geodesic flow for time t."""
    g = v.frame()
    w = 1j * math.exp(t)
    base = (g.a * w + g.b) / (g.c * w + g.d)
    return UnitTangent(HPoint(base), math.pi / 2 + derivative_argument(g, w))


def push_tangent(m: MobiusMap, v: UnitTangent) -> UnitTangent:
    """Differential action Dm·v of a real Möbius map."""
    if not m.is_real():
        raise ValueError("Only real maps act on the unit tangent bundle")
    z = v.base.z
    base = (m.a * z + m.b) / (m.c * z + m.d)
    return UnitTangent(HPoint(base), v.angle + derivative_argument(m, z))


# ============================================================================
# BOUNDARY ANGLES
# ============================================================================

def boundary_angle(xi: BoundaryPoint) -> float:
    """Visual angle of a boundary point seen from o."""
    return xi.angle()


def boundary_from_angle(alpha: float) -> BoundaryPoint:
    return BoundaryPoint.from_angle(alpha)


# ============================================================================
# VECTORIZED HELPERS
# ============================================================================

def apply_array(mats: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Apply a stack of matrices (n,2,2) to interior points (n,) or a scalar."""
    return (mats[..., 0, 0] * z + mats[..., 0, 1]) / (mats[..., 1, 0] * z + mats[..., 1, 1])


def hdist_array(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Elementwise hyperbolic distance between arrays of interior points."""
    return 2.0 * np.arcsinh(np.abs(z - w) / (2.0 * np.sqrt(z.imag * w.imag)))


def orbit_distance_array(mats: np.ndarray) -> np.ndarray:
    """dist(i, m i) for real SL2 matrices: cosh d = (a^2+b^2+c^2+d^2)/2."""
    sq = np.sum(np.abs(mats) ** 2, axis=(-2, -1))
    return np.arccosh(np.maximum(sq / 2.0, 1.0))


def frames_toward_array(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """
    Stack of real frames g with g(i) = z1 and g(i e^s) running along the
    geodesic from z1 to z2 at unit speed.
    """
    x, y = z1.real, z1.imag
    r = np.sqrt(y)
    w = (z2 - x) / y
    zeta = (w - 1j) / (w + 1j)
    h = np.angle(zeta) / 2.0
    ch, sh = np.cos(h), np.sin(h)
    frames = np.empty(z1.shape + (2, 2))
    frames[..., 0, 0] = r * ch - (x / r) * sh
    frames[..., 0, 1] = r * sh + (x / r) * ch
    frames[..., 1, 0] = -sh / r
    frames[..., 1, 1] = ch / r
    return frames


def polar_points(alpha: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Points at distance r from o in visual direction alpha."""
    c, s = np.cos(alpha / 2), np.sin(alpha / 2)
    w = 1j * np.exp(r)
    return (c * w + s) / (-s * w + c)


def point_angle_array(z: np.ndarray) -> np.ndarray:
    """Visual angle from o of interior points (direction of the ray o -> z)."""
    return np.mod(np.angle((z - 1j) / (z + 1j)), TWO_PI)


def boundary_vectors_from_angles(alpha: np.ndarray) -> np.ndarray:
    """Real homogeneous unit vectors (n,2) of boundary points at visual angles."""
    return np.stack([np.cos(alpha / 2), -np.sin(alpha / 2)], axis=-1)


def busemann_closed_form_array(u: np.ndarray, y: complex, z: np.ndarray) -> np.ndarray:
    """
    Closed-form beta_xi(y, z) for boundary points given as real unit vectors
    u (n,2), broadcasting over z.
    """
    u0, u1 = u[..., 0], u[..., 1]
    num = y.imag * np.abs(u0 - u1 * z) ** 2
    den = z.imag * np.abs(u0 - u1 * y) ** 2
    return np.log(num / den)


def chordal_array(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Chordal distance between rows of unit vectors in C^d (any d), computed
    as the norm of the wedge product.
    """
    d = u.shape[-1]
    total = np.zeros(np.broadcast(u[..., 0], v[..., 0]).shape)
    for i in range(d):
        for j in range(i + 1, d):
            total = total + np.abs(u[..., i] * v[..., j] - u[..., j] * v[..., i]) ** 2
    return np.sqrt(total)


def normalize_rows(v: np.ndarray) -> np.ndarray:
    """Scale each row (last axis) to unit norm."""
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
