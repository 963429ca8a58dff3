"""
Potentials and Weight Cocycles
==============================

Gamma-invariant potentials on the unit tangent bundle of the genus-2
surface, their integrals along geodesic segments of the plane, and the
objects built from them:

    kappa(o, z)          = exp( integral of F from o to z )
    delta(y, z; xi)      = exp( int_xi^z F - int_xi^y F )      (limit along a ray)
    k(y, z; xi)          = delta(y, z; xi) * exp(-P beta_xi(y, z))
    h(z)                 = sum over boundary atoms of k(o, z; xi)

Pressure is estimated as the growth rate of the orbital sum
J_R = sum over B_R of kappa(o, gamma o).

Potentials depend on the base point only. A bump potential is
F = c + A * sum over the orbit of q of phi(dist(., gamma q) / r) with the
C^5 cutoff phi(u) = (1 - u^2)^6 on [0, 1).
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from constants import (
    BASE_POINT,
    BUMP_EXPONENT,
    CIRCUMRADIUS,
    DEFAULT_BUMP_RADIUS,
    DELTA_T_MAX,
    DELTA_T_START,
    DELTA_T_STEP,
    DELTA_TOL,
    QUAD_STEP,
    ConvergenceError,
    parse_potential_spec,
)
from hypgeom import (
    BoundaryPoint,
    HPoint,
    UnitTangent,
    as_interior,
    busemann,
    busemann_closed_form_array,
    frames_toward_array,
    geodesic_point,
    hdist,
    hdist_array,
    point_angle_array,
    polar_points,
    boundary_vectors_from_angles,
)
from group import Ball, ball, reduce_points

if TYPE_CHECKING:
    from measures import EmpiricalMeasure

# Quadrature nodes evaluated per vectorized chunk
_NODE_CHUNK = 250_000


@lru_cache(maxsize=32)
def _center_orbit(center: complex, radius: float) -> np.ndarray:
    """Orbit points gamma q that can lie within r of the Dirichlet domain."""
    reach = CIRCUMRADIUS + radius + hdist(BASE_POINT, center) + 1e-6
    m = ball(reach).matrices
    return (m[:, 0, 0] * center + m[:, 0, 1]) / (m[:, 1, 0] * center + m[:, 1, 1])


# ============================================================================
# POTENTIALS
# ============================================================================

@dataclass(frozen=True)
class Potential:
    """
    Base-point potential: constant plus an optional orbit series of bumps.

    kind is one of "zero", "constant" or "bump"; a shifted bump keeps
    kind "bump" with a non-zero constant.
    """

    kind: str = "zero"
    constant: float = 0.0
    center: complex = BASE_POINT
    radius: float = DEFAULT_BUMP_RADIUS
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "bump"):
            raise ValueError(f"Unknown potential kind {self.kind!r}")
        if self.kind == "bump":
            HPoint(self.center)
            if self.radius <= 0:
                raise ValueError("Bump radius must be positive")

    @classmethod
    def zero(cls) -> "Potential":
        return cls()

    @classmethod
    def const(cls, c: float) -> "Potential":
        return cls("constant", float(c))

    @classmethod
    def bump(cls, amplitude: float, center: complex = BASE_POINT,
             radius: float = DEFAULT_BUMP_RADIUS) -> "Potential":
        return cls("bump", 0.0, complex(center), float(radius), float(amplitude))

    @classmethod
    def from_spec(cls, text: str) -> "Potential":
        """Build from ``zero``, ``const:c``, ``bump:A`` or ``bump:q,r,A``."""
        spec = parse_potential_spec(text)
        return cls(spec["kind"], spec["constant"], spec["center"], spec["radius"], spec["amplitude"])

    @property
    def is_constant(self) -> bool:
        return self.kind != "bump" or self.amplitude == 0.0

    @property
    def label(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "constant":
            return f"const:{self.constant:g}"
        q = self.center
        text = f"bump:{q.real:g}{q.imag:+g}i,{self.radius:g},{self.amplitude:g}"
        if self.constant:
            text += f"+{self.constant:g}"
        return text

    def shifted(self, c: float) -> "Potential":
        """The potential F + c."""
        if self.kind == "bump":
            return Potential("bump", self.constant + c, self.center, self.radius, self.amplitude)
        total = self.constant + c
        return Potential("constant", total) if total != 0 else Potential.zero()

    def bump_sum(self, z: np.ndarray) -> np.ndarray:
        """Sum of phi(dist(z, gamma q) / r) over the orbit of the center."""
        z = np.asarray(z, dtype=complex)
        z0, _, _ = reduce_points(z.reshape(-1))
        orbit = _center_orbit(complex(self.center), float(self.radius))
        u = np.minimum(hdist_array(z0[:, None], orbit[None, :]) / self.radius, 1.0)
        return ((1.0 - u ** 2) ** BUMP_EXPONENT).sum(axis=1).reshape(z.shape)

    def evaluate_points(self, z: np.ndarray) -> np.ndarray:
        """Potential at interior points (array)."""
        z = np.asarray(z, dtype=complex)
        if self.is_constant:
            return np.full(z.shape, float(self.constant))
        return self.constant + self.amplitude * self.bump_sum(z)

    def __call__(self, v) -> float:
        """Evaluate on a UnitTangent (or an interior point)."""
        z = v.base.z if isinstance(v, UnitTangent) else as_interior(v)
        return float(self.evaluate_points(np.array([z]))[0])


# ============================================================================
# GEODESIC INTEGRALS
# ============================================================================

def _simpson_richardson_weights(n: np.ndarray, lengths: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Node layout and weights for Simpson on 2n fine intervals refined by one
    Richardson step against Simpson on the n coarse intervals.

    Returns:
        tuple: (segment index per node, arc length per node, weight per node)
    """
    counts = 2 * n + 1
    seg = np.repeat(np.arange(len(n)), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    j = np.arange(counts.sum()) - starts
    m = np.repeat(2 * n, counts)
    h_fine = np.repeat(lengths, counts) / m

    w_fine = np.where((j == 0) | (j == m), 1.0, np.where(j % 2 == 1, 4.0, 2.0)) * h_fine / 3.0
    jc = j // 2
    nc = m // 2
    w_coarse = np.where(j % 2 == 1, 0.0,
                        np.where((jc == 0) | (jc == nc), 1.0, np.where(jc % 2 == 1, 4.0, 2.0))) * (2 * h_fine) / 3.0
    weights = (16.0 * w_fine - w_coarse) / 15.0
    return seg, j * h_fine, weights


def geodesic_integrals(F: Potential, z1: np.ndarray, z2: np.ndarray, step: float = QUAD_STEP) -> np.ndarray:
    """
    Integrals of F along the directed unit-speed geodesics z1 -> z2 (arrays).

    Constant potentials integrate in closed form; bump potentials use
    composite Simpson with spacing at most ``step`` and one Richardson
    refinement.
    """
    z1 = np.atleast_1d(np.asarray(z1, dtype=complex))
    z2 = np.atleast_1d(np.asarray(z2, dtype=complex))
    z1, z2 = np.broadcast_arrays(z1, z2)
    lengths = hdist_array(z1, z2)
    result = F.constant * lengths
    if F.is_constant:
        return result

    moving = np.flatnonzero(lengths > 0)
    if len(moving) == 0:
        return result
    # coarse Simpson grid: an even number of intervals no wider than step
    n_all = np.maximum(2 * np.ceil(lengths[moving] / (2.0 * step)).astype(np.int64), 2)
    nodes = 2 * n_all + 1

    start = 0
    while start < len(moving):
        fits = int(np.searchsorted(np.cumsum(nodes[start:]), _NODE_CHUNK, side="right"))
        stop = start + max(1, fits)
        idx = moving[start:stop]
        seg, s, w = _simpson_richardson_weights(n_all[start:stop], lengths[idx])
        frames = frames_toward_array(z1[idx], z2[idx])[seg]
        e = 1j * np.exp(s)
        points = (frames[:, 0, 0] * e + frames[:, 0, 1]) / (frames[:, 1, 0] * e + frames[:, 1, 1])
        values = F.bump_sum(points)
        result[idx] += F.amplitude * np.bincount(seg, weights=w * values, minlength=len(idx))
        start = stop
    return result


def geodesic_integral(F: Potential, z1, z2) -> float:
    """
    Integral of F along the directed geodesic from z1 to z2.

    Args:
        F (Potential): Potential
        z1: Start point (HPoint or complex)
        z2: End point (HPoint or complex)

    Returns:
        float: The line integral (0 when z1 = z2)
    """
    z1, z2 = as_interior(z1), as_interior(z2)
    return float(geodesic_integrals(F, np.array([z1]), np.array([z2]))[0])


def kappa(F: Potential, o, z) -> float:
    """Weight kappa^F(o, z) = exp of the integral from o to z."""
    return math.exp(geodesic_integral(F, o, z))


def orbit_log_kappa(F: Potential, elements: "Ball", o: complex = BASE_POINT) -> np.ndarray:
    """log kappa^F(o, gamma o) for every element of a ball."""
    points = elements.orbit_points()
    return geodesic_integrals(F, np.full(len(points), complex(o)), points)


# ============================================================================
# COCYCLES AND KERNELS
# ============================================================================

def delta_cocycle(F: Potential, y, z, xi: BoundaryPoint, tol: float = DELTA_TOL,
                  t_max: float = DELTA_T_MAX) -> float:
    """
    delta^F(y, z; xi) as the limit of exp(int_{c(T)}^z F - int_{c(T)}^y F)
    along the ray c from the midpoint of [y, z] towards xi.

    Raises:
        ConvergenceError: If successive values still differ (relatively) by
            tol or more at T = t_max
    """
    y, z = as_interior(y), as_interior(z)
    if y == z:
        return 1.0
    d = hdist(y, z)
    midpoint = geodesic_point(y, z, d / 2.0)

    def value(t: float) -> float:
        c = geodesic_point(midpoint, xi, t).z
        integrals = geodesic_integrals(F, np.array([c, c]), np.array([z, y]))
        return math.exp(integrals[0] - integrals[1])

    t = DELTA_T_START
    previous = value(t)
    increment = math.inf
    while t < t_max:
        t += DELTA_T_STEP
        current = value(t)
        increment = abs(current - previous) / abs(current)
        previous = current
        if increment < tol:
            return current
    raise ConvergenceError("delta cocycle", tol, increment, f"ray length reached {t_max}")


def gibbs_kernel(F: Potential, z1, z2, xi: BoundaryPoint, P: float, tol: float = DELTA_TOL) -> float:
    """k^F(z1, z2; xi) = delta^F(z1, z2; xi) exp(-P beta_xi(z1, z2))."""
    z1, z2 = as_interior(z1), as_interior(z2)
    if z1 == z2:
        return 1.0
    return delta_cocycle(F, z1, z2, xi, tol) * math.exp(-P * busemann(xi, z1, z2))


def f_harmonic_eval(F: Potential, eta: "EmpiricalMeasure", z, o=BASE_POINT, P: float = 1.0,
                    tol: float = DELTA_TOL) -> float:
    """
    h(z) = sum over the atoms xi of eta of w_xi k^F(o, z; xi).

    Args:
        eta (EmpiricalMeasure): Finite measure on the boundary circle

    Returns:
        float: h(z), equal to the mass of eta at z = o
    """
    if eta.support != "circle":
        raise ValueError("F-harmonic functions integrate boundary measures (support 'circle')")
    o, z = as_interior(o), as_interior(z)
    if z == o:
        return float(eta.mass)
    total = 0.0
    for u, w in zip(eta.points, eta.weights):
        xi = BoundaryPoint.from_homogeneous(float(np.real(u[0])), float(np.real(u[1])))
        total += w * gibbs_kernel(F, o, z, xi, P, tol)
    return float(total)


# ============================================================================
# PRESSURE
# ============================================================================

@dataclass
class PressureEstimate:
    """Growth-rate estimate of the orbital sum J_R over a radius window."""

    value: float
    window: Tuple[float, float]
    radii: List[float]
    log_sums: List[float]
    residual: float
    intercept: float = 0.0
    stderr: float = 0.0
    potential: str = ""

    def to_dict(self) -> Dict:
        return {
            "potential": self.potential,
            "window": list(self.window),
            "samples": [{"R": r, "log_J": lj} for r, lj in zip(self.radii, self.log_sums)],
            "slope": self.value,
            "residual": self.residual,
            "intercept": self.intercept,
            "stderr": self.stderr,
        }


def orbital_sums(F: Potential, elements: "Ball", radii, log_kappa: Optional[np.ndarray] = None) -> np.ndarray:
    """J_{F,R} for each radius, summing kappa over B_R."""
    if log_kappa is None:
        log_kappa = orbit_log_kappa(F, elements)
    weights = np.exp(log_kappa)
    return np.array([np.sum(weights[elements.dists <= r]) for r in radii])


def estimate_pressure(F: Potential, elements: "Ball", window: Tuple[float, float],
                      verbose: bool = False) -> PressureEstimate:
    """
    Least-squares slope of log J_{F,R} against R at the integer radii of the
    window.

    Args:
        F (Potential): Potential
        elements (Ball): Enumerated ball covering the window
        window (tuple): (R_min, R_max)

    Raises:
        ValueError: If the window has fewer than four integer radii, exceeds
            the enumerated radius or contains an empty shell
    """
    low, high = window
    if high - low < 3:
        raise ValueError(f"Pressure window must have length >= 3, got {window}")
    if high > elements.radius + 1e-12:
        raise ValueError(f"Window {window} exceeds the enumerated radius {elements.radius}")
    radii = np.arange(math.ceil(low), math.floor(high) + 1, dtype=float)
    if len(radii) < 4:
        raise ValueError(f"Window {window} holds fewer than 4 integer radii")

    for inner, outer in zip(radii[:-1], radii[1:]):
        if not np.any((elements.dists > inner) & (elements.dists <= outer)):
            raise ValueError(f"Empty shell ({inner}, {outer}] in the pressure window")

    if verbose:
        print(f"🔍 Estimating pressure of {F.label} over radii {radii.tolist()}")
    log_j = np.log(orbital_sums(F, elements, radii))
    fit = stats.linregress(radii, log_j)
    residual = float(np.sqrt(np.mean((log_j - (fit.intercept + fit.slope * radii)) ** 2)))
    estimate = PressureEstimate(float(fit.slope), (float(low), float(high)), radii.tolist(), log_j.tolist(),
                                residual, float(fit.intercept), float(fit.stderr), F.label)
    if verbose:
        print(f"📊 P({F.label}) ≈ {estimate.value:.4f} (residual {residual:.2e})")
    return estimate


# ============================================================================
# CANONICAL HARMONIC FUNCTION AND DISTORTION
# ============================================================================

def ledrappier_atoms(F: Potential, elements: "Ball", P: float,
                     log_kappa: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Boundary atoms of the ball-truncated Ledrappier measure at o: visual
    angles of gamma o with weights kappa^F(o, gamma o) e^{-P dist(o, gamma o)}.
    The identity, whose orbit point is o itself, carries no direction and is
    left out.
    """
    if log_kappa is None:
        log_kappa = orbit_log_kappa(F, elements)
    keep = elements.dists > 0
    angles = point_angle_array(elements.orbit_points()[keep])
    return angles, np.exp(log_kappa[keep] - P * elements.dists[keep])


def h0_ratio(F: Potential, elements: "Ball", P: float, z, tol: float = DELTA_TOL) -> float:
    """
    h0(z) / h0(o) for the canonical F-harmonic function, integrating
    k^F(o, z; xi) against the normalized Ledrappier atoms of the ball.
    """
    z = as_interior(z)
    if z == BASE_POINT:
        return 1.0
    angles, weights = ledrappier_atoms(F, elements, P)
    weights = weights / weights.sum()
    vectors = boundary_vectors_from_angles(angles)
    if F.is_constant:
        # delta is exp(c beta) for constant potentials
        beta = busemann_closed_form_array(vectors, BASE_POINT, np.full(len(angles), z))
        return float(np.sum(weights * np.exp((F.constant - P) * beta)))
    total = 0.0
    for u, w in zip(vectors, weights):
        total += w * gibbs_kernel(F, BASE_POINT, z, BoundaryPoint.from_homogeneous(u[0], u[1]), P, tol)
    return float(total)


def distortion_constant(F: Potential, R: float, n_samples: int = 200,
                        seed: int = 0) -> Tuple[float, pd.DataFrame]:
    """
    Smallest C with |log kappa(o,y) - log kappa(o,z)| <= C dist_S(y,z) over
    sampled pairs on the sphere S(o,R), dist_S being arc length on the
    sphere. Pairs are drawn at sphere distance at most one.

    Returns:
        tuple: (C, DataFrame of sampled pairs)
    """
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 2.0 * math.pi, n_samples)
    arc = rng.uniform(0.01, 1.0, n_samples)
    beta = alpha + arc / math.sinh(R)
    y = polar_points(alpha, np.full(n_samples, R))
    z = polar_points(beta, np.full(n_samples, R))
    origin = np.full(n_samples, BASE_POINT)
    log_y = geodesic_integrals(F, origin, y)
    log_z = geodesic_integrals(F, origin, z)
    ratios = np.abs(log_y - log_z) / arc
    frame = pd.DataFrame({"alpha": alpha, "sphere_dist": arc, "log_kappa_y": log_y,
                          "log_kappa_z": log_z, "ratio": ratios})
    return float(ratios.max()), frame


if __name__ == "__main__":
    F = Potential.from_spec("bump:-0.5")
    print(f"📊 F(o) = {F(1j):.6f}, F(g0 o) = {F(1j * math.exp(3.0571)):.6f}")
    print(f"📊 kappa(o, 3i) = {kappa(F, 1j, 3j):.6f}")
