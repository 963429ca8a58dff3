"""
Empirical Measures
==================

Finite weighted measures on the Riemann sphere CP^1 ("projective" support)
or on the boundary circle of the plane ("circle" support), and the ways the
lab builds and compares them:

- theta_{F,R}: kappa-weighted counting measure of the atoms rho(gamma)^-1 x
  over the orbit ball B_R;
- ball and sphere averages: hyperbolic-area (or arc) samples y, weighted by
  kappa(o, y) and projected to (domain point, rho(gamma)^-1 x);
- the ball-truncated Ledrappier measure on the boundary circle;
- distances: W1 with chordal cost (exact transport on weighted subsamples),
  exact W1 on the real projective line, and Kolmogorov–Smirnov on angles;
- the Cauchy diagnostic over a list of radii and the round-circle fit used
  to tell fuchsian from quasifuchsian supports.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import ot
import pandas as pd

from constants import BASE_POINT, W1_SEED, W1_SUBSAMPLE
from group import Ball, Representation, reduce_points, rep_eval_many
from hypgeom import ProjPoint, boundary_vectors_from_angles, chordal_array, polar_points
from potential import Potential, geodesic_integrals, ledrappier_atoms, orbit_log_kappa

SUPPORTS = ("projective", "circle")
METRICS = ("W1-chordal", "W1-arc", "KS-angle")

_SAMPLE_CHUNK = 4096


def normalize_projective(v: np.ndarray) -> np.ndarray:
    """Unit rows with the largest coordinate rotated to be real positive."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    k = np.argmax(np.abs(v), axis=-1)
    lead = np.take_along_axis(v, k[..., None], axis=-1)
    return v * (np.abs(lead) / lead)


# ============================================================================
# EMPIRICAL MEASURES
# ============================================================================

@dataclass
class EmpiricalMeasure:
    """
    Weighted atoms in construction order.

    points are unit homogeneous vectors (n, d): complex for "projective"
    support, real (n, 2) for boundary points with "circle" support. base
    optionally carries the domain point of each atom (ball/sphere averages).
    """

    support: str
    points: np.ndarray
    weights: np.ndarray
    base: Optional[np.ndarray] = None
    normalized: bool = False

    def __post_init__(self):
        if self.support not in SUPPORTS:
            raise ValueError(f"Unknown support kind {self.support!r}")
        self.points = np.atleast_2d(np.asarray(self.points))
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.points) != len(self.weights):
            raise ValueError("One weight per atom is required")
        if len(self.weights) == 0:
            raise ValueError("An empirical measure needs at least one atom")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("Weights must be finite and non-negative")

    @classmethod
    def uniform(cls, support: str, points) -> "EmpiricalMeasure":
        points = np.atleast_2d(np.asarray(points))
        if support == "projective":
            points = normalize_projective(points)
        return cls(support, points, np.full(len(points), 1.0 / len(points)), normalized=True)

    @classmethod
    def from_angles(cls, angles, weights=None) -> "EmpiricalMeasure":
        """Circle-supported measure at the given visual angles."""
        angles = np.asarray(angles, dtype=float)
        weights = np.full(len(angles), 1.0) if weights is None else np.asarray(weights, dtype=float)
        return cls("circle", boundary_vectors_from_angles(angles), weights).normalize()

    @classmethod
    def dirac(cls, x: ProjPoint) -> "EmpiricalMeasure":
        return cls("projective", x.vector()[None, :], np.array([1.0]), normalized=True)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self) -> int:
        return len(self.weights)

    def normalize(self) -> "EmpiricalMeasure":
        total = self.mass
        if total <= 0:
            raise ValueError("Cannot normalize a measure of zero mass")
        return EmpiricalMeasure(self.support, self.points, self.weights / total, self.base, True)

    def scaled(self, factor: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.support, self.points, self.weights * factor, self.base, False)

    def fiber_marginal(self) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.support, self.points, self.weights, None, self.normalized)

    def angles(self) -> np.ndarray:
        """Visual angles in [0, 2pi) of circle-supported atoms."""
        if self.support != "circle":
            raise ValueError("Visual angles are defined for circle-supported measures")
        u = self.points.real
        return np.mod(2.0 * np.arctan2(-u[:, 1], u[:, 0]), 2.0 * math.pi)

    def charts(self) -> np.ndarray:
        """Chart values u0/u1 (complex infinity where u1 = 0)."""
        u = self.points.astype(complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            chart = u[:, 0] / u[:, 1]
        return np.where(u[:, 1] == 0, complex(np.inf, 0), chart)

    def is_real_circle(self, tol: float = 1e-12) -> bool:
        """True when every atom lies on RP^1 (the boundary circle)."""
        if self.support == "circle":
            return True
        if self.points.shape[1] != 2:
            return False
        return bool(np.max(real_circle_deviation(self.points)) <= tol)

    def projective_angles(self) -> np.ndarray:
        """Angles in [0, pi) of atoms on RP^1 (arc length for the W1-arc metric)."""
        u = normalize_projective(self.points)
        return np.mod(np.arctan2(u[:, 1].real, u[:, 0].real), math.pi)

    def to_projective(self) -> "EmpiricalMeasure":
        """Embed a boundary measure in CP^1 through R ∪ {oo} ⊂ CP^1."""
        if self.support == "projective":
            return self
        return EmpiricalMeasure("projective", normalize_projective(self.points.astype(complex)),
                                self.weights, self.base, self.normalized)

    def to_circle(self) -> "EmpiricalMeasure":
        """View a measure on RP^1 as a boundary measure (visual angles)."""
        if self.support == "circle":
            return self
        if not self.is_real_circle():
            raise ValueError("Only measures supported on RP^1 can be viewed on the boundary circle")
        return EmpiricalMeasure("circle", normalize_projective(self.points).real, self.weights,
                                self.base, self.normalized)

    def to_frame(self) -> pd.DataFrame:
        chart = self.charts()
        columns = {"re": chart.real, "im": chart.imag, "weight": self.weights}
        if self.base is not None:
            columns["base_re"] = self.base.real
            columns["base_im"] = self.base.imag
        return pd.DataFrame(columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def real_circle_deviation(points: np.ndarray) -> np.ndarray:
    """Chordal distance of projective points (n, 2) to RP^1."""
    x = riemann_sphere(points)
    return np.sin(np.arcsin(np.minimum(np.abs(x[:, 1]), 1.0)) / 2.0)


def riemann_sphere(points: np.ndarray) -> np.ndarray:
    """
    Unit-sphere image of unit vectors (n, 2); chordal distance is half the
    Euclidean distance there and RP^1 is the great circle X2 = 0.
    """
    u = np.asarray(points, dtype=complex)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    cross = u[:, 0] * np.conj(u[:, 1])
    return np.stack([2.0 * cross.real, 2.0 * cross.imag, np.abs(u[:, 0]) ** 2 - np.abs(u[:, 1]) ** 2], axis=-1)


# ============================================================================
# CONSTRUCTIONS
# ============================================================================

def _inverse_images(rep: Representation, words, x: ProjPoint) -> np.ndarray:
    mats = rep_eval_many(rep, words)
    # inverse of a determinant-one matrix is its adjugate
    inv = np.empty_like(mats)
    inv[:, 0, 0] = mats[:, 1, 1]
    inv[:, 0, 1] = -mats[:, 0, 1]
    inv[:, 1, 0] = -mats[:, 1, 0]
    inv[:, 1, 1] = mats[:, 0, 0]
    return normalize_projective(inv @ x.vector())


def theta(rep: Representation, F: Potential, R: float, x: ProjPoint, elements: Ball,
          log_kappa: Optional[np.ndarray] = None) -> EmpiricalMeasure:
    """
    theta_{F,R} = sum over B_R of kappa^F(gamma) delta_{rho(gamma)^-1 x} / J_{F,R}.

    Args:
        rep (Representation): Holonomy representation
        F (Potential): Weighting potential
        R (float): Radius, at most the ball radius
        x (ProjPoint): Fiber point
        elements (Ball): Enumerated ball
        log_kappa (np.ndarray): Optional precomputed log kappa over ``elements``

    Raises:
        ValueError: If the ball does not cover R or B_R is empty
    """
    if R > elements.radius + 1e-12:
        raise ValueError(f"Ball radius {elements.radius} does not cover R = {R}")
    keep = np.flatnonzero(elements.dists <= R)
    if len(keep) == 0:
        raise ValueError(f"Empty ball at R = {R}")
    if log_kappa is None:
        log_kappa = orbit_log_kappa(F, elements)
    logs = log_kappa[keep]
    weights = np.exp(logs - logs.max())
    points = _inverse_images(rep, [elements.words[i] for i in keep], x)
    return EmpiricalMeasure("projective", points, weights / weights.sum(), normalized=True)


def _average(rep: Representation, F: Potential, R: float, x: ProjPoint, n_samples: int, seed: int,
             on_sphere: bool, threads: int) -> EmpiricalMeasure:
    if n_samples < 1000:
        raise ValueError(f"Averages need at least 1000 samples, got {n_samples}")
    if R <= 0:
        raise ValueError(f"Radius must be positive, got {R}")
    sizes = [min(_SAMPLE_CHUNK, n_samples - s) for s in range(0, n_samples, _SAMPLE_CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    offsets = np.cumsum([0] + sizes[:-1])

    def chunk(i: int):
        rng = np.random.default_rng(seeds[i])
        n = sizes[i]
        if on_sphere:
            # one jittered angle per stratum of the full circle
            strata = offsets[i] + np.arange(n) + rng.uniform(size=n)
            alpha = 2.0 * math.pi * strata / n_samples
            r = np.full(n, float(R))
        else:
            alpha = rng.uniform(0.0, 2.0 * math.pi, n)
            r = np.arccosh(1.0 + rng.uniform(size=n) * (math.cosh(R) - 1.0))
        y = polar_points(alpha, r)
        log_w = geodesic_integrals(F, np.full(n, BASE_POINT), y)
        z0, _, rho = reduce_points(y, rep=rep)
        inv = np.empty_like(rho)
        inv[:, 0, 0], inv[:, 0, 1] = rho[:, 1, 1], -rho[:, 0, 1]
        inv[:, 1, 0], inv[:, 1, 1] = -rho[:, 1, 0], rho[:, 0, 0]
        return z0, normalize_projective(inv @ x.vector()), log_w

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, range(len(sizes))))
    else:
        parts = [chunk(i) for i in range(len(sizes))]

    base = np.concatenate([p[0] for p in parts])
    points = np.concatenate([p[1] for p in parts])
    log_w = np.concatenate([p[2] for p in parts])
    weights = np.exp(log_w - log_w.max())
    return EmpiricalMeasure("projective", points, weights / weights.sum(), base, True)


def ball_average(rep: Representation, F: Potential, R: float, x: ProjPoint, n_samples: int = 10_000,
                 seed: int = 0, threads: int = 1) -> EmpiricalMeasure:
    """
    kappa-weighted hyperbolic-area samples of B(o, R), each projected to its
    domain point z0 and fiber atom rho(gamma)^-1 x where y = gamma z0.
    """
    return _average(rep, F, R, x, n_samples, seed, False, threads)


def sphere_average(rep: Representation, F: Potential, R: float, x: ProjPoint, n_samples: int = 10_000,
                   seed: int = 0, threads: int = 1) -> EmpiricalMeasure:
    """As ball_average, with samples on the sphere S(o, R) (stratified uniform angles)."""
    return _average(rep, F, R, x, n_samples, seed, True, threads)


def ledrappier_boundary(F: Potential, elements: Ball, R: float, P: float) -> EmpiricalMeasure:
    """
    Ball-truncated Patterson–Gibbs measure at o: atoms at the visual
    directions of gamma o with weights kappa^F(gamma) e^{-P dist(o, gamma o)}.

    Raises:
        ValueError: If the total weight is below 1e-12
    """
    sub = elements.restrict(R)
    angles, weights = ledrappier_atoms(F, sub, P)
    total = float(np.sum(weights))
    if len(weights) == 0 or total < 1e-12:
        raise ValueError(f"Degenerate Ledrappier measure (total weight {total:.3e})")
    return EmpiricalMeasure("circle", boundary_vectors_from_angles(angles), weights / total, normalized=True)


def disintegration_reference(F: Potential, elements: Ball, R: float, P: float) -> EmpiricalMeasure:
    """
    Fiber reference measure for the fuchsian inclusion: the Ledrappier
    boundary measure pushed into CP^1 by the (identity) boundary map.
    """
    return ledrappier_boundary(F, elements, R, P).to_projective()


# ============================================================================
# DISTANCES
# ============================================================================

def _subsample(mu: EmpiricalMeasure, size: int, seed: int):
    if len(mu) <= size:
        return mu.points, mu.weights / mu.mass
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(mu), size=size, replace=True, p=mu.weights / mu.mass)
    return mu.points[idx], np.full(size, 1.0 / size)


def wasserstein_chordal(mu: EmpiricalMeasure, nu: EmpiricalMeasure, size: int = W1_SUBSAMPLE,
                        seed: int = W1_SEED) -> float:
    """W1 with chordal cost by exact transport on weight-proportional subsamples."""
    p, a = _subsample(mu, size, seed)
    q, b = _subsample(nu, size, seed)
    cost = chordal_array(p.astype(complex)[:, None, :], q.astype(complex)[None, :, :])
    return float(ot.emd2(a, b, np.ascontiguousarray(cost, dtype=float)))


def wasserstein_arc(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """
    Exact W1 on RP^1 with arc length in the projective angle (circle of
    length pi), by POT's circle solver on angles rescaled to [0, 1).
    """
    u = np.mod(mu.projective_angles() / math.pi, 1.0)
    v = np.mod(nu.projective_angles() / math.pi, 1.0)
    w = ot.wasserstein_circle(u, v, u_weights=mu.weights / mu.mass, v_weights=nu.weights / nu.mass, p=1)
    return math.pi * float(np.ravel(w)[0])


def ks_angle(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Kolmogorov–Smirnov distance between visual-angle CDFs measured from 0."""
    a, wa = mu.angles(), mu.weights / mu.mass
    b, wb = nu.angles(), nu.weights / nu.mass
    positions = np.concatenate([a, b])
    signed = np.concatenate([wa, -wb])
    order = np.argsort(positions, kind="stable")
    positions, signed = positions[order], signed[order]
    diff = np.cumsum(signed)
    # only the last of tied positions is a true CDF value
    last = np.append(positions[1:] != positions[:-1], True)
    return float(np.max(np.abs(diff[last])))


def ks_to_uniform(mu: EmpiricalMeasure) -> float:
    """KS distance of the visual-angle CDF to the uniform one."""
    angles = mu.angles()
    weights = mu.weights / mu.mass
    order = np.argsort(angles, kind="stable")
    angles, weights = angles[order], weights[order]
    cdf = np.cumsum(weights)
    uniform = angles / (2.0 * math.pi)
    return float(max(np.max(np.abs(cdf - uniform)), np.max(np.abs(cdf - weights - uniform))))


def measure_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, metric: str = "W1-chordal") -> float:
    """
    Distance between two empirical measures of the same support kind.

    Args:
        metric (str): "W1-chordal", "W1-arc" (atoms on RP^1 only) or
            "KS-angle" (circle support only)

    Raises:
        ValueError: On mixed supports or a metric the supports do not allow
    """
    if mu.support != nu.support:
        raise ValueError(f"Cannot compare a {mu.support} measure with a {nu.support} measure")
    if metric == "W1-chordal":
        return wasserstein_chordal(mu, nu)
    if metric == "W1-arc":
        if not (mu.is_real_circle() and nu.is_real_circle()):
            raise ValueError("W1-arc needs measures supported on the real circle")
        return wasserstein_arc(mu, nu)
    if metric == "KS-angle":
        if mu.support != "circle":
            raise ValueError("KS-angle is defined for circle-supported measures only")
        return ks_angle(mu, nu)
    raise ValueError(f"Unknown metric {metric!r}; use one of {METRICS}")


# ============================================================================
# DIAGNOSTICS
# ============================================================================

@dataclass
class ConvergenceTable:
    """Successive distances d(theta_R, theta_R') and optional distances to a reference."""

    radii: List[float]
    successive: List[float]
    to_reference: Optional[List[float]] = None
    metric: str = "W1-chordal"
    measures: List[EmpiricalMeasure] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError(f"Radii must be strictly increasing, got {self.radii}")

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"R": self.radii, "successive": [math.nan] + list(self.successive)})
        if self.to_reference is not None:
            frame["to_reference"] = self.to_reference
        frame["metric"] = self.metric
        return frame

    def is_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.successive, self.successive[1:]))


def cauchy_diagnostic(rep: Representation, F: Potential, x: ProjPoint, radii: Sequence[float],
                      elements: Ball, reference: Optional[EmpiricalMeasure] = None,
                      metric: Optional[str] = None, verbose: bool = False) -> ConvergenceTable:
    """
    Distances between theta_{F,R} at consecutive radii, plus the distance of
    each to ``reference`` when given. The metric defaults to W1-arc when all
    measures lie on the real circle and to W1-chordal otherwise.
    """
    radii = [float(r) for r in radii]
    if any(r > elements.radius + 1e-12 for r in radii):
        raise ValueError(f"Radii {radii} exceed the enumerated radius {elements.radius}")
    log_kappa = orbit_log_kappa(F, elements)
    measures = [theta(rep, F, r, x, elements, log_kappa) for r in radii]
    if reference is not None and reference.support != "projective":
        reference = reference.to_projective()

    if metric is None:
        on_circle = all(m.is_real_circle() for m in measures)
        if reference is not None:
            on_circle = on_circle and reference.is_real_circle()
        metric = "W1-arc" if on_circle else "W1-chordal"

    successive = [measure_distance(a, b, metric) for a, b in zip(measures, measures[1:])]
    to_reference = [measure_distance(m, reference, metric) for m in measures] if reference is not None else None
    table = ConvergenceTable(radii, successive, to_reference, metric, measures)
    if verbose:
        print(f"📊 Cauchy diagnostic ({metric}):")
        print(table.to_frame().to_string(index=False))
    return table


def round_circle_residual(points: np.ndarray) -> float:
    """
    Fit the best round circle (plane section of the Riemann sphere) to
    projective points and return the largest chordal residual.
    """
    x = riemann_sphere(np.asarray(points))
    center = x.mean(axis=0)
    _, _, vt = np.linalg.svd(x - center)
    normal = vt[-1]
    offset = float(normal @ center)
    radius = math.sqrt(max(1.0 - offset ** 2, 0.0))
    height = x @ normal - offset
    in_plane = x - np.outer(x @ normal, normal)
    spread = np.linalg.norm(in_plane, axis=1) - radius
    return float(0.5 * np.max(np.sqrt(height ** 2 + spread ** 2)))


def x_sensitivity(rep: Representation, F: Potential, R: float, xs: Sequence[ProjPoint],
                  elements: Ball, metric: str = "W1-chordal") -> pd.DataFrame:
    """Pairwise distances between theta_{F,R}(x) for several fiber points x."""
    log_kappa = orbit_log_kappa(F, elements)
    measures = [theta(rep, F, R, x, elements, log_kappa) for x in xs]
    rows = []
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            rows.append({"x_i": str(xs[i].chart()), "x_j": str(xs[j].chart()),
                         "distance": measure_distance(measures[i], measures[j], metric)})
    return pd.DataFrame(rows, columns=["x_i", "x_j", "distance"])


if __name__ == "__main__":
    uniform_a = EmpiricalMeasure.from_angles(np.random.default_rng(1).uniform(0, 2 * math.pi, 10_000))
    uniform_b = EmpiricalMeasure.from_angles(np.random.default_rng(2).uniform(0, 2 * math.pi, 10_000))
    print(f"📊 KS between two uniform samples: {measure_distance(uniform_a, uniform_b, 'KS-angle'):.4f}")
    print(f"📊 W1-arc between them: {measure_distance(uniform_a, uniform_b, 'W1-arc'):.4f}")
