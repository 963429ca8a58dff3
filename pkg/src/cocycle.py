"""
Projective Holonomy Cocycles
============================

Two families of cocycles acting on projective fibers:

* the holonomy cocycle of a surface-group representation over the
  geodesic flow, with an orbital estimator of its top Lyapunov exponent and
  the attracting Lyapunov section s+(v) = lim rho(gamma_T) x0, where
  gamma_T tracks the backward geodesic ray of v tile by tile;
* locally constant cocycles over a Bernoulli shift (DiscreteCocycle), for
  which the full Oseledets splitting is computed with covariant Lyapunov
  vectors (forward QR, backward upper-triangular iteration) and the basins
  of the lifted measures are checked point by point.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from constants import (
    DEFAULT_FIBER_POINT,
    DIRECTION_SEPARATION,
    REORTHO_CADENCE,
    SECTION_RETRIES,
    SECTION_T_MAX,
    SECTION_T_STEP,
    SECTION_TOL,
    SPECTRUM_GAP,
    ConvergenceError,
    SpectrumError,
    demo_cocycle_matrices,
)
from group import (
    Ball,
    GroupPresentation,
    Representation,
    octagon_generators,
    reduce_to_domain,
    rep_eval,
    rep_eval_many,
)
from hypgeom import (
    BoundaryPoint,
    ProjPoint,
    UnitTangent,
    chordal_array,
    flow,
    normalize_rows,
    push_tangent,
)
from measures import EmpiricalMeasure, measure_distance
from potential import Potential, orbit_log_kappa


# ============================================================================
# HOLONOMY COCYCLE OF A REPRESENTATION
# ============================================================================

def lyapunov_top(rep: Representation, elements: Ball, F: Potential, R: float) -> float:
    """
    Orbital estimate of the top Lyapunov exponent of rho against the Gibbs
    weighting: the kappa^F-weighted mean of log ||rho(gamma)|| / dist(o, gamma o)
    over gamma in B_R with dist(o, gamma o) >= R/2.

    Args:
        rep (Representation): Representation (determinant-one images)
        elements (Ball): Ball of radius at least R
        F (Potential): Weighting potential
        R (float): Radius, at least 5

    Returns:
        float: Estimated exponent (exactly 0.5 for the fuchsian inclusion)

    Raises:
        ValueError: If R < 5, the ball is too small, rho is not normalized
            or no element is eligible
    """
    if R < 5:
        raise ValueError(f"lyapunov_top needs R >= 5, got {R}")
    if elements.radius < R - 1e-12:
        raise ValueError(f"Ball radius {elements.radius} does not cover R = {R}")
    for m in rep.images:
        if not m.is_normalized(1e-9):
            raise ValueError(f"Representation image has determinant {m.det():.6g}, expected 1")

    eligible = np.flatnonzero((elements.dists >= R / 2) & (elements.dists <= R))
    if len(eligible) == 0:
        raise ValueError(f"No group element with R/2 <= dist <= R for R = {R}")

    sub = Ball([elements.words[i] for i in eligible], elements.matrices[eligible],
               elements.dists[eligible], R)
    log_kappa = orbit_log_kappa(F, sub)
    weights = np.exp(log_kappa - log_kappa.max())
    singular = np.linalg.svd(rep_eval_many(rep, sub.words), compute_uv=False)[:, 0]
    rates = np.log(singular) / sub.dists
    return float(np.sum(weights * rates) / np.sum(weights))


def _track_backward(v: UnitTangent, length: float, presentation: GroupPresentation,
                    state: Optional[Tuple[UnitTangent, List[int]]] = None) -> Tuple[UnitTangent, List[int]]:
    """
    Follow the backward ray of v for the given length, one unit at a time,
    keeping the moving vector in the Dirichlet domain. Returns the reduced
    vector and the word of gamma with flow(v, -t) = D gamma (reduced vector).
    """
    if state is None:
        _, g = reduce_to_domain(v.base, presentation)
        w = push_tangent(g.matrix.inverse(), v)
        word = list(g.word)
    else:
        w, word = state[0], list(state[1])
    remaining = length
    while remaining > 1e-12:
        step = min(1.0, remaining)
        w = flow(w, -step)
        _, h = reduce_to_domain(w.base, presentation)
        if h.word:
            w = push_tangent(h.matrix.inverse(), w)
            word.extend(h.word)
        remaining -= step
    return w, word


def _random_fiber_point(rng: np.random.Generator) -> ProjPoint:
    u = rng.normal(size=2) + 1j * rng.normal(size=2)
    return ProjPoint(complex(u[0]), complex(u[1]))


def lyapunov_section_plus(rep: Representation, v: UnitTangent, T: float = 5.0,
                          x0: Optional[ProjPoint] = None, seed: int = 0,
                          presentation: Optional[GroupPresentation] = None,
                          tol: float = SECTION_TOL) -> ProjPoint:
    """
    Attracting Lyapunov section at v: rho(gamma_T) x0, where gamma_T·o is the
    orbit point whose domain contains the geodesic point at time -T, with T
    increased in steps of 5 until successive values agree to chordal tol.

    Raises:
        ValueError: If T < 5
        ValueError: If tol is not positive
        ConvergenceError: If no start point contracts before T = 60
    """
    if T < 5:
        raise ValueError(f"Section time must be >= 5, got {T}")
    if not tol > 0:
        raise ValueError(f"Section tolerance must be positive, got {tol}")
    presentation = presentation or octagon_generators()
    rng = np.random.default_rng(seed)
    x = x0 if x0 is not None else ProjPoint.from_chart(DEFAULT_FIBER_POINT)

    increment = math.inf
    for _ in range(SECTION_RETRIES):
        state = _track_backward(v, T, presentation)
        previous = ProjPoint.from_vector(rep_eval(rep, state[1]).matrix() @ x.vector())
        t = T
        while t < SECTION_T_MAX:
            state = _track_backward(v, SECTION_T_STEP, presentation, state)
            t += SECTION_T_STEP
            current = ProjPoint.from_vector(rep_eval(rep, state[1]).matrix() @ x.vector())
            increment = current.chordal(previous)
            if increment < tol:
                return current
            previous = current
        x = _random_fiber_point(rng)
    raise ConvergenceError("Lyapunov section", tol, increment,
                           f"no contraction by T = {SECTION_T_MAX} after {SECTION_RETRIES} starts")


def lyapunov_sections_batch(rep: Representation, vectors: Sequence[UnitTangent], T: float = 5.0,
                            x0: Optional[ProjPoint] = None, threads: int = 1,
                            seed: int = 0, tol: float = SECTION_TOL) -> List[ProjPoint]:
    """Sections for many vectors, with per-task seeds spawned from one master seed."""
    presentation = octagon_generators()
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(len(vectors))]

    def task(i: int) -> ProjPoint:
        return lyapunov_section_plus(rep, vectors[i], T, x0, seeds[i], presentation, tol)

    if threads <= 1:
        return [task(i) for i in range(len(vectors))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(len(vectors))))


def fuchsian_section(v: UnitTangent) -> ProjPoint:
    """Closed-form section of the fuchsian inclusion: the backward endpoint of v."""
    return v.backward_endpoint().to_proj()


# ============================================================================
# DISCRETE COCYCLES OVER A BERNOULLI SHIFT
# ============================================================================

@dataclass
class DiscreteCocycle:
    """Locally constant cocycle: symbol k acts by matrices[k] (det 1)."""

    matrices: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=complex)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise ValueError(f"Expected (k, d, d) matrices, got shape {self.matrices.shape}")
        if len(self.probabilities) != len(self.matrices):
            raise ValueError("One probability per matrix is required")
        if np.any(self.probabilities < 0) or abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise ValueError("Base probabilities must be non-negative and sum to 1")
        dets = np.linalg.det(self.matrices)
        if np.any(np.abs(dets - 1.0) > 1e-9):
            raise ValueError(f"Cocycle matrices must have determinant 1, got {dets}")

    @classmethod
    def demo(cls, name: str) -> "DiscreteCocycle":
        return cls(*demo_cocycle_matrices(name))

    @property
    def dimension(self) -> int:
        return self.matrices.shape[1]

    def sample_symbols(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(len(self.matrices), size=n, p=self.probabilities)


def cocycle_product(c: DiscreteCocycle, symbols: np.ndarray, start: int, n: int) -> np.ndarray:
    """
    A_n at shift position start: M[s_{start+n-1}] ... M[s_start], multiplied
    in that fixed order.
    """
    product = np.eye(c.dimension, dtype=complex)
    for k in symbols[start:start + n]:
        product = c.matrices[k] @ product
    return product


@dataclass
class LyapunovFlag:
    """
    Oseledets data along a sampled base orbit. exponents are ascending;
    directions[t, j] is the unit vector of sigma^{j+1} at step t.
    """

    exponents: np.ndarray
    directions: np.ndarray
    symbols: np.ndarray
    seed: int = 0

    @property
    def top(self) -> np.ndarray:
        return self.directions[:, -1]

    @property
    def bottom(self) -> np.ndarray:
        return self.directions[:, 0]

    def span(self, t: int, j: int) -> np.ndarray:
        """Orthonormal basis of S^j_+ (first j directions) at step t."""
        q, _ = linalg.qr(self.directions[t, :j].T, mode="economic")
        return q


def oseledets_flags(c: DiscreteCocycle, seed: int = 0, n_steps: int = 10_000,
                    cadence: int = REORTHO_CADENCE, verbose: bool = False) -> LyapunovFlag:
    """
    Lyapunov exponents and covariant Lyapunov directions along a sampled
    base orbit.

    Forward products are re-orthonormalized by QR every ``cadence`` steps;
    the covariant directions come from iterating a random upper-triangular
    matrix backwards through the stored R factors. Transient stretches of
    max(200, n_steps/10) steps are discarded at both ends.

    Raises:
        ValueError: If n_steps < 1000
        SpectrumError: If two exponents are closer than 1e-3 or directions
            collapse
    """
    if n_steps < 1000:
        raise ValueError(f"oseledets_flags needs n_steps >= 1000, got {n_steps}")
    d = c.dimension
    rng = np.random.default_rng(seed)
    transient = max(200, n_steps // 10)
    transient = int(math.ceil(transient / cadence) * cadence)
    n_core = int(math.ceil(n_steps / cadence) * cadence)
    total = transient + n_core + transient
    symbols = c.sample_symbols(rng, total)

    if verbose:
        print(f"🔍 Oseledets flags: d = {d}, {n_core} steps (cadence {cadence})")

    q, _ = linalg.qr(rng.normal(size=(d, d)) + 0j)
    qs = [q]
    rs = []
    log_growth = np.zeros(d)
    for block in range(total // cadence):
        m = cocycle_product(c, symbols, block * cadence, cadence)
        q, r = linalg.qr(m @ q)
        qs.append(q)
        rs.append(r)
        if transient <= block * cadence < transient + n_core:
            log_growth += np.log(np.abs(np.diag(r)))

    descending = log_growth / n_core
    exponents = descending[::-1]
    gaps = np.diff(exponents)
    if np.any(gaps < SPECTRUM_GAP):
        raise SpectrumError(exponents, SPECTRUM_GAP)

    # backward pass: C_{k-1} = R_k^{-1} C_k with column renormalization
    coeff = np.triu(rng.normal(size=(d, d))) + 0j
    np.fill_diagonal(coeff, 1.0)
    clv_blocks = [None] * len(qs)
    for k in range(len(rs), 0, -1):
        coeff = coeff / np.linalg.norm(coeff, axis=0, keepdims=True)
        clv_blocks[k] = qs[k] @ coeff
        coeff = linalg.solve_triangular(rs[k - 1], coeff)
    coeff = coeff / np.linalg.norm(coeff, axis=0, keepdims=True)
    clv_blocks[0] = qs[0] @ coeff

    # fill every step of the core: expanding directions are pushed forward
    # from the block start, contracting ones pulled back from the block end
    first_block = transient // cadence
    inverses = np.linalg.inv(c.matrices)
    forward_cols = np.arange(d) < (d + 1) // 2
    directions = np.empty((n_core, d, d), dtype=complex)
    for b in range(n_core // cadence):
        ahead = np.empty((cadence, d, d), dtype=complex)
        v = clv_blocks[first_block + b]
        for s in range(cadence):
            ahead[s] = v
            v = c.matrices[symbols[transient + b * cadence + s]] @ v
        v = clv_blocks[first_block + b + 1]
        for s in range(cadence - 1, -1, -1):
            v = inverses[symbols[transient + b * cadence + s]] @ v
            mixed = np.where(forward_cols[None, :], ahead[s], v)
            directions[b * cadence + s] = normalize_rows(mixed.T)[::-1]

    for t in range(0, n_core, max(1, n_core // 200)):
        for i in range(d):
            for j in range(i + 1, d):
                sep = float(chordal_array(directions[t, i], directions[t, j]))
                if sep <= DIRECTION_SEPARATION:
                    raise SpectrumError(exponents, SPECTRUM_GAP,
                                        f"directions {i + 1} and {j + 1} collapse at step {t}")

    if verbose:
        print(f"📊 exponents {np.round(exponents, 6).tolist()}")
    return LyapunovFlag(exponents, directions, symbols[transient:transient + n_core], seed)


# ============================================================================
# BASINS OF THE LIFTED MEASURES
# ============================================================================

@dataclass
class BasinReport:
    """Per-point Wasserstein distances of Birkhoff measures to mu_top and mu_bottom."""

    seed: int
    exponents: List[float]
    per_point: List[Dict] = field(default_factory=list)

    def fraction_within(self, threshold: float, prepared: str = "generic") -> float:
        rows = [p for p in self.per_point if p["prepared"] == prepared]
        if not rows:
            return 0.0
        return sum(p["W1_to_mu_top"] < threshold for p in rows) / len(rows)

    def to_dict(self) -> Dict:
        return {"seed": self.seed, "exponents": self.exponents, "per_point": self.per_point}


def _birkhoff_orbit(c: DiscreteCocycle, x: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    orbit = np.empty((len(symbols), len(x)), dtype=complex)
    for t, k in enumerate(symbols):
        orbit[t] = x
        x = c.matrices[k] @ x
        x = x / np.linalg.norm(x)
    return orbit


def _shadowed_bottom_orbit(c: DiscreteCocycle, flag: LyapunovFlag) -> np.ndarray:
    """
    Orbit of a point on sigma^1, restarted from the computed sigma^1 every
    REORTHO_CADENCE steps.

    sigma^1 repels under the projective action. Rounding error picks up a
    component along the faster directions, and that component grows
    against sigma^1 like e^{(chi_d - chi_1) n}. Left alone, the orbit lands
    in the basin of mu_top within a few dozen steps. The restarts bound the
    drift by e^{(chi_d - chi_1) REORTHO_CADENCE} times rounding, so the
    resulting check shows that sigma^1 carries mu_bottom, not that it
    attracts anything.
    """
    n = len(flag.symbols)
    orbit = np.empty((n, c.dimension), dtype=complex)
    for start in range(0, n, REORTHO_CADENCE):
        stop = min(n, start + REORTHO_CADENCE)
        orbit[start:stop] = _birkhoff_orbit(c, flag.bottom[start], flag.symbols[start:stop])
    return orbit


def basin_check(c: DiscreteCocycle, flag: LyapunovFlag, n_points: int = 100, n_steps: int = 10_000,
                seed: int = 0, n_prepared: int = 2, starts: Optional[Sequence[ProjPoint]] = None,
                threads: int = 1, verbose: bool = False) -> BasinReport:
    """
    Compare Birkhoff measures of projective orbits with the lifted measures
    mu_top = (sigma^d)_* mu and mu_bottom = (sigma^1)_* mu.

    Generic starts (random, or the given ``starts``) are iterated forward for
    n_steps; ``n_prepared`` further points are prepared on sigma^1 of their
    own base orbit.

    Returns:
        BasinReport: Per-point distances; failures are reported, not raised
    """
    mu_top = EmpiricalMeasure.uniform("projective", flag.top)
    mu_bottom = EmpiricalMeasure.uniform("projective", flag.bottom)
    d = c.dimension
    tasks = [("generic", i) for i in range(len(starts) if starts is not None else n_points)]
    tasks += [("sigma1", i) for i in range(n_prepared)]
    seeds = np.random.SeedSequence(seed).spawn(len(tasks))

    if verbose:
        print(f"🔍 Basin check: {len(tasks)} points x {n_steps} steps")

    def run(index: int) -> Dict:
        prepared, i = tasks[index]
        rng = np.random.default_rng(seeds[index])
        if prepared == "generic":
            if starts is not None:
                x = starts[i].vector() if isinstance(starts[i], ProjPoint) else np.asarray(starts[i], dtype=complex)
                x = x / np.linalg.norm(x)
            else:
                x = rng.normal(size=d) + 1j * rng.normal(size=d)
                x = x / np.linalg.norm(x)
            orbit = _birkhoff_orbit(c, x, c.sample_symbols(rng, n_steps))
        else:
            own = oseledets_flags(c, int(rng.integers(2 ** 31)), max(n_steps, 1000))
            orbit = _shadowed_bottom_orbit(c, own)
            x = orbit[0]
        birkhoff = EmpiricalMeasure.uniform("projective", orbit)
        return {
            "index": index,
            "prepared": prepared,
            "start": [[float(u.real), float(u.imag)] for u in x],
            "W1_to_mu_top": measure_distance(birkhoff, mu_top, "W1-chordal"),
            "W1_to_mu_bottom": measure_distance(birkhoff, mu_bottom, "W1-chordal"),
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, range(len(tasks))))
    else:
        rows = [run(i) for i in range(len(tasks))]

    report = BasinReport(flag.seed, [float(e) for e in flag.exponents], rows)
    if verbose:
        print(f"📊 {report.fraction_within(0.05):.0%} of generic points within 0.05 of mu_top")
    return report


def contraction_rate(c: DiscreteCocycle, flag: LyapunovFlag, n_starts: int = 100, n_steps: int = 25,
                     seed: int = 0) -> float:
    """
    Exponential rate at which generic fiber points fall onto sigma^d.

    Random starts are placed at evenly spaced positions of the flag's base
    orbit. The mean log chordal distance to sigma^d is fitted against the
    step count; the negated slope approximates chi_d - chi_{d-1}.

    Raises:
        ValueError: If the flag is too short for n_starts windows of n_steps
    """
    total = len(flag.symbols)
    if n_starts < 1 or n_steps < 2 or n_starts * (n_steps + 1) > total:
        raise ValueError(f"{n_starts} windows of {n_steps} steps do not fit in {total} steps")
    rng = np.random.default_rng(seed)
    spacing = total // n_starts
    logs = np.empty((n_starts, n_steps + 1))
    for row in range(n_starts):
        t0 = row * spacing
        x = rng.normal(size=c.dimension) + 1j * rng.normal(size=c.dimension)
        x = x / np.linalg.norm(x)
        for n in range(n_steps + 1):
            logs[row, n] = math.log(max(float(chordal_array(x, flag.top[t0 + n])), 1e-300))
            x = c.matrices[flag.symbols[t0 + n]] @ x
            x = x / np.linalg.norm(x)
    fit = stats.linregress(np.arange(n_steps + 1), logs.mean(axis=0))
    return float(-fit.slope)


if __name__ == "__main__":
    demo = DiscreteCocycle.demo("demo2")
    flags = oseledets_flags(demo, seed=1, n_steps=5000, verbose=True)
    print(f"📊 top direction at step 0: {np.round(flags.top[0], 6)}")
