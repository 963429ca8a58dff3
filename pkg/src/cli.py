"""
Command-Line Workflows
======================

One ``run_*`` workflow per subcommand. Each reads a validated RunConfig,
writes CSV/JSON (and SVG where figural) into its output directory and
returns a summary dictionary. ``run_command`` wraps a workflow with the
run manifest and turns failures into a result dictionary:

    exit 0  success
    exit 1  configuration or input error
    exit 2  numerical non-convergence (the tolerance is named)

Output directories are OUTPUT_DIR/<command>-<manifest hash prefix> unless
``--out`` is given. The manifest hash covers everything that determines the
outputs, so re-running a manifest reproduces its CSV/JSON byte for byte.
"""

import argparse
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from cocycle import (
    DiscreteCocycle,
    basin_check,
    contraction_rate,
    fuchsian_section,
    lyapunov_section_plus,
    lyapunov_sections_batch,
    lyapunov_top,
    oseledets_flags,
)
from config import RunConfig, load_run_config, output_root
from constants import (
    ARTIFACT_VERSION,
    DELTA_TOL,
    SECTION_TOL,
    ConfigError,
    ConvergenceError,
    SpectrumError,
    parse_rep_spec,
)
from group import (
    Ball,
    Representation,
    ball,
    bend,
    fuchsian_inclusion,
    rep_eval,
    rep_eval_many,
    representation_from_spec,
)
from hypgeom import (
    BoundaryPoint,
    HPoint,
    ProjPoint,
    UnitTangent,
    busemann,
    busemann_closed_form,
    polar_points,
    push_tangent,
)
from measures import (
    ball_average,
    cauchy_diagnostic,
    disintegration_reference,
    ks_to_uniform,
    ledrappier_boundary,
    measure_distance,
    normalize_projective,
    real_circle_deviation,
    round_circle_residual,
    sphere_average,
    theta,
)
from potential import Potential, delta_cocycle, estimate_pressure, gibbs_kernel, orbital_sums
from render import render_convergence, render_limit_set, render_measure

BASIN_THRESHOLD = 0.05
SUITE_SHIFT = 0.3
SUITE_BEND = 0.3

# Modelling choices every manifest records
DECISIONS = {
    "pressure_method": "orbital growth of J",
    "bending_discreteness": "assumed",
}


# ============================================================================
# MANIFESTS AND PERSISTENCE
# ============================================================================

def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Not JSON serializable: {type(value).__name__}")


def write_json(path: Path, payload: Dict) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_to_builtin) + "\n", encoding="utf-8")
    return path


@dataclass
class RunManifest:
    """
    Everything that determines a run's outputs, plus its wall time and the
    pass flags of any named checks it ran. Neither of the last two enters
    the hash.
    """

    command: str
    config: Dict[str, Any]
    seed: int
    radius: float
    cap: int
    potential: str
    representation: str
    tolerances: Dict[str, float]
    decisions: Dict[str, str] = field(default_factory=lambda: dict(DECISIONS))
    version: str = ARTIFACT_VERSION
    wall_time: float = 0.0
    checks: Dict[str, bool] = field(default_factory=dict)

    @classmethod
    def from_config(cls, command: str, cfg: RunConfig) -> "RunManifest":
        snapshot = cfg.snapshot()
        # worker count never changes results
        snapshot.pop("threads")
        return cls(command, snapshot, cfg.seed, cfg.R, cfg.cap, cfg.potential, cfg.rep,
                   snapshot["tolerances"])

    def identity(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("wall_time")
        data.pop("checks")
        return data

    @property
    def digest(self) -> str:
        canonical = json.dumps(self.identity(), sort_keys=True, separators=(",", ":"), default=_to_builtin)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["hash"] = self.digest
        return data


@dataclass
class RunContext:
    """Parsed inputs shared by the workflows of one run."""

    cfg: RunConfig
    out: Path
    digest: str
    verbose: bool = True
    _balls: Dict[Tuple[float, int], Ball] = field(default_factory=dict, repr=False)

    @property
    def potential(self) -> Potential:
        return Potential.from_spec(self.cfg.potential)

    @property
    def representation(self) -> Representation:
        label, angle = parse_rep_spec(self.cfg.rep)
        return representation_from_spec(label, angle)

    @property
    def fiber_point(self) -> ProjPoint:
        return ProjPoint.from_chart(self.cfg.fiber_point())

    def ball(self, R: float) -> Ball:
        """Enumerated ball of radius R, reusing any larger ball already built."""
        for (radius, cap), cached in self._balls.items():
            if cap == self.cfg.cap and radius >= R:
                return cached.restrict(R) if radius > R else cached
        elements = ball(R, self.cfg.cap, threads=self.cfg.threads, verbose=self.verbose)
        self._balls[(R, self.cfg.cap)] = elements
        return elements

    def path(self, name: str) -> Path:
        return self.out / name


# ============================================================================
# WORKFLOWS
# ============================================================================

def run_ball(ctx: RunContext) -> Dict[str, Any]:
    elements = ctx.ball(ctx.cfg.R)
    elements.to_csv(ctx.path("ball.csv"))
    radii = np.arange(1, math.floor(ctx.cfg.R) + 1)
    counts = [int(np.sum(elements.dists <= r)) for r in radii]
    summary = {
        "R": ctx.cfg.R,
        "count": len(elements),
        "max_word_length": max(len(w) for w in elements.words),
        "counts": [{"R": float(r), "count": c} for r, c in zip(radii, counts)],
    }
    write_json(ctx.path("ball.json"), summary)
    return summary


def run_pressure(ctx: RunContext) -> Dict[str, Any]:
    window = ctx.cfg.window_bounds()
    elements = ctx.ball(window[1])
    F = ctx.potential
    estimate = estimate_pressure(F, elements, window, verbose=ctx.verbose)
    payload = estimate.to_dict()
    write_json(ctx.path("pressure.json"), payload)
    pd.DataFrame({"R": estimate.radii, "log_J": estimate.log_sums}).to_csv(
        ctx.path("pressure.csv"), index=False, float_format="%.17g")
    return {"slope": estimate.value, "residual": estimate.residual, "window": list(window)}


def run_theta(ctx: RunContext) -> Dict[str, Any]:
    R = ctx.cfg.R
    mu = theta(ctx.representation, ctx.potential, R, ctx.fiber_point, ctx.ball(R))
    mu.to_csv(ctx.path("theta.csv"))
    render_measure(mu, "sphere_scatter", ctx.path("theta_sphere.svg"), ctx.digest)
    summary = {
        "R": R,
        "atoms": len(mu),
        "mass": mu.mass,
        "max_real_deviation": float(np.max(real_circle_deviation(mu.points))),
    }
    write_json(ctx.path("theta.json"), summary)
    return summary


def _run_average(ctx: RunContext, name: str, builder: Callable) -> Dict[str, Any]:
    cfg = ctx.cfg
    rep, F, x = ctx.representation, ctx.potential, ctx.fiber_point
    mu = builder(rep, F, cfg.R, x, cfg.n_samples, cfg.seed, cfg.threads)
    mu.to_csv(ctx.path(f"{name}.csv"))
    reference = theta(rep, F, cfg.R, x, ctx.ball(cfg.R))
    summary = {
        "R": cfg.R,
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "mass": mu.mass,
        "W1_to_theta": measure_distance(mu.fiber_marginal(), reference, "W1-chordal"),
    }
    write_json(ctx.path(f"{name}.json"), summary)
    return summary


def run_ball_average(ctx: RunContext) -> Dict[str, Any]:
    return _run_average(ctx, "ball_average", ball_average)


def run_sphere_average(ctx: RunContext) -> Dict[str, Any]:
    return _run_average(ctx, "sphere_average", sphere_average)


def _pressure_for(ctx: RunContext, F: Potential) -> float:
    window = ctx.cfg.window_bounds()
    return estimate_pressure(F, ctx.ball(window[1]), window, verbose=ctx.verbose).value


def run_ledrappier(ctx: RunContext) -> Dict[str, Any]:
    R, F = ctx.cfg.R, ctx.potential
    P = _pressure_for(ctx, F)
    nu = ledrappier_boundary(F, ctx.ball(R), R, P)
    nu.to_csv(ctx.path("ledrappier.csv"))
    render_measure(nu, "angle_histogram", ctx.path("ledrappier_hist.svg"), ctx.digest)
    summary = {"R": R, "P": P, "atoms": len(nu), "KS_to_uniform": ks_to_uniform(nu)}
    write_json(ctx.path("ledrappier.json"), summary)
    return summary


def run_lyapunov(ctx: RunContext) -> Dict[str, Any]:
    R = ctx.cfg.R
    chi = lyapunov_top(ctx.representation, ctx.ball(R), ctx.potential, R)
    summary = {"R": R, "representation": ctx.cfg.rep, "chi_plus": chi}
    write_json(ctx.path("lyapunov.json"), summary)
    return summary


def _sample_tangents(n: int, seed: int) -> List[UnitTangent]:
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 2.0 * math.pi, n)
    r = rng.uniform(0.0, 2.0, n)
    angles = rng.uniform(0.0, 2.0 * math.pi, n)
    return [UnitTangent(HPoint(complex(z)), float(a)) for z, a in zip(polar_points(alpha, r), angles)]


def run_section(ctx: RunContext) -> Dict[str, Any]:
    cfg = ctx.cfg
    rep = ctx.representation
    vectors = _sample_tangents(cfg.points, cfg.seed)
    if ctx.verbose:
        print(f"🔍 Lyapunov sections of {rep.name} at {len(vectors)} vectors (T = {cfg.T:g})")
    sections = lyapunov_sections_batch(rep, vectors, cfg.T, ctx.fiber_point, cfg.threads, cfg.seed,
                                       cfg.section_tol)
    rows = []
    for v, s in zip(vectors, sections):
        row = {"base_re": v.base.z.real, "base_im": v.base.z.imag, "angle": v.angle,
               "section_re": s.chart().real, "section_im": s.chart().imag}
        if rep.is_fuchsian():
            row["chordal_to_closed_form"] = s.chordal(fuchsian_section(v))
        rows.append(row)
    frame = pd.DataFrame(rows)
    frame.to_csv(ctx.path("section.csv"), index=False, float_format="%.17g")
    summary = {"T": cfg.T, "points": len(vectors), "tolerance": cfg.section_tol}
    if rep.is_fuchsian():
        summary["max_chordal_to_closed_form"] = float(frame["chordal_to_closed_form"].max())
    write_json(ctx.path("section.json"), summary)
    return summary


def run_limit_set(ctx: RunContext) -> Dict[str, Any]:
    R, rep, x = ctx.cfg.R, ctx.representation, ctx.fiber_point
    elements = ctx.ball(R)
    figure = render_limit_set(rep, elements, x, ctx.path("limit_set.svg"), ctx.digest)
    orbit = normalize_projective(rep_eval_many(rep, elements.words) @ x.vector())
    residual = round_circle_residual(orbit) if len(orbit) >= 3 else 0.0
    summary = {
        "R": R,
        "points": len(figure.data),
        "max_real_deviation": float(np.max(real_circle_deviation(orbit))),
        "round_circle_residual": residual,
    }
    write_json(ctx.path("limit_set.json"), summary)
    return summary


def load_cocycle(name: str) -> DiscreteCocycle:
    """A named demo cocycle, or a JSON file with ``matrices`` and ``probabilities``."""
    path = Path(name)
    if path.suffix == ".json":
        if not path.exists():
            raise ConfigError(f"Cocycle file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            return DiscreteCocycle(np.asarray(data["matrices"], dtype=complex),
                                   np.asarray(data["probabilities"], dtype=float))
        except (KeyError, json.JSONDecodeError, ValueError) as e:
            raise ConfigError(f"Bad cocycle file {path}: {e}")
    return DiscreteCocycle.demo(name)


def run_basin(ctx: RunContext) -> Dict[str, Any]:
    cfg = ctx.cfg
    c = load_cocycle(cfg.matrices)
    flag = oseledets_flags(c, cfg.seed, cfg.steps, verbose=ctx.verbose)
    report = basin_check(c, flag, cfg.points, cfg.steps, cfg.seed, threads=cfg.threads, verbose=ctx.verbose)
    generic = [p for p in report.per_point if p["prepared"] == "generic"]
    payload = report.to_dict()
    payload.update({
        "matrices": cfg.matrices,
        "steps": cfg.steps,
        "threshold": BASIN_THRESHOLD,
        "passes": sum(p["W1_to_mu_top"] < BASIN_THRESHOLD for p in generic),
        "points": len(generic),
        "gap": float(np.min(np.diff(flag.exponents))),
        "exponent_sum": float(np.sum(flag.exponents)),
        "contraction_rate": contraction_rate(c, flag, n_starts=min(100, len(flag.symbols) // 26), seed=cfg.seed),
    })
    write_json(ctx.path("basin.json"), payload)
    return {k: payload[k] for k in ("passes", "points", "gap", "exponent_sum", "exponents", "contraction_rate")}


# ============================================================================
# NAMED CHECKS
# ============================================================================

def _random_interior(rng: np.random.Generator, n: int, max_radius: float) -> np.ndarray:
    return polar_points(rng.uniform(0.0, 2.0 * math.pi, n), rng.uniform(0.0, max_radius, n))


def check_busemann_cocycle(n_triples: int = 1000, n_limits: int = 100, seed: int = 0) -> Dict[str, Any]:
    """
    Cocycle identity of the closed-form Busemann function on random triples
    within distance 5 of o, the limit definition against the closed form on
    the first n_limits of them, and beta_oo(i, ie) = -1.
    """
    rng = np.random.default_rng(seed)
    y, z, w = (_random_interior(rng, n_triples, 5.0) for _ in range(3))
    xis = [BoundaryPoint.from_angle(a) for a in rng.uniform(0.0, 2.0 * math.pi, n_triples)]
    identity_error, limit_error = 0.0, 0.0
    for i, xi in enumerate(xis):
        yz = busemann_closed_form(xi, y[i], z[i])
        total = yz + busemann_closed_form(xi, z[i], w[i])
        identity_error = max(identity_error, abs(total - busemann_closed_form(xi, y[i], w[i])))
        if i < n_limits:
            try:
                limit_error = max(limit_error, abs(busemann(xi, y[i], z[i]) - yz))
            except ConvergenceError:
                limit_error = math.inf
    infinity_error = abs(busemann_closed_form(BoundaryPoint.infinity(), 1j, 1j * math.e) + 1.0)
    return {
        "triples": n_triples,
        "max_identity_error": identity_error,
        "max_limit_error": limit_error,
        "infinity_error": infinity_error,
        "passed": identity_error <= 1e-8 and limit_error <= 1e-8 and infinity_error <= 1e-9,
    }


def _relative(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def check_gibbs_cocycle(P: float, n_triples: int = 200, seed: int = 0, tol: float = DELTA_TOL) -> Dict[str, Any]:
    """
    Multiplicative cocycle relations of delta^F and k^F on random triples
    for F in {0, const 0.3, bump 0.5}, and k = delta on a horosphere.
    Limits are taken to the given delta tolerance.
    """
    potentials = {"zero": Potential.zero(), "const:0.3": Potential.const(SUITE_SHIFT), "bump:0.5": Potential.bump(0.5)}
    rng = np.random.default_rng(seed)
    y, z, w = (_random_interior(rng, n_triples, 2.0) for _ in range(3))
    xis = [BoundaryPoint.from_angle(a) for a in rng.uniform(0.0, 2.0 * math.pi, n_triples)]
    heights = rng.uniform(0.5, 2.0, n_triples)
    shifts = rng.uniform(-1.0, 1.0, (2, n_triples))

    rows = {}
    for name, F in potentials.items():
        delta_error = kernel_error = horosphere_error = 0.0
        for i, xi in enumerate(xis):
            d_yz = delta_cocycle(F, y[i], z[i], xi, tol)
            d_zw = delta_cocycle(F, z[i], w[i], xi, tol)
            delta_error = max(delta_error, _relative(d_yz * d_zw, delta_cocycle(F, y[i], w[i], xi, tol)))
            k_yz = gibbs_kernel(F, y[i], z[i], xi, P, tol)
            k_zw = gibbs_kernel(F, z[i], w[i], xi, P, tol)
            kernel_error = max(kernel_error, _relative(k_yz * k_zw, gibbs_kernel(F, y[i], w[i], xi, P, tol)))
            a, b = complex(shifts[0, i], heights[i]), complex(shifts[1, i], heights[i])
            infinity = BoundaryPoint.infinity()
            horosphere_error = max(horosphere_error, _relative(gibbs_kernel(F, a, b, infinity, P, tol),
                                                               delta_cocycle(F, a, b, infinity, tol)))
        rows[name] = {"delta": delta_error, "kernel": kernel_error, "horosphere": horosphere_error}
    worst = max(max(r.values()) for r in rows.values())
    return {"triples": n_triples, "P": P, "tolerance": tol, "max_relative_error": rows, "passed": worst <= 1e-5}


def check_growth_slope(elements: Ball) -> Dict[str, Any]:
    """Slope of log |B_R| over the last six integer radii the ball covers."""
    top = math.floor(elements.radius)
    radii = np.arange(max(1, top - 5), top + 1, dtype=float)
    if len(radii) < 2:
        raise ValueError(f"Ball of radius {elements.radius} is too small for a growth slope")
    counts = np.array([np.sum(elements.dists <= r) for r in radii])
    slope = float(stats.linregress(radii, np.log(counts)).slope)
    return {"radii": radii.tolist(), "counts": counts.tolist(), "slope": slope, "passed": 0.85 <= slope <= 1.15}


def check_ball_average(elements: Ball, R: float, x: ProjPoint, n_samples: int, seed: int,
                       threads: int = 1) -> Dict[str, Any]:
    """
    Fiber marginal of the fuchsian ball average for the bump 0.5 against
    theta at the same radius, and against a second seed.
    """
    rep, F = fuchsian_inclusion(), Potential.bump(0.5)
    reference = theta(rep, F, R, x, elements)
    first = ball_average(rep, F, R, x, n_samples, seed, threads).fiber_marginal()
    second = ball_average(rep, F, R, x, n_samples, seed + 1, threads).fiber_marginal()
    to_theta = measure_distance(first, reference, "W1-chordal")
    between_seeds = measure_distance(first, second, "W1-chordal")
    return {"R": R, "n_samples": n_samples, "seeds": [seed, seed + 1], "W1_to_theta": to_theta,
            "W1_between_seeds": between_seeds, "passed": to_theta < 0.1 and between_seeds < 0.03}


def check_sections(n_vectors: int, T: float, seed: int, threads: int = 1, tol: float = SECTION_TOL,
                   n_equivariant: int = 3) -> Dict[str, Any]:
    """
    Fuchsian sections against the closed-form backward endpoint, and
    equivariance of bent sections under two side pairings.
    """
    fuchsian = fuchsian_inclusion()
    vectors = _sample_tangents(n_vectors, seed)
    sections = lyapunov_sections_batch(fuchsian, vectors, T, None, threads, seed, tol)
    closed = max(s.chordal(fuchsian_section(v)) for v, s in zip(vectors, sections))

    bent = bend(fuchsian, SUITE_BEND)
    equivariance = 0.0
    for v in vectors[:n_equivariant]:
        base = lyapunov_section_plus(bent, v, T, seed=seed, tol=tol)
        for word in [(0,), (2,)]:
            g = rep_eval(fuchsian, word)
            moved = lyapunov_section_plus(bent, push_tangent(g, v), T, seed=seed, tol=tol)
            expected = ProjPoint.from_vector(rep_eval(bent, word).matrix() @ base.vector())
            equivariance = max(equivariance, moved.chordal(expected))
    return {"vectors": n_vectors, "T": T, "tolerance": tol, "max_chordal_to_closed_form": closed,
            "max_equivariance_error": equivariance, "passed": closed < 1e-4 and equivariance < 1e-4}


def check_circle_residuals(elements: Ball, x: ProjPoint) -> Dict[str, Any]:
    """Round-circle residual of the orbit of x for the fuchsian inclusion and its bending."""
    fuchsian = fuchsian_inclusion()
    reps = (fuchsian, bend(fuchsian, SUITE_BEND))
    residuals = [round_circle_residual(normalize_projective(rep_eval_many(rep, elements.words) @ x.vector()))
                 for rep in reps]
    return {"R": elements.radius, "round_circle_residual": {rep.name: r for rep, r in zip(reps, residuals)},
            "passed": residuals[0] < 1e-6 and residuals[1] > 0.01}


def run_report(ctx: RunContext) -> Dict[str, Any]:
    """
    Verification suite. Every section of report.json that carries a
    ``passed`` flag is a named check and is listed in the manifest:

    - busemann_cocycle, gibbs_cocycle: cocycle identities (delta_tol applies)
    - growth_slope: log |B_R| against R
    - pressure: the estimate and its shift identity
    - cauchy: theta_R across radii against the disintegration reference
    - ball_average_vs_theta: Monte-Carlo ball average and seed stability
    - lyapunov: the top exponent of the configured representation
    - section_vs_closed_form: sections and their equivariance (section_tol applies)
    - circle_residual: round-circle fit for the fuchsian and bent orbits
    - basin: Oseledets exponents, basins and the contraction rate
    """
    cfg = ctx.cfg
    rep, F, x = ctx.representation, ctx.potential, ctx.fiber_point
    radii = cfg.radius_list()
    window = cfg.window_bounds()
    elements = ctx.ball(max(radii[-1], window[1], cfg.R))
    sections: Dict[str, Any] = {}

    if ctx.verbose:
        print("📊 Cocycle identities")
    sections["busemann_cocycle"] = check_busemann_cocycle(seed=cfg.seed)
    sections["growth_slope"] = check_growth_slope(elements)

    if ctx.verbose:
        print("📊 Pressure")
    P = estimate_pressure(F, elements.restrict(window[1]), window, verbose=ctx.verbose)
    shifted = estimate_pressure(F.shifted(SUITE_SHIFT), elements.restrict(window[1]), window)
    shift_error = shifted.value - P.value - SUITE_SHIFT
    sections["pressure"] = {
        "estimate": P.to_dict(),
        "shift": SUITE_SHIFT,
        "shifted_slope": shifted.value,
        "shift_error": shift_error,
        "passed": abs(shift_error) <= 0.05 and (F.kind != "zero" or abs(P.value - 1.0) <= 0.15),
    }
    sections["gibbs_cocycle"] = check_gibbs_cocycle(P.value, seed=cfg.seed, tol=cfg.delta_tol)

    if ctx.verbose:
        print("📊 Cauchy diagnostic")
    nu = ledrappier_boundary(F, elements, radii[-1], P.value)
    reference = disintegration_reference(F, elements, radii[-1], P.value) if rep.is_fuchsian() else None
    table = cauchy_diagnostic(rep, F, x, radii, elements, reference, verbose=ctx.verbose)
    table.to_frame().to_csv(ctx.path("cauchy.csv"), index=False, float_format="%.17g")
    render_convergence(table, ctx.path("cauchy.svg"), ctx.digest)
    cauchy = {"metric": table.metric, "successive": table.successive,
              "strictly_decreasing": table.is_decreasing(), "to_reference": table.to_reference}
    last = table.measures[-1]
    if reference is not None and last.is_real_circle():
        cauchy["KS_to_reference"] = measure_distance(last.to_circle(), nu, "KS-angle")
    cauchy["passed"] = cauchy["strictly_decreasing"] and cauchy.get("KS_to_reference", 0.0) < 0.07
    sections["cauchy"] = cauchy

    sections["ledrappier"] = {"R": radii[-1], "KS_to_uniform": ks_to_uniform(nu)}
    render_measure(nu, "angle_histogram", ctx.path("ledrappier_hist.svg"), ctx.digest)

    if ctx.verbose:
        print("📊 Ball average")
    sections["ball_average_vs_theta"] = check_ball_average(elements.restrict(cfg.R), cfg.R, x, cfg.n_samples,
                                                           cfg.seed, cfg.threads)

    if ctx.verbose:
        print("📊 Lyapunov exponent, sections and limit sets")
    chi = lyapunov_top(rep, elements.restrict(cfg.R), F, cfg.R)
    in_range = abs(chi - 0.5) <= 0.05 if rep.is_fuchsian() else 0.0 < chi < 0.6
    sections["lyapunov"] = {"R": cfg.R, "representation": rep.name, "chi_plus": chi, "passed": in_range}
    sections["section_vs_closed_form"] = check_sections(cfg.points, cfg.T, cfg.seed, cfg.threads, cfg.section_tol)
    sections["circle_residual"] = check_circle_residuals(elements.restrict(cfg.R), x)
    render_limit_set(rep, elements.restrict(cfg.R), x, ctx.path("limit_set.svg"), ctx.digest)

    if ctx.verbose:
        print("📊 Basin check")
    basin = run_basin(ctx)
    rate_error = abs(basin["contraction_rate"] - basin["gap"]) / basin["gap"]
    basin["passed"] = (basin["passes"] >= 0.98 * basin["points"] and abs(basin["exponent_sum"]) <= 1e-6
                       and rate_error <= 0.25)
    sections["basin"] = basin

    sections["orbital_sums"] = dict(zip([str(r) for r in radii],
                                        orbital_sums(F, elements, radii).tolist()))
    write_json(ctx.path("report.json"), sections)
    checks = {name: bool(s["passed"]) for name, s in sections.items() if isinstance(s, dict) and "passed" in s}
    if ctx.verbose:
        failed = [name for name, ok in checks.items() if not ok]
        print(f"📊 {len(checks) - len(failed)}/{len(checks)} checks passed" + (f" (failed: {failed})" if failed else ""))
    return {"checks": checks}


WORKFLOWS: Dict[str, Callable[[RunContext], Dict[str, Any]]] = {
    "ball": run_ball,
    "pressure": run_pressure,
    "theta": run_theta,
    "ball-average": run_ball_average,
    "sphere-average": run_sphere_average,
    "ledrappier": run_ledrappier,
    "lyapunov": run_lyapunov,
    "section": run_section,
    "limit-set": run_limit_set,
    "basin": run_basin,
    "report": run_report,
}


# ============================================================================
# RUNNER
# ============================================================================

def run_command(command: str, cfg: RunConfig, out: Optional[Path] = None, verbose: bool = True) -> Dict[str, Any]:
    """
    Run one subcommand with its manifest.

    Args:
        command (str): Subcommand name
        cfg (RunConfig): Validated configuration
        out (Path): Output directory (default OUTPUT_DIR/<command>-<hash8>)
        verbose (bool): Print status lines

    Returns:
        dict: ``{'success', 'error', 'exit_code', 'output_dir', 'summary'}``
    """
    result = {'success': False, 'error': None, 'exit_code': 1, 'output_dir': None, 'summary': {}}
    if command not in WORKFLOWS:
        result['error'] = f"Unknown command {command!r}"
        return result

    manifest = RunManifest.from_config(command, cfg)
    out = Path(out) if out is not None else output_root() / f"{command}-{manifest.digest[:8]}"
    result['output_dir'] = str(out)
    if command == "report" and out.exists() and any(out.iterdir()):
        result['error'] = f"Refusing to overwrite existing report directory {out}"
        print(f"❌ {result['error']}")
        return result
    out.mkdir(parents=True, exist_ok=True)

    if verbose:
        print(f"🔍 {command}: manifest {manifest.digest[:8]} -> {out}")
    started = time.perf_counter()
    try:
        summary = WORKFLOWS[command](RunContext(cfg, out, manifest.digest, verbose))
        manifest.checks = summary.get("checks", {})
        result.update({'success': True, 'exit_code': 0, 'summary': summary})
        if verbose:
            print(f"✅ {command} finished")
    except (ConvergenceError, SpectrumError) as e:
        result.update({'error': str(e), 'exit_code': 2})
        print(f"❌ Numerical failure: {e}")
    except ValueError as e:
        # ConfigError is a ValueError
        result.update({'error': str(e), 'exit_code': 1})
        print(f"❌ Invalid input: {e}")
    except Exception as e:
        result['error'] = f"Error during {command}: {str(e)}"
        print(f"❌ {result['error']}")
    finally:
        manifest.wall_time = time.perf_counter() - started
        write_json(out / "manifest.json", manifest.to_dict())
    return result


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Run configuration file (sections [ball], [run], ...)")
    common.add_argument("--R", type=float, dest="R", help="Ball or sphere radius")
    common.add_argument("--cap", type=int, help="Word-length cap for ball enumeration")
    common.add_argument("--potential", help="zero | const:c | bump:A | bump:q,r,A")
    common.add_argument("--rep", help="fuchsian | bent:theta")
    common.add_argument("--x", help="Fiber point in the chart, e.g. 0.37+0i")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--window", help="Pressure window a:b")
    common.add_argument("--radii", help="Comma-separated increasing radii for the Cauchy diagnostic")
    common.add_argument("--threads", type=int, help="Worker cap (default: available parallelism)")
    common.add_argument("--samples", type=int, dest="n_samples", help="Monte-Carlo sample count")
    common.add_argument("--T", type=float, dest="T", help="Section tracking time")
    common.add_argument("--matrices", help="Demo cocycle name or JSON file")
    common.add_argument("--steps", type=int, help="Cocycle steps")
    common.add_argument("--points", type=int, help="Number of fiber points or tangent vectors")
    common.add_argument("--delta-tol", type=float, dest="delta_tol", help="Relative tolerance of delta and k limits")
    common.add_argument("--section-tol", type=float, dest="section_tol", help="Chordal tolerance of Lyapunov sections")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--quiet", action="store_true", help="Suppress status lines")

    parser = argparse.ArgumentParser(prog="bundle-lab", description="Hyperbolic foliated-bundle laboratory")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in WORKFLOWS:
        subparsers.add_parser(name, parents=[common])
    return parser


_OVERRIDES = ("R", "cap", "potential", "rep", "x", "seed", "window", "radii", "threads",
              "n_samples", "T", "matrices", "steps", "points", "delta_tol", "section_tol")


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the subcommand and return its exit status."""
    args = build_parser().parse_args(argv)
    overrides = {name: getattr(args, name) for name in _OVERRIDES}
    try:
        cfg = load_run_config(args.config, overrides)
    except ConfigError as e:
        print(f"❌ Configuration error: {e}")
        return 1
    result = run_command(args.command, cfg, args.out, verbose=not args.quiet)
    if result['success'] and not args.quiet:
        print(json.dumps(result['summary'], indent=2, sort_keys=True, default=_to_builtin))
    return result['exit_code']
