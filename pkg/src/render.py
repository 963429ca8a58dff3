"""
Figures
=======

Static SVG figures, each written next to a CSV with the same basename that
holds the plotted numbers:

- limit_set: orbit rho(gamma) x0 in the chart w = u0/u1 and in 1/w;
- angle_histogram: 256-bin density of a circle-supported measure;
- sphere_scatter: atoms of a projective measure on the Riemann sphere;
- convergence_curve: successive distances of a Cauchy diagnostic.

Output is byte-identical for identical inputs: the SVG hash salt is fixed,
the date metadata is dropped and the run manifest hash is embedded as the
Description.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from constants import HIST_BINS, SVG_HASH_SALT  # noqa: E402
from group import Ball, Representation, rep_eval_many  # noqa: E402
from hypgeom import ProjPoint  # noqa: E402
from measures import ConvergenceTable, EmpiricalMeasure, normalize_projective, riemann_sphere  # noqa: E402

FIGURE_KINDS = ("limit_set", "sphere_scatter", "angle_histogram", "convergence_curve")

plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT


@dataclass
class Figure:
    """A written figure: the SVG, its sibling CSV and the plotted data."""

    kind: str
    svg_path: Path
    csv_path: Path
    data: pd.DataFrame
    manifest_hash: str = ""


def _save(fig, kind: str, data: pd.DataFrame, path: Union[str, Path], manifest_hash: str) -> Figure:
    path = Path(path).with_suffix(".svg")
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = path.with_suffix(".csv")
    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig.savefig(path, format="svg", metadata={"Date": None, "Description": f"manifest {manifest_hash}"})
    plt.close(fig)
    data.to_csv(csv_path, index=False, float_format="%.17g")
    return Figure(kind, path, csv_path, data, manifest_hash)


def render_limit_set(rep: Representation, elements: Ball, x0: ProjPoint, path: Union[str, Path],
                     manifest_hash: str = "") -> Figure:
    """
    Scatter the orbit rho(gamma) x0 over a ball in the chart w = u0/u1 and,
    for points near infinity, in the chart 1/w.

    Args:
        rep (Representation): Holonomy representation
        elements (Ball): Nonempty enumerated ball
        x0 (ProjPoint): Seed point of the orbit
        path: Output path (suffix replaced by .svg / .csv)
        manifest_hash (str): Run manifest hash for the metadata

    Returns:
        Figure: The written figure
    """
    if len(elements) == 0:
        raise ValueError("Cannot render the limit set of an empty ball")
    orbit = normalize_projective(rep_eval_many(rep, elements.words) @ x0.vector())
    u0, u1 = orbit[:, 0], orbit[:, 1]
    near = np.abs(u1) >= np.abs(u0)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(u1 != 0, u0 / u1, complex(np.inf, 0))
        inv = np.where(u0 != 0, u1 / u0, complex(np.inf, 0))
    data = pd.DataFrame({"word": [e.text for e in elements], "re": w.real, "im": w.imag,
                         "inv_re": inv.real, "inv_im": inv.imag, "chart": np.where(near, "w", "1/w")})

    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 5))
    left.scatter(w.real[near], w.imag[near], s=1.0, c="tab:blue", marker=".")
    left.set_title("chart w (|w| <= 1)")
    right.scatter(inv.real[~near], inv.imag[~near], s=1.0, c="tab:red", marker=".")
    right.set_title("chart 1/w (|w| > 1)")
    for ax in (left, right):
        ax.set_xlim(-1.05, 1.05)
        ax.set_ylim(-1.05, 1.05)
        ax.set_aspect("equal")
        ax.grid(True, linestyle=":", alpha=0.6)
    fig.suptitle(f"Limit set orbit of {rep.name} ({len(elements)} elements, R = {elements.radius:g})")
    return _save(fig, "limit_set", data, path, manifest_hash)


def angle_histogram(mu: EmpiricalMeasure, bins: int = HIST_BINS) -> pd.DataFrame:
    """Bin masses and densities (area one) of the visual angles of mu."""
    masses, edges = np.histogram(mu.angles(), bins=bins, range=(0.0, 2.0 * math.pi),
                                 weights=mu.weights / mu.mass)
    width = 2.0 * math.pi / bins
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "mass": masses,
                         "density": masses / width})


def render_measure(mu: EmpiricalMeasure, kind: str, path: Union[str, Path], manifest_hash: str = "") -> Figure:
    """
    Draw a normalized measure as an angle histogram (circle support) or a
    Riemann-sphere scatter with point area proportional to weight
    (projective support).

    Raises:
        ValueError: On a kind the support does not allow
    """
    if kind == "angle_histogram":
        if mu.support != "circle":
            raise ValueError("angle_histogram needs a circle-supported measure")
        data = angle_histogram(mu)
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.bar(data["bin_left"], data["density"], width=data["bin_right"] - data["bin_left"],
               align="edge", color="tab:blue", edgecolor="none")
        ax.axhline(1.0 / (2.0 * math.pi), color="black", linestyle=":", linewidth=0.8)
        ax.set_xlim(0.0, 2.0 * math.pi)
        ax.set_xlabel("visual angle")
        ax.set_ylabel("density")
        return _save(fig, kind, data, path, manifest_hash)

    if kind == "sphere_scatter":
        if mu.support != "projective" or mu.points.shape[1] != 2:
            raise ValueError("sphere_scatter needs a projective measure on CP^1")
        x = riemann_sphere(mu.points)
        weights = mu.weights / mu.mass
        data = pd.DataFrame({"x1": x[:, 0], "x2": x[:, 1], "x3": x[:, 2], "weight": weights})
        fig, (upper, lower) = plt.subplots(1, 2, figsize=(10, 5))
        sizes = 2000.0 * weights / weights.max()
        top = x[:, 2] >= 0
        upper.scatter(x[top, 0], x[top, 1], s=sizes[top], c="tab:blue", alpha=0.6, linewidths=0)
        upper.set_title("|w| >= 1 hemisphere")
        lower.scatter(x[~top, 0], x[~top, 1], s=sizes[~top], c="tab:green", alpha=0.6, linewidths=0)
        lower.set_title("|w| < 1 hemisphere")
        for ax in (upper, lower):
            ax.add_patch(plt.Circle((0.0, 0.0), 1.0, fill=False, linewidth=0.5))
            ax.set_xlim(-1.05, 1.05)
            ax.set_ylim(-1.05, 1.05)
            ax.set_aspect("equal")
        return _save(fig, kind, data, path, manifest_hash)

    raise ValueError(f"Unknown measure figure kind {kind!r}")


def render_convergence(table: ConvergenceTable, path: Union[str, Path], manifest_hash: str = "") -> Figure:
    """Successive (and reference) distances against R on a log scale."""
    data = table.to_frame()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(table.radii[1:], table.successive, marker="o", label="successive")
    if table.to_reference is not None:
        ax.semilogy(table.radii, table.to_reference, marker="s", label="to reference")
    ax.set_xlabel("R")
    ax.set_ylabel(table.metric)
    ax.legend()
    ax.grid(True, linestyle=":", alpha=0.6)
    return _save(fig, "convergence_curve", data, path, manifest_hash)
