"""
Numeric Rules and Constants for the Hyperbolic Bundle Laboratory
================================================================

This module contains the tolerances, default parameters, error types and
option-string parsers shared by every other module: the base point, the
regular-octagon lattice constants, quadrature and limit-truncation rules,
the demo matrix cocycles and the parsing of command-line specifications
such as ``const:0.3`` or ``bent:0.3``.
"""

import math
import re
from typing import Dict, Optional, Tuple, Any

import numpy as np

ARTIFACT_VERSION = "1.0.0"

# ============================================================================
# ERROR TYPES
# ============================================================================


class ConfigError(ValueError):
    """Raised for malformed configuration files or command-line specs."""


class ConvergenceError(RuntimeError):
    """Raised when a limit procedure does not reach its tolerance."""

    def __init__(self, quantity: str, tolerance: float, last_increment: float, detail: str = ""):
        self.quantity = quantity
        self.tolerance = tolerance
        self.last_increment = last_increment
        message = (f"{quantity} did not converge: last increment {last_increment:.3e} "
                   f"above tolerance {tolerance:.1e}")
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class BallCapError(ConvergenceError):
    """Raised when ball enumeration hits the word-length cap with a live frontier."""

    def __init__(self, cap: int, frontier_size: int):
        self.cap = cap
        self.frontier_size = frontier_size
        super().__init__("ball enumeration", float(cap), float(frontier_size),
                         f"frontier of {frontier_size} words still open at word length cap {cap}; "
                         f"R is too large for the cap")


class SpectrumError(RuntimeError):
    """Raised when a Lyapunov spectrum is not simple."""

    def __init__(self, exponents, gap: float, detail: str = ""):
        self.exponents = [float(e) for e in exponents]
        self.gap = gap
        message = f"spectrum not simple: exponents {self.exponents} (required gap {gap:.0e})"
        if detail:
            message = f"{message}; {detail}"
        super().__init__(message)


# ============================================================================
# GEOMETRY
# ============================================================================

# Global base point o of the upper half-plane
BASE_POINT = 1j

DET_TOL = 1e-12
CANONICAL_EPS = 1e-9

# Busemann limit: evaluate at t, t+2, ... until increments fall below tol
BUSEMANN_TOL = 1e-10
BUSEMANN_STEP = 2.0
BUSEMANN_T_MAX = 60.0
BUSEMANN_CLOSED_FORM_TOL = 1e-8

# Boundary points beyond this modulus are stored in the chart at infinity
CHART_SWITCH = 1e6

# ============================================================================
# REGULAR OCTAGON LATTICE (GENUS 2)
# ============================================================================

# cot(pi/8) = 1 + sqrt(2)
COT_PI_8 = 1.0 / math.tan(math.pi / 8)
OCTAGON_TRACE = 2.0 * COT_PI_8
TRANSLATION_LENGTH = 2.0 * math.acosh(COT_PI_8)
INRADIUS = TRANSLATION_LENGTH / 2.0
CIRCUMRADIUS = math.acosh(COT_PI_8 ** 2)

# Side pairings g0..g3 and their inverses G0..G3 (index j+4 inverts index j)
GENERATOR_SYMBOLS = ("g0", "g1", "g2", "g3", "G0", "G1", "G2", "G3")

# Vertex cycle of the octagon: g0 g3 G2 g1 G0 G3 g2 G1
OCTAGON_RELATOR = (0, 3, 6, 1, 4, 7, 2, 5)

# Symplectic basis as words in the side pairings
SYMPLECTIC_BASIS = {
    "a1": (0,),
    "b1": (3, 6, 1),
    "a2": (3, 6),
    "b2": (1, 7),
}

RELATOR_TOL = 1e-9
BEND_RELATOR_TOL = 1e-8
MAX_BEND_ANGLE = math.pi / 4

DEDUP_QUANTUM = 1e-9
DEFAULT_WORD_CAP = 60
REDUCE_MAX_STEPS = 10_000

# ============================================================================
# POTENTIALS AND QUADRATURE
# ============================================================================

QUAD_STEP = 0.025
DELTA_TOL = 1e-7
DELTA_T_START = 4.0
DELTA_T_STEP = 2.0
DELTA_T_MAX = 80.0

DEFAULT_BUMP_RADIUS = 0.8
BUMP_EXPONENT = 6

# ============================================================================
# COCYCLES AND SECTIONS
# ============================================================================

REORTHO_CADENCE = 20
SPECTRUM_GAP = 1e-3
DIRECTION_SEPARATION = 1e-6

SECTION_T_STEP = 5.0
SECTION_T_MAX = 60.0
SECTION_TOL = 1e-4
SECTION_RETRIES = 3

DEMO_COCYCLES = {
    # Constant diagonal cocycle over a one-symbol base
    "diag": {
        "matrices": [[[2.0, 0.0], [0.0, 0.5]]],
        "probabilities": [1.0],
    },
    # Two-symbol cocycle with a common invariant line
    "demo2": {
        "matrices": [[[2.0, 0.0], [0.0, 0.5]], [[1.0, 1.0], [0.0, 1.0]]],
        "probabilities": [0.5, 0.5],
    },
}

# ============================================================================
# MEASURES AND FIGURES
# ============================================================================

W1_SUBSAMPLE = 512
W1_SEED = 20240917
HIST_BINS = 256
SVG_HASH_SALT = "hyperbolic-bundle-lab"

# Default fiber point for theta and averages
DEFAULT_FIBER_POINT = 0.37 + 0j


# ============================================================================
# OPTION STRING PARSING
# ============================================================================

def parse_complex(text: str) -> complex:
    """
    Parse a complex number written with either ``i`` or ``j``.

    Args:
        text (str): e.g. ``"0.37+0i"``, ``"1j"``, ``"-2"``

    Returns:
        complex: Parsed value

    Raises:
        ConfigError: If the text is not a complex literal
    """
    cleaned = text.strip().replace(" ", "").replace("i", "j")
    if cleaned in ("j", "+j", "-j"):
        cleaned = cleaned.replace("j", "1j")
    try:
        return complex(cleaned)
    except ValueError:
        raise ConfigError(f"Not a complex number: {text!r}")


def parse_potential_spec(text: str) -> Dict[str, Any]:
    """
    Parse a potential specification.

    Accepted forms: ``zero``, ``const:c``, ``bump:q,r,A`` and ``bump:A``
    (center o, default radius).

    Args:
        text (str): Potential specification

    Returns:
        dict: ``{'kind', 'constant', 'center', 'radius', 'amplitude'}``
    """
    spec = text.strip().lower()
    if spec == "zero":
        return {"kind": "zero", "constant": 0.0, "center": BASE_POINT,
                "radius": DEFAULT_BUMP_RADIUS, "amplitude": 0.0}

    match = re.fullmatch(r"const:(.+)", spec)
    if match:
        try:
            value = float(match.group(1))
        except ValueError:
            raise ConfigError(f"Bad constant potential: {text!r}")
        return {"kind": "constant", "constant": value, "center": BASE_POINT,
                "radius": DEFAULT_BUMP_RADIUS, "amplitude": 0.0}

    match = re.fullmatch(r"bump:(.+)", spec)
    if match:
        parts = [p for p in match.group(1).split(",") if p]
        try:
            if len(parts) == 1:
                center, radius, amplitude = BASE_POINT, DEFAULT_BUMP_RADIUS, float(parts[0])
            elif len(parts) == 3:
                center = parse_complex(parts[0])
                radius = float(parts[1])
                amplitude = float(parts[2])
            else:
                raise ValueError
        except ValueError:
            raise ConfigError(f"Bad bump potential (expected bump:q,r,A): {text!r}")
        if center.imag <= 0 or radius <= 0:
            raise ConfigError(f"Bump needs an interior center and positive radius: {text!r}")
        return {"kind": "bump", "constant": 0.0, "center": center,
                "radius": radius, "amplitude": amplitude}

    raise ConfigError(f"Unknown potential spec: {text!r} (use zero, const:c or bump:q,r,A)")


def parse_rep_spec(text: str) -> Tuple[str, float]:
    """
    Parse a representation specification: ``fuchsian`` or ``bent:theta``.

    Returns:
        tuple: (label, bending angle)
    """
    spec = text.strip().lower()
    if spec == "fuchsian":
        return "fuchsian", 0.0
    match = re.fullmatch(r"bent:(.+)", spec)
    if match:
        try:
            theta = float(match.group(1))
        except ValueError:
            raise ConfigError(f"Bad bending angle: {text!r}")
        if abs(theta) >= MAX_BEND_ANGLE:
            raise ConfigError(f"Bending angle must satisfy |theta| < pi/4, got {theta}")
        return "bent", theta
    raise ConfigError(f"Unknown representation spec: {text!r} (use fuchsian or bent:theta)")


def parse_window(text: str) -> Tuple[float, float]:
    """
    Parse a radius window ``a:b`` with a < b.
    """
    match = re.fullmatch(r"\s*([0-9.eE+-]+)\s*:\s*([0-9.eE+-]+)\s*", text)
    if not match:
        raise ConfigError(f"Bad window (expected a:b): {text!r}")
    low, high = float(match.group(1)), float(match.group(2))
    if not low < high:
        raise ConfigError(f"Window must be increasing: {text!r}")
    return low, high


def demo_cocycle_matrices(name: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Look up a named demo cocycle.

    Returns:
        tuple: (matrices of shape (k, d, d), probabilities of shape (k,))
    """
    if name not in DEMO_COCYCLES:
        raise ConfigError(f"Unknown demo cocycle {name!r}; available: {sorted(DEMO_COCYCLES)}")
    entry = DEMO_COCYCLES[name]
    return (np.asarray(entry["matrices"], dtype=complex),
            np.asarray(entry["probabilities"], dtype=float))


def word_to_text(word) -> str:
    """Render a generator word as dot-separated symbols (empty word is ``e``)."""
    if len(word) == 0:
        return "e"
    return ".".join(GENERATOR_SYMBOLS[k] for k in word)


def text_to_word(text: str) -> Tuple[int, ...]:
    """
    Parse a dot-separated generator word.

    Raises:
        ValueError: On an unknown symbol
    """
    text = text.strip()
    if text in ("", "e"):
        return ()
    word = []
    for symbol in text.split("."):
        if symbol not in GENERATOR_SYMBOLS:
            raise ValueError(f"Unknown generator symbol {symbol!r}")
        word.append(GENERATOR_SYMBOLS.index(symbol))
    return tuple(word)


def inverse_letter(k: int) -> int:
    """Index of the inverse generator."""
    return (k + 4) % 8


# ============================================================================
# EXAMPLE USAGE AND TESTING
# ============================================================================

if __name__ == "__main__":
    print(f"Octagon trace: {OCTAGON_TRACE:.6f}")
    print(f"Translation length: {TRANSLATION_LENGTH:.6f}")
    print(f"Inradius / circumradius: {INRADIUS:.6f} / {CIRCUMRADIUS:.6f}")
    print(f"Relator: {word_to_text(OCTAGON_RELATOR)}")
    for spec in ["zero", "const:0.3", "bump:0.5", "bump:1j,0.8,-0.5"]:
        print(f"{spec} -> {parse_potential_spec(spec)}")
