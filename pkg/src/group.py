"""
Genus-2 Surface Group
=====================

The regular-octagon lattice as an explicit fuchsian group, orbit balls
B_R = {gamma : dist(o, gamma o) <= R}, reduction of points to the Dirichlet
domain about o, representation evaluation and small bending deformations
into PSL2(C).

Words are tuples of generator indices 0..7 (g0..g3 then G0..G3, with index
k+4 inverting index k) and are evaluated left to right, so
rep_eval(rho, u + v) = rep_eval(rho, u) @ rep_eval(rho, v).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from constants import (
    BASE_POINT,
    BEND_RELATOR_TOL,
    CIRCUMRADIUS,
    DEDUP_QUANTUM,
    DEFAULT_WORD_CAP,
    GENERATOR_SYMBOLS,
    MAX_BEND_ANGLE,
    OCTAGON_RELATOR,
    OCTAGON_TRACE,
    REDUCE_MAX_STEPS,
    RELATOR_TOL,
    SYMPLECTIC_BASIS,
    TRANSLATION_LENGTH,
    BallCapError,
    ConvergenceError,
    inverse_letter,
    text_to_word,
    word_to_text,
)
from hypgeom import (
    HPoint,
    MobiusMap,
    as_interior,
    hdist,
    hdist_array,
    hyperbolic_translation,
    orbit_distance_array,
    rotation,
)

Word = Tuple[int, ...]

# Orbit points of distinct elements are at least 2*inradius apart, so unit
# cells in hyperboloid coordinates hold at most one of them.
_ORBIT_CELL = 1.0
_CELL_EDGE = 1e-6


def _as_word(word: Union[str, Iterable[int]]) -> Word:
    if isinstance(word, str):
        return text_to_word(word)
    word = tuple(int(k) for k in word)
    for k in word:
        if not 0 <= k < len(GENERATOR_SYMBOLS):
            raise ValueError(f"Unknown generator index {k}")
    return word


def _product(mats: np.ndarray, word: Word) -> np.ndarray:
    result = np.eye(2, dtype=mats.dtype)
    for k in word:
        result = result @ mats[k]
    return result


def canonical_array(mats: np.ndarray) -> np.ndarray:
    """Sign-canonical forms of a stack of matrices (see MobiusMap.canonical)."""
    flat = mats.reshape(mats.shape[:-2] + (4,))
    big = np.abs(flat) > 1e-9
    first = np.argmax(big, axis=-1)
    lead = np.take_along_axis(flat, first[..., None], axis=-1)[..., 0]
    flip = (lead.real < -1e-15) | ((np.abs(lead.real) <= 1e-15) & (lead.imag < 0))
    sign = np.where(flip, -1.0, 1.0)
    return mats * sign[..., None, None]


def hyperboloid_coordinates(mats: np.ndarray) -> np.ndarray:
    """
    Spatial hyperboloid coordinates (X1, X2) of the orbit points m·o of real
    matrices; Euclidean distance in this plane dominates hyperbolic distance.
    """
    a, b = mats[..., 0, 0].real, mats[..., 0, 1].real
    c, d = mats[..., 1, 0].real, mats[..., 1, 1].real
    return np.stack([(a * a + b * b - c * c - d * d) / 2.0, a * c + b * d], axis=-1)


# ============================================================================
# PRESENTATION AND ELEMENTS
# ============================================================================

@dataclass(frozen=True)
class GroupElement:
    """Group element with its word in the side pairings."""

    word: Word
    matrix: MobiusMap
    orbit_dist: float

    @property
    def text(self) -> str:
        return word_to_text(self.word)

    def is_identity(self) -> bool:
        return len(self.word) == 0 or self.matrix.equals(MobiusMap.identity(), RELATOR_TOL)


@dataclass(frozen=True)
class GroupPresentation:
    """
    Side pairings g0..g3 of the regular octagon and their inverses, with the
    vertex-cycle relator and the symplectic basis a1, b1, a2, b2 satisfying
    [a1, b1][a2, b2] = 1.
    """

    generators: Tuple[MobiusMap, ...]
    relator: Word = OCTAGON_RELATOR
    basis_words: Dict[str, Word] = field(default_factory=lambda: dict(SYMPLECTIC_BASIS))

    def generator_array(self) -> np.ndarray:
        return np.stack([g.matrix() for g in self.generators])

    def evaluate(self, word: Union[str, Iterable[int]]) -> MobiusMap:
        return MobiusMap.from_matrix(_product(self.generator_array(), _as_word(word)), normalize=False)

    def basis(self) -> Dict[str, MobiusMap]:
        return {name: self.evaluate(w) for name, w in self.basis_words.items()}

    def relator_error(self) -> float:
        return self.evaluate(self.relator).distance(MobiusMap.identity())

    def commutator_error(self) -> float:
        return _commutator_relator(self.basis()).distance(MobiusMap.identity())

    def element(self, word: Union[str, Iterable[int]]) -> GroupElement:
        word = _as_word(word)
        m = self.evaluate(word)
        return GroupElement(word, m, hdist(BASE_POINT, (m.a * BASE_POINT + m.b) / (m.c * BASE_POINT + m.d)))


def _commutator(x: MobiusMap, y: MobiusMap) -> MobiusMap:
    return x @ y @ x.inverse() @ y.inverse()


def _commutator_relator(basis: Dict[str, MobiusMap]) -> MobiusMap:
    return _commutator(basis["a1"], basis["b1"]) @ _commutator(basis["a2"], basis["b2"])


def octagon_generators() -> GroupPresentation:
    """
    Build the regular-octagon genus-2 lattice:
    g_j = R(j pi/4) T R(-j pi/4) with T the translation of trace 2 cot(pi/8).

    Returns:
        GroupPresentation: Eight generators (g0..g3, G0..G3)
    """
    translation = hyperbolic_translation(TRANSLATION_LENGTH)
    gens = []
    for j in range(4):
        r = rotation(j * math.pi / 4)
        g = r @ translation @ r.inverse()
        gens.append(MobiusMap(complex(g.a.real), complex(g.b.real), complex(g.c.real), complex(g.d.real)))
    gens = gens + [g.inverse() for g in gens]
    presentation = GroupPresentation(tuple(gens))

    error = presentation.relator_error()
    assert error <= RELATOR_TOL, f"octagon relator off by {error:.3e}"
    assert presentation.commutator_error() <= RELATOR_TOL
    assert all(abs(abs(g.trace()) - OCTAGON_TRACE) < 1e-12 for g in gens)
    return presentation


# ============================================================================
# ORBIT BALLS
# ============================================================================

class Ball(Sequence[GroupElement]):
    """
    Elements of B_R ordered by (word length, lexicographic word), backed by
    arrays for vectorized consumers.
    """

    def __init__(self, words: List[Word], matrices: np.ndarray, dists: np.ndarray, radius: float):
        self.words = list(words)
        self.matrices = matrices
        self.dists = dists
        self.radius = float(radius)

    def __len__(self) -> int:
        return len(self.words)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        return GroupElement(self.words[index], MobiusMap.from_matrix(self.matrices[index], normalize=False),
                            float(self.dists[index]))

    def restrict(self, radius: float) -> "Ball":
        """Sub-ball B_r for r <= radius, keeping order."""
        if radius > self.radius + 1e-12:
            raise ValueError(f"Cannot restrict a ball of radius {self.radius} to {radius}")
        keep = np.flatnonzero(self.dists <= radius)
        return Ball([self.words[i] for i in keep], self.matrices[keep], self.dists[keep], radius)

    def orbit_points(self) -> np.ndarray:
        m = self.matrices
        return (m[:, 0, 0] * BASE_POINT + m[:, 0, 1]) / (m[:, 1, 0] * BASE_POINT + m[:, 1, 1])

    def to_frame(self) -> pd.DataFrame:
        m = self.matrices.astype(complex)
        columns = {"word": [word_to_text(w) for w in self.words]}
        for name, (i, j) in zip("abcd", [(0, 0), (0, 1), (1, 0), (1, 1)]):
            columns[f"{name}_re"] = m[:, i, j].real
            columns[f"{name}_im"] = m[:, i, j].imag
        columns["orbit_dist"] = self.dists
        return pd.DataFrame(columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], radius: Optional[float] = None) -> "Ball":
        frame = pd.read_csv(path, keep_default_na=False)
        words = [text_to_word(w) for w in frame["word"]]
        mats = np.empty((len(frame), 2, 2))
        for name, (i, j) in zip("abcd", [(0, 0), (0, 1), (1, 0), (1, 1)]):
            mats[:, i, j] = frame[f"{name}_re"].to_numpy()
        dists = frame["orbit_dist"].to_numpy(dtype=float)
        if radius is None:
            radius = float(dists.max()) if len(dists) else 0.0
        return cls(words, mats, dists, radius)


class _OrbitIndex:
    """Cell index of orbit points with exact canonical-matrix confirmation."""

    def __init__(self):
        self.cells: Dict[Tuple[int, int], List[int]] = {}
        self.canonical: List[np.ndarray] = []

    @staticmethod
    def locate(coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Cell indices of an array of coordinates (..., 2) plus the neighbor
        offsets (-1, 0 or +1 per axis) to search for points near a cell edge.
        """
        scaled = coords / _ORBIT_CELL
        cells = np.floor(scaled)
        frac = scaled - cells
        offsets = np.where(frac < _CELL_EDGE, -1, np.where(1.0 - frac < _CELL_EDGE, 1, 0))
        return cells.astype(np.int64), offsets[..., 0], offsets[..., 1]

    def find(self, cell: Tuple[int, int], off_x: int, off_y: int, canon: np.ndarray) -> Optional[int]:
        xs = (cell[0],) if off_x == 0 else (cell[0], cell[0] + off_x)
        ys = (cell[1],) if off_y == 0 else (cell[1], cell[1] + off_y)
        tol = None
        for kx in xs:
            for ky in ys:
                for idx in self.cells.get((kx, ky), ()):
                    if tol is None:
                        tol = DEDUP_QUANTUM * max(1.0, float(np.max(np.abs(canon))))
                    if np.max(np.abs(self.canonical[idx] - canon)) <= tol:
                        return idx
        return None

    def add(self, cell: Tuple[int, int], canon: np.ndarray, idx: int):
        self.cells.setdefault(cell, []).append(idx)
        self.canonical.append(canon)


def _extend_chunk(parents: np.ndarray, gens: np.ndarray) -> np.ndarray:
    return np.einsum("nij,kjl->nkil", parents, gens)


def ball(R: float, cap: int = DEFAULT_WORD_CAP, presentation: Optional[GroupPresentation] = None,
         slack: float = CIRCUMRADIUS, threads: int = 1, verbose: bool = False) -> Ball:
    """
    Enumerate B_R by breadth-first search over words, extending a word only
    while its orbit point stays within R + slack of o.

    Args:
        R (float): Ball radius
        cap (int): Maximum word length
        presentation (GroupPresentation): Defaults to the octagon lattice
        slack (float): Pruning slack (the domain circumradius)
        threads (int): Worker threads for the per-layer products
        verbose (bool): Print progress

    Returns:
        Ball: Distinct elements with orbit distance <= R

    Raises:
        ValueError: If R <= 0
        BallCapError: If words of length cap are still extendable
    """
    if R <= 0:
        raise ValueError(f"Ball radius must be positive, got {R}")
    presentation = presentation or octagon_generators()
    gens = presentation.generator_array().real.copy()
    limit = R + slack

    if verbose:
        print(f"🔍 Enumerating B_R for R = {R} (prune at {limit:.4f}, cap {cap})")

    identity = np.eye(2)
    words: List[Word] = [()]
    mats: List[np.ndarray] = [identity]
    dists: List[float] = [0.0]
    index = _OrbitIndex()
    index.add((0, 0), canonical_array(identity), 0)

    frontier = [0]
    length = 0
    while frontier:
        if length >= cap:
            raise BallCapError(cap, len(frontier))
        parents = np.stack([mats[i] for i in frontier])
        if threads > 1 and len(frontier) > 256:
            chunks = np.array_split(parents, threads)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                candidates = np.concatenate(list(pool.map(lambda c: _extend_chunk(c, gens), chunks)))
        else:
            candidates = _extend_chunk(parents, gens)

        cand_dist = orbit_distance_array(candidates)
        cand_canon = canonical_array(candidates)
        cells, off_x, off_y = _OrbitIndex.locate(hyperboloid_coordinates(candidates))

        backtrack = np.array([inverse_letter(words[p][-1]) if words[p] else -1 for p in frontier])
        valid = (cand_dist <= limit) & (np.arange(len(gens))[None, :] != backtrack[:, None])

        next_frontier = []
        for row, k in zip(*np.nonzero(valid)):
            cell = (int(cells[row, k, 0]), int(cells[row, k, 1]))
            if index.find(cell, int(off_x[row, k]), int(off_y[row, k]), cand_canon[row, k]) is not None:
                continue
            idx = len(words)
            words.append(words[frontier[row]] + (int(k),))
            mats.append(candidates[row, k])
            dists.append(float(cand_dist[row, k]))
            index.add(cell, cand_canon[row, k], idx)
            next_frontier.append(idx)
        frontier = next_frontier
        length += 1
        if verbose and frontier:
            print(f"   layer {length}: {len(frontier)} new elements, {len(words)} explored")

    dist_arr = np.asarray(dists)
    keep = np.flatnonzero(dist_arr <= R)
    result = Ball([words[i] for i in keep], np.stack(mats)[keep], dist_arr[keep], R)
    if verbose:
        print(f"✅ |B_R| = {len(result)} (max word length {max(len(w) for w in result.words)})")
    return result


# ============================================================================
# DOMAIN REDUCTION
# ============================================================================

def reduce_points(z: np.ndarray, presentation: Optional[GroupPresentation] = None,
                  rep: Optional["Representation"] = None,
                  max_steps: int = REDUCE_MAX_STEPS) -> Tuple[np.ndarray, List[Word], np.ndarray]:
    """
    Vectorized greedy descent to the Dirichlet domain about o.

    Args:
        z (np.ndarray): Interior points
        presentation (GroupPresentation): Defaults to the octagon lattice
        rep (Representation): Optional; when given, rho(gamma) is accumulated
        max_steps (int): Iteration cap

    Returns:
        tuple: (z0, words, matrices) with gamma·z0 = z; matrices are
            rho(gamma) when rep is given, otherwise gamma itself
    """
    presentation = presentation or octagon_generators()
    gens = presentation.generator_array().real
    acc_gens = rep.generator_array() if rep is not None else gens.astype(complex)
    z = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
    if np.any(z.imag <= 0):
        raise ValueError("reduce_points expects interior points")
    n = len(z)
    current = hdist_array(z, np.full(n, BASE_POINT))
    acc = np.tile(np.eye(2, dtype=complex), (n, 1, 1))
    letters: List[np.ndarray] = []
    active = np.ones(n, dtype=bool)

    steps = 0
    while np.any(active):
        if steps >= max_steps:
            raise ConvergenceError("domain reduction", 1e-9, float(np.max(current[active])),
                                   f"{int(active.sum())} points still moving after {max_steps} steps")
        idx = np.flatnonzero(active)
        zz = z[idx]
        # images under every generator: (m, 8)
        images = (gens[None, :, 0, 0] * zz[:, None] + gens[None, :, 0, 1]) / \
                 (gens[None, :, 1, 0] * zz[:, None] + gens[None, :, 1, 1])
        dist = hdist_array(images, np.full(images.shape, BASE_POINT))
        best = np.argmin(dist, axis=1)
        best_dist = dist[np.arange(len(idx)), best]
        moving = best_dist < current[idx] - 1e-9

        step_letters = np.full(n, -1, dtype=np.int8)
        mv = idx[moving]
        applied = best[moving]
        z[mv] = images[moving, applied]
        current[mv] = best_dist[moving]
        # applying generator k means gamma gains the letter inverse(k)
        gained = (applied + 4) % 8
        step_letters[mv] = gained
        acc[mv] = acc[mv] @ acc_gens[gained]
        letters.append(step_letters)
        active[idx[~moving]] = False
        steps += 1

    words = [[] for _ in range(n)]
    for step_letters in letters:
        for i in np.flatnonzero(step_letters >= 0):
            words[i].append(int(step_letters[i]))
    return z, [tuple(w) for w in words], acc


def reduce_to_domain(z, presentation: Optional[GroupPresentation] = None) -> Tuple[HPoint, GroupElement]:
    """
    Reduce an interior point into the closed Dirichlet domain about o.

    Args:
        z: Interior point (HPoint or complex)

    Returns:
        tuple: (z0, gamma) with gamma·z0 = z

    Raises:
        ConvergenceError: If the descent exceeds the iteration cap
    """
    z = as_interior(z)
    z0, words, mats = reduce_points(np.array([z]), presentation)
    m = MobiusMap.from_matrix(mats[0], normalize=False)
    o_image = (m.a * BASE_POINT + m.b) / (m.c * BASE_POINT + m.d)
    return HPoint(complex(z0[0])), GroupElement(words[0], m, hdist(BASE_POINT, o_image))


# ============================================================================
# REPRESENTATIONS
# ============================================================================

@dataclass(frozen=True)
class Representation:
    """
    Homomorphism of the surface group into PSL2(C), stored as the images of
    the side pairings g0..g3.
    """

    images: Tuple[MobiusMap, ...]
    label: str = "fuchsian"
    theta: float = 0.0

    def generator_array(self) -> np.ndarray:
        mats = [m.matrix() for m in self.images]
        mats = mats + [np.linalg.inv(m) for m in mats]
        return np.stack(mats)

    def basis(self) -> Dict[str, MobiusMap]:
        mats = self.generator_array()
        return {name: MobiusMap.from_matrix(_product(mats, w), normalize=False)
                for name, w in SYMPLECTIC_BASIS.items()}

    def relator_error(self) -> float:
        mats = self.generator_array()
        vertex = MobiusMap.from_matrix(_product(mats, OCTAGON_RELATOR), normalize=False)
        commutator = _commutator_relator(self.basis())
        return max(vertex.distance(MobiusMap.identity()), commutator.distance(MobiusMap.identity()))

    def is_fuchsian(self) -> bool:
        return all(m.is_real() for m in self.images)

    @property
    def name(self) -> str:
        return "fuchsian" if self.label == "fuchsian" else f"bent:{self.theta:g}"


def fuchsian_inclusion(presentation: Optional[GroupPresentation] = None) -> Representation:
    presentation = presentation or octagon_generators()
    return Representation(tuple(presentation.generators[:4]), "fuchsian", 0.0)


def bend(rep: Representation, theta: float) -> Representation:
    """
    Bend a fuchsian representation along the separating curve [a1, b1]:
    a1, b1 stay fixed while a2, b2 are conjugated by the elliptic E_theta
    rotating by theta about the axis of [a1, b1].

    Raises:
        ValueError: If |theta| >= pi/4 or rep is not fuchsian
    """
    if abs(theta) >= MAX_BEND_ANGLE:
        raise ValueError(f"Bending angle must satisfy |theta| < pi/4, got {theta}")
    if rep.label != "fuchsian":
        raise ValueError("Only fuchsian representations can be bent")
    if theta == 0:
        return rep

    basis = {k: v.matrix() for k, v in rep.basis().items()}
    a1, b1, a2, b2 = basis["a1"], basis["b1"], basis["a2"], basis["b2"]
    c = a1 @ b1 @ np.linalg.inv(a1) @ np.linalg.inv(b1)
    _, vecs = np.linalg.eig(c)
    elliptic = vecs @ np.diag([np.exp(0.5j * theta), np.exp(-0.5j * theta)]) @ np.linalg.inv(vecs)
    elliptic_inv = np.linalg.inv(elliptic)
    a2 = elliptic @ a2 @ elliptic_inv
    b2 = elliptic @ b2 @ elliptic_inv

    inv_a2 = np.linalg.inv(a2)
    inv_b2 = np.linalg.inv(b2)
    g0 = a1
    g1 = inv_a2 @ b1
    g3 = inv_b2 @ g1
    g2 = inv_a2 @ g3
    images = tuple(MobiusMap.from_matrix(m) for m in (g0, g1, g2, g3))
    bent = Representation(images, "bent", float(theta))

    error = bent.relator_error()
    if error > BEND_RELATOR_TOL:
        raise RuntimeError(f"bending broke the relator (error {error:.3e})")
    return bent


def representation_from_spec(label: str, theta: float,
                             presentation: Optional[GroupPresentation] = None) -> Representation:
    base = fuchsian_inclusion(presentation)
    return base if label == "fuchsian" else bend(base, theta)


def rep_eval(rep: Representation, word: Union[str, Iterable[int]]) -> MobiusMap:
    """
    Evaluate a word under the representation, left to right.

    Raises:
        ValueError: On an unknown generator symbol
    """
    return MobiusMap.from_matrix(_product(rep.generator_array(), _as_word(word)), normalize=False)


def rep_eval_many(rep: Representation, words: Sequence[Word]) -> np.ndarray:
    """Images of many words as a (n, 2, 2) complex array."""
    mats = rep.generator_array()
    cache: Dict[Word, np.ndarray] = {(): np.eye(2, dtype=complex)}
    out = np.empty((len(words), 2, 2), dtype=complex)
    for i, w in enumerate(words):
        w = tuple(w)
        if w not in cache:
            prefix = w[:-1]
            if prefix not in cache:
                cache[prefix] = _product(mats, prefix)
            cache[w] = cache[prefix] @ mats[w[-1]]
        out[i] = cache[w]
    return out


if __name__ == "__main__":
    pres = octagon_generators()
    print(f"📊 relator error {pres.relator_error():.2e}, commutator error {pres.commutator_error():.2e}")
    b = ball(6.0, verbose=True)
    print(f"📊 B_6 has {len(b)} elements")
