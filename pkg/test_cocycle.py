import math

import numpy as np
import pytest

from constants import SpectrumError
from cocycle import (
    DiscreteCocycle,
    basin_check,
    cocycle_product,
    contraction_rate,
    fuchsian_section,
    lyapunov_section_plus,
    lyapunov_sections_batch,
    lyapunov_top,
    oseledets_flags,
)
from group import Representation, bend, rep_eval
from hypgeom import HPoint, MobiusMap, ProjPoint, UnitTangent, flow, push_tangent
from potential import Potential

HALF_LOG_2 = math.log(2.0) / 2.0


@pytest.fixture(scope="module")
def demo2():
    return DiscreteCocycle.demo("demo2")


@pytest.fixture(scope="module")
def demo2_flag(demo2):
    return oseledets_flags(demo2, seed=0, n_steps=10_000)


def sample_vectors(n, seed):
    rng = np.random.default_rng(seed)
    return [UnitTangent(HPoint(complex(rng.uniform(-1, 1), rng.uniform(0.5, 2.0))), rng.uniform(0, 2 * math.pi))
            for _ in range(n)]


def test_cocycle_rejects_non_unimodular_matrices():
    with pytest.raises(ValueError):
        DiscreteCocycle(np.array([[[2.0, 0.0], [0.0, 1.0]]]), np.array([1.0]))


def test_cocycle_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        DiscreteCocycle(np.array([np.eye(2), np.eye(2)]), np.array([0.7, 0.7]))


def test_chain_rule_is_exact(demo2):
    symbols = demo2.sample_symbols(np.random.default_rng(5), 40)
    for n, m in [(3, 7), (10, 10), (1, 19)]:
        whole = cocycle_product(demo2, symbols, 4, n + m)
        split = cocycle_product(demo2, symbols, 4 + n, m) @ cocycle_product(demo2, symbols, 4, n)
        assert np.array_equal(whole, split)


def test_diagonal_cocycle_exponents():
    flag = oseledets_flags(DiscreteCocycle.demo("diag"), seed=1, n_steps=2000)
    assert flag.exponents == pytest.approx([-math.log(2.0), math.log(2.0)], abs=1e-12)


def test_demo2_spectrum(demo2_flag):
    exponents = demo2_flag.exponents
    assert exponents[0] < exponents[1]
    assert exponents[1] == pytest.approx(HALF_LOG_2, abs=0.02)
    assert np.sum(exponents) == pytest.approx(0.0, abs=1e-6)
    assert exponents[1] - exponents[0] > 0.5


def test_demo2_top_direction_is_the_invariant_line(demo2_flag):
    assert np.max(np.abs(demo2_flag.top[:, 1])) < 1e-6


def test_demo2_directions_are_covariant(demo2, demo2_flag):
    for t in range(0, 9_000, 997):
        k = demo2_flag.symbols[t]
        pushed = demo2.matrices[k] @ demo2_flag.bottom[t]
        assert ProjPoint.from_vector(pushed).chordal(ProjPoint.from_vector(demo2_flag.bottom[t + 1])) < 1e-6


def test_identity_cocycle_has_no_simple_spectrum():
    with pytest.raises(SpectrumError):
        oseledets_flags(DiscreteCocycle(np.array([np.eye(2)]), np.array([1.0])), n_steps=1000)


def test_oseledets_needs_enough_steps(demo2):
    with pytest.raises(ValueError):
        oseledets_flags(demo2, n_steps=100)


@pytest.mark.slow
def test_demo2_exponent_matches_long_run(demo2, demo2_flag):
    rng = np.random.default_rng(11)
    symbols = demo2.sample_symbols(rng, 1_000_000)
    # e1 is invariant, so the top exponent is the mean log of the (0, 0) entries
    oracle = np.mean(np.log(np.abs(demo2.matrices[symbols, 0, 0])))
    assert demo2_flag.exponents[1] == pytest.approx(oracle, abs=0.02)


@pytest.mark.slow
def test_demo2_basins(demo2, demo2_flag):
    report = basin_check(demo2, demo2_flag, n_points=100, n_steps=10_000, seed=0)
    generic = [p for p in report.per_point if p["prepared"] == "generic"]
    assert sum(p["W1_to_mu_top"] < 0.05 for p in generic) >= 98
    prepared = [p for p in report.per_point if p["prepared"] == "sigma1"]
    assert all(p["W1_to_mu_bottom"] < p["W1_to_mu_top"] for p in prepared)


def test_basin_report_fraction(demo2, demo2_flag):
    report = basin_check(demo2, demo2_flag, n_points=3, n_steps=2000, seed=4, n_prepared=0)
    assert len(report.per_point) == 3
    assert 0.0 <= report.fraction_within(0.05) <= 1.0
    assert report.to_dict()["exponents"] == [float(e) for e in demo2_flag.exponents]


def test_fuchsian_top_exponent_is_one_half(fuchsian, ball_8):
    assert lyapunov_top(fuchsian, ball_8, Potential.zero(), 8.0) == pytest.approx(0.5, abs=1e-9)


def test_lyapunov_top_validation(fuchsian, ball_8):
    with pytest.raises(ValueError):
        lyapunov_top(fuchsian, ball_8, Potential.zero(), 4.0)
    with pytest.raises(ValueError):
        lyapunov_top(fuchsian, ball_8.restrict(6.0), Potential.zero(), 8.0)


def test_bent_top_exponent_is_positive(bent, ball_8):
    assert 0.0 < lyapunov_top(bent, ball_8, Potential.zero(), 8.0) < 0.6


def test_top_exponent_drifts_slowly_with_bending(fuchsian, ball_8):
    values = [lyapunov_top(bend(fuchsian, t), ball_8, Potential.zero(), 8.0) for t in (0.0, 0.1, 0.2, 0.3)]
    assert values[0] == pytest.approx(0.5, abs=1e-9)
    assert all(abs(v - 0.5) < 0.1 for v in values)
    assert np.all(np.abs(np.diff(values)) < 0.06)


def test_lyapunov_top_rejects_scaled_images(fuchsian, ball_8):
    scaled = Representation(tuple(MobiusMap.from_matrix(2.0 * m.matrix(), normalize=False) for m in fuchsian.images),
                            "scaled")
    with pytest.raises(ValueError, match="determinant"):
        lyapunov_top(scaled, ball_8, Potential.zero(), 8.0)


def test_fuchsian_section_is_backward_endpoint(fuchsian):
    for v in sample_vectors(10, 1):
        section = lyapunov_section_plus(fuchsian, v, T=25)
        assert section.chordal(fuchsian_section(v)) < 1e-4


def test_section_batch_matches_single_calls(fuchsian):
    vectors = sample_vectors(4, 2)
    batch = lyapunov_sections_batch(fuchsian, vectors, T=10, threads=2, seed=3)
    for v, s in zip(vectors, batch):
        assert s.chordal(fuchsian_section(v)) < 1e-4


def test_section_is_equivariant(bent, fuchsian):
    v = sample_vectors(1, 9)[0]
    for g_word in [(0,), (2,)]:
        g = rep_eval(fuchsian, g_word)
        moved = lyapunov_section_plus(bent, push_tangent(g, v), T=10)
        expected = ProjPoint.from_vector(rep_eval(bent, g_word).matrix() @ lyapunov_section_plus(bent, v, T=10).vector())
        assert moved.chordal(expected) < 1e-3


def test_section_time_validation(fuchsian):
    with pytest.raises(ValueError):
        lyapunov_section_plus(fuchsian, sample_vectors(1, 0)[0], T=2)
    with pytest.raises(ValueError):
        lyapunov_section_plus(fuchsian, sample_vectors(1, 0)[0], tol=0.0)


def test_section_tolerance_is_honored(fuchsian):
    v = sample_vectors(1, 4)[0]
    exact = fuchsian_section(v)
    # any tolerance above 1 stops after the first step
    loose = lyapunov_section_plus(fuchsian, v, T=5, tol=1.01)
    strict = lyapunov_section_plus(fuchsian, v, T=5, tol=1e-8)
    assert loose.chordal(exact) < 0.05
    assert strict.chordal(exact) < 1e-6
    assert loose.chordal(strict) > 1e-9


def test_section_batch_passes_tolerance(fuchsian):
    vectors = sample_vectors(3, 6)
    batch = lyapunov_sections_batch(fuchsian, vectors, T=5, threads=2, tol=1.01)
    for v, s in zip(vectors, batch):
        assert s == lyapunov_section_plus(fuchsian, v, T=5, tol=1.01)


@pytest.mark.parametrize("t", [1.5, -2.0])
def test_section_is_constant_along_flow_lines(bent, t):
    v = sample_vectors(1, 12)[0]
    here = lyapunov_section_plus(bent, v, T=10)
    there = lyapunov_section_plus(bent, flow(v, t), T=10)
    assert here.chordal(there) < 1e-3


@pytest.mark.slow
def test_fuchsian_sections_are_real(fuchsian):
    vectors = sample_vectors(100, 21)
    for v, s in zip(vectors, lyapunov_sections_batch(fuchsian, vectors, T=10, threads=4, seed=2)):
        assert s.is_real(1e-12)
        assert s.chordal(fuchsian_section(v)) < 1e-4


def test_contraction_rate_matches_exponent_gap(demo2, demo2_flag):
    gap = demo2_flag.exponents[-1] - demo2_flag.exponents[-2]
    assert contraction_rate(demo2, demo2_flag, seed=3) == pytest.approx(gap, rel=0.25)


def test_contraction_rate_needs_room(demo2, demo2_flag):
    with pytest.raises(ValueError):
        contraction_rate(demo2, demo2_flag, n_starts=1000, n_steps=25)
