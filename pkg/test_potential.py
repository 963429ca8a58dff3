import math

import numpy as np
import pytest

from constants import BASE_POINT, ConfigError
from group import octagon_generators
from hypgeom import (
    BoundaryPoint,
    HPoint,
    ProjPoint,
    busemann_closed_form,
    geodesic_point,
    hdist,
    mobius_apply,
    polar_points,
)
from measures import EmpiricalMeasure
from potential import (
    Potential,
    delta_cocycle,
    distortion_constant,
    estimate_pressure,
    f_harmonic_eval,
    geodesic_integral,
    gibbs_kernel,
    h0_ratio,
    kappa,
    ledrappier_atoms,
    orbital_sums,
)

BUMP = Potential.bump(0.5)

TRIPLES = [
    (complex(0.1, 1.2), complex(-0.5, 0.8), complex(0.7, 2.1), BoundaryPoint.from_angle(0.4)),
    (complex(-1.0, 0.5), complex(0.3, 1.5), complex(0.0, 0.9), BoundaryPoint.from_angle(2.9)),
    (complex(0.6, 0.4), complex(0.2, 3.0), complex(-0.8, 1.1), BoundaryPoint.infinity()),
]


@pytest.mark.parametrize("spec, kind", [("zero", "zero"), ("const:0.3", "constant"), ("bump:0.5", "bump"),
                                        ("bump:0.2+1.3i,0.6,-0.4", "bump")])
def test_potential_from_spec(spec, kind):
    assert Potential.from_spec(spec).kind == kind


@pytest.mark.parametrize("spec", ["one", "const:x", "bump:1,2", "bump:0-1i,0.5,1"])
def test_bad_potential_spec(spec):
    with pytest.raises(ConfigError):
        Potential.from_spec(spec)


def test_constant_integral_is_length_times_constant():
    z1, z2 = complex(0.3, 0.5), complex(-2.0, 4.0)
    assert geodesic_integral(Potential.const(0.3), z1, z2) == pytest.approx(0.3 * hdist(z1, z2), rel=1e-12)
    assert kappa(Potential.zero(), z1, z2) == 1.0


def test_bump_is_group_invariant():
    z = complex(0.4, 1.3)
    for g in octagon_generators().generators:
        moved = mobius_apply(g, HPoint(z)).z
        assert BUMP(moved) == pytest.approx(BUMP(z), abs=1e-9)


def test_bump_peaks_at_its_center():
    # other orbit points of o are a translation length away, beyond the radius
    assert BUMP(HPoint(1j)) == pytest.approx(0.5)
    assert Potential.bump(0.5, radius=0.3)(HPoint(complex(0.0, math.exp(0.4)))) == 0.0


def test_bump_integral_is_additive_along_geodesics():
    z1, z3 = complex(-0.7, 0.6), complex(1.1, 2.5)
    z2 = geodesic_point(z1, z3, 0.37 * hdist(z1, z3)).z
    whole = geodesic_integral(BUMP, z1, z3)
    parts = geodesic_integral(BUMP, z1, z2) + geodesic_integral(BUMP, z2, z3)
    assert whole == pytest.approx(parts, abs=1e-7)


def test_bump_integral_is_symmetric():
    z1, z2 = complex(0.2, 0.3), complex(-1.4, 1.9)
    assert geodesic_integral(BUMP, z1, z2) == pytest.approx(geodesic_integral(BUMP, z2, z1), abs=1e-8)


def test_shifted_potential_adds_constant():
    z1, z2 = complex(0.2, 0.3), complex(-1.4, 1.9)
    shifted = BUMP.shifted(0.3)
    expected = geodesic_integral(BUMP, z1, z2) + 0.3 * hdist(z1, z2)
    assert geodesic_integral(shifted, z1, z2) == pytest.approx(expected, abs=1e-9)
    assert Potential.zero().shifted(0.3) == Potential.const(0.3)


def test_delta_of_constant_potential_is_exponential_busemann():
    y, z, _, xi = TRIPLES[0]
    expected = math.exp(0.3 * busemann_closed_form(xi, y, z))
    assert delta_cocycle(Potential.const(0.3), y, z, xi) == pytest.approx(expected, rel=1e-5)


@pytest.mark.parametrize("F", [Potential.zero(), Potential.const(0.3), BUMP])
@pytest.mark.parametrize("y, z, w, xi", TRIPLES)
def test_gibbs_cocycle_relations(F, y, z, w, xi):
    P = 1.2
    assert delta_cocycle(F, y, z, xi) * delta_cocycle(F, z, w, xi) == pytest.approx(
        delta_cocycle(F, y, w, xi), rel=1e-5)
    assert gibbs_kernel(F, y, z, xi, P) * gibbs_kernel(F, z, w, xi, P) == pytest.approx(
        gibbs_kernel(F, y, w, xi, P), rel=1e-5)
    assert delta_cocycle(F, y, z, xi) * delta_cocycle(F, z, y, xi) == pytest.approx(1.0, rel=1e-5)


def test_kernel_equals_delta_on_a_horosphere():
    xi = BoundaryPoint.infinity()
    y, z = complex(-0.4, 1.1), complex(0.9, 1.1)
    assert gibbs_kernel(BUMP, y, z, xi, 1.3) == pytest.approx(delta_cocycle(BUMP, y, z, xi), rel=1e-5)


def test_pressure_window_validation(ball_8):
    with pytest.raises(ValueError):
        estimate_pressure(Potential.zero(), ball_8, (6.0, 8.0))
    with pytest.raises(ValueError):
        estimate_pressure(Potential.zero(), ball_8, (6.0, 11.0))


def test_orbital_sums_of_zero_potential_count_elements(ball_8):
    sums = orbital_sums(Potential.zero(), ball_8, [4.0, 8.0])
    assert sums[0] == np.sum(ball_8.dists <= 4.0)
    assert sums[1] == len(ball_8)


@pytest.mark.slow
def test_pressure_of_zero_potential(ball_11):
    estimate = estimate_pressure(Potential.zero(), ball_11, (8.0, 11.0))
    assert estimate.value == pytest.approx(1.0, abs=0.15)
    assert estimate.to_dict()["slope"] == estimate.value


@pytest.mark.slow
def test_pressure_shifts_with_constants(ball_11):
    base = estimate_pressure(Potential.zero(), ball_11, (8.0, 11.0)).value
    shifted = estimate_pressure(Potential.const(0.3), ball_11, (8.0, 11.0)).value
    assert shifted - base == pytest.approx(0.3, abs=0.05)


@pytest.mark.slow
def test_negative_bump_does_not_raise_pressure(ball_11):
    base = estimate_pressure(Potential.zero(), ball_11, (8.0, 11.0)).value
    lowered = estimate_pressure(Potential.bump(-0.5), ball_11, (8.0, 11.0)).value
    assert lowered <= base + 0.05


def test_ledrappier_atoms_exclude_identity(ball_8):
    angles, weights = ledrappier_atoms(Potential.zero(), ball_8, 1.0)
    assert len(angles) == len(ball_8) - 1
    assert np.all(weights > 0)
    assert np.all((angles >= 0) & (angles < 2 * math.pi))


def test_h0_ratio_of_zero_potential(ball_8):
    assert h0_ratio(Potential.zero(), ball_8, 1.0, BASE_POINT) == 1.0
    z = complex(polar_points(np.array([0.3]), np.array([0.5]))[0])
    assert h0_ratio(Potential.zero(), ball_8, 1.0, z) == pytest.approx(1.0, abs=0.05)


def test_distortion_constant_of_constant_potential():
    C, samples = distortion_constant(Potential.const(0.3), 4.0, n_samples=50, seed=1)
    assert C == pytest.approx(0.0, abs=1e-9)
    assert len(samples) == 50


def test_distortion_constant_of_bump_is_finite():
    C, _ = distortion_constant(BUMP, 4.0, n_samples=40, seed=2)
    assert 0.0 < C < 10.0


def test_harmonic_function_at_base_point_is_mass():
    eta = EmpiricalMeasure.from_angles([0.4, 2.0, 5.1])
    assert f_harmonic_eval(BUMP, eta, BASE_POINT) == pytest.approx(1.0)


def test_visual_measure_gives_constant_harmonic_function():
    eta = EmpiricalMeasure.from_angles((np.arange(64) + 0.5) * 2 * math.pi / 64)
    z = complex(polar_points(np.array([1.1]), np.array([0.5]))[0])
    assert f_harmonic_eval(Potential.zero(), eta, z) == pytest.approx(1.0, abs=1e-4)


def test_harmonic_function_absorbs_constant_shifts():
    eta = EmpiricalMeasure.from_angles([0.3, 1.9, 4.4], [0.5, 0.2, 0.3])
    z = complex(0.4, 1.7)
    shifted = f_harmonic_eval(Potential.const(0.3), eta, z, P=1.3)
    assert shifted == pytest.approx(f_harmonic_eval(Potential.zero(), eta, z, P=1.0), rel=1e-5)


def test_harmonic_function_needs_boundary_measure():
    with pytest.raises(ValueError):
        f_harmonic_eval(BUMP, EmpiricalMeasure.dirac(ProjPoint.infinity()), 2j)
