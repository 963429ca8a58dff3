import math
import re

import numpy as np
import pytest
from scipy import stats

from constants import BASE_POINT, CIRCUMRADIUS, OCTAGON_TRACE, BallCapError
from group import (
    Ball,
    ball,
    bend,
    fuchsian_inclusion,
    octagon_generators,
    reduce_points,
    reduce_to_domain,
    rep_eval,
    rep_eval_many,
)
from hypgeom import MobiusMap, apply_array, hdist, polar_points


def test_octagon_relators_hold():
    presentation = octagon_generators()
    assert presentation.relator_error() < 1e-9
    assert presentation.commutator_error() < 1e-9


def test_generators_have_octagon_trace():
    for g in octagon_generators().generators:
        assert abs(g.trace()) == pytest.approx(OCTAGON_TRACE, abs=1e-12)
        assert g.is_normalized()


def test_word_evaluation_cancels_inverses():
    presentation = octagon_generators()
    assert presentation.evaluate("g2.G2").equals(MobiusMap.identity())
    assert presentation.evaluate("g0.g1").equals(presentation.evaluate((0,)) @ presentation.evaluate((1,)))


def test_unknown_symbol_is_rejected():
    with pytest.raises(ValueError):
        octagon_generators().evaluate("g0.h1")


def test_small_ball_is_identity_and_generators():
    elements = ball(3.1)
    assert len(elements) == 9
    assert elements.words == [()] + [(k,) for k in range(8)]
    assert elements[0].is_identity()
    assert np.allclose(elements.dists[1:], elements.dists[1])


def test_tiny_ball_is_identity_only():
    elements = ball(0.1)
    assert elements.words == [()]


def test_ball_rejects_non_positive_radius():
    with pytest.raises(ValueError):
        ball(0.0)


def test_ball_cap_is_reported():
    with pytest.raises(BallCapError) as excinfo:
        ball(8.0, cap=2)
    assert excinfo.value.frontier_size > 0


def test_ball_elements_are_distinct_and_sorted(ball_8):
    canon = {tuple(np.round(MobiusMap.from_matrix(m, normalize=False).canonical().matrix().ravel().real, 6))
             for m in ball_8.matrices}
    assert len(canon) == len(ball_8)
    lengths = [len(w) for w in ball_8.words]
    assert lengths == sorted(lengths)
    assert np.all(ball_8.dists <= 8.0)


def test_ball_matrices_match_words(ball_8):
    presentation = octagon_generators()
    for i in range(0, len(ball_8), max(1, len(ball_8) // 50)):
        element = ball_8[i]
        assert presentation.evaluate(element.word).equals(element.matrix, 1e-6 * max(1.0, math.exp(element.orbit_dist / 2)))


def test_restrict_keeps_order(ball_8):
    small = ball_8.restrict(5.0)
    assert small.words == [w for w, d in zip(ball_8.words, ball_8.dists) if d <= 5.0]
    assert small.radius == 5.0


def test_ball_csv_preserves_elements(ball_8, tmp_path):
    path = ball_8.restrict(5.0).to_csv(tmp_path / "ball.csv")
    loaded = Ball.from_csv(path, radius=5.0)
    assert loaded.words == ball_8.restrict(5.0).words
    assert np.allclose(loaded.dists, ball_8.restrict(5.0).dists, rtol=0, atol=1e-15)


@pytest.mark.slow
def test_ball_growth_rate(ball_11):
    radii = np.arange(6, 12, dtype=float)
    counts = [np.sum(ball_11.dists <= r) for r in radii]
    slope = stats.linregress(radii, np.log(counts)).slope
    assert 0.85 <= slope <= 1.15


def test_reduce_to_domain_lands_in_octagon():
    rng = np.random.default_rng(7)
    z = polar_points(rng.uniform(0, 2 * math.pi, 200), rng.uniform(0, 9, 200))
    for point in z:
        z0, gamma = reduce_to_domain(point)
        assert hdist(BASE_POINT, z0) <= CIRCUMRADIUS + 1e-6
        image = (gamma.matrix.a * z0.z + gamma.matrix.b) / (gamma.matrix.c * z0.z + gamma.matrix.d)
        assert abs(image - point) <= 1e-9 * max(1.0, abs(point))


def test_reduce_points_is_vectorized_reduce_to_domain():
    rng = np.random.default_rng(3)
    z = polar_points(rng.uniform(0, 2 * math.pi, 50), rng.uniform(0, 6, 50))
    z0, words, mats = reduce_points(z)
    assert np.allclose(apply_array(mats, z0), z, rtol=1e-9)
    for i in range(0, 50, 10):
        single, gamma = reduce_to_domain(z[i])
        assert single.z == pytest.approx(z0[i], abs=1e-12)
        assert gamma.word == words[i]


@pytest.mark.parametrize("alpha, r", [(0.3, 0.8), (2.0, 1.2), (4.4, 0.1)])
def test_reduction_is_constant_on_orbits(ball_8, alpha, r):
    elements = ball_8.restrict(5.0)
    z = polar_points(np.array([alpha]), np.array([r]))
    z0 = reduce_points(z)[0][0]
    images = apply_array(elements.matrices, np.full(len(elements), z[0]))
    reduced = reduce_points(images)[0]
    assert np.max(np.abs(reduced - z0)) < 1e-9


def test_threaded_ball_matches_serial(capsys):
    threaded = ball(7.0, threads=2, verbose=True)
    layers = [int(n) for n in re.findall(r"layer \d+: (\d+) new", capsys.readouterr().out)]
    # frontiers above 256 words take the threaded path
    assert max(layers) > 256
    serial = ball(7.0)
    assert threaded.words == serial.words
    assert np.array_equal(threaded.matrices, serial.matrices)
    assert np.array_equal(threaded.dists, serial.dists)


def test_fuchsian_inclusion_is_real_and_satisfies_relator(fuchsian):
    assert fuchsian.is_fuchsian()
    assert fuchsian.relator_error() < 1e-9


def test_bending_keeps_relator_and_leaves_psl2r(bent):
    assert bent.relator_error() < 1e-8
    assert not bent.is_fuchsian()
    assert bent.name == "bent:0.3"
    assert all(m.is_normalized(1e-9) for m in bent.images)


def test_bending_fixes_first_handle(fuchsian, bent):
    for name in ("a1", "b1"):
        assert bent.basis()[name].equals(fuchsian.basis()[name], 1e-8)


def test_zero_bend_is_identity(fuchsian):
    assert bend(fuchsian, 0.0) is fuchsian


@pytest.mark.parametrize("theta", [math.pi / 4, -1.0])
def test_bend_angle_is_bounded(fuchsian, theta):
    with pytest.raises(ValueError):
        bend(fuchsian, theta)


def test_bent_representation_cannot_be_bent_again(bent):
    with pytest.raises(ValueError):
        bend(bent, 0.1)


def test_bending_is_injective_on_small_balls(bent, ball_8):
    mats = rep_eval_many(bent, ball_8.restrict(6.0).words).reshape(-1, 4)
    minus = np.linalg.norm(mats[:, None, :] - mats[None, :, :], axis=-1)
    plus = np.linalg.norm(mats[:, None, :] + mats[None, :, :], axis=-1)
    separation = np.minimum(minus, plus)
    np.fill_diagonal(separation, np.inf)
    assert separation.min() > 1e-3


def test_rep_eval_many_matches_rep_eval(bent):
    words = [(), (0,), (0, 3, 6), (5, 5, 1), (7, 2)]
    mats = rep_eval_many(bent, words)
    for w, m in zip(words, mats):
        assert np.allclose(m, rep_eval(bent, w).matrix(), atol=1e-12)


def test_fuchsian_images_are_lattice_elements(fuchsian):
    presentation = octagon_generators()
    for word in [(0,), (1, 2), (3, 6, 1)]:
        assert rep_eval(fuchsian, word).equals(presentation.evaluate(word))
