import dataclasses

import numpy as np
import pytest

from conftest import load_spec
from osb_lib import (
    ConstructionRejectedError,
    GateFailureError,
    InvalidInputError,
    LinearImage,
    boundary_project,
    check_involution,
    gate_tolerance,
    gauge,
    gauge_batch,
    make_ball,
    make_bumped_ball,
    make_interval,
    make_l2_sum,
    make_lagrangian_sum,
    make_linear_image,
    make_lp_ball,
    make_patched_selfpolar,
    make_symplectic_l2_sum,
    normalize_self_polar,
    numeric_polar,
    parse_spec,
    polar_of,
    realize,
    sample_boundary,
    self_polarity_defect,
    smoothstep,
    support,
)


def test_interval_and_its_dual():
    interval = make_interval(2.0)
    assert gauge(interval, [1.0]) == pytest.approx(0.5)
    dual = interval.dual()
    assert gauge(dual, [1.0]) == pytest.approx(2.0)
    assert support(interval, [3.0]) == pytest.approx(6.0)
    with pytest.raises(InvalidInputError):
        make_interval(0.0)


def test_lp_ball_smoothness_tags():
    assert make_lp_ball(4.0, 2).smoothness == 'Cinf'
    assert make_lp_ball(3.0, 2).smoothness == 'C2'
    assert make_lp_ball(1.5, 2).smoothness == 'C1'
    assert make_lp_ball(2.0, 4).label == 'ball4'
    with pytest.raises(InvalidInputError):
        make_lp_ball(1.0, 2)


def test_l2_sum_gauge_and_smoothness():
    body = make_l2_sum(make_interval(1.0), make_interval(0.5))
    assert body.dim == 2
    assert gauge(body, [3.0, 2.0]) == pytest.approx(5.0)
    assert body.smoothness == 'Cinf'
    mixed = make_l2_sum(make_ball(2, phase_space=False), make_lp_ball(4.0, 2, phase_space=False))
    assert mixed.smoothness == 'C1'
    assert mixed.hessian is None


def test_l2_sum_support_matches_numeric_polar():
    body = make_l2_sum(make_interval(1.0), make_lp_ball(4.0, 3, phase_space=False))
    polar = numeric_polar(body)
    rng = np.random.default_rng(8)
    for _ in range(5):
        u = rng.standard_normal(4)
        assert gauge(polar, u) == pytest.approx(gauge(polar_of(body), u), rel=1e-9)


def test_lagrangian_sum_is_self_polar(lagrangian_l4):
    assert lagrangian_l4.dim == 4
    assert lagrangian_l4.smoothness == 'C1'
    assert self_polarity_defect(lagrangian_l4, 64, 0).passed


def test_lagrangian_sum_of_a_ball_is_the_ball():
    body = make_lagrangian_sum(make_ball(2, phase_space=False))
    rng = np.random.default_rng(1)
    points = rng.standard_normal((20, 4))
    np.testing.assert_allclose(gauge_batch(body, points), np.linalg.norm(points, axis=1), rtol=1e-14)


def test_symplectic_sum_is_self_polar(symplectic_sum):
    assert symplectic_sum.dim == 4
    assert symplectic_sum.meta['permutation'] == [0, 2, 1, 3]
    assert self_polarity_defect(symplectic_sum, 64, 0).passed
    x = boundary_project(symplectic_sum, [0.3, -1.0, 0.7, 0.2])
    assert check_involution(symplectic_sum, x).defect <= 1e-8


def test_symplectic_sum_rejects_a_non_self_polar_summand():
    with pytest.raises(InvalidInputError):
        make_symplectic_l2_sum(make_lp_ball(4.0, 2), make_ball(2))


def test_linear_image_gauge_and_symplectic_flag(ellipse):
    assert gauge(ellipse, [2.0, 0.0]) == pytest.approx(1.0)
    assert gauge(ellipse, [0.0, 0.5]) == pytest.approx(1.0)
    assert ellipse.meta['is_symplectic']
    stretched = make_linear_image(make_ball(2), 2.0 * np.eye(2))
    assert not stretched.meta['is_symplectic']


def test_linear_image_rejects_singular_matrices():
    with pytest.raises(InvalidInputError):
        make_linear_image(make_ball(2), [[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(InvalidInputError):
        make_linear_image(make_ball(2), np.eye(3))


def test_numeric_polar_of_the_l4_disk():
    body = make_lp_ball(4.0, 2)
    polar = numeric_polar(body)
    assert polar.smoothness == 'C2'
    expected = np.sum(np.abs([0.6, 0.8]) ** (4.0 / 3.0)) ** 0.75
    assert gauge(polar, [0.6, 0.8]) == pytest.approx(expected, rel=1e-9)
    assert polar.dual() is body


@pytest.mark.slow
def test_bipolar_of_a_body_without_a_support_shortcut():
    body = make_bumped_ball(2, 0.2, 0.03)
    # strip the closed forms so both polar layers maximize numerically
    polar = dataclasses.replace(numeric_polar(body), support_point=None, dual=None)
    bipolar = numeric_polar(polar)
    for angle in np.linspace(0.05, np.pi, 6, endpoint=False):
        v = np.array([np.cos(angle), np.sin(angle)])
        assert gauge(bipolar, v) == pytest.approx(float(gauge(body, v)), rel=1e-6)


@pytest.mark.parametrize('name', ['lagrangian_l4', 'symplectic_sum'])
def test_sum_bodies_satisfy_the_involution(request, name):
    body = request.getfixturevalue(name)
    worst = max(check_involution(body, p.x).defect for p in sample_boundary(body, 1000, 0))
    assert worst <= gate_tolerance(body, 1e-8, 1e-5)


def test_normalize_scaled_disk():
    spec = parse_spec('{"type": "linear_image", "inner": {"type": "ball", "dim": 2},'
                      ' "matrix": [[2, 0], [0, 2]], "v": 1}')
    body = realize(spec)
    normalized = normalize_self_polar(body)
    assert normalized.meta['alpha'] == pytest.approx(4.0)
    assert gauge(normalized, [1.0, 0.0]) == pytest.approx(1.0)
    assert isinstance(normalized.spec, LinearImage)
    assert normalized.spec.inner == spec
    assert normalized.spec.matrix == ((0.5, 0.0), (0.0, 0.5))
    assert self_polarity_defect(normalized, 32, 0).passed


def test_normalize_rejects_the_l4_disk():
    with pytest.raises(GateFailureError):
        normalize_self_polar(make_lp_ball(4.0, 2))


def test_smoothstep_limits():
    values = smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_allclose(values, [0.0, 0.0, 0.5, 1.0, 1.0])


def test_patched_body_without_bump_is_the_ball():
    body = make_patched_selfpolar(1, 0.2, 0.0, seed=0)
    rng = np.random.default_rng(2)
    points = rng.standard_normal((50, 2))
    np.testing.assert_allclose(gauge_batch(body, points), np.linalg.norm(points, axis=1), rtol=1e-12)


def test_patched_parameters_are_range_checked():
    with pytest.raises(InvalidInputError):
        make_patched_selfpolar(1, 0.8, 0.1, seed=0)
    with pytest.raises(InvalidInputError):
        make_patched_selfpolar(1, 0.2, 1.0, seed=0)
    with pytest.raises(InvalidInputError):
        make_patched_selfpolar(0, 0.2, 0.1, seed=0)


@pytest.mark.slow
def test_patched_body_passes_its_own_validation(patched2):
    validation = patched2.meta['validation']
    assert validation['convexity'] <= patched2.tolerances.eq_tol
    assert validation['self_polarity'] <= 1e-5
    assert validation['seam_continuity'] <= 1e-4
    assert patched2.smoothness == 'Cinf'


@pytest.mark.slow
def test_patched_body_in_four_dimensions(patched4):
    assert patched4.dim == 4
    assert patched4.meta['validation']['self_polarity'] <= 1e-5
    assert patched4.meta['spec_hash'] == realize(load_spec('patched4')).meta['spec_hash']


@pytest.mark.slow
def test_overly_large_bump_is_rejected():
    with pytest.raises(ConstructionRejectedError) as excinfo:
        realize(load_spec('broken_patched'))
    assert excinfo.value.metric == 'convexity'
    assert excinfo.value.details['metric'] == 'convexity'
