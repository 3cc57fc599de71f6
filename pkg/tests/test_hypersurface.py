import math

import numpy as np
import pytest

from osb_lib import (
    InvalidInputError,
    area_construction_2d,
    area_ratio_2d,
    boundary_project,
    char_image_defect,
    hausdorff_distance,
    injectivity_check,
    invariance_defect,
    line_two_point_check,
    planarity_defect,
    radial_function_2d,
    radial_transversality,
    sample_Y,
    shoelace_area,
    star_shape_check,
    y_grid_distance,
    y_radius,
)


def circle(radius, n, center=(0.0, 0.0)):
    theta = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])


def test_Y_of_the_disk_is_the_sqrt2_circle(disk):
    sample = sample_Y(disk, 360)
    np.testing.assert_allclose(np.linalg.norm(sample.images, axis=1), math.sqrt(2.0), rtol=1e-14)
    assert np.all(np.diff(sample.angles) > 0.0)
    assert sample.n_samples == 360


def test_Y_sample_in_four_dimensions(ball4):
    sample = sample_Y(ball4, 50, seed=3)
    assert sample.order is None
    np.testing.assert_allclose(np.linalg.norm(sample.images, axis=1), math.sqrt(2.0), rtol=1e-14)


@pytest.mark.parametrize('name', ['disk', 'ellipse', 'ball4'])
def test_Y_is_invariant(request, name):
    body = request.getfixturevalue(name)
    rng = np.random.default_rng(4)
    for _ in range(10):
        point = boundary_project(body, rng.standard_normal(body.dim))
        assert invariance_defect(body, point) <= 1e-9


def test_exact_radius_of_Y(ball4, ellipse):
    s, x = y_radius(ball4, [1.0, 2.0, -1.0, 0.5])
    assert s == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert np.linalg.norm(x) == pytest.approx(1.0)
    s, _ = y_radius(ellipse, [1.0, 0.0])
    assert s == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-10)
    with pytest.raises(InvalidInputError):
        y_radius(ellipse, [0.0, 0.0])


def test_sampled_radial_function(disk):
    sample = sample_Y(disk, 720)
    radii = radial_function_2d(sample, np.linspace(-3.0, 3.0, 13))
    np.testing.assert_allclose(radii, math.sqrt(2.0), rtol=1e-4)
    assert radial_function_2d(sample, 0.3) == pytest.approx(math.sqrt(2.0), rel=1e-4)


def test_star_shape_in_the_plane(disk, ellipse):
    for body in (disk, ellipse):
        report = star_shape_check(body, 500)
        assert report.passed
        assert report.winding == pytest.approx(2.0 * np.pi)
        assert report.monotonicity_defect == 0.0


def test_star_shape_of_the_ball(ball4):
    report = star_shape_check(ball4, 30, seed=1, n_rays=10)
    assert report.passed
    assert report.ray_multiplicity == 1
    assert report.min_jacobian_sv > 0.5


def test_transversality_of_the_ball(ball4, disk):
    assert radial_transversality(ball4, [0.0, 0.6, 0.8, 0.0]) == pytest.approx(1.0, abs=1e-12)
    assert radial_transversality(disk, [0.6, 0.8]) == pytest.approx(1.0, abs=1e-12)


def test_two_point_property_on_the_disk(disk):
    report = line_two_point_check(disk, [1.0, 0.0])
    assert report.passed
    assert report.count == 2
    np.testing.assert_allclose(sorted(report.crossings), [-1.0, 1.0], atol=1e-9)


def test_two_point_property_with_a_sampled_curve(ellipse):
    sample = sample_Y(ellipse, 2048)
    report = line_two_point_check(ellipse, [0.0, 0.5], sample=sample)
    assert report.count == 2
    assert report.max_offset <= 1e-6


def test_characteristics_of_the_ball_are_planar(ball4):
    report = planarity_defect(ball4, [0.6, 0.0, 0.0, 0.8], 2.0 * np.pi, 400)
    assert report.gamma_defect <= 1e-10
    assert report.delta_char_defect <= 1e-8


def test_char_image_defect_vanishes_for_linear_images(ball4, ellipse):
    assert char_image_defect(ball4, [0.0, 0.6, 0.8, 0.0]) <= 1e-8
    assert char_image_defect(ball4, [0.0, 0.6, 0.8, 0.0], sign=-1) <= 1e-8
    assert char_image_defect(ellipse, [2.0, 0.0]) <= 1e-8
    with pytest.raises(InvalidInputError):
        char_image_defect(ellipse, [2.0, 0.0], sign=0)


def test_injectivity_of_the_Y_map(disk, ball4):
    report = injectivity_check(sample_Y(disk, 500))
    assert report.passed
    assert report.collisions == 0
    assert report.min_ratio == pytest.approx(math.sqrt(2.0), rel=1e-6)
    assert injectivity_check(sample_Y(ball4, 300, seed=2)).passed


def test_grid_distance_to_Y(disk):
    sample = sample_Y(disk, 100)
    assert y_grid_distance(sample, sample.images[7]) == 0.0
    assert y_grid_distance(sample, [0.0, 0.0]) == pytest.approx(math.sqrt(2.0))


def test_area_construction_recovers_the_unit_circle():
    recovered = area_construction_2d(circle(math.sqrt(2.0), 10000))
    np.testing.assert_allclose(np.linalg.norm(recovered.vertices, axis=1), 1.0, atol=1e-6)
    assert recovered.closed


def test_area_construction_accepts_clockwise_curves():
    forward = area_construction_2d(circle(math.sqrt(2.0), 2000))
    backward = area_construction_2d(circle(math.sqrt(2.0), 2000)[::-1])
    assert hausdorff_distance(forward, backward) <= 1e-6
    assert shoelace_area(backward) == pytest.approx(math.pi, rel=1e-4)


def test_area_construction_rejects_bad_curves():
    with pytest.raises(InvalidInputError):
        area_construction_2d(circle(1.0, 500))
    with pytest.raises(InvalidInputError):
        area_construction_2d(circle(0.5, 500, center=(2.0, 0.0)))
    with pytest.raises(InvalidInputError):
        area_construction_2d([[1.0, 0.0], [0.0, 1.0]])


@pytest.mark.parametrize('name', ['disk', 'ellipse'])
def test_area_construction_round_trip(request, name):
    body = request.getfixturevalue(name)
    sample = sample_Y(body, 10000)
    recovered = area_construction_2d(sample.images[sample.order])
    assert recovered.vertices.shape == (10000, 2)
    assert hausdorff_distance(recovered, sample.sources) <= 1e-5


def test_area_ratio_is_two(disk, ellipse):
    assert area_ratio_2d(disk, 1000) == pytest.approx(2.0, abs=1e-12)
    assert area_ratio_2d(ellipse, 100000) == pytest.approx(2.0, abs=1e-4)


def test_hausdorff_distance_between_circles():
    assert hausdorff_distance(circle(1.0, 1000), circle(1.1, 1000)) == pytest.approx(0.1, abs=1e-3)
    assert hausdorff_distance(circle(1.0, 50), circle(1.0, 50)) == 0.0
