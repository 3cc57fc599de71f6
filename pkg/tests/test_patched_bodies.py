import numpy as np
import pytest

from osb_lib import (
    area_construction_2d,
    area_ratio_2d,
    boundary_project,
    char_image_defect,
    check_involution,
    four_periodic_family,
    hausdorff_distance,
    invariance_defect,
    line_two_point_check,
    planarity_defect,
    sample_boundary,
    sample_Y,
    star_shape_check,
)

pytestmark = pytest.mark.slow

# inside the bump cone min_i u_i > eps of the 4-D patched body
CONE_POINT = [0.55, 0.45, 0.52, 0.48]


@pytest.fixture(scope='module')
def boundary2(patched2):
    return sample_boundary(patched2, 1000, 0)


@pytest.fixture(scope='module')
def y_sample2(patched2):
    return sample_Y(patched2, 10000)


def test_involution_on_the_planar_patched_body(patched2, boundary2):
    worst = max(check_involution(patched2, p.x).defect for p in boundary2)
    assert worst <= 1e-5


def test_four_periodic_family_on_the_planar_patched_body(patched2, boundary2):
    families = [four_periodic_family(patched2, p) for p in boundary2]
    assert max(family.max_edge_defect for family in families) <= 1e-5
    assert max(abs(family.area - 4.0) for family in families) <= 1e-6


def test_invariance_on_the_planar_patched_body(patched2, boundary2):
    assert max(invariance_defect(patched2, p) for p in boundary2) <= 1e-5


def test_Y_of_the_planar_patched_body_is_star_shaped(patched2):
    report = star_shape_check(patched2, 1000)
    assert report.passed
    assert report.winding == pytest.approx(2.0 * np.pi, abs=1e-6)


def test_characteristic_lines_meet_Y_twice(patched2, y_sample2):
    for point in sample_boundary(patched2, 100, 1):
        report = line_two_point_check(patched2, point, sample=y_sample2)
        assert report.count == 2, point.x
        assert report.max_offset <= 1e-5


def test_area_construction_recovers_the_patched_body(y_sample2):
    recovered = area_construction_2d(y_sample2.images[y_sample2.order])
    assert hausdorff_distance(recovered, y_sample2.sources) <= 1e-4


def test_area_ratio_of_the_planar_patched_body(patched2):
    assert abs(area_ratio_2d(patched2, 100000) - 2.0) <= 1e-4


def test_invariance_on_the_patched_body_in_four_dimensions(patched4):
    points = sample_boundary(patched4, 1000, 0)
    assert max(invariance_defect(patched4, p) for p in points) <= 1e-5


def test_Y_of_the_patched_body_in_four_dimensions_is_star_shaped(patched4):
    report = star_shape_check(patched4, 200, seed=0, n_rays=100)
    assert report.passed
    assert report.ray_multiplicity == 1


def test_patched_body_is_not_a_linear_image_of_the_ball(patched4, ball4):
    x = boundary_project(patched4, CONE_POINT).x
    assert char_image_defect(patched4, x) > 1e-6
    report = planarity_defect(patched4, x, 2.0 * np.pi, 400)
    assert max(report.gamma_defect, report.delta_char_defect) > 1e-6

    reference = boundary_project(ball4, CONE_POINT).x
    assert char_image_defect(ball4, reference) <= 1e-8
    assert planarity_defect(ball4, reference, 2.0 * np.pi, 400).gamma_defect <= 1e-10
