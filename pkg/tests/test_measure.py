import math

import pytest

from osb_lib import (
    InvalidInputError,
    bounding_radius,
    mahler_bound,
    mahler_diagnostic,
    mc_volume,
    radial_volume_ratio,
    shoelace_area,
    signed_area,
    symplectic_parallelogram_area,
)


def test_shoelace_orientation():
    square = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]
    assert signed_area(square) == 2.0
    assert signed_area(square[::-1]) == -2.0
    assert shoelace_area(square[::-1]) == 2.0
    with pytest.raises(InvalidInputError):
        shoelace_area([[0.0, 0.0], [1.0, 0.0]])


def test_parallelogram_area():
    z = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]
    assert symplectic_parallelogram_area(*z) == 4.0
    with pytest.raises(InvalidInputError):
        symplectic_parallelogram_area([1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [2.0, -1.0])


def test_mahler_bound_values():
    assert mahler_bound(1) == 2.0
    assert mahler_bound(2) == 2.0
    assert mahler_bound(3) == pytest.approx(4.0 / 3.0)


def test_bounding_radius_of_the_ellipse(ellipse):
    assert bounding_radius(ellipse) == pytest.approx(3.0)


def test_disk_volume(disk):
    estimate = mc_volume(disk, 200000, seed=1)
    assert abs(estimate.value - math.pi) <= 4.0 * estimate.stderr
    assert estimate.box_radius == pytest.approx(1.5)


def test_volume_does_not_depend_on_threads(disk):
    one = mc_volume(disk, 50000, seed=9, threads=1)
    four = mc_volume(disk, 50000, seed=9, threads=4)
    assert one.value == four.value
    assert one.stderr == four.stderr


def test_volume_rejects_bad_counts(disk):
    with pytest.raises(InvalidInputError):
        mc_volume(disk, 0, seed=1)
    with pytest.raises(InvalidInputError):
        mc_volume(disk, 10, seed=1, threads=0)


@pytest.mark.slow
def test_ball_volume_against_the_bound(ball4):
    report = mahler_diagnostic(ball4, 1000000, seed=3)
    assert abs(report.vol_estimate - math.pi ** 2 / 2.0) <= 4.0 * report.stderr
    assert not report.flagged
    assert report.bound == 2.0


def test_radial_ratio_of_the_disk(disk):
    report = radial_volume_ratio(disk, 64, seed=0)
    assert report.ratio == pytest.approx(2.0, abs=1e-10)


def test_radial_ratio_of_the_ball(ball4):
    report = radial_volume_ratio(ball4, 32, seed=0)
    assert report.ratio == pytest.approx(4.0, abs=1e-8)
