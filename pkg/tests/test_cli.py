import json
import math
import os

import numpy as np
import pytest
from click.testing import CliRunner

from conftest import SPECS_DIR
from osb_cli import cli

DISK = os.path.join(SPECS_DIR, 'disk.json')
L4_DISK = '{"type": "lp_ball", "p": 4.0, "dim": 2, "v": 1}'
LARGE_DISK = '{"type": "linear_image", "inner": {"type": "ball", "dim": 2}, "matrix": [[2, 0], [0, 2]], "v": 1}'


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def write_circle(path, radius, n):
    theta = 2.0 * np.pi * np.arange(n) / n
    lines = ['x,y'] + [f"{radius * math.cos(t)!r},{radius * math.sin(t)!r}" for t in theta]
    path.write_text('\n'.join(lines) + '\n')
    return str(path)


def test_body_evaluates_the_gauge(runner):
    result = runner.invoke(cli, ['body', '--spec', DISK, '--eval', '1,0', '--eval', '3,4'])
    assert result.exit_code == 0, result.stderr
    assert result.stdout == '1.0\n5.0\n'


def test_body_summary(runner):
    result = runner.invoke(cli, ['body', '--spec', DISK])
    assert result.exit_code == 0
    summary = json.loads(result.stdout)
    assert summary['dim'] == 2
    assert summary['smoothness'] == 'Cinf'
    assert summary['spec'] == {'type': 'ball', 'dim': 2, 'v': 1}
    assert len(summary['body_hash']) == 64


def test_malformed_spec_exits_with_an_input_error(runner):
    result = runner.invoke(cli, ['body', '--spec', '{"type": "ball", "dim": 2'])
    assert result.exit_code == 2
    error = json.loads(result.stderr[result.stderr.index('{'):])
    assert error['error_type'] == 'SpecParseError'
    assert 'line' in error['details']


def test_missing_version_reports_the_field_path(runner):
    result = runner.invoke(cli, ['body', '--spec', '{"type": "ball", "dim": 2}'])
    assert result.exit_code == 2
    assert '"$.v"' in result.stderr


def test_orbit_csv(runner):
    result = runner.invoke(cli, ['orbit', '--spec', DISK, '--start', '2,0', '--steps', '3'])
    assert result.exit_code == 0, result.stderr
    lines = result.stdout.strip().split('\n')
    assert lines[0] == 'step,z_1,z_2,x_1,x_2,t,residual'
    assert len(lines) == 5
    assert 'Boundedness' in result.stderr


def test_orbit_json_includes_boundedness(runner):
    result = runner.invoke(cli, ['orbit', '--spec', DISK, '--start', '2,0', '--steps', '2', '--format', 'json'])
    payload = json.loads(result.stdout)
    assert payload['steps'] == 2
    assert payload['boundedness']['max_norm'] == pytest.approx(2.0)


def test_orbit_from_inside_is_an_input_error(runner):
    result = runner.invoke(cli, ['orbit', '--spec', DISK, '--start', '0.5,0', '--steps', '3'])
    assert result.exit_code == 2


def test_orbit_output_file(runner, tmp_path):
    target = tmp_path / 'orbit.csv'
    result = runner.invoke(cli, ['orbit', '--spec', DISK, '--start', '2,0', '--steps', '3', '-o', str(target)])
    assert result.exit_code == 0
    assert result.stdout == ''
    assert target.read_text().startswith('step,')


def test_periodic4_on_the_disk(runner):
    result = runner.invoke(cli, ['periodic4', '--spec', DISK, '--boundary-angle', '0'])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload['pass'] is True
    assert payload['area'] == pytest.approx(4.0)


def test_periodic4_rejects_a_body_that_is_not_self_polar(runner):
    result = runner.invoke(cli, ['periodic4', '--spec', L4_DISK, '--boundary-angle', str(math.pi / 4.0)])
    assert result.exit_code == 3
    assert 'GateFailureError' in result.stderr


def test_periodic4_scaled_family(runner):
    result = runner.invoke(cli, ['periodic4', '--spec', LARGE_DISK, '--scaled'])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload['expected_area'] == pytest.approx(16.0)
    assert payload['area'] == pytest.approx(16.0)


def test_hypersurface_check(runner):
    result = runner.invoke(cli, ['hypersurface', '--spec', DISK, '--check', 'invariance', '--samples', '8'])
    assert result.exit_code == 0, result.stderr
    assert json.loads(result.stdout)['check'] == 'invariance'


def test_hypersurface_accepts_the_curvature_check(runner):
    result = runner.invoke(cli, ['hypersurface', '--spec', DISK, '--check', 'curvature', '--samples', '8'])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload['check'] == 'curvature'
    assert payload['worst_value'] == pytest.approx(1.0)


def test_recover_from_a_sampled_curve(runner, tmp_path):
    y_curve = write_circle(tmp_path / 'y.csv', math.sqrt(2.0), 4000)
    truth = write_circle(tmp_path / 'x.csv', 1.0, 4000)
    result = runner.invoke(cli, ['recover', '--y-curve', y_curve, '--truth', truth, '--format', 'json'])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload['report']['hausdorff'] <= 1e-5
    assert payload['report']['n_vertices'] == 4000
    assert len(payload['vertices']) == 4000


def test_recover_rejects_a_small_curve(runner, tmp_path):
    y_curve = write_circle(tmp_path / 'y.csv', 1.0, 200)
    result = runner.invoke(cli, ['recover', '--y-curve', y_curve])
    assert result.exit_code == 2


def test_verify_quick_on_the_disk(runner):
    result = runner.invoke(cli, ['verify', '--spec', DISK, '--level', 'quick'])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload['passed'] is True
    assert payload['failed_checks'] == []
    assert 'ALL CHECKS PASSED' in result.stderr


def test_verify_reports_are_byte_identical_for_one_seed(runner, tmp_path):
    first = runner.invoke(cli, ['verify', '--spec', DISK, '--level', 'quick', '--seed', '7'])
    second = runner.invoke(cli, ['verify', '--spec', DISK, '--level', 'quick', '--seed', '7'])
    assert first.exit_code == 0, first.stderr
    assert first.stdout_bytes == second.stdout_bytes
    target = tmp_path / 'report.json'
    written = runner.invoke(cli, ['verify', '--spec', DISK, '--level', 'quick', '--seed', '7', '-o', str(target)])
    assert written.exit_code == 0
    assert target.read_bytes() == first.stdout_bytes


def test_volume_does_not_depend_on_the_thread_count(runner):
    args = ['volume', '--spec', DISK, '--n', '20000', '--seed', '11']
    single = runner.invoke(cli, args + ['--threads', '1'])
    double = runner.invoke(cli, args + ['--threads', '2'])
    assert single.exit_code == 0, single.stderr
    assert single.stdout_bytes == double.stdout_bytes


def test_volume_of_the_disk(runner):
    result = runner.invoke(cli, ['volume', '--spec', DISK, '--n', '40000', '--seed', '5'])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert abs(payload['value'] - math.pi) <= 5.0 * payload['stderr']
    assert payload['mahler_diagnostic']['flagged'] is False


def test_checks_listing(runner):
    result = runner.invoke(cli, ['checks'])
    assert result.exit_code == 0
    assert '[convex_checks]' in result.stdout
    assert '-two-point:' in result.stdout


def test_normalize_a_scaled_disk(runner):
    result = runner.invoke(cli, ['normalize', '--spec', LARGE_DISK])
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload['alpha'] == pytest.approx(4.0)
    assert payload['scale'] == pytest.approx(0.5)
    assert payload['spec']['type'] == 'linear_image'


def test_invalid_sample_count(runner):
    result = runner.invoke(cli, ['hypersurface', '--spec', DISK, '--check', 'star', '--samples', '0'])
    assert result.exit_code == 2
