import pytest

from osb_lib import (
    LEVELS,
    SUITE_ORDER,
    checks_to_string,
    find_check,
    get_checks_dict,
    list_checks,
    make_lp_ball,
    osb_checks,
    run_check,
    run_suite,
)


def test_registry_functions_exist():
    for category_checks in get_checks_dict().values():
        for name, info in category_checks.items():
            assert callable(getattr(osb_checks, info['function'])), name
            assert {'description', 'parameters', 'returns', 'requires'} <= set(info)


def test_suite_names_are_registered():
    registered = set(list_checks())
    assert set(SUITE_ORDER) <= registered
    for level, sizes in LEVELS.items():
        assert set(sizes) <= set(SUITE_ORDER), level
    assert len(list_checks()) == len(set(list_checks()))


def test_every_check_lives_in_one_category():
    seen = {}
    for category, category_checks in get_checks_dict().items():
        for name in category_checks:
            assert name not in seen, f"{name} in {seen.get(name)} and {category}"
            seen[name] = category
    assert seen['curvature'] == 'symplectic_checks'


def test_find_check():
    assert find_check('star')['function'] == 'verify_star_shape'
    assert find_check('no-such-check') is None


def test_checks_listing_mentions_every_check():
    text = checks_to_string(get_checks_dict())
    assert '[hypersurface_checks]' in text
    for name in list_checks():
        assert f"-{name}:" in text


def test_check_result_dictionary(disk):
    result = run_check('involution', disk, 32, 0)
    data = result.to_dict()
    assert data['pass'] is True
    assert 'passed' not in data
    assert data['check'] == 'involution'
    assert data['worst_value'] <= 1e-12


def test_results_carry_the_registry_name(disk):
    assert run_check('two-point', disk, 2, 0).check == 'two-point'


def test_library_errors_become_failed_results():
    body = make_lp_ball(4.0, 2)
    result = run_check('four_periodic', body, 8, 0)
    assert not result.passed
    assert result.details['error_type'] == 'GateFailureError'
    assert result.details['exit_code'] == 3


def test_unknown_check_and_level(disk):
    with pytest.raises(ValueError):
        run_check('no-such-check', disk, 10, 0)
    with pytest.raises(ValueError):
        run_suite(disk, 'exhaustive', 0)


def test_quick_suite_passes_on_the_disk(disk):
    seen = []
    report = run_suite(disk, 'quick', 0, on_check=lambda result, ms: seen.append(result.check))
    assert report.passed, report.failed_checks
    assert seen == [r.check for r in report.results]
    assert report.skipped == []
    assert not report.solver_failure
    assert report.to_dict()['results'][0]['pass'] is True


def test_quick_suite_skips_dependent_checks_after_a_failed_gate():
    report = run_suite(make_lp_ball(4.0, 2), 'quick', 0)
    assert not report.passed
    assert 'self_polarity' in report.failed_checks
    skipped = {entry['check'] for entry in report.skipped}
    assert {'four_periodic', 'invariance', 'star', 'area-roundtrip'} <= skipped


@pytest.mark.slow
def test_c1_bodies_skip_second_order_checks(lagrangian_l4):
    report = run_suite(lagrangian_l4, 'quick', 0)
    reasons = {entry['check']: entry['reason'] for entry in report.skipped}
    assert reasons['positivity'] == 'needs C2, body is C1'
    assert 'curvature' in reasons
    assert reasons['area-roundtrip'] == 'planar bodies only'
