import json
import os

import numpy as np

import run_logger
from run_logger import RunLogger, load_logging_config, new_session_id


def make_logger(tmp_path, **privacy):
    config = {
        'logging': {
            'enabled': True,
            'destinations': {'to_file': True, 'to_console': False, 'directory': str(tmp_path)},
            'retention': {'retention_days': 30, 'auto_cleanup': False},
            'privacy': privacy,
        }
    }
    return RunLogger(config)


def read_entries(logger):
    with open(logger._get_daily_log_file(), 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f]


def test_session_ids_are_unique():
    a, b = new_session_id(), new_session_id()
    assert a.startswith('run_') and len(a) == 12
    assert a != b


def test_run_is_logged_as_json_lines(tmp_path):
    logger = make_logger(tmp_path)
    logger.log_run_start('run_1', 'verify', {'seed': 3, 'start': np.array([2.0, 0.0])}, 'abc')
    logger.log_check_execution('run_1', 'involution', {'samples': 8},
                               {'pass': False, 'worst_value': 0.5, 'details': {'max_gauge_defect': 0.1}},
                               12.3456, True)
    logger.log_run_complete('run_1', 'failed')

    start, check, complete = read_entries(logger)
    assert start['event_type'] == 'run_start'
    assert start['parameters']['start'] == [2.0, 0.0]
    assert start['body_hash'] == 'abc'
    assert check['check_name'] == 'involution'
    assert check['execution_time_ms'] == 12.346
    assert check['details'] == {'max_gauge_defect': 0.1}
    assert complete['checks_run'] == 1
    assert complete['checks_failed'] == 1
    assert complete['final_status'] == 'failed'


def test_errors_go_to_the_error_log(tmp_path):
    logger = make_logger(tmp_path)
    logger.log_error('run_2', 'InvalidInputError', 'bad spec', {'path': '$.v'})
    entry = read_entries(logger)[0]
    assert entry['context'] == {'path': '$.v'}
    error_files = os.listdir(os.path.join(str(tmp_path), 'errors'))
    assert len(error_files) == 1
    with open(os.path.join(str(tmp_path), 'errors', error_files[0]), 'r', encoding='utf-8') as f:
        assert 'run_2: InvalidInputError - bad spec' in f.read()


def test_long_values_are_truncated(tmp_path):
    logger = make_logger(tmp_path, truncate_long_values=True, max_value_length=20)
    logger.log_solver_failure('run_3', 'iterate', {'error_message': 'x' * 100})
    entry = read_entries(logger)[0]
    assert entry['failure'].endswith('...[truncated]')
    assert len(entry['failure']) == 20 + len('...[truncated]')


def test_disabled_logger_writes_nothing(tmp_path):
    logger = RunLogger({'logging': {'enabled': False, 'destinations': {'directory': str(tmp_path)}}})
    logger.log_run_start('run_4', 'body', {}, None)
    logger.log_run_complete('run_4')
    assert os.listdir(str(tmp_path)) == []


def test_cleanup_removes_expired_daily_files(tmp_path):
    logger = make_logger(tmp_path)
    old = os.path.join(logger.runs_dir, '2000-01-01.jsonl')
    with open(old, 'w', encoding='utf-8') as f:
        f.write('{}\n')
    logger.log_run_start('run_5', 'body', {}, None)
    logger.cleanup_old_logs()
    assert not os.path.exists(old)
    assert os.path.exists(logger._get_daily_log_file())


def test_missing_config_disables_the_global_logger(tmp_path, monkeypatch):
    monkeypatch.setenv('OSB_LOG_CONFIG', str(tmp_path / 'absent.json'))
    assert load_logging_config() is None
    run_logger.reset_logger()
    try:
        assert not run_logger.get_logger().enabled
    finally:
        run_logger.reset_logger()
