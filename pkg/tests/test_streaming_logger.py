import os

from streaming_logger import OrbitStreamLogger


def make_streamer(tmp_path):
    return OrbitStreamLogger({
        'logging': {'destinations': {'directory': str(tmp_path)}},
        'streaming_logs': {'enabled': True, 'flush_interval_seconds': 3600, 'max_session_age_hours': 24},
    })


def test_rows_are_flushed_under_the_header(tmp_path):
    streamer = make_streamer(tmp_path)
    streamer.start_session('run_a', ['step', 'z_1', 'z_2'])
    streamer.append_row('run_a', [0, 2.0, 0.0])
    streamer.append_row('run_a', [1, -1.0, 1.5])
    streamer._flush_session('run_a', force=True)
    with open(streamer.get_session_file_path('run_a'), 'r', encoding='utf-8') as f:
        assert f.read() == 'step,z_1,z_2\n0,2.0,0.0\n1,-1.0,1.5\n'
    streamer.complete_session('run_a')
    assert not os.path.exists(streamer.get_session_file_path('run_a'))


def test_completed_session_can_keep_its_file(tmp_path):
    streamer = make_streamer(tmp_path)
    streamer.start_session('run_b', ['step'])
    streamer.append_row('run_b', [0])
    streamer.complete_session('run_b', keep_file=True)
    with open(streamer.get_session_file_path('run_b'), 'r', encoding='utf-8') as f:
        assert f.read() == 'step\n0\n'


def test_stale_session_files_are_removed(tmp_path):
    streamer = make_streamer(tmp_path)
    stale = streamer.get_session_file_path('run_old')
    with open(stale, 'w', encoding='utf-8') as f:
        f.write('step\n')
    os.utime(stale, (0, 0))
    streamer.cleanup_old_sessions()
    assert not os.path.exists(stale)


def test_disabled_streamer_ignores_calls(tmp_path):
    streamer = OrbitStreamLogger({'streaming_logs': {'enabled': False}})
    streamer.start_session('run_c', ['step'])
    streamer.append_row('run_c', [0])
    streamer.complete_session('run_c')
    assert not streamer.enabled


def test_completed_session_leaves_no_state_behind(tmp_path):
    streamer = make_streamer(tmp_path)
    streamer.start_session('run_d', ['step'])
    streamer.append_row('run_d', [0])
    streamer.complete_session('run_d')
    streamer._flush_session('run_d')
    streamer._flush_session('run_d', force=True)
    streamer.append_row('run_d', [1])
    assert 'run_d' not in streamer.last_flush
    assert 'run_d' not in streamer.session_buffers
    assert 'run_d' not in streamer.session_files
