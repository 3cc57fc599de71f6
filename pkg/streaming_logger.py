"""
Orbit Streaming Logger

Writes orbit iterates to a live CSV per session while a long ``orbit --stream``
run is in progress, so a runaway or drifting orbit can be watched with
``tail -f``. The file is removed once the run completes and the final trace
has been written to the requested output.
"""

import os
import sys
import threading
import time
from collections import defaultdict
from typing import Any, Dict, List, Optional, Sequence

from osb_lib.reports import rows_to_csv
from run_logger import load_logging_config


class OrbitStreamLogger:
    """Buffers orbit rows per session and flushes them from a background thread"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = config or {}
        streaming_config = self.config.get('streaming_logs', {})

        self.enabled = streaming_config.get('enabled', True)
        self.flush_interval = streaming_config.get('flush_interval_seconds', 2)
        self.max_session_age_hours = streaming_config.get('max_session_age_hours', 24)

        if not self.enabled:
            return

        directory = self.config.get('logging', {}).get('destinations', {}).get('directory', 'logs/')
        self.base_dir = os.path.join(directory, 'streaming')
        os.makedirs(self.base_dir, exist_ok=True)

        self.session_buffers: Dict[str, List[Sequence[Any]]] = defaultdict(list)
        self.session_headers: Dict[str, List[str]] = {}
        self.session_files: Dict[str, Any] = {}
        self.last_flush: Dict[str, float] = {}

        # Guards buffers and files; the flush thread and the solver thread both touch them
        self.lock = threading.Lock()

        self.flush_thread = threading.Thread(target=self._flush_worker, daemon=True)
        self.flush_thread.start()

    def get_session_file_path(self, session_id: str) -> str:
        return os.path.join(self.base_dir, f'{session_id}.csv')

    def start_session(self, session_id: str, header: List[str]):
        """Open the live file and write the CSV header"""
        if not self.enabled:
            return
        with self.lock:
            self.session_headers[session_id] = list(header)
            handle = open(self.get_session_file_path(session_id), 'w', encoding='utf-8', newline='')
            handle.write(rows_to_csv(header, []))
            handle.flush()
            self.session_files[session_id] = handle

    def _flush_locked(self, session_id: str, now: float):
        rows = self.session_buffers.get(session_id)
        handle = self.session_files.get(session_id)
        if not rows or handle is None:
            return
        # rows_to_csv always emits a header line; drop it
        text = rows_to_csv(self.session_headers[session_id], rows).split('\n', 1)[1]
        handle.write(text)
        handle.flush()
        self.session_buffers[session_id] = []
        self.last_flush[session_id] = now

    def _flush_session(self, session_id: str, force: bool = False):
        if not self.enabled:
            return
        now = time.time()
        with self.lock:
            # completed sessions are gone from session_files; do not resurrect their entries
            if session_id not in self.session_files:
                return
            if not force and now - self.last_flush.get(session_id, 0.0) < self.flush_interval:
                return
            self._flush_locked(session_id, now)

    def _flush_worker(self):
        """Background worker to flush buffers periodically"""
        while True:
            time.sleep(self.flush_interval)
            with self.lock:
                session_ids = list(self.session_buffers.keys())
            for session_id in session_ids:
                self._flush_session(session_id)

    def append_row(self, session_id: str, row: Sequence[Any]):
        """Queue one orbit row (step, z, tangency) for the live file"""
        if not self.enabled or not session_id:
            return
        with self.lock:
            if session_id in self.session_files:
                self.session_buffers[session_id].append(list(row))

    def complete_session(self, session_id: str, keep_file: bool = False):
        """Flush, close and (unless keep_file) delete the live file"""
        if not self.enabled or session_id not in self.session_files:
            return

        self._flush_session(session_id, force=True)

        with self.lock:
            self.session_files.pop(session_id).close()
            self.session_buffers.pop(session_id, None)
            self.session_headers.pop(session_id, None)
            self.last_flush.pop(session_id, None)

            if keep_file:
                return
            file_path = self.get_session_file_path(session_id)
            try:
                if os.path.exists(file_path):
                    os.remove(file_path)
            except OSError as e:
                print(f"Failed to delete streaming log for {session_id}: {e}", file=sys.stderr)

    def cleanup_old_sessions(self, max_age_hours: Optional[float] = None):
        """Delete live files left behind by crashed runs"""
        if not self.enabled:
            return
        max_age = self.max_session_age_hours if max_age_hours is None else max_age_hours
        cutoff_time = time.time() - max_age * 3600

        try:
            for filename in os.listdir(self.base_dir):
                if not filename.endswith('.csv'):
                    continue
                file_path = os.path.join(self.base_dir, filename)
                if os.path.getmtime(file_path) < cutoff_time:
                    os.remove(file_path)
                    print(f"Cleaned up old session file: {file_path}", file=sys.stderr)
        except OSError as e:
            print(f"Failed to cleanup old sessions: {e}", file=sys.stderr)


# Global streaming logger instance
_streaming_logger_instance: Optional[OrbitStreamLogger] = None


def get_streaming_logger() -> OrbitStreamLogger:
    """Get the global streaming logger instance"""
    global _streaming_logger_instance
    if _streaming_logger_instance is None:
        config = load_logging_config()
        if config is None:
            config = {'streaming_logs': {'enabled': False}}
        _streaming_logger_instance = OrbitStreamLogger(config)
    return _streaming_logger_instance


def reset_streaming_logger():
    global _streaming_logger_instance
    _streaming_logger_instance = None
