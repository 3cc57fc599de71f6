"""
Run Logging Module for the outer billiard toolkit

Structured JSON Lines logging for command runs:
- Run start/complete tracking per session
- Check execution results and timings
- Solver failures and errors (mirrored to a plain error log)
"""

import json
import os
import sys
import time
import uuid
from datetime import datetime, timedelta
from typing import Any, Dict, Optional

from osb_lib.reports import to_plain

DEFAULT_CONFIG_PATH = 'logging_config.json'


def load_logging_config(path: Optional[str] = None) -> Optional[Dict[str, Any]]:
    """Read the logging config named by OSB_LOG_CONFIG; None when missing or malformed"""
    path = path or os.getenv('OSB_LOG_CONFIG', DEFAULT_CONFIG_PATH)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        print(f"Warning: Could not load {path}: {e}", file=sys.stderr)
        return None


def new_session_id() -> str:
    return f"run_{uuid.uuid4().hex[:8]}"


class RunLogger:
    """Handles structured logging for CLI runs"""

    def __init__(self, config: Dict[str, Any]):
        """Initialize logger with the 'logging' block of logging_config.json"""
        self.config = config.get('logging', {})
        self.enabled = self.config.get('enabled', True)
        self.session_data: Dict[str, Dict[str, Any]] = {}

        if not self.enabled:
            return

        destinations = self.config.get('destinations', {})
        self.log_directory = destinations.get('directory', 'logs/')
        self.runs_dir = os.path.join(self.log_directory, 'runs')
        self.errors_dir = os.path.join(self.log_directory, 'errors')
        self.to_console = destinations.get('to_console', True)
        self.to_file = destinations.get('to_file', True)

        if self.to_file:
            os.makedirs(self.runs_dir, exist_ok=True)
            os.makedirs(self.errors_dir, exist_ok=True)

        privacy_config = self.config.get('privacy', {})
        self.truncate_long = privacy_config.get('truncate_long_values', False)
        self.max_length = privacy_config.get('max_value_length', 10000)

        payload_config = self.config.get('payloads', {})
        self.log_parameters = payload_config.get('parameters', True)
        self.log_results = payload_config.get('results', True)

        retention = self.config.get('retention', {})
        self.retention_days = retention.get('retention_days', 30)
        if self.to_file and retention.get('auto_cleanup', False):
            self.cleanup_old_logs()

    def _get_daily_log_file(self) -> str:
        today = datetime.now().strftime('%Y-%m-%d')
        return os.path.join(self.runs_dir, f'{today}.jsonl')

    def _truncate_if_needed(self, value: Any) -> Any:
        """Truncate long strings and oversized payloads if privacy settings require it"""
        if not self.truncate_long:
            return value
        if isinstance(value, str):
            text = value
        else:
            text = json.dumps(value, ensure_ascii=False, default=str)
        if len(text) <= self.max_length:
            return value
        return text[:self.max_length] + "...[truncated]"

    def _write_log(self, log_entry: Dict[str, Any]):
        """Write log entry to file and/or console"""
        if not self.enabled:
            return

        log_json = json.dumps(to_plain(log_entry), ensure_ascii=False, default=str)

        # stdout carries command output
        if self.to_console:
            print(f"[LOG] {log_json}", file=sys.stderr)

        if self.to_file:
            try:
                with open(self._get_daily_log_file(), 'a', encoding='utf-8') as f:
                    f.write(log_json + '\n')
            except OSError as e:
                print(f"Failed to write log file: {e}", file=sys.stderr)

    def _entry(self, session_id: str, event_type: str) -> Dict[str, Any]:
        return {
            'timestamp': datetime.now().isoformat(),
            'session_id': session_id,
            'event_type': event_type,
        }

    def log_run_start(self, session_id: str, command: str, parameters: Dict[str, Any],
                      body_hash: Optional[str] = None):
        """Log the start of a command run"""
        if not self.enabled:
            return

        self.session_data[session_id] = {
            'start_time': time.time(),
            'command': command,
            'checks_run': 0,
            'checks_failed': 0,
        }

        log_entry = self._entry(session_id, 'run_start')
        log_entry['command'] = command
        log_entry['body_hash'] = body_hash
        if self.log_parameters:
            log_entry['parameters'] = self._truncate_if_needed(parameters)

        self._write_log(log_entry)

    def log_check_execution(self, session_id: str, check_name: str, check_input: Dict[str, Any],
                            result: Dict[str, Any], execution_time_ms: float, success: bool):
        """Log one check run: its parameters, worst value and pass flag"""
        if not self.enabled:
            return

        if session_id in self.session_data:
            self.session_data[session_id]['checks_run'] += 1
            if not result.get('pass', success):
                self.session_data[session_id]['checks_failed'] += 1

        log_entry = self._entry(session_id, 'check_execution')
        log_entry.update({
            'check_name': check_name,
            'worst_value': result.get('worst_value'),
            'pass': result.get('pass'),
            'execution_time_ms': round(execution_time_ms, 3),
            'success': success,
        })
        if self.log_parameters:
            log_entry['check_input'] = check_input
        if self.log_results and result.get('details'):
            log_entry['details'] = self._truncate_if_needed(result['details'])

        self._write_log(log_entry)

    def log_solver_failure(self, session_id: str, operation: str, error: Dict[str, Any]):
        """Log a non-converged solve that was recorded rather than raised"""
        if not self.enabled:
            return

        log_entry = self._entry(session_id, 'solver_failure')
        log_entry['operation'] = operation
        log_entry['failure'] = self._truncate_if_needed(error)

        self._write_log(log_entry)

    def log_run_complete(self, session_id: str, final_status: str = "completed"):
        """Log run completion with summary statistics"""
        if not self.enabled or session_id not in self.session_data:
            return

        session_info = self.session_data.pop(session_id)
        duration = time.time() - session_info['start_time']

        log_entry = self._entry(session_id, 'run_complete')
        log_entry.update({
            'command': session_info['command'],
            'checks_run': session_info['checks_run'],
            'checks_failed': session_info['checks_failed'],
            'duration_seconds': round(duration, 3),
            'final_status': final_status,
        })

        self._write_log(log_entry)

    def log_error(self, session_id: str, error_type: str, error_message: str,
                  context: Optional[Dict[str, Any]] = None):
        """Log an error and append it to the daily error log"""
        if not self.enabled:
            return

        log_entry = self._entry(session_id, 'error')
        log_entry['error_type'] = error_type
        log_entry['error_message'] = error_message
        if context:
            log_entry['context'] = self._truncate_if_needed(context)

        self._write_log(log_entry)

        if not self.to_file:
            return
        try:
            today = datetime.now().strftime('%Y-%m-%d')
            with open(os.path.join(self.errors_dir, f'{today}.log'), 'a', encoding='utf-8') as f:
                f.write(f"[{log_entry['timestamp']}] {session_id}: {error_type} - {error_message}\n")
        except OSError as e:
            print(f"Failed to write error log: {e}", file=sys.stderr)

    def cleanup_old_logs(self):
        """Delete daily run and error logs older than retention_days"""
        cutoff = (datetime.now() - timedelta(days=self.retention_days)).strftime('%Y-%m-%d')
        for directory in (self.runs_dir, self.errors_dir):
            try:
                for filename in os.listdir(directory):
                    # Daily files are named YYYY-MM-DD, so string order is date order
                    if filename[:10] < cutoff:
                        os.remove(os.path.join(directory, filename))
            except OSError as e:
                print(f"Failed to clean up {directory}: {e}", file=sys.stderr)


# Global logger instance
_logger_instance: Optional[RunLogger] = None


def get_logger() -> RunLogger:
    """Get the global logger instance, built from OSB_LOG_CONFIG"""
    global _logger_instance
    if _logger_instance is None:
        config = load_logging_config()
        if config is None:
            config = {'logging': {'enabled': False}}
        _logger_instance = RunLogger(config)
    return _logger_instance


def reset_logger():
    """Drop the global instance so the next get_logger() rereads the config"""
    global _logger_instance
    _logger_instance = None
