"""
Logging for lutkan: console output plus optional rotating files, and JSON event records.
"""

import json
import logging
import logging.handlers
import os
import time
from datetime import datetime
from typing import Any, Dict, Optional

PERFORMANCE_LOGGER = 'lutkan.performance'
SWEEP_LOGGER = 'lutkan.sweep'

FILE_FORMAT = '%(asctime)s | %(name)s | %(levelname)s | %(funcName)s:%(lineno)d | %(message)s'
CONSOLE_FORMAT = '%(asctime)s | %(levelname)s | %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

MB = 1024 * 1024

# (file name, logger it attaches to or None for root, level, max size, backups)
_LOG_FILES = (
    ('lutkan.log', None, logging.DEBUG, 10 * MB, 5),
    ('sweep.log', SWEEP_LOGGER, logging.DEBUG, 5 * MB, 3),
    ('errors.log', None, logging.ERROR, 5 * MB, 5),
    ('performance.log', PERFORMANCE_LOGGER, logging.INFO, 5 * MB, 3),
)


def _level(name: str) -> int:
    return getattr(logging, name.upper())


def setup_logging(log_level: str = "INFO", log_dir: Optional[str] = None) -> None:
    """Configure the root logger.

    Args:
        log_level: Console and root level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_dir: Directory for the rotating log files; console only when None
    """
    root = logging.getLogger()
    root.setLevel(_level(log_level))
    root.handlers.clear()
    for name in (SWEEP_LOGGER, PERFORMANCE_LOGGER):
        logging.getLogger(name).handlers.clear()

    console = logging.StreamHandler()
    console.setLevel(_level(log_level))
    console.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
    root.addHandler(console)

    if log_dir is None:
        return

    os.makedirs(log_dir, exist_ok=True)
    file_formatter = logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT)
    for filename, logger_name, level, max_bytes, backups in _LOG_FILES:
        handler = logging.handlers.RotatingFileHandler(
            os.path.join(log_dir, filename), maxBytes=max_bytes, backupCount=backups
        )
        handler.setLevel(level)
        handler.setFormatter(file_formatter)
        target = logging.getLogger(logger_name) if logger_name else root
        target.addHandler(handler)
        if logger_name:
            target.setLevel(level)

    logging.info(f"Logging to {log_dir} at level {log_level}")


class StructuredLogger:
    """Writes one JSON payload per pipeline event to a named logger."""

    def __init__(self, logger_name: str):
        self.logger = logging.getLogger(logger_name)

    def _emit(self, level: int, prefix: str, payload: Dict[str, Any],
              logger: Optional[logging.Logger] = None) -> None:
        payload['timestamp'] = datetime.now().isoformat()
        (logger or self.logger).log(level, f"{prefix}: {json.dumps(payload, default=str)}")

    def _emit_outcome(self, event: str, payload: Dict[str, Any], ok_level: int = logging.DEBUG) -> None:
        failed = payload.get('error') is not None
        prefix = f"{event} failed" if failed else event
        self._emit(logging.ERROR if failed else ok_level, prefix, payload)

    def log_compile(self, layer_index: Optional[int], config: Dict, num_edges: int,
                    num_segments: int, q_table_bytes: int, error: str = None) -> None:
        self._emit_outcome("Compile", {
            'type': 'compile',
            'layer_index': layer_index,
            'config': config,
            'num_edges': num_edges,
            'num_segments': num_segments,
            'q_table_bytes': q_table_bytes,
            'error': error,
        })

    def log_artifact_io(self, operation: str, path: str, success: bool = True,
                        error: str = None, num_bytes: int = None) -> None:
        """Archive or report save/load."""
        self._emit_outcome("Artifact I/O", {
            'type': 'artifact_io',
            'operation': operation,
            'path': path,
            'success': success,
            'num_bytes': num_bytes,
            'error': error,
        })

    def log_eval(self, metrics: Dict, config: Dict = None) -> None:
        self._emit(logging.INFO, "Eval", {'type': 'eval', 'metrics': metrics, 'config': config or {}})

    def log_bench(self, tier: str, mode: str, spline_ms: float, lut_ms: float,
                  speedup: float, inner_repeats: int) -> None:
        """Spline vs LUT timing of one benchmark run."""
        self._emit(logging.INFO, "Bench", {
            'type': 'bench',
            'tier': tier,
            'mode': mode,
            'spline_ms': spline_ms,
            'lut_ms': lut_ms,
            'speedup': speedup,
            'inner_repeats': inner_repeats,
        })

    def log_sweep_cell(self, cell: str, seed: int, status: str,
                       error: str = None, skipped: bool = False) -> None:
        self._emit_outcome("Sweep cell", {
            'type': 'sweep_cell',
            'cell': cell,
            'seed': seed,
            'status': status,
            'skipped': skipped,
            'error': error,
        }, ok_level=logging.INFO)

    def log_performance(self, operation: str, duration: float, details: Dict = None) -> None:
        """Wall time of a coarse operation, routed to the performance logger."""
        self._emit(logging.INFO, "Performance", {
            'type': 'performance',
            'operation': operation,
            'duration_ms': duration * 1000,
            'details': details or {},
        }, logger=logging.getLogger(PERFORMANCE_LOGGER))


class TimingContext:
    """Logs the wall time of a compile or sweep step on exit.

    Not for benchmark regions; those are timed by ``bench.time_callable``.
    """

    def __init__(self, structured_logger: StructuredLogger, operation: str, details: Dict = None):
        self.structured_logger = structured_logger
        self.operation = operation
        self.details = dict(details or {})
        self.started = None

    def __enter__(self):
        self.started = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.started is None:
            return
        if exc_type is not None:
            self.details['error'] = f"{exc_type.__name__}: {exc_val}"
        self.structured_logger.log_performance(self.operation, time.perf_counter() - self.started, self.details)


def get_logger(name: str) -> logging.Logger:
    """Logger named ``lutkan.<name>``."""
    return logging.getLogger(f'lutkan.{name}')


def get_structured_logger(name: str) -> StructuredLogger:
    return StructuredLogger(f'lutkan.{name}')


# Console logging by default, unless the host application configured logging first
if not logging.getLogger().handlers:
    setup_logging()
