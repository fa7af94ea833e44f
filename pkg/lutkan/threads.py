"""
Thread-count resolution for the numeric libraries.

Imports nothing that loads numpy, so ``python -m lutkan`` can pin threads first.
"""

import os
from typing import List, Optional, Union

from .errors import ConfigError

THREADS_ENV = 'LUTKAN_THREADS'
THREAD_ENV_VARS = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS',
                   'NUMEXPR_NUM_THREADS', 'NUMBA_NUM_THREADS')


def resolve_threads(flag: Optional[Union[int, str]] = None) -> int:
    """Thread count: ``--threads`` flag, else $LUTKAN_THREADS, else 1."""
    value = flag if flag is not None else os.environ.get(THREADS_ENV, 1)
    try:
        threads = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Invalid thread count {value!r}") from None
    if threads < 1:
        raise ConfigError(f"Thread count must be >= 1, got {threads}")
    return threads


def pin_threads(threads: int) -> None:
    """Export the thread count to every numeric library's environment variable.

    Only takes full effect when called before numpy is first imported.
    """
    for name in THREAD_ENV_VARS:
        os.environ[name] = str(threads)


def threads_from_argv(argv: List[str]) -> Optional[str]:
    """Raw ``--threads`` value from an unparsed command line, or None."""
    for index, arg in enumerate(argv):
        if arg == '--threads' and index + 1 < len(argv):
            return argv[index + 1]
        if arg.startswith('--threads='):
            return arg.split('=', 1)[1]
    return None
