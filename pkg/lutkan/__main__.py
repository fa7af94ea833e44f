"""
Entry point for ``python -m lutkan``.

Thread-count environment variables are exported before numpy is imported,
since BLAS/OpenMP runtimes read them only once at load time.
"""

import sys

from .errors import ConfigError
from .threads import pin_threads, resolve_threads, threads_from_argv


def _pin_early(argv) -> None:
    try:
        pin_threads(resolve_threads(threads_from_argv(argv)))
    except ConfigError:
        # the CLI reports the bad value once logging is set up
        pass


if __name__ == '__main__':
    _pin_early(sys.argv[1:])
    from .cli import main
    sys.exit(main())
