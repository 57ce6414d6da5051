"""Optional numba acceleration.

The hot loops (bitplane coding, full-search SAD) are written as plain
nopython-compatible functions; when numba is missing they run as ordinary
Python with identical results, just slower.
"""

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
