"""Apply ``SPECTRAREC_THREADS`` to the BLAS/OpenMP pools.

Imported by the CLI before numpy so the caps take effect; explicit
``OMP_NUM_THREADS``-style settings win.
"""
import os

THREAD_ENV = "SPECTRAREC_THREADS"
BLAS_ENVS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def apply_thread_cap(environ=os.environ):
    """Return an error message for a bad value, else None."""
    value = environ.get(THREAD_ENV)
    if value is None:
        return None
    if not value.isdigit() or int(value) < 1:
        return f"{THREAD_ENV} must be a positive integer, got {value!r}"
    for name in BLAS_ENVS:
        environ.setdefault(name, value)
    return None


ERROR = apply_thread_cap()
