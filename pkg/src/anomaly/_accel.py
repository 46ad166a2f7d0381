"""Switch between numba-compiled kernels and their pure-numpy twins.

Set ``ANOMALY_DISABLE_NUMBA=1`` before import to start on the numpy path.
``ANOMALY_THREADS`` caps the numba worker count.
"""

import contextlib
import os

# the bundled TBB is too old for numba; fall back to the portable pool
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


_state = {"numba": HAS_NUMBA and not _env_flag("ANOMALY_DISABLE_NUMBA")}


def numba_enabled():
    return _state["numba"]


def set_numba(flag):
    """Select the kernel path globally; returns the previous setting."""
    previous = _state["numba"]
    _state["numba"] = bool(flag) and HAS_NUMBA
    return previous


@contextlib.contextmanager
def kernel_path(use_numba):
    previous = set_numba(use_numba)
    try:
        yield
    finally:
        set_numba(previous)


def apply_thread_cap():
    """Honour ANOMALY_THREADS; returns the active worker count."""
    if not HAS_NUMBA:
        return 1
    cap = os.environ.get("ANOMALY_THREADS")
    if cap:
        n = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)
    return numba.get_num_threads()


def dispatch(nb_impl, np_impl):
    """Return a callable that routes to ``nb_impl`` or ``np_impl`` at call time."""

    def call(*args, **kwargs):
        if _state["numba"]:
            return nb_impl(*args, **kwargs)
        return np_impl(*args, **kwargs)

    call.numba_impl = nb_impl
    call.numpy_impl = np_impl
    call.__name__ = getattr(np_impl, "__name__", "kernel").removesuffix("_np")
    call.__doc__ = np_impl.__doc__
    return call
