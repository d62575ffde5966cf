"""Optional numba acceleration.

Set ``SVSDE_DISABLE_JIT=1`` before import to run every kernel as plain
Python/numpy. Kernels are written in the numba-compatible subset so both
paths execute the same code.
"""
import os

JIT_DISABLED = os.environ.get("SVSDE_DISABLE_JIT", "0").lower() in ("1", "true", "yes")

if not JIT_DISABLED:
    try:
        import numba as nb
    except ImportError:  # pragma: no cover
        JIT_DISABLED = True


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity decorator otherwise."""
    if JIT_DISABLED:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda func: func
    kwargs.setdefault("cache", True)
    return nb.njit(*args, **kwargs)


def py_func(func):
    """Return the interpreted version of a (possibly jitted) kernel."""
    return getattr(func, "py_func", func)
