"""Kernel backend selection.

The compiled GMP kernels are used when the extension built; otherwise the
pure-Python twins take over. PARKSENSE_BACKEND=native|pure|auto forces the
choice (native raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import _purekernels

_CHOICES = ("auto", "native", "pure")


def _load_native():
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


def _select():
    env = os.environ.get("PARKSENSE_BACKEND", "auto").strip().lower() or "auto"
    if env not in _CHOICES:
        raise RuntimeError(
            "PARKSENSE_BACKEND must be one of %s, got %r" % (", ".join(_CHOICES), env)
        )
    if env == "pure":
        return _purekernels
    native = _load_native()
    if native is None:
        if env == "native":
            raise RuntimeError(
                "PARKSENSE_BACKEND=native but parksense._kernels is not importable"
            )
        return _purekernels
    return native


_impl = _select()

BACKEND_NAME: str = _impl.NAME
powmod = _impl.powmod
invmod = _impl.invmod
is_probable_prime = _impl.is_probable_prime
edge_sharp_total = _impl.edge_sharp_total


def available_backends() -> dict[str, object]:
    """All importable kernel modules keyed by name, for side-by-side benches."""
    found: dict[str, object] = {"pure": _purekernels}
    native = _load_native()
    if native is not None:
        found["native"] = native
    return found
