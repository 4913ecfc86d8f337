"""Backend selection for the hot kernels.

Prefers the compiled Cython extension; falls back to the pure-Python
implementation when the extension is unavailable or when the environment
variable ``APVAR_FORCE_PURE`` is set to a non-empty value.
"""

import os

if os.environ.get("APVAR_FORCE_PURE"):
    from apvar._core import pure as _impl
    BACKEND = "pure"
else:
    try:
        from apvar._core import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build environment
        from apvar._core import pure as _impl
        BACKEND = "pure"

sieve_tables = _impl.sieve_tables
delta_tau_parts = _impl.delta_tau_parts

__all__ = ["BACKEND", "sieve_tables", "delta_tau_parts"]
