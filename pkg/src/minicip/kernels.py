"""Kernel dispatch: compiled extension when available, pure Python otherwise.

Set ``MINICIP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("MINICIP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _fallback

pivot = _impl.pivot
lex_feasible = _impl.lex_feasible
lex_propagate = _impl.lex_propagate
cover_scan = _impl.cover_scan

__all__ = ["BACKEND", "pivot", "lex_feasible", "lex_propagate", "cover_scan"]
