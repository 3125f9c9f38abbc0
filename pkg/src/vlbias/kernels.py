"""Backend selection for the scanning kernels.

The compiled ``_speedups`` extension is used when it imports; otherwise, or
when ``VLBIAS_PURE_PYTHON`` is set to a non-empty value, the pure Python
reference in ``_pure`` is used.  Both expose the same four functions.
"""
import os

from . import _pure

BACKEND = "python"
_impl = _pure

if not os.environ.get("VLBIAS_PURE_PYTHON"):
    try:
        from . import _speedups as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pure

WORD_RE = _pure.WORD_RE
lookup = _impl.lookup
token_spans = _impl.token_spans
scan_hits = _impl.scan_hits
count_batch = _impl.count_batch
