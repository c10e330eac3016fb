"""Chromosome decoding backend, chosen once at import.

The compiled extension is used when it was built; set ``MECSCHED_PURE_PYTHON=1``
to force the pure-Python implementation.
"""

import os

from . import _decode_py

if os.environ.get("MECSCHED_PURE_PYTHON"):
    _impl = _decode_py
else:
    try:
        from . import _decode as _impl
    except ImportError:
        _impl = _decode_py

BACKEND = "compiled" if _impl is not _decode_py else "python"

decode_one = _impl.decode_one
evaluate_population = _impl.evaluate_population
