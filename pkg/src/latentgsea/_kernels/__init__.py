"""Enrichment-score kernel selection.

Imports the compiled Cython kernel when available and falls back to the
pure-numpy implementation otherwise.  Both produce bit-identical results;
the compiled one is just faster on the permutation-null inner loop.

Set ``LATENTGSEA_KERNEL=numpy`` (or ``cython``) to force a backend, e.g. for
the backend-comparison benchmark.
"""

import os

from . import _es_numpy

try:
    from . import _es_cython
except ImportError:
    _es_cython = None

_FORCED = os.environ.get("LATENTGSEA_KERNEL", "auto").lower()
if _FORCED == "numpy":
    _impl = _es_numpy
elif _FORCED == "cython":
    if _es_cython is None:
        raise ImportError(
            "LATENTGSEA_KERNEL=cython but the compiled kernel is not built; "
            "run `pip install -e . --no-build-isolation` to build it"
        )
    _impl = _es_cython
else:
    _impl = _es_cython if _es_cython is not None else _es_numpy

BACKEND = _impl.BACKEND
enrichment_scan = _impl.enrichment_scan
enrichment_scan_batch = _impl.enrichment_scan_batch


def available_backends():
    """Names of importable kernel backends (numpy is always present)."""
    names = ["numpy"]
    if _es_cython is not None:
        names.append("cython")
    return names


def get_backend(name):
    """Return the kernel module for an explicit backend name."""
    if name == "numpy":
        return _es_numpy
    if name == "cython":
        if _es_cython is None:
            raise ValueError("compiled kernel not available")
        return _es_cython
    raise ValueError(f"unknown kernel backend: {name!r}")
