"""Build script for the optional compiled enrichment-score kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time); a failed extension build is downgraded to a
warning so `pip install` never hard-fails on a machine without a compiler.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"latentgsea: skipping compiled kernel build ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "latentgsea._kernels._es_cython",
        ["src/latentgsea/_kernels/_es_cython.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
