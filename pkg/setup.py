"""Build script for the optional compiled filter kernel.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes SARIMA fitting much faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "consent_audit.sarima._filter_cy",
                ["src/consent_audit/sarima/_filter_cy.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
