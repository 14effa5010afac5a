"""Build the optional Cython core; the package still installs without it."""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("WTBOUND_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("wtbound._core._tandem", ["src/wtbound/_core/_tandem.pyx"],
                       extra_compile_args=["-O3", "-ffp-contract=off"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
