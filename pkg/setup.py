import os

from setuptools import setup

# The compiled evaluator is optional: set NOETHERCHECK_PURE=1 to skip it and
# run on the pure-Python backend (selected automatically at import time).
ext_modules = []
if os.environ.get("NOETHERCHECK_PURE") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/noethercheck/_evalcore.pyx"],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
