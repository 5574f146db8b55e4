"""Build script for the compiled flow-kernel extension.

The extension is optional at runtime: hermiflow.core falls back to the
pure-numpy right-hand side when the compiled module is not importable.
"""

from setuptools import Extension, setup
from Cython.Build import cythonize

ext = Extension(
    "hermiflow._fast",
    ["src/hermiflow/_fast.pyx"],
    extra_compile_args=["-O3"],
)

setup(ext_modules=cythonize(ext, language_level=3))
