"""Build script for the optional compiled encoder kernel.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and falls back to the pure-Python kernel.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SERVORIG_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("servorig._ckernels", ["src/servorig/_ckernels.pyx"],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
