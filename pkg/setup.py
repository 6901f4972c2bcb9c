import os

from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the pure
# NumPy implementations in fedopt._kernels._ref when the extension is
# missing. Set FEDOPT_SKIP_EXT=1 to force a pure-Python install.
ext_modules = []
if os.environ.get("FEDOPT_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "fedopt._kernels._core",
                    ["src/fedopt/_kernels/_core.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
