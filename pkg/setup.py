import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ETHFUZZ_PURE_PYTHON") or "--skip-cython" in sys.argv:
    if "--skip-cython" in sys.argv:
        sys.argv.remove("--skip-cython")
else:
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("Cython not available; installing the pure-Python fallback only", file=sys.stderr)
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "ethfuzz._speedups",
                    ["src/ethfuzz/_speedups.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
