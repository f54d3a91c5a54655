"""Build script for the optional compiled coordinate-descent kernel.

The package works without the extension (a pure-numpy fallback is selected
at import time); the compiled kernel is only a speedup for the hot sweep
loop inside the relaxation solver.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "peelbnb._cd_fast",
                ["src/peelbnb/_cd_fast.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
