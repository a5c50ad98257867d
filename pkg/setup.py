import numpy as np
from setuptools import Extension, setup

# The VM extension is optional: hiopt falls back to a numpy interpreter
# when it is missing.
ext_modules = []
try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "hiopt._vm",
                ["src/hiopt/_vm.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
