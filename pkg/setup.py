from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "rmtsim._ckernel",
        ["src/rmtsim/_ckernel.pyx"],
        extra_compile_args=["-O3"],
        # A failed compile leaves the pure-Python kernel in charge.
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
