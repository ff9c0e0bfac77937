import numpy
from Cython.Build import cythonize
from setuptools import setup

setup(
    ext_modules=cythonize(
        ["src/slam2d/kernels/_core.pyx"],
        compiler_directives={"language_level": "3"},
    ),
    include_dirs=[numpy.get_include()],
)
