from setuptools import Extension, setup
from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        [
            Extension(
                "hamflow._ext",
                ["src/hamflow/_ext.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
)
