from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension(
            "kinmix._kernels_cy",
            ["src/kinmix/_kernels_cy.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )],
        language_level=3,
    )
except ImportError:
    # pure-Python install; kinmix.backend falls back to the numpy kernels
    pass

setup(ext_modules=ext_modules)
