#!/usr/bin/env python3

from setuptools import setup

with open("minamilab/version.txt", "r") as myfile:
    minamilab_version = myfile.read().strip()

setup(name='minamilab',
      version=minamilab_version,
      description='Numerical checks of the generalized Minami estimate for magnetic Anderson models',
      long_description=open('README.md', 'r').read(),
      long_description_content_type="text/markdown",
      license="Apache 2.0",
      classifiers=['Intended Audience :: Science/Research',
                   'Programming Language :: Python :: 3'],
      python_requires='>=3.7',
      packages=['minamilab'],
      package_data={'minamilab': ['version.txt']},
      install_requires=['numpy>=1.21.0', 'scipy>=1.7.0', 'six>=1.15.0'],
      entry_points={'console_scripts': ['minamilab = minamilab.cli:main']},
      test_suite='test',
      )
