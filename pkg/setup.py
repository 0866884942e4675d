#!/usr/bin/env python

from setuptools import setup, find_packages, Command
import os
import sys


class BaseCommand(Command):
    user_options = []

    def initialize_options(self):
        pass

    def finalize_options(self):
        pass


class TestCommand(BaseCommand):

    description = "run self-tests"

    def run(self):
        os.chdir('testproject')
        ret = os.system('%s manage.py test testapp' % sys.executable)
        if ret != 0:
            sys.exit(-1)


class CoverageCommand(BaseCommand):
    description = "run self-tests and report coverage (requires coverage.py)"

    def run(self):
        os.chdir('testproject')
        r = os.system('coverage run --source=microsr manage.py test testapp')
        if r != 0:
            sys.exit(-1)
        os.system('coverage html')


setup(
    name='MicroSR',
    version='0.1.0',
    author='MicroSR contributors',
    description='Symbolic classification of microbiome abundance tables, with baselines and distillation',
    license='MIT',
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Framework :: Django",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
    ],
    packages=find_packages(exclude=['testproject', 'testproject.*']),
    python_requires='>=3.8',
    install_requires=['Django>=3.2', 'numpy>=1.21', 'pandas>=1.5', 'joblib>=1.1'],
    extras_require={'tests': ['hypothesis>=6.0', 'coverage']},
    entry_points={'console_scripts': ['microsr=microsr.__main__:main']},
    cmdclass={
        'test': TestCommand,
        'coverage': CoverageCommand
    }
)
