from setuptools import setup, find_packages

requirements = ["numpy>=1.17", "scipy>=1.4"]

setup_requirements = ["pytest-runner", "setuptools>=38.6.0", "wheel>=0.31.0"]

test_requirements = ["pytest"]

with open("README.md") as infile:
    long_description = infile.read()


setup(
    name="tomofisher",
    version="1.0.0",
    description="Fisher information and maximum-likelihood studies of quantum state tomography",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="License :: OSI Approved :: MIT License",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.7",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    packages=find_packages(where="src", include=["tomofisher"]),
    package_dir={"": "src"},
    entry_points={"console_scripts": ["tomofisher = tomofisher.cli:main"]},
    install_requires=requirements,
    tests_require=test_requirements,
    setup_requires=setup_requirements,
    python_requires=">=3.7",
    test_suite="test",
)
