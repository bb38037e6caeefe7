"""
Setup script for the RWI allocation simulator
"""

from setuptools import setup, find_packages


# Read README file
def read_readme():
    with open("README.md", "r", encoding="utf-8") as fh:
        return fh.read()


# Read requirements
def read_requirements():
    with open("requirements.txt", "r", encoding="utf-8") as fh:
        return [line.split("#")[0].strip() for line in fh
                if line.strip() and not line.startswith("#") and "# dev" not in line]


setup(
    name="rwi-sim",
    version="1.0.0",
    author="RWI Simulation Team",
    description="Random walk insertion for two-choice bins: simulator, structure analysis and bound checks",
    long_description=read_readme(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
    install_requires=read_requirements(),
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "hypothesis>=6.80.0",
            "black>=23.0.0",
            "flake8>=6.0.0",
            "mypy>=1.5.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "rwi-sim=src.cli_io:main",
        ],
    },
    keywords=[
        "cuckoo hashing", "random walk insertion", "two-choice allocation",
        "balanced allocation", "random graphs", "simulation"
    ],
)
