from setuptools import setup, find_packages


setup(
    name="netembed",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pyyaml>=6.0",
        "ujson>=5.7",
    ],
    entry_points={
        "console_scripts": [
            "netembed = netembed.harness.cli:main",
        ],
    },
)
