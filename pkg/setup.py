from setuptools import setup, find_packages

setup(
    name="nodal-blowup",
    version="0.1.1",
    description="Numerical lab for nodal blow-up in the Moser-Trudinger critical problem on the unit disk",
    packages=find_packages(exclude=["examples", "examples.*"]),
    python_requires=">=3.10",
    install_requires=[
        "pydantic>=2.0.0",
        "python-dotenv>=1.0.0",
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "pandas>=2.1.0",
    ],
    entry_points={
        "console_scripts": [
            "nbl=nodal_blowup.main:main",
        ],
    },
)
