from setuptools import setup, find_packages

setup(
    name="mssd",
    version="0.1.0",
    description="Seasonal forecasting by daily phase decomposition with linear and multi-scale convolutional predictors",
    packages=find_packages(include=["mssd", "mssd.*"]),
    install_requires=[
        "numpy",
        "pandas",
        "matplotlib",
        "pydantic",
        "pydantic-settings",
        "python-dotenv",
        "pyyaml",
    ],
    extras_require={
        "test": ["pytest", "pytest-cov"],
    },
    entry_points={
        "console_scripts": ["mssd=mssd.cli:main"],
    },
    python_requires=">=3.9",
)
