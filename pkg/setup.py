import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="swsysid",
    version="0.1.0",
    author="Jonnyy Torres",
    author_email="wjatr777@gmail.com",
    description="Switched least squares identification of stochastic switched linear systems in JAX",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests", "examples*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
    install_requires=[
        "jax",
        "jaxlib",
        "flax",
        "tensorflow_probability",
        "absl-py",
        "numpy",
        "wandb",
        "tqdm",
        "astropy",
    ],
    extras_require={
        "plot": ["matplotlib"],
        "test": ["pytest"],
    },
    entry_points={"console_scripts": ["swsysid=swsysid.cli:run"]},
)
