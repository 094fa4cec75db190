"""Survival of a lattice random walk among Bernoulli hard obstacles.

Submodules
----------
env
    Obstacle environments, gap structure and stratified gap sampling.
spectral
    Dirichlet spectra of the discrete Laplacian.
survival
    Exact and bounded quenched, averaged and annealed survival probabilities.
montecarlo
    Seeded walk, sausage and killed-walk simulation.
regimes
    Model constants, averaging regimes and the phase diagram.
limitlaw
    One-dimensional infinitely divisible limit laws.
validation
    Invariant checks driven by the ``validate`` subcommand.
cli
    Command-line driver.
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # source checkout without install
    __version__ = "0.1.0"
