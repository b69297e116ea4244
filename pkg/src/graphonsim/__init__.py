"""Graphon-coupled interacting diffusions: simulation and empirical checks."""

__version__ = "0.1.0"

from . import dynamics, experiments, graphon, matnorm, metrics, rng  # noqa: E402,F401
