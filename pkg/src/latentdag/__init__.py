"""Generic finite identifiability of Gaussian DAG models with one latent source."""

__version__ = "0.1.0"
