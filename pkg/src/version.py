"""Package version and metadata information."""

__version__ = "0.1.0"

SERVICE_DESCRIPTION = "Post-hoc Bayesian normalization layers for small networks, with UQ evaluation"
