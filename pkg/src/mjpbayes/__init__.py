"""Bayesian estimation of rates and latent paths of Markov jump processes."""

from .model import ConfigError, ModelSpec, ObservationSeries, Path, bundled_model, load_model

__all__ = ["ConfigError", "ModelSpec", "ObservationSeries", "Path", "bundled_model", "load_model"]
__version__ = "0.1.0"
