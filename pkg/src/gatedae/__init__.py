"""Gated auto-encoders as energy models: training, scoring and verification."""

from .energy import (
    energy_conditional,
    energy_covariance,
    energy_mean,
    energy_mean_covariance,
    energy_symmetric,
    poincare_residual,
    vector_field,
)
from .gae import Activation, GaeParams, MeanAeParams, decode_x, decode_y, encode, init_gae, init_mean_ae
from .training import TrainConfig, train_gae, train_mean_ae

__version__ = "0.1.0"
