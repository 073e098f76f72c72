"""Surrogate models: kriging, PLS reduction, mixture of experts."""
from .gp import GaussianProcessModel, fit_gp, predict
from .moe import MixtureOfExperts, fit_moe, moe_predict
from .pls import PlsProjection, pls_fit

__all__ = [
    "GaussianProcessModel",
    "MixtureOfExperts",
    "PlsProjection",
    "fit_gp",
    "fit_moe",
    "moe_predict",
    "pls_fit",
    "predict",
]
