"""Measurement protocols and the statistics used to analyse them."""

from .fitting import (FitResult, bootstrap_ci, fit_decaying_sinusoid, fit_exp_of_exp,
                      fit_exponential, with_bootstrap)

__all__ = ["FitResult", "bootstrap_ci", "fit_decaying_sinusoid", "fit_exp_of_exp",
           "fit_exponential", "with_bootstrap"]
