"""Numerical laboratory for Bayesian sequential prediction under log-loss.

Generative processes with exact conditional likelihoods, optimal and
misspecified predictors, exact and Monte-Carlo error/information estimators,
closed-form estimation-error and rate-distortion bounds, quantizer
constructions, and a scenario harness that checks the bounds numerically.
"""

__version__ = "1.0.0"
