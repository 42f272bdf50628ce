"""Retrodiction probabilities and retrodiction entropy for stochastic processes.

Subpackages:

* ``retrodict.discrete`` -- exact finite-state calculus: Bayes inversion,
  entropy/KL identities, divergence monotonicity and rate checks.
* ``retrodict.gaussian`` -- closed-form entropies for Gaussian processes
  (Wiener and Ornstein-Uhlenbeck specializations) plus quadrature oracles.
* ``retrodict.langevin`` -- Monte-Carlo simulation of Langevin particles and
  the binned empirical retrodiction-entropy estimator.
* ``retrodict.logistic`` -- retrodictability of the logistic map under
  randomized coarse-graining.
* ``retrodict.cli`` -- the ``retrodict`` command-line front end.
"""

from .discrete import (
    DiscreteDistribution,
    EntropyReport,
    RetrodictionKernel,
    TransitionKernel,
    average_retrodiction_entropy,
    average_transition_entropy,
    averaged_kl_family,
    bayes_invert,
    entropy_report,
    evolve,
    kl_divergence,
    kl_monotonicity_check,
    mutual_information,
    posterior_dispersion,
    rate_bound_check,
    retrodiction_entropy,
    shannon_entropy,
    stationary_distribution,
    verify_kl_relations,
)

__version__ = "0.1.0"
