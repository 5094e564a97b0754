"""Time-varying-parameter VARs with theory-based shrinkage priors.

The package couples a conjugate banded TVP-VAR (random-walk coefficient
prior with closed-form marginal likelihood) to the population moments of a
linear rational-expectations model, plus the surrounding machinery:
hyper-parameter MCMC, competing forecast models, scoring, and structurally
identified impulse responses.
"""

__version__ = "0.1.0"
