"""Estimators for functionals with the mixed bias property.

One-step, outcome-regression-type, IPW-type and plug-in estimators over
linear feature bases, exact checks of the algebraic identities that tie
them together, and a seeded Monte Carlo harness.
"""
from .data import Dataset, empirical_mean
from .design import FeatureBasis, MomentSummaries, build_basis, imbalance_vector, moment_summaries
from .estimators import (
    EstimateBundle,
    GammaVector,
    IdentityReport,
    augmented_coefficients,
    estimate_bundle,
    gamma_coefficients,
    ipw_estimate,
    one_step,
    or_estimate,
    plugin_product,
    verify_identities,
)
from .functionals import MixedBiasFunctional, make_functional
from .kernels import BACKEND
from .nuisance import (
    FunctionNuisance,
    LassoResult,
    LinearNuisance,
    balanced_b,
    expit_linear,
    fit_lasso,
    fit_nuisance,
    fit_ols,
    fit_ridge,
    rescale_to_l2,
    solve_main_alpha_eq,
    zero_nuisance,
)
from .simulation import MCReport, make_dgp, monte_carlo, sample, true_nuisances, true_value

__version__ = "0.1.0"
