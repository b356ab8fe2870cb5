"""One-step, outcome-regression-type, IPW-type and plug-in estimators.

Every estimator here adds ``Pn{s_0}``, so functionals with a nonzero
``s_0`` (the expected conditional covariance) are handled without
relabelling. Each empirical mean is a compensated sum in row order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import data as _data
from .data import Dataset
from .design import FeatureBasis, imbalance_vector, moment_summaries
from .errors import CannotRescaleError, IllPosedGammaError, SingularSystemError
from .functionals import MixedBiasFunctional, evaluate_h
from .nuisance import LinearNuisance, fit_ols, rescale_to_l2, solve_main_alpha_eq

GAMMA_RTOL = 1e-12


def _terms(dataset: Dataset, functional: MixedBiasFunctional, a, b):
    """The four empirical means whose sum is the one-step estimator."""
    Z = functional.z(dataset)
    s_ab = functional.s_ab(dataset)
    product = 0.0
    if a is not None and b is not None:
        az = _data.check_finite(evaluate_h(a, Z), "nuisance a(Z)")
        bz = _data.check_finite(evaluate_h(b, Z), "nuisance b(Z)")
        product = _data.mean(s_ab * az * bz, "s_ab a b")
    m1bar = _data.mean(functional.m1(dataset, a), "m1(O, a)") if a is not None else 0.0
    m2bar = _data.mean(functional.m2(dataset, b), "m2(O, b)") if b is not None else 0.0
    s0bar = _data.mean(functional.s_0(dataset), "s_0")
    return product, m1bar, m2bar, s0bar


def one_step(dataset: Dataset, functional: MixedBiasFunctional, a, b) -> float:
    """``Pn{s_ab a b} + Pn{m1(O, a)} + Pn{m2(O, b)} + Pn{s_0}``."""
    product, m1bar, m2bar, s0bar = _terms(dataset, functional, a, b)
    return product + m1bar + m2bar + s0bar


def or_estimate(dataset: Dataset, functional: MixedBiasFunctional, a) -> float:
    """Outcome-regression-type estimator ``Pn{m1(O, a)} + Pn{s_0}``."""
    _, m1bar, _, s0bar = _terms(dataset, functional, a, None)
    return m1bar + s0bar


def ipw_estimate(dataset: Dataset, functional: MixedBiasFunctional, b) -> float:
    """IPW-type estimator ``Pn{m2(O, b)} + Pn{s_0}``."""
    _, _, m2bar, s0bar = _terms(dataset, functional, None, b)
    return m2bar + s0bar


def plugin_product(dataset: Dataset, functional: MixedBiasFunctional, a, b) -> float:
    """Product plug-in ``-Pn{s_ab a b} + Pn{s_0}``."""
    product, _, _, s0bar = _terms(dataset, functional, a, b)
    return -product + s0bar


@dataclass(frozen=True)
class EstimateBundle:
    one_step: float
    outcome_regression: float
    ipw: float
    plugin_product: float
    s0_mean: float

    def to_dict(self) -> dict:
        return {
            "one_step": self.one_step,
            "outcome_regression": self.outcome_regression,
            "ipw": self.ipw,
            "plugin_product": self.plugin_product,
            "s0_mean": self.s0_mean,
        }


def estimate_bundle(dataset: Dataset, functional: MixedBiasFunctional, a, b) -> EstimateBundle:
    product, m1bar, m2bar, s0bar = _terms(dataset, functional, a, b)
    return EstimateBundle(
        one_step=product + m1bar + m2bar + s0bar,
        outcome_regression=m1bar + s0bar,
        ipw=m2bar + s0bar,
        plugin_product=-product + s0bar,
        s0_mean=s0bar,
    )


@dataclass(frozen=True)
class GammaVector:
    gamma: np.ndarray
    degenerate_mask: np.ndarray


def gamma_coefficients(phi_hat, M1) -> GammaVector:
    """Per-feature imbalance ratios ``phi_hat_j / M1_j``.

    Where both entries vanish the ratio is set to 0 and flagged; the
    feature then contributes nothing to the augmentation whatever the
    ratio. A vanishing ``M1_j`` with nonzero imbalance cannot be absorbed
    by rescaling the coefficient and raises :class:`IllPosedGammaError`.
    """
    phi_hat = np.asarray(phi_hat, dtype=np.float64).reshape(-1)
    M1 = np.asarray(M1, dtype=np.float64).reshape(-1)
    if phi_hat.shape != M1.shape:
        raise ValueError(f"length mismatch: {phi_hat.shape[0]} vs {M1.shape[0]}")
    gamma = np.zeros_like(phi_hat)
    mask = np.zeros(phi_hat.shape, dtype=bool)
    for j, (ph, m) in enumerate(zip(phi_hat, M1)):
        if abs(m) > GAMMA_RTOL * (1.0 + abs(ph)):
            gamma[j] = ph / m
        elif abs(ph) <= GAMMA_RTOL * (1.0 + abs(m)):
            mask[j] = True
        else:
            raise IllPosedGammaError(
                f"gamma_{j} ill-posed: Pn{{m1(O, phi_{j})}} = {m!r} "
                f"but imbalance = {ph!r}",
                index=j,
            )
    return GammaVector(gamma=gamma, degenerate_mask=mask)


def augmented_coefficients(beta_hat, beta_tilde, gamma: GammaVector) -> np.ndarray:
    """``(1 - gamma_j) beta_hat_j + gamma_j beta_tilde_j``; flagged entries keep ``beta_hat_j``."""
    beta_hat = np.asarray(beta_hat, dtype=np.float64).reshape(-1)
    beta_tilde = np.asarray(beta_tilde, dtype=np.float64).reshape(-1)
    g = gamma.gamma
    if not beta_hat.shape == beta_tilde.shape == g.shape:
        raise ValueError("coefficient and gamma lengths differ")
    out = (1.0 - g) * beta_hat + g * beta_tilde
    return np.where(gamma.degenerate_mask, beta_hat, out)


IDENTITY_KEYS = (
    "eq_basic",
    "eq_linear_transform",
    "prop1",
    "l1_collapse",
    "l2_collapse",
    "triple_ols",
)


@dataclass
class IdentityReport:
    """Absolute residuals of each collapse identity against its tolerance.

    A residual of ``None`` means the check was skipped; ``skipped`` records
    why. Skipped checks are neither passes nor failures.
    """

    residuals: dict
    tolerances: dict
    skipped: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(
            r <= self.tolerances[k] for k, r in self.residuals.items() if r is not None
        )

    def to_dict(self) -> dict:
        return {
            "residuals": dict(self.residuals),
            "tolerances": dict(self.tolerances),
            "skipped": dict(self.skipped),
            "pass": self.passed,
            "details": self.details,
        }


def _dot(x, y) -> float:
    return math.fsum((np.asarray(x) * np.asarray(y)).tolist())


def verify_identities(
    dataset: Dataset,
    functional: MixedBiasFunctional,
    basis: FeatureBasis,
    beta_hat,
    b,
    rtol: float = 1e-8,
) -> IdentityReport:
    """Evaluate every collapse identity for ``a = beta_hat' phi`` and ``b``.

    ``beta_tilde`` is taken from :func:`solve_main_alpha_eq`, with the
    OLS-type hint when ``b`` is linear in the same basis. Each residual is
    compared against ``rtol * (1 + |one_step|)``.
    """
    a_hat = LinearNuisance(basis, beta_hat)
    ms = moment_summaries(dataset, functional, basis)
    Z = functional.z(dataset)
    s_ab = functional.s_ab(dataset)
    bz = _data.check_finite(evaluate_h(b, Z), "nuisance b(Z)")

    phi_hat = imbalance_vector(dataset, functional, basis, b)
    m2bar = _data.mean(functional.m2(dataset, b), "m2(O, b)")
    rule = "min-norm"
    if isinstance(b, LinearNuisance) and b.basis == basis:
        try:
            beta_tilde = fit_ols(ms.G, ms.M2)
            rule = "ols"
        except SingularSystemError:
            pass
    if rule == "min-norm":
        beta_tilde = solve_main_alpha_eq(phi_hat, m2bar)
    a_tilde = LinearNuisance(basis, beta_tilde)

    chi = one_step(dataset, functional, a_hat, b)
    gamma = gamma_coefficients(phi_hat, ms.M1)
    beta_aug = augmented_coefficients(a_hat.coefficients, beta_tilde, gamma)
    a_aug = LinearNuisance(basis, beta_aug)

    residuals = {}
    skipped = {}
    residuals["eq_basic"] = abs(m2bar - _data.mean(-s_ab * bz * a_tilde(Z)))
    residuals["eq_linear_transform"] = abs(m2bar - _dot(phi_hat, beta_tilde))
    residuals["prop1"] = abs(chi - or_estimate(dataset, functional, a_aug))
    residuals["l1_collapse"] = abs(
        one_step(dataset, functional, a_tilde, b) - or_estimate(dataset, functional, a_tilde)
    )
    try:
        b_l2 = rescale_to_l2(dataset, functional, a_hat, b)
    except CannotRescaleError as exc:
        residuals["l2_collapse"] = None
        skipped["l2_collapse"] = str(exc)
    else:
        residuals["l2_collapse"] = abs(
            one_step(dataset, functional, a_hat, b_l2) - ipw_estimate(dataset, functional, b_l2)
        )
    try:
        a_ols = LinearNuisance(basis, fit_ols(ms.G, ms.M2))
        b_ols = LinearNuisance(basis, fit_ols(ms.G, ms.M1))
    except SingularSystemError as exc:
        residuals["triple_ols"] = None
        skipped["triple_ols"] = str(exc)
    else:
        vals = (
            one_step(dataset, functional, a_ols, b_ols),
            or_estimate(dataset, functional, a_ols),
            ipw_estimate(dataset, functional, b_ols),
        )
        residuals["triple_ols"] = max(vals) - min(vals)

    tol = rtol * (1.0 + abs(chi))
    details = {
        "one_step": chi,
        "m2bar": m2bar,
        "beta_tilde": beta_tilde.tolist(),
        "beta_tilde_rule": rule,
        "gamma": gamma.gamma.tolist(),
        "gamma_degenerate": gamma.degenerate_mask.tolist(),
        "beta_aug": beta_aug.tolist(),
    }
    return IdentityReport(
        residuals=residuals,
        tolerances={k: tol for k in IDENTITY_KEYS},
        skipped=skipped,
        details=details,
    )

