"""Seeded data-generating processes and the Monte Carlo replication engine.

Two models are provided, both with ``L ~ Uniform(-1, 1)`` so that every
truth is available in closed form.

``cf-mean-dgp`` (parameters ``c0``, ``c1``)::

    A | L ~ Bernoulli(expit(c0 + c1 L))
    Y = 1 + 2L + A (1 + L) + eps,  eps ~ N(0, 1)

The counterfactual mean under ``A = 1`` is ``E(2 + 3L) = 2``; the average
treatment effect is ``E(1 + L) = 1``.

``ecc-dgp`` (parameters ``theta``, ``sigma2_u``)::

    A = L + u,  u ~ N(0, sigma2_u)
    Y = L + theta A + e,  e ~ N(0, 1)

so ``E{Cov(A, Y | L)} = theta * sigma2_u``.

Random numbers come from numpy's PCG64 bit generator. Draw order is fixed:
``L`` first, then the treatment noise, then the outcome noise. Replication
``r`` of a run with master seed ``s`` is sampled with seed
``SeedSequence(s, spawn_key=(r,)).generate_state(1, uint64)[0]``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .data import Dataset
from .errors import DGPError, MixedBiasError, PositivityError, ReplicationError
from .estimators import ipw_estimate, one_step, or_estimate
from .functionals import MixedBiasFunctional, make_functional
from .nuisance import FunctionNuisance, fit_nuisance, parse_nuisance

POSITIVITY_BOUNDS = (0.01, 0.99)

_DEFAULTS = {
    "cf-mean-dgp": {"c0": 0.5, "c1": 1.0},
    "ecc-dgp": {"theta": 1.0, "sigma2_u": 0.25},
}

DEFAULT_FUNCTIONAL = {"cf-mean-dgp": "cf-mean", "ecc-dgp": "ecc"}


@dataclass(frozen=True)
class DGP:
    kind: str
    params: dict
    truth: float
    true_a: Callable
    true_b: Callable

    def propensity(self, L):
        if self.kind != "cf-mean-dgp":
            raise DGPError(f"{self.kind} has no propensity score")
        return expit(self.params["c0"] + self.params["c1"] * np.asarray(L))


def make_dgp(kind: str, params: dict | None = None) -> DGP:
    if kind not in _DEFAULTS:
        raise DGPError(f"unknown DGP kind {kind!r}; choose from {sorted(_DEFAULTS)}")
    merged = dict(_DEFAULTS[kind])
    for key, value in (params or {}).items():
        if key not in merged:
            raise DGPError(f"{kind} has no parameter {key!r}; expected {sorted(merged)}")
        value = float(value)
        if not math.isfinite(value):
            raise DGPError(f"parameter {key} must be finite")
        merged[key] = value

    if kind == "cf-mean-dgp":
        c0, c1 = merged["c0"], merged["c1"]
        lo, hi = sorted(expit([c0 - c1, c0 + c1]))
        if lo < POSITIVITY_BOUNDS[0] or hi > POSITIVITY_BOUNDS[1]:
            raise PositivityError(
                f"propensity range [{lo:.4g}, {hi:.4g}] leaves {list(POSITIVITY_BOUNDS)}"
            )

        def true_a(Z):
            Z = np.asarray(Z, dtype=np.float64)
            A, L = Z[:, 0], Z[:, 1]
            return 1.0 + 2.0 * L + A * (1.0 + L)

        def true_b(Z):
            Z = np.asarray(Z, dtype=np.float64)
            A, L = Z[:, 0], Z[:, 1]
            return A / expit(c0 + c1 * L)

        return DGP(kind, merged, 2.0, FunctionNuisance(true_a, "E(Y|A,L)"),
                   FunctionNuisance(true_b, "A/pi(L)"))

    theta, s2 = merged["theta"], merged["sigma2_u"]
    if not s2 > 0:
        raise DGPError(f"sigma2_u must be positive, got {s2}")

    def true_a(Z):
        return (1.0 + theta) * np.asarray(Z, dtype=np.float64)[:, 0]

    def true_b(Z):
        return np.asarray(Z, dtype=np.float64)[:, 0].copy()

    return DGP(kind, merged, theta * s2, FunctionNuisance(true_a, "E(Y|L)"),
               FunctionNuisance(true_b, "E(A|L)"))


def sample(dgp: DGP, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. rows with columns ``a``, ``l``, ``y``."""
    if n < 1:
        raise DGPError("sample size must be >= 1")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    L = rng.uniform(-1.0, 1.0, n)
    if dgp.kind == "cf-mean-dgp":
        U = rng.uniform(0.0, 1.0, n)
        A = (U < dgp.propensity(L)).astype(np.float64)
        eps = rng.standard_normal(n)
        Y = 1.0 + 2.0 * L + A * (1.0 + L) + eps
    else:
        u = math.sqrt(dgp.params["sigma2_u"]) * rng.standard_normal(n)
        e = rng.standard_normal(n)
        A = L + u
        Y = L + dgp.params["theta"] * A + e
    return Dataset({"a": A, "l": L, "y": Y})


def true_value(dgp: DGP, kind: str | None = None) -> float:
    kind = kind or DEFAULT_FUNCTIONAL[dgp.kind]
    if dgp.kind == "cf-mean-dgp" and kind == "ate":
        return 1.0
    if kind != DEFAULT_FUNCTIONAL[dgp.kind]:
        raise DGPError(f"no closed-form truth for {kind} under {dgp.kind}")
    return dgp.truth


def true_nuisances(dgp: DGP, kind: str | None = None):
    """The ``(a, b)`` pair of functions of Z for the given functional."""
    kind = kind or DEFAULT_FUNCTIONAL[dgp.kind]
    if dgp.kind == "cf-mean-dgp" and kind == "ate":

        def b_ate(Z):
            Z = np.asarray(Z, dtype=np.float64)
            A, pi = Z[:, 0], dgp.propensity(Z[:, 1])
            return A / pi - (1.0 - A) / (1.0 - pi)

        return dgp.true_a, FunctionNuisance(b_ate, "A/pi - (1-A)/(1-pi)")
    if kind != DEFAULT_FUNCTIONAL[dgp.kind]:
        raise DGPError(f"no closed-form nuisances for {kind} under {dgp.kind}")
    return dgp.true_a, dgp.true_b


def replication_seed(seed: int, r: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(r),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class MCReport:
    estimator: str
    n: int
    reps: int
    mean_estimate: float
    bias: float
    sd: float
    mc_se: float
    seed: int
    truth: float
    dgp: str = ""
    functional: str = ""
    basis: str = ""
    nuisance_a: str = ""
    nuisance_b: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


ESTIMATORS = ("one-step", "or", "ipw")


def monte_carlo(
    dgp: DGP,
    functional: MixedBiasFunctional | None,
    basis_spec: str,
    nuisance_a_spec: str,
    nuisance_b_spec: str,
    estimator: str,
    n: int,
    reps: int,
    seed: int,
) -> MCReport:
    """Run ``reps`` independent replications and summarise the estimates.

    Each replication samples a fresh dataset, fits the nuisances the
    estimator needs and evaluates it. Estimates are aggregated in
    replication order.
    """
    if reps < 2:
        raise DGPError("reps must be >= 2")
    if estimator not in ESTIMATORS:
        raise DGPError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    if functional is None:
        functional = make_functional(DEFAULT_FUNCTIONAL[dgp.kind])
    a_spec = parse_nuisance(nuisance_a_spec)
    b_spec = parse_nuisance(nuisance_b_spec)
    truth = true_value(dgp, functional.kind)
    truths = true_nuisances(dgp, functional.kind)

    estimates = np.empty(reps)
    for r in range(reps):
        try:
            data = sample(dgp, n, replication_seed(seed, r))
            a = b = None
            if estimator in ("one-step", "or"):
                a = fit_nuisance(a_spec, "a", data, functional, basis_spec, truths)
            if estimator in ("one-step", "ipw"):
                b = fit_nuisance(b_spec, "b", data, functional, basis_spec, truths)
            if estimator == "one-step":
                estimates[r] = one_step(data, functional, a, b)
            elif estimator == "or":
                estimates[r] = or_estimate(data, functional, a)
            else:
                estimates[r] = ipw_estimate(data, functional, b)
        except MixedBiasError as exc:
            raise ReplicationError(
                f"replication {r} failed: [{exc.module}] {exc}", replication=r
            ) from exc

    mean_est = math.fsum(estimates.tolist()) / reps
    sd = math.sqrt(math.fsum(((estimates - mean_est) ** 2).tolist()) / (reps - 1))
    return MCReport(
        estimator=estimator,
        n=int(n),
        reps=int(reps),
        mean_estimate=mean_est,
        bias=mean_est - truth,
        sd=sd,
        mc_se=sd / math.sqrt(reps),
        seed=int(seed),
        truth=truth,
        dgp=dgp.kind,
        functional=functional.kind,
        basis=basis_spec,
        nuisance_a=a_spec.text,
        nuisance_b=b_spec.text,
    )
