"""Linear nuisance fitting and estimating-equation constructions.

Both nuisances share the same normal equations: with
``G = Pn{-s_ab phi phi'}``, the a-side OLS-type coefficients solve
``G beta = M2`` and the b-side ones solve ``G alpha = M1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.special

from . import data as _data
from . import kernels
from .data import Dataset
from .design import FeatureBasis, build_basis, moment_summaries
from .errors import (
    CannotRescaleError,
    ConfigError,
    NoSolutionError,
    SingularSystemError,
    UnsupportedObjectiveError,
)
from .functionals import MixedBiasFunctional, evaluate_h

PIVOT_RTOL = 1e-12


class LinearNuisance:
    """``h(z) = coefficients' phi(z)`` over a fixed basis."""

    def __init__(self, basis: FeatureBasis, coefficients):
        coef = np.array(coefficients, dtype=np.float64).reshape(-1)
        if coef.shape[0] != basis.p:
            raise ValueError(
                f"{coef.shape[0]} coefficients for a basis of {basis.p} features"
            )
        coef.flags.writeable = False
        self.basis = basis
        self.coefficients = coef

    def __call__(self, Z):
        return self.basis(Z) @ self.coefficients

    def scaled(self, c: float) -> LinearNuisance:
        return LinearNuisance(self.basis, c * self.coefficients)

    def __repr__(self):
        return f"LinearNuisance({self.basis.names}, {self.coefficients.tolist()})"


class FunctionNuisance:
    """Opaque nuisance wrapping an arbitrary deterministic function of Z."""

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], label: str = "function"):
        self.func = func
        self.label = label

    def __call__(self, Z):
        return self.func(np.asarray(Z, dtype=np.float64))

    def scaled(self, c: float) -> FunctionNuisance:
        func = self.func
        return FunctionNuisance(lambda Z: c * np.asarray(func(Z)), f"{c!r}*{self.label}")

    def __repr__(self):
        return f"FunctionNuisance({self.label})"


def zero_nuisance() -> FunctionNuisance:
    return FunctionNuisance(lambda Z: np.zeros(np.asarray(Z).shape[0]), "zero")


def expit_linear(basis: FeatureBasis, v) -> FunctionNuisance:
    """Nonlinear nuisance ``1 / (1 + exp(-v' phi(z)))``."""
    v = np.array(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != basis.p:
        raise ValueError(f"{v.shape[0]} coefficients for a basis of {basis.p} features")

    def f(Z):
        return scipy.special.expit(basis(Z) @ v)

    return FunctionNuisance(f, f"expit-linear{v.tolist()}")


Nuisance = LinearNuisance | FunctionNuisance


@dataclass(frozen=True)
class LassoResult:
    coefficients: np.ndarray
    iterations: int
    kkt_residual: float
    converged: bool
    max_update: float = field(default=0.0)


def _solve(G, M, what="system"):
    G = np.asarray(G, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64).reshape(-1)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] != M.shape[0]:
        raise ValueError(f"incompatible shapes {G.shape} and {M.shape}")
    norm = float(np.abs(G).sum(axis=1).max()) if G.size else 0.0
    threshold = PIVOT_RTOL * norm
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(G, check_finite=True)
    pivots = np.abs(np.diag(lu))
    small = np.flatnonzero(~(pivots > threshold))
    if norm == 0.0 or small.size:
        j = int(small[0]) if small.size else 0
        raise SingularSystemError(
            f"singular {what}: pivot {j} is {pivots[j]:.3g}, threshold {threshold:.3g}",
            pivot_index=j,
        )
    beta = scipy.linalg.lu_solve((lu, piv), M)
    # one step of iterative refinement
    beta = beta + scipy.linalg.lu_solve((lu, piv), M - G @ beta)
    return beta


def fit_ols(G, M) -> np.ndarray:
    """Solve ``G beta = M`` by LU with partial pivoting.

    Raises :class:`SingularSystemError` when a pivot falls below
    ``1e-12 * ||G||_inf``.
    """
    return _solve(G, M, "Gram matrix")


def fit_ridge(G, M, lam: float) -> np.ndarray:
    """Solve ``(G + lam I) beta = M``; ``lam`` scales the averaged Gram."""
    if not lam >= 0:
        raise ValueError(f"ridge penalty must be >= 0, got {lam}")
    G = np.asarray(G, dtype=np.float64)
    return _solve(G + lam * np.eye(G.shape[0]), M, "ridge system")


def lasso_kkt_residual(G, M, beta, lam) -> float:
    grad = np.asarray(G) @ beta - np.asarray(M)
    active = beta != 0
    res = np.where(
        active,
        np.abs(grad + lam * np.sign(beta)),
        np.maximum(0.0, np.abs(grad) - lam),
    )
    return float(res.max()) if res.size else 0.0


def fit_lasso(G, M, lam: float, tol: float = 1e-10, max_iter: int = 10_000) -> LassoResult:
    """Minimise ``0.5 b'Gb - M'b + lam ||b||_1`` by cyclic coordinate descent.

    Stops once the largest coordinate update in a sweep is ``<= tol``.
    Failure to converge within ``max_iter`` sweeps is reported through
    ``converged=False`` rather than raised.
    """
    if not lam >= 0:
        raise ValueError(f"lasso penalty must be >= 0, got {lam}")
    G = np.ascontiguousarray(G, dtype=np.float64)
    M = np.ascontiguousarray(M, dtype=np.float64).reshape(-1)
    diag = np.diag(G)
    if np.any(~(diag > 0)):
        j = int(np.flatnonzero(~(diag > 0))[0])
        raise UnsupportedObjectiveError(
            f"lasso needs a positive Gram diagonal; G[{j},{j}] = {diag[j]:.3g}"
        )
    min_eig = float(np.linalg.eigvalsh(G).min())
    if min_eig < -1e-10 * float(np.abs(G).sum(axis=1).max()):
        raise UnsupportedObjectiveError(
            f"lasso needs a positive semidefinite Gram matrix; min eigenvalue {min_eig:.3g}"
        )
    beta, iterations, max_update = kernels.lasso_cd(G, M, float(lam), float(tol), int(max_iter))
    beta = np.asarray(beta)
    converged = bool(max_update <= tol)
    return LassoResult(
        coefficients=beta,
        iterations=int(iterations),
        kkt_residual=lasso_kkt_residual(G, M, beta, lam),
        converged=converged,
        max_update=float(max_update),
    )


def solve_main_alpha_eq(phi_hat, m2bar: float, linear_hint=None) -> np.ndarray:
    """Coefficients ``beta`` with ``phi_hat' beta = m2bar``.

    With ``linear_hint=(G, M2)`` and ``G`` nonsingular the OLS-type solution
    ``G^{-1} M2`` is returned; it solves the equation for every b linear in
    the same basis. Otherwise the minimum-norm solution
    ``phi_hat * m2bar / ||phi_hat||^2`` is returned.
    """
    phi_hat = np.asarray(phi_hat, dtype=np.float64).reshape(-1)
    if linear_hint is not None:
        G, M2 = linear_hint
        try:
            return fit_ols(G, M2)
        except SingularSystemError:
            pass
    ss = math.fsum((phi_hat * phi_hat).tolist())
    if ss == 0.0:
        if m2bar != 0.0:
            raise NoSolutionError(
                f"imbalance vector is zero but Pn{{m2(O, b)}} = {m2bar!r}"
            )
        return np.zeros_like(phi_hat)
    return phi_hat * (m2bar / ss)


def balanced_b(G, M1, basis: FeatureBasis) -> LinearNuisance:
    """b-side nuisance with coefficients ``G^{-1} M1``; every gamma equals 1."""
    return LinearNuisance(basis, fit_ols(G, M1))


def rescale_to_l2(
    dataset: Dataset, functional: MixedBiasFunctional, a_hat, b0
):
    """Return ``c * b0`` with ``c`` chosen so ``Pn{s_ab a b + m1(O, a)} = 0``."""
    Z = functional.z(dataset)
    m1bar = _data.mean(functional.m1(dataset, a_hat), "m1(O, a)")
    terms = _data.check_finite(
        functional.s_ab(dataset) * evaluate_h(a_hat, Z) * evaluate_h(b0, Z),
        "s_ab a b",
    )
    den = _data.mean(terms)
    scale = float(np.abs(terms).mean())
    if den == 0.0 or abs(den) <= 1e-12 * scale:
        raise CannotRescaleError(
            f"cannot rescale b: Pn{{s_ab a b0}} = {den!r} is degenerate"
        )
    c = -m1bar / den
    return b0.scaled(c) if hasattr(b0, "scaled") else FunctionNuisance(
        lambda Zp: c * np.asarray(b0(Zp)), f"{c!r}*b0"
    )


# -- descriptor grammar ------------------------------------------------------

_METHODS = ("ols", "ridge", "lasso", "coeffs", "balanced", "expit-linear", "zero", "true")


@dataclass(frozen=True)
class NuisanceSpec:
    """Parsed nuisance descriptor ``method[:args][@basis]``."""

    method: str
    args: tuple = ()
    basis: Optional[str] = None

    @property
    def text(self) -> str:
        out = self.method
        if self.args:
            out += ":" + ",".join(repr(a) for a in self.args)
        if self.basis:
            out += "@" + self.basis
        return out


def parse_nuisance(descriptor: str) -> NuisanceSpec:
    """Parse e.g. ``ols``, ``ridge:0.1``, ``coeffs:1,0,2``, ``balanced@intercept``."""
    text = (descriptor or "").strip()
    head, _, basis = text.partition("@")
    method, sep, arg_text = head.partition(":")
    method = method.strip()
    if method not in _METHODS:
        raise ConfigError(f"unknown nuisance method {method!r} in {descriptor!r}")
    args = ()
    if sep:
        try:
            args = tuple(float(x) for x in arg_text.split(","))
        except ValueError:
            raise ConfigError(f"non-numeric argument in nuisance {descriptor!r}") from None
        if not all(math.isfinite(a) for a in args):
            raise ConfigError(f"non-finite argument in nuisance {descriptor!r}")
    needs = {"ridge": 1, "lasso": 1}
    if method in needs and len(args) != needs[method]:
        raise ConfigError(f"{method} takes exactly one penalty, got {descriptor!r}")
    if method in ("coeffs", "expit-linear") and not args:
        raise ConfigError(f"{method} needs a coefficient list")
    if method in ("ols", "balanced", "zero", "true") and args:
        raise ConfigError(f"{method} takes no arguments")
    return NuisanceSpec(method, args, basis.strip() or None)


def fit_nuisance(
    spec,
    side: str,
    dataset: Dataset,
    functional: MixedBiasFunctional,
    basis_spec: str,
    true_nuisances=None,
):
    """Build the a-side or b-side nuisance described by ``spec``.

    ``basis_spec`` is the run's basis; a descriptor may override it with
    ``@<basis>`` (used to truncate one nuisance's basis). ``true_nuisances``
    is the ``(a, b)`` pair of a simulation model, needed for ``true``.
    """
    if side not in ("a", "b"):
        raise ValueError("side must be 'a' or 'b'")
    if isinstance(spec, str):
        spec = parse_nuisance(spec)
    if spec.method == "zero":
        return zero_nuisance()
    if spec.method == "true":
        if true_nuisances is None:
            raise ConfigError("nuisance 'true' requires a simulation model")
        return true_nuisances[0 if side == "a" else 1]
    basis = build_basis(spec.basis or basis_spec, functional.z_arity)
    if spec.method == "coeffs":
        try:
            return LinearNuisance(basis, spec.args)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if spec.method == "expit-linear":
        try:
            return expit_linear(basis, spec.args)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    ms = moment_summaries(dataset, functional, basis)
    M = ms.M2 if side == "a" else ms.M1
    if spec.method in ("ols", "balanced"):
        return LinearNuisance(basis, fit_ols(ms.G, M))
    if spec.method == "ridge":
        return LinearNuisance(basis, fit_ridge(ms.G, M, spec.args[0]))
    # lasso
    if np.any(-functional.s_ab(dataset) < 0):
        raise UnsupportedObjectiveError(
            f"lasso objective unsupported for {functional.name}: -s_ab takes negative values"
        )
    result = fit_lasso(ms.G, M, spec.args[0])
    if not result.converged:
        warnings.warn(
            f"lasso did not converge in {result.iterations} sweeps "
            f"(KKT residual {result.kkt_residual:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return LinearNuisance(basis, result.coefficients)
