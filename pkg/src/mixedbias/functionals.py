"""Mixed bias functionals and their registry.

A functional in the mixed bias class is fixed by the statistics ``s_ab`` and
``s_0``, two maps ``m1(O, h)`` and ``m2(O, h)`` linear in the function
``h``, and the choice of the subvector ``Z`` of the observation. Its
influence function is ``s_ab*a*b + m1(O, a) + m2(O, b) + s_0 - chi``.

Everything here is vectorised over rows. A function ``h`` of ``Z`` is any
callable taking an ``(n, k)`` array of Z-points and returning either ``(n,)``
values or an ``(n, p)`` block (a vector of functions, such as a feature
basis); the linear maps act column by column on a block.

The m1-based plug-in representation is ``E{m1(O, a_P)} + E(s_0)``, with
``m1`` applied to the a-side nuisance; applying it to ``b_P`` does not
reproduce the counterfactual mean.
"""
from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .data import Dataset
from .errors import FunctionalError

ZFunction = Callable[[np.ndarray], np.ndarray]


def _weighted(w: np.ndarray, values: np.ndarray) -> np.ndarray:
    return w[:, None] * values if values.ndim == 2 else w * values


def evaluate_h(h: ZFunction, Z: np.ndarray) -> np.ndarray:
    values = np.asarray(h(Z), dtype=np.float64)
    if values.ndim == 0:
        values = np.full(Z.shape[0], float(values))
    if values.shape[0] != Z.shape[0] or values.ndim > 2:
        raise FunctionalError(
            f"function of Z returned shape {values.shape} for {Z.shape[0]} points"
        )
    return values


class MixedBiasFunctional:
    """Base class; subclasses define the statistics and the two linear maps.

    Parameters
    ----------
    bindings : mapping
        Role name to dataset column name. The ``L`` role accepts one column
        name or a sequence of names (a vector of covariates).
    """

    kind: str = ""
    roles: tuple = ("A", "L", "Y")

    def __init__(self, bindings: Mapping[str, object]):
        missing = [r for r in self.roles if r not in bindings]
        if missing:
            raise FunctionalError(
                f"{self.kind}: missing binding for role(s) {', '.join(missing)}"
            )
        unknown = sorted(set(bindings) - set(self.roles))
        if unknown:
            raise FunctionalError(f"{self.kind}: unknown role(s) {', '.join(unknown)}")
        resolved = {}
        for role in self.roles:
            cols = bindings[role]
            cols = (cols,) if isinstance(cols, str) else tuple(cols)
            if not cols or not all(isinstance(c, str) and c for c in cols):
                raise FunctionalError(f"{self.kind}: empty binding for role {role}")
            if role != "L" and len(cols) != 1:
                raise FunctionalError(f"{self.kind}: role {role} binds one column")
            resolved[role] = cols
        self._bindings = resolved

    @property
    def name(self) -> str:
        return self.kind

    @property
    def bindings(self) -> dict:
        return {r: (c[0] if len(c) == 1 else list(c)) for r, c in self._bindings.items()}

    @property
    def z_roles(self) -> tuple:
        raise NotImplementedError

    @property
    def z_arity(self) -> int:
        return sum(len(self._bindings[r]) for r in self.z_roles)

    @property
    def z_columns(self) -> tuple:
        return tuple(c for r in self.z_roles for c in self._bindings[r])

    def _col(self, data: Dataset, role: str) -> np.ndarray:
        return data.column(self._bindings[role][0])

    def _L(self, data: Dataset) -> np.ndarray:
        return np.column_stack([data.column(c) for c in self._bindings["L"]])

    def z(self, data: Dataset) -> np.ndarray:
        """Z-points of every row as an ``(n, z_arity)`` array."""
        return np.column_stack([data.column(c) for c in self.z_columns])

    def extract_z(self, data: Dataset, row: int) -> tuple:
        if not 0 <= row < data.n:
            raise IndexError(f"row {row} out of range for n={data.n}")
        return tuple(float(v) for v in self.z(data)[row])

    def s_ab(self, data: Dataset) -> np.ndarray:
        raise NotImplementedError

    def s_0(self, data: Dataset) -> np.ndarray:
        raise NotImplementedError

    def m1(self, data: Dataset, h: ZFunction) -> np.ndarray:
        raise NotImplementedError

    def m2(self, data: Dataset, h: ZFunction) -> np.ndarray:
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self._bindings == other._bindings

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self._bindings.items()))))

    def __repr__(self):
        return f"{type(self).__name__}({self.bindings})"


class _TreatmentFunctional(MixedBiasFunctional):
    z_roles = ("A", "L")

    def _z_at(self, data: Dataset, a_value: float) -> np.ndarray:
        L = self._L(data)
        return np.column_stack([np.full(data.n, a_value), L])

    def s_ab(self, data):
        return np.full(data.n, -1.0)

    def s_0(self, data):
        return np.zeros(data.n)

    def m2(self, data, h):
        return _weighted(self._col(data, "Y"), evaluate_h(h, self.z(data)))


class CounterfactualMean(_TreatmentFunctional):
    """Mean outcome with treatment set to 1: ``E{E(Y | A=1, L)}``.

    ``Z = (A, L)``, ``s_ab = -1``, ``s_0 = 0``, ``m1(O, a) = a(1, L)`` and
    ``m2(O, b) = Y b(A, L)``. The nuisances are ``a = E(Y | A, L)`` and
    ``b = A / P(A=1 | L)``; ``b`` is the Riesz representer of
    ``h -> E{h(1, L)}`` and ``a`` that of ``h -> E{Y h(Z)}``, both divided
    by ``-E(s_ab | Z) = 1``.
    """

    kind = "cf-mean"

    def m1(self, data, h):
        return evaluate_h(h, self._z_at(data, 1.0))


class AverageTreatmentEffect(_TreatmentFunctional):
    """``E{E(Y | A=1, L) - E(Y | A=0, L)}``.

    Same ``s_ab``, ``s_0``, ``m2`` as the counterfactual mean, with
    ``m1(O, a) = a(1, L) - a(0, L)``; the b-side nuisance is
    ``A/pi(L) - (1-A)/(1-pi(L))``.
    """

    kind = "ate"

    def m1(self, data, h):
        return evaluate_h(h, self._z_at(data, 1.0)) - evaluate_h(h, self._z_at(data, 0.0))


class ExpectedConditionalCovariance(MixedBiasFunctional):
    """``E{Cov(A, Y | L)}``.

    ``Z = L``, ``s_ab = +1``, ``s_0 = A Y``, ``m1(O, a) = -A a(L)``,
    ``m2(O, b) = -Y b(L)``. Then ``a = E(Y | L)`` and ``b = E(A | L)``:
    the Riesz representers of ``h -> E{m1(O, h)}`` and ``h -> E{m2(O, h)}``
    are ``-E(A | L)`` and ``-E(Y | L)``, and ``E(s_ab | Z) = 1``.
    """

    kind = "ecc"
    z_roles = ("L",)

    def s_ab(self, data):
        return np.ones(data.n)

    def s_0(self, data):
        return self._col(data, "A") * self._col(data, "Y")

    def m1(self, data, h):
        return _weighted(-self._col(data, "A"), evaluate_h(h, self.z(data)))

    def m2(self, data, h):
        return _weighted(-self._col(data, "Y"), evaluate_h(h, self.z(data)))


FUNCTIONALS = {
    cls.kind: cls
    for cls in (CounterfactualMean, AverageTreatmentEffect, ExpectedConditionalCovariance)
}

DEFAULT_BINDINGS = {"A": "a", "L": "l", "Y": "y"}


def make_functional(kind: str, bindings: Mapping[str, object] | None = None) -> MixedBiasFunctional:
    """Instantiate a registered functional.

    Column names are resolved lazily: binding a name absent from the data
    raises :class:`~mixedbias.errors.DataError` at first evaluation.
    """
    try:
        cls = FUNCTIONALS[kind]
    except KeyError:
        raise FunctionalError(
            f"unknown functional kind {kind!r}; choose from {sorted(FUNCTIONALS)}"
        ) from None
    return cls(DEFAULT_BINDINGS if bindings is None else bindings)


def functional_kinds() -> Sequence[str]:
    return tuple(FUNCTIONALS)
