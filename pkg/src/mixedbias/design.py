"""Feature bases over Z and the empirical moment summaries built from them.

Basis descriptors are comma-separated tokens::

    intercept            constant feature 1
    raw                  each coordinate of Z
    poly:<d>             powers 1..d of each coordinate
    interactions         products z_i * z_j for i < j

``raw``, ``poly`` and ``interactions`` accept an optional coordinate subset,
``raw@0+2`` or ``poly:3@1``. Features are ordered intercept, degree-one
terms, interactions, then higher powers (degree-major). No centring or
scaling is ever applied.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from . import data as _data
from . import kernels
from .data import Dataset
from .errors import BasisError
from .functionals import MixedBiasFunctional, evaluate_h

_TOKENS = ("intercept", "raw", "poly", "interactions")


@dataclass(frozen=True)
class Feature:
    """A monomial ``prod z_i ** e_i``; an empty exponent map is the intercept."""

    exponents: tuple  # ((coordinate, power), ...) sorted by coordinate

    @property
    def name(self) -> str:
        if not self.exponents:
            return "1"
        parts = [f"z{i}" if e == 1 else f"z{i}^{e}" for i, e in self.exponents]
        return "*".join(parts)

    def __call__(self, Z: np.ndarray) -> np.ndarray:
        out = np.ones(Z.shape[0])
        for i, e in self.exponents:
            out = out * (Z[:, i] if e == 1 else Z[:, i] ** e)
        return out


def _parse_coords(text: str, z_arity: int, token: str) -> tuple:
    try:
        coords = tuple(int(c) for c in text.split("+"))
    except ValueError:
        raise BasisError(f"bad coordinate list {text!r} in {token!r}") from None
    for c in coords:
        if not 0 <= c < z_arity:
            raise BasisError(
                f"{token!r} references Z coordinate {c}; Z has {z_arity} coordinate(s)"
            )
    if len(set(coords)) != len(coords):
        raise BasisError(f"repeated coordinate in {token!r}")
    return coords


class FeatureBasis:
    """Ordered family of features ``phi = (phi_1, ..., phi_p)`` on Z.

    Calling the basis on an ``(n, z_arity)`` array returns the ``(n, p)``
    design block, so a basis can be passed wherever a function of Z is
    expected and the linear maps act on it feature by feature.
    """

    def __init__(self, features, z_arity: int, descriptor: str = ""):
        features = tuple(features)
        if not features:
            raise BasisError("basis has no features")
        if len(set(features)) != len(features):
            raise BasisError("basis contains duplicate features")
        self.features = features
        self.z_arity = int(z_arity)
        self.descriptor = descriptor

    @property
    def p(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list:
        return [f.name for f in self.features]

    def __call__(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        single = Z.ndim == 1
        if single:
            Z = Z[None, :]
        if Z.shape[1] != self.z_arity:
            raise BasisError(f"basis expects Z of arity {self.z_arity}, got {Z.shape[1]}")
        out = np.column_stack([f(Z) for f in self.features])
        return out[0] if single else out

    evaluate = __call__

    def subset(self, indices) -> FeatureBasis:
        return FeatureBasis([self.features[i] for i in indices], self.z_arity)

    def __eq__(self, other):
        return (
            isinstance(other, FeatureBasis)
            and self.z_arity == other.z_arity
            and self.features == other.features
        )

    def __hash__(self):
        return hash((self.z_arity, self.features))

    def __repr__(self):
        return f"FeatureBasis({self.names})"


def build_basis(spec: str, z_arity: int) -> FeatureBasis:
    """Parse a basis descriptor such as ``"intercept,raw,poly:2"``."""
    if z_arity < 1:
        raise BasisError("z_arity must be positive")
    tokens = [t.strip() for t in (spec or "").split(",") if t.strip()]
    if not tokens:
        raise BasisError("empty basis descriptor")
    seen = set()
    intercept = False
    linear: set = set()
    inter_coords = None
    degree = 0
    poly_coords: tuple = ()
    all_coords = tuple(range(z_arity))
    for token in tokens:
        head, _, coord_text = token.partition("@")
        kind, _, arg = head.partition(":")
        if kind not in _TOKENS:
            raise BasisError(f"unknown basis token {token!r}")
        if kind in seen:
            raise BasisError(f"duplicate basis token {kind!r}")
        seen.add(kind)
        coords = _parse_coords(coord_text, z_arity, token) if coord_text else all_coords
        if kind == "intercept":
            if arg or coord_text:
                raise BasisError("'intercept' takes no arguments")
            intercept = True
        elif kind == "raw":
            if arg:
                raise BasisError("'raw' takes no degree")
            linear.update(coords)
        elif kind == "poly":
            try:
                degree = int(arg)
            except ValueError:
                raise BasisError(f"bad polynomial degree in {token!r}") from None
            if degree < 1:
                raise BasisError("polynomial degree must be >= 1")
            poly_coords = coords
            linear.update(coords)
        else:
            if arg:
                raise BasisError("'interactions' takes no degree")
            inter_coords = coords
    features = []
    if intercept:
        features.append(Feature(()))
    features.extend(Feature(((i, 1),)) for i in sorted(linear))
    if inter_coords is not None:
        features.extend(
            Feature(((i, 1), (j, 1))) for i, j in combinations(sorted(inter_coords), 2)
        )
    for e in range(2, degree + 1):
        features.extend(Feature(((i, e),)) for i in sorted(poly_coords))
    if not features:
        raise BasisError(f"descriptor {spec!r} yields no features")
    return FeatureBasis(features, z_arity, descriptor=",".join(tokens))


@dataclass(frozen=True)
class MomentSummaries:
    """Gram matrix ``G = Pn{-s_ab phi phi'}`` and moment vectors ``M1``, ``M2``."""

    G: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.M1.shape[0]


def _check_arity(functional: MixedBiasFunctional, basis: FeatureBasis):
    if functional.z_arity != basis.z_arity:
        raise BasisError(
            f"basis built for Z of arity {basis.z_arity}, "
            f"functional {functional.name} has arity {functional.z_arity}"
        )


def moment_summaries(
    dataset: Dataset, functional: MixedBiasFunctional, basis: FeatureBasis
) -> MomentSummaries:
    _check_arity(functional, basis)
    Phi = _data.check_finite(basis(functional.z(dataset)), "feature value")
    w = _data.check_finite(-functional.s_ab(dataset), "s_ab")
    G = np.asarray(
        kernels.weighted_gram_mean(np.ascontiguousarray(Phi), np.ascontiguousarray(w))
    )
    G = (G + G.T) / 2.0
    M1 = _data.colmeans(functional.m1(dataset, basis), "m1(O, phi)")
    M2 = _data.colmeans(functional.m2(dataset, basis), "m2(O, phi)")
    for arr in (G, M1, M2):
        arr.flags.writeable = False
    return MomentSummaries(G=G, M1=M1, M2=M2, n=dataset.n)


def imbalance_vector(
    dataset: Dataset,
    functional: MixedBiasFunctional,
    basis: FeatureBasis,
    b: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """``Pn{-s_ab b(Z) phi(Z)}``, the imbalance of ``b`` against each feature."""
    _check_arity(functional, basis)
    Z = functional.z(dataset)
    bz = _data.check_finite(evaluate_h(b, Z), "nuisance b(Z)")
    Phi = basis(Z)
    w = -functional.s_ab(dataset) * bz
    return _data.colmeans(w[:, None] * Phi, "imbalance term")
