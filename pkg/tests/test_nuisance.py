import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from family import family
from mixedbias import (
    LinearNuisance,
    balanced_b,
    build_basis,
    fit_lasso,
    fit_nuisance,
    fit_ols,
    fit_ridge,
    imbalance_vector,
    make_functional,
    moment_summaries,
    rescale_to_l2,
    solve_main_alpha_eq,
)
from mixedbias import data as mbdata
from mixedbias.errors import (
    CannotRescaleError,
    ConfigError,
    NoSolutionError,
    SingularSystemError,
    UnsupportedObjectiveError,
)
from mixedbias.estimators import gamma_coefficients
from mixedbias.nuisance import FunctionNuisance, lasso_kkt_residual, parse_nuisance

BIND = {"A": "a", "L": "l", "Y": "y"}


def const(c):
    return FunctionNuisance(lambda Z: np.full(len(Z), float(c)), f"const {c}")


def _pd(rng, p):
    X = rng.standard_normal((3 * p + 5, p))
    return X.T @ X / X.shape[0]


class TestOLS:
    def test_scalar(self):
        assert fit_ols([[1.0]], [2.5]).tolist() == [2.5]

    def test_zero_rhs(self, rng):
        assert not fit_ols(_pd(rng, 4), np.zeros(4)).any()

    def test_identity(self, rng):
        M = rng.standard_normal(6)
        np.testing.assert_array_equal(fit_ols(np.eye(6), M), M)

    def test_residual_bound(self, rng):
        for p in (1, 5, 20):
            G, M = _pd(rng, p), rng.standard_normal(p)
            beta = fit_ols(G, M)
            assert np.abs(G @ beta - M).max() <= 1e-10 * (1 + np.abs(M).max())

    def test_singular_reports_pivot(self):
        G = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
        with pytest.raises(SingularSystemError) as info:
            fit_ols(G, np.ones(3))
        assert info.value.pivot_index is not None

    def test_zero_matrix(self):
        with pytest.raises(SingularSystemError):
            fit_ols(np.zeros((2, 2)), np.ones(2))


class TestRidge:
    def test_zero_penalty_is_ols(self, rng):
        G, M = _pd(rng, 5), rng.standard_normal(5)
        np.testing.assert_allclose(fit_ridge(G, M, 0.0), fit_ols(G, M), rtol=1e-12, atol=1e-14)

    def test_scalar(self):
        assert fit_ridge([[1.0]], [2.5], 1.0).tolist() == [1.25]

    def test_shrinks_monotonically(self, rng):
        G, M = _pd(rng, 5), rng.standard_normal(5)
        norms = [np.linalg.norm(fit_ridge(G, M, lam)) for lam in (0, 0.1, 1, 10, 1e3, 1e6)]
        assert all(x > y for x, y in zip(norms, norms[1:]))
        assert norms[-1] < 1e-5

    def test_negative_penalty(self):
        with pytest.raises(ValueError):
            fit_ridge([[1.0]], [1.0], -1.0)


class TestLasso:
    def test_examples(self):
        assert fit_lasso([[1.0]], [2.5], 3.0).coefficients.tolist() == [0.0]
        assert fit_lasso([[1.0]], [2.5], 1.0).coefficients.tolist() == [1.5]

    def test_zero_penalty_matches_ols(self, rng):
        for p in (1, 3, 8):
            G, M = _pd(rng, p), rng.standard_normal(p)
            res = fit_lasso(G, M, 0.0)
            assert res.converged
            assert res.kkt_residual <= 1e-10
            np.testing.assert_allclose(res.coefficients, fit_ols(G, M), atol=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.floats(0.0, 2.0), st.integers(0, 2**31))
    def test_kkt(self, p, lam, seed):
        rng = np.random.default_rng(seed)
        G, M = _pd(rng, p), rng.standard_normal(p)
        res = fit_lasso(G, M, lam)
        assert res.kkt_residual >= 0
        if res.converged:
            assert res.kkt_residual <= 1e-6
        assert res.kkt_residual == lasso_kkt_residual(G, M, res.coefficients, lam)

    def test_large_penalty_zeroes_everything(self, rng):
        G, M = _pd(rng, 4), rng.standard_normal(4)
        lam = np.abs(M).max() * 1.01
        assert not fit_lasso(G, M, lam).coefficients.any()

    def test_non_convergence_is_reported(self, rng):
        X = rng.standard_normal((40, 10))
        X[:, 1] = X[:, 0] + 1e-3 * X[:, 1]
        G = X.T @ X / 40
        res = fit_lasso(G, rng.standard_normal(10), 0.0, tol=1e-14, max_iter=5)
        assert not res.converged and res.iterations == 5

    def test_rejects_nonpositive_diagonal(self):
        with pytest.raises(UnsupportedObjectiveError):
            fit_lasso(-np.eye(2), np.ones(2), 0.1)

    def test_rejects_ecc_through_fitter(self, fix4):
        f = make_functional("ecc", BIND)
        with pytest.raises(UnsupportedObjectiveError):
            fit_nuisance("lasso:0.1", "a", fix4, f, "intercept,raw")


class TestMainAlphaEquation:
    def test_scalar(self):
        assert solve_main_alpha_eq([2.0], 5.0).tolist() == [2.5]

    def test_degenerate(self):
        assert solve_main_alpha_eq([0.0, 0.0], 0.0).tolist() == [0.0, 0.0]
        with pytest.raises(NoSolutionError):
            solve_main_alpha_eq([0.0, 0.0], 1.0)

    def test_linear_hint_fix4(self):
        assert solve_main_alpha_eq([2.0], 5.0, ([[1.0]], [2.5])).tolist() == [2.5]

    def test_singular_hint_falls_back(self):
        beta = solve_main_alpha_eq([1.0, 1.0], 2.0, (np.ones((2, 2)), np.ones(2)))
        assert beta.tolist() == [1.0, 1.0]

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 2**31))
    def test_minimum_norm(self, p, seed):
        rng = np.random.default_rng(seed)
        phi = rng.standard_normal(p) * 10 ** rng.uniform(-3, 3)
        m2bar = float(rng.standard_normal() * 10)
        beta = solve_main_alpha_eq(phi, m2bar)
        assert abs(phi @ beta - m2bar) <= 1e-10 * (1 + abs(m2bar))
        # a scalar multiple of phi
        c = (beta @ phi) / (phi @ phi)
        np.testing.assert_allclose(beta, c * phi, rtol=1e-12, atol=1e-300)

    def test_ols_solves_equation_for_linear_b(self, rng):
        fixtures = [fx for fx in family(200) if fx.nonsingular][:100]
        assert len(fixtures) == 100
        for fx in fixtures:
            ms = fx.summaries
            beta_ols = fit_ols(ms.G, ms.M2)
            b = LinearNuisance(fx.basis, rng.standard_normal(fx.basis.p))
            Z = fx.functional.z(fx.dataset)
            s_ab = fx.functional.s_ab(fx.dataset)
            lhs_vec = mbdata.colmeans((s_ab * b(Z))[:, None] * fx.basis(Z))
            m2bar = mbdata.mean(fx.functional.m2(fx.dataset, b))
            assert abs(lhs_vec @ beta_ols + m2bar) <= 1e-9 * (1 + abs(m2bar)), fx.label


class TestBalanced:
    def test_fix4_intercept(self, fix4):
        f = make_functional("cf-mean", BIND)
        basis = build_basis("intercept", 2)
        ms = moment_summaries(fix4, f, basis)
        assert balanced_b(ms.G, ms.M1, basis).coefficients.tolist() == [1.0]

    def test_zero_moments(self, rng):
        basis = build_basis("intercept,raw", 2)
        assert not balanced_b(_pd(rng, 3), np.zeros(3), basis).coefficients.any()

    def test_fix4_gamma_all_ones(self, fix4):
        f = make_functional("cf-mean", BIND)
        basis = build_basis("intercept,raw", 2)
        ms = moment_summaries(fix4, f, basis)
        b = balanced_b(ms.G, ms.M1, basis)
        gamma = gamma_coefficients(imbalance_vector(fix4, f, basis, b), ms.M1).gamma
        assert np.abs(gamma - 1).max() <= 1e-10

    def test_singular(self):
        with pytest.raises(SingularSystemError):
            balanced_b(np.zeros((1, 1)), [1.0], build_basis("intercept", 2))


class TestRescale:
    def test_fix4(self, fix4):
        f = make_functional("cf-mean", BIND)
        b = rescale_to_l2(fix4, f, const(2.5), const(1.0))
        np.testing.assert_array_equal(b(np.zeros((3, 2))), [1.0, 1.0, 1.0])

    def test_zero_a(self, fix4):
        with pytest.raises(CannotRescaleError):
            rescale_to_l2(fix4, make_functional("cf-mean", BIND), const(0.0), const(1.0))

    def test_scale_cancels(self, fix4):
        f = make_functional("ecc", BIND)
        a = FunctionNuisance(lambda Z: 1 + Z[:, 0])
        basis = build_basis("intercept,raw", 1)
        b1 = rescale_to_l2(fix4, f, a, LinearNuisance(basis, [0.3, 1.0]))
        b2 = rescale_to_l2(fix4, f, a, LinearNuisance(basis, [0.6, 2.0]))
        Z = f.z(fix4)
        np.testing.assert_allclose(b1(Z), b2(Z), rtol=1e-15)

    def test_satisfies_equation(self, rng):
        for fx in family(60):
            a = LinearNuisance(fx.basis, fx.beta_hat)
            try:
                b = rescale_to_l2(fx.dataset, fx.functional, a, fx.b)
            except CannotRescaleError:
                assert fx.b_kind == "zero"
                continue
            Z = fx.functional.z(fx.dataset)
            m1bar = mbdata.mean(fx.functional.m1(fx.dataset, a))
            prod = mbdata.mean(fx.functional.s_ab(fx.dataset) * a(Z) * b(Z))
            assert abs(prod + m1bar) <= 1e-10 * (1 + abs(m1bar)), fx.label


class TestDescriptors:
    @pytest.mark.parametrize(
        "text, method, args, basis",
        [
            ("ols", "ols", (), None),
            ("ridge:0.5", "ridge", (0.5,), None),
            ("lasso:1e-3", "lasso", (1e-3,), None),
            ("coeffs:1,2,3", "coeffs", (1.0, 2.0, 3.0), None),
            ("balanced@intercept", "balanced", (), "intercept"),
            ("expit-linear:0.1,-0.2@intercept,raw", "expit-linear", (0.1, -0.2), "intercept,raw"),
            ("zero", "zero", (), None),
        ],
    )
    def test_parse(self, text, method, args, basis):
        spec = parse_nuisance(text)
        assert (spec.method, spec.args, spec.basis) == (method, args, basis)

    @pytest.mark.parametrize("text", ["", "bogus", "ridge", "ridge:1,2", "coeffs", "ols:1", "coeffs:a", "coeffs:nan"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            parse_nuisance(text)

    def test_fit_sides(self, fix4):
        f = make_functional("cf-mean", BIND)
        a = fit_nuisance("ols", "a", fix4, f, "intercept")
        b = fit_nuisance("balanced", "b", fix4, f, "intercept")
        assert a.coefficients.tolist() == [2.5]
        assert b.coefficients.tolist() == [1.0]
        assert fit_nuisance("ridge:1", "a", fix4, f, "intercept").coefficients.tolist() == [1.25]
        assert fit_nuisance("lasso:1", "a", fix4, f, "intercept").coefficients.tolist() == [1.5]

    def test_basis_override(self, fix4):
        f = make_functional("cf-mean", BIND)
        a = fit_nuisance("ols@intercept", "a", fix4, f, "intercept,raw")
        assert a.basis.p == 1

    def test_coefficient_count_checked(self, fix4):
        with pytest.raises(ConfigError):
            fit_nuisance("coeffs:1,2", "a", fix4, make_functional("cf-mean", BIND), "intercept")

    def test_true_requires_model(self, fix4):
        with pytest.raises(ConfigError):
            fit_nuisance("true", "a", fix4, make_functional("cf-mean", BIND), "intercept")
