import math

import numpy as np
import pytest
from scipy.integrate import quad

from mixedbias import make_dgp, make_functional, monte_carlo, sample
from mixedbias.errors import DGPError, PositivityError, ReplicationError
from mixedbias.simulation import replication_seed, true_nuisances, true_value

BASIS = "intercept,raw,interactions"


def expit(x):
    return 1.0 / (1.0 + math.exp(-x))


def mean_propensity(c0, c1):
    # E[expit(c0 + c1 L)] for L ~ U(-1, 1), via the softplus antiderivative
    sp = lambda x: math.log1p(math.exp(x))
    return (sp(c0 + c1) - sp(c0 - c1)) / (2 * c1)


class TestDGP:
    def test_truths(self):
        assert make_dgp("cf-mean-dgp").truth == 2.0
        assert make_dgp("ecc-dgp").truth == 0.25
        assert make_dgp("ecc-dgp", {"theta": 0.0, "sigma2_u": 3.0}).truth == 0.0
        assert make_dgp("ecc-dgp", {"theta": 2.0, "sigma2_u": 0.5}).truth == 1.0
        assert true_value(make_dgp("cf-mean-dgp"), "ate") == 1.0

    def test_true_nuisances(self):
        dgp = make_dgp("cf-mean-dgp")
        assert dgp.true_b(np.array([[1.0, 0.0]]))[0] == pytest.approx(1 / expit(0.5), rel=1e-15)
        assert dgp.true_b(np.array([[0.0, 0.3]]))[0] == 0.0
        assert dgp.true_a(np.array([[1.0, 0.5]]))[0] == 3.5
        ecc = make_dgp("ecc-dgp", {"theta": 1.0})
        assert ecc.true_a(np.array([[0.5]]))[0] == 1.0
        assert ecc.true_b(np.array([[0.5]]))[0] == 0.5
        zero = make_dgp("ecc-dgp", {"theta": 0.0})
        assert zero.true_a(np.array([[0.7]]))[0] == 0.7
        a, b = true_nuisances(dgp, "ate")
        assert b(np.array([[0.0, 0.0]]))[0] == pytest.approx(-1 / (1 - expit(0.5)))

    @pytest.mark.parametrize("params", [{"c0": 5.0}, {"c0": 0.0, "c1": 6.0}])
    def test_positivity(self, params):
        with pytest.raises(PositivityError):
            make_dgp("cf-mean-dgp", params)

    @pytest.mark.parametrize("s2", [0.0, -1.0])
    def test_sigma(self, s2):
        with pytest.raises(DGPError):
            make_dgp("ecc-dgp", {"sigma2_u": s2})

    def test_unknown(self):
        with pytest.raises(DGPError):
            make_dgp("nope")
        with pytest.raises(DGPError):
            make_dgp("ecc-dgp", {"c0": 1.0})
        with pytest.raises(DGPError):
            true_value(make_dgp("ecc-dgp"), "cf-mean")


class TestSample:
    def test_deterministic(self):
        dgp = make_dgp("cf-mean-dgp")
        x, y = sample(dgp, 500, 7), sample(dgp, 500, 7)
        for name in ("a", "l", "y"):
            assert x[name].tobytes() == y[name].tobytes()
        assert sample(dgp, 500, 8)["l"].tobytes() != x["l"].tobytes()

    def test_columns(self):
        d = sample(make_dgp("ecc-dgp"), 10, 0)
        assert d.names == ("a", "l", "y") and d.n == 10

    def test_n(self):
        with pytest.raises(DGPError):
            sample(make_dgp("ecc-dgp"), 0, 0)

    def test_moments(self):
        n = 10**5
        d = sample(make_dgp("cf-mean-dgp"), n, 2026)
        assert abs(d["l"].mean()) <= 4 / math.sqrt(3 * n)
        assert d["l"].min() >= -1 and d["l"].max() <= 1
        target = mean_propensity(0.5, 1.0)
        check, _ = quad(lambda l: expit(0.5 + l) / 2, -1, 1)
        assert target == pytest.approx(check, rel=1e-12)
        assert abs(d["a"].mean() - target) <= 4 * math.sqrt(0.25 / n)

    def test_ecc_moments(self):
        n = 10**5
        d = sample(make_dgp("ecc-dgp"), n, 3)
        u = d["a"] - d["l"]
        assert abs(u.var() - 0.25) <= 4 * 0.25 * math.sqrt(2 / n)


class TestMonteCarlo:
    def test_reps_two(self):
        r = monte_carlo(make_dgp("cf-mean-dgp"), None, BASIS, "ols", "balanced", "one-step", 200, 2, 5)
        assert r.reps == 2
        assert r.mc_se == r.sd / math.sqrt(2)

    def test_validation(self):
        dgp = make_dgp("cf-mean-dgp")
        with pytest.raises(DGPError):
            monte_carlo(dgp, None, BASIS, "ols", "ols", "one-step", 100, 1, 0)
        with pytest.raises(DGPError):
            monte_carlo(dgp, None, BASIS, "ols", "ols", "plugin", 100, 5, 0)

    def test_reproducible(self):
        args = (make_dgp("ecc-dgp"), None, "intercept,raw", "ols", "balanced", "one-step", 300, 20, 11)
        assert monte_carlo(*args) == monte_carlo(*args)
        assert monte_carlo(*args[:-1], 12) != monte_carlo(*args)

    def test_seed_derivation(self):
        seeds = {replication_seed(1, r) for r in range(1000)}
        assert len(seeds) == 1000
        assert replication_seed(1, 0) == replication_seed(1, 0)
        assert replication_seed(1, 0) != replication_seed(2, 0)

    def test_replication_failure(self):
        dgp = make_dgp("cf-mean-dgp")
        # n=1 with a four-term basis is always singular
        with pytest.raises(ReplicationError) as info:
            monte_carlo(dgp, None, BASIS, "ols", "ols", "one-step", 1, 3, 0)
        assert info.value.replication == 0

    @pytest.mark.parametrize("kind, basis", [("cf-mean-dgp", BASIS), ("ecc-dgp", "intercept,raw")])
    def test_consistency_true_nuisances(self, kind, basis):
        r = monte_carlo(make_dgp(kind), None, basis, "true", "true", "one-step", 8000, 200, 1)
        assert abs(r.bias) <= 4 * r.mc_se

    @pytest.mark.parametrize("kind, basis", [("cf-mean-dgp", BASIS), ("ecc-dgp", "intercept,raw")])
    def test_consistency_fitted(self, kind, basis):
        r = monte_carlo(make_dgp(kind), None, basis, "ols", "balanced", "one-step", 8000, 200, 1)
        assert abs(r.bias) <= 4 * r.mc_se

    def test_ate(self):
        dgp = make_dgp("cf-mean-dgp")
        r = monte_carlo(dgp, make_functional("ate"), BASIS, "true", "true", "one-step", 4000, 100, 3)
        assert r.truth == 1.0
        assert abs(r.bias) <= 4 * r.mc_se

    def test_ecc_double_robustness(self):
        dgp = make_dgp("ecc-dgp")
        for a, b in (("ols@intercept", "balanced"), ("ols", "balanced@intercept")):
            r = monte_carlo(dgp, None, "intercept,raw", a, b, "one-step", 8000, 200, 1)
            assert abs(r.bias) <= 4 * r.mc_se, (a, b)

    def test_bias_shrinks_with_n(self):
        dgp = make_dgp("cf-mean-dgp")
        avg = []
        for n in (500, 2000, 8000):
            biases = [abs(monte_carlo(dgp, None, BASIS, "ols@intercept", "balanced",
                                      "one-step", n, 200, s).bias) for s in (1, 2, 3)]
            avg.append(sum(biases) / 3)
        assert avg[0] > avg[1] > avg[2]

    def test_misspecified_or_bias(self):
        dgp = make_dgp("cf-mean-dgp")
        r = monte_carlo(dgp, None, BASIS, "ols@intercept", "balanced", "or", 8000, 200, 1)
        # intercept-only OR converges to E[Y]
        e_pi_1pl, _ = quad(lambda l: expit(0.5 + l) * (1 + l) / 2, -1, 1)
        analytic = 1 + e_pi_1pl - 2
        assert abs(r.bias) > 5 * r.mc_se
        assert abs(r.bias - analytic) <= 4 * r.mc_se
