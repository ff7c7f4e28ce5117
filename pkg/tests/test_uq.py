import itertools

import numpy as np
import pytest

from etuq.fit_model import desk_model
from etuq.quadrature import gauss_legendre, map_rule
from etuq.uq import (
    MomentEstimate,
    QoIOracle,
    RandomVector,
    mc_estimate,
    relative_errors,
    sg_estimate,
    tt_estimate,
)

SUPPORT = (0.122, 0.218)
SIGMA_UNIFORM = (SUPPORT[1] - SUPPORT[0]) / np.sqrt(12.0)  # 0.0277128...


class FnOracle:
    """Synthetic stand-in for the solver oracle: caches and counts calls."""

    def __init__(self, fn):
        self.fn = fn
        self._cache = {}

    @property
    def calls(self):
        return len(self._cache)

    def evaluate(self, delta):
        return self.evaluate_batch([delta])[0]

    def evaluate_batch(self, deltas):
        out = []
        for d in deltas:
            key = tuple(float(x) for x in d)
            if key not in self._cache:
                self._cache[key] = float(self.fn(np.array(key)))
            out.append(self._cache[key])
        return np.array(out)


class TestRandomVector:
    def test_default_support(self):
        rv = RandomVector(12)
        assert rv.supports == tuple([SUPPORT] * 12)

    def test_sampling(self):
        rv = RandomVector(3, supports=((0.0, 1.0), (2.0, 3.0), (-1.0, 1.0)))
        x = rv.sample(np.random.default_rng(0), 500)
        assert x.shape == (500, 3)
        for n, (a, b) in enumerate(rv.supports):
            assert x[:, n].min() >= a and x[:, n].max() <= b

    def test_seeded_reproducibility(self):
        rv = RandomVector(4)
        a = rv.sample(np.random.default_rng(7), 10)
        b = rv.sample(np.random.default_rng(7), 10)
        np.testing.assert_array_equal(a, b)

    def test_validation(self):
        with pytest.raises(ValueError):
            RandomVector(0)
        with pytest.raises(ValueError):
            RandomVector(2, supports=((0.0, 1.0),))
        with pytest.raises(ValueError):
            RandomVector(1, supports=((1.0, 1.0),))


class TestMonteCarlo:
    def test_constant_function(self):
        oracle = FnOracle(lambda y: 7.5)
        est = mc_estimate(oracle, RandomVector(3), 100, seed=1)
        assert est.mean == pytest.approx(7.5, abs=1e-12)
        assert est.std == pytest.approx(0.0, abs=1e-12)
        assert est.solver_calls == 100 and est.method == "mc"

    def test_first_coordinate_moments(self):
        # QoI = y1: mean 0.170, std (b-a)/sqrt(12) on the default support.
        oracle = FnOracle(lambda y: y[0])
        n = 20000
        est = mc_estimate(oracle, RandomVector(12), n, seed=2024)
        se_mean = SIGMA_UNIFORM / np.sqrt(n)
        assert abs(est.mean - 0.170) <= 3.0 * se_mean
        assert est.std == pytest.approx(SIGMA_UNIFORM, rel=0.03)

    def test_seed_determinism(self):
        oracle = FnOracle(lambda y: y.sum())
        rv = RandomVector(5)
        a = mc_estimate(oracle, rv, 50, seed=9)
        b = mc_estimate(FnOracle(lambda y: y.sum()), rv, 50, seed=9)
        assert a.mean == b.mean and a.std == b.std

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            mc_estimate(FnOracle(lambda y: 0.0), RandomVector(2), 1, seed=0)


class TestSparseGridEstimator:
    def test_linear_moments_exact_at_level_1(self):
        coeffs = np.arange(1.0, 13.0)
        oracle = FnOracle(lambda y: float(y @ coeffs))
        est = sg_estimate(oracle, RandomVector(12), 1)
        exact_mean = 0.170 * coeffs.sum()
        exact_var = float(coeffs @ coeffs) * (SUPPORT[1] - SUPPORT[0]) ** 2 / 12.0
        assert est.mean == pytest.approx(exact_mean, abs=1e-10)
        assert est.std == pytest.approx(np.sqrt(exact_var), abs=1e-10)
        assert est.solver_calls == 25 == oracle.calls
        assert est.level == 1 and est.method == "sg"

    def test_constant_has_negligible_std(self):
        # Cancellation noise only: any negative variance is clamped to zero.
        oracle = FnOracle(lambda y: 400.0)
        est = sg_estimate(oracle, RandomVector(12), 1)
        assert est.std <= 1e-4
        if est.variance_clamped:
            assert est.std == 0.0

    def test_level_validation(self):
        with pytest.raises(ValueError):
            sg_estimate(FnOracle(lambda y: 0.0), RandomVector(2), -1)


def surrogate(y):
    """Smooth 3-term separable stand-in for the temperature response."""
    s = 10.0 * (np.asarray(y) - 0.170)  # roughly [-0.5, 0.5]
    return (
        float(np.prod(np.exp(0.3 * s)))
        + 0.5 * float(np.prod(np.cos(s)))
        + 0.2 * float(np.prod(1.0 / (2.0 + s)))
    )


def dense_reference_moments(dim, level):
    """Brute-force contraction of the surrogate over the full tensor grid."""
    rule = map_rule(gauss_legendre(level + 1), *SUPPORT)
    e1 = e2 = 0.0
    for idx in itertools.product(range(rule.nodes.size), repeat=dim):
        y = rule.nodes[list(idx)]
        w = float(np.prod(rule.weights[list(idx)]))
        v = surrogate(y)
        e1 += w * v
        e2 += w * v * v
    return e1, e2


class TestTensorTrainEstimator:
    def test_matches_dense_contraction(self):
        dim, level = 12, 1
        e1, e2 = dense_reference_moments(dim, level)
        oracle = FnOracle(surrogate)
        est = tt_estimate(oracle, RandomVector(dim), level, sweep_budget=8)
        assert est.mean == pytest.approx(e1, abs=1e-8)
        assert est.std == pytest.approx(np.sqrt(e2 - e1**2), abs=1e-8)
        assert est.solver_calls < 4096
        assert est.solver_calls == oracle.calls

    def test_rank_pattern_bounded_by_sweeps(self):
        for budget in range(1, 11):
            oracle = FnOracle(surrogate)
            est = tt_estimate(oracle, RandomVector(12), 1, sweep_budget=budget)
            assert est.diagnostics["max_tt_rank"] <= budget + 1
            for s, r in enumerate(est.diagnostics["max_rank_per_sweep"], start=1):
                assert r <= s + 1

    def test_separable_converges_to_exact_product(self):
        oracle = FnOracle(lambda y: float(np.prod(1.0 + y)))
        est = tt_estimate(oracle, RandomVector(6), 2, sweep_budget=4)
        exact = 1.170**6
        assert est.mean == pytest.approx(exact, rel=1e-10)
        assert est.diagnostics["converged"]

    def test_metadata(self):
        oracle = FnOracle(surrogate)
        est = tt_estimate(oracle, RandomVector(4), 1, sweep_budget=3, seed=5)
        assert est.method == "tt" and est.level == 1
        assert est.sweeps == 3 and est.seed == 5

    def test_level_validation(self):
        with pytest.raises(ValueError):
            tt_estimate(FnOracle(lambda y: 0.0), RandomVector(2), 0, 1)


class TestRelativeErrors:
    def ref(self, mean, std):
        return MomentEstimate("mc", mean, std, mean**2 + std**2, 10)

    def test_identical_estimates(self):
        ref = self.ref(544.42, 4.07)
        assert relative_errors(ref, ref) == (0.0, 0.0)

    def test_std_example(self):
        eps_mu, eps_sigma = relative_errors(self.ref(544.42, 4.20), self.ref(544.42, 4.07))
        assert eps_mu == 0.0
        assert eps_sigma == pytest.approx(3.194, abs=5e-4)

    def test_mean_percentage(self):
        eps_mu, _ = relative_errors(self.ref(101.0, 1.0), self.ref(100.0, 1.0))
        assert eps_mu == pytest.approx(1.0, abs=1e-12)

    def test_zero_reference(self):
        with pytest.raises(ZeroDivisionError):
            relative_errors(self.ref(1.0, 1.0), self.ref(0.0, 1.0))
        with pytest.raises(ZeroDivisionError):
            relative_errors(self.ref(1.0, 1.0), self.ref(1.0, 0.0))


class TestQoIOracle:
    def test_cache_and_call_counting(self):
        oracle = QoIOracle(desk_model())
        assert oracle.dim == 12
        delta = np.full(12, 0.17)
        first = oracle.evaluate(delta)
        assert oracle.calls == 1
        again = oracle.evaluate(delta)
        assert oracle.calls == 1
        assert again == first

    def test_batch_deduplication(self):
        oracle = QoIOracle(desk_model())
        a = np.full(12, 0.15)
        b = np.full(12, 0.19)
        vals = oracle.evaluate_batch([a, b, a])
        assert oracle.calls == 2
        assert vals[0] == vals[2] and vals[0] != vals[1]

    def test_estimators_share_one_cache(self):
        # The level-1 sparse grid reuses points across repeat runs.
        oracle = QoIOracle(desk_model())
        rv = RandomVector(12)
        est = sg_estimate(oracle, rv, 1)
        before = oracle.calls
        est2 = sg_estimate(oracle, rv, 1)
        assert oracle.calls == before == 25
        assert est2.mean == est.mean and est2.std == est.std
