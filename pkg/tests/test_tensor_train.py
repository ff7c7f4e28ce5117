import time

import numpy as np
import pytest

from etuq.quadrature import clenshaw_curtis
from etuq.tensor_train import (
    FunctionOracle,
    TTTensor,
    greedy_tt_cross,
    matrix_cross,
    maxvol,
    rank_one_weights,
    truncated_svd,
    tt_cross_fixed_rank,
    tt_dot,
    tt_eval,
    tt_from_dense,
    tt_full,
    tt_hadamard,
    tt_load_json,
    tt_save_json,
    unfold,
)


def random_tt(rng, dims, ranks):
    """Random TT with the given interior ranks."""
    full_ranks = [1] + list(ranks) + [1]
    cores = [
        rng.standard_normal((full_ranks[n], d, full_ranks[n + 1]))
        for n, d in enumerate(dims)
    ]
    return TTTensor(cores)


def separable_tensor(vectors):
    """Dense outer product of 1D vectors."""
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


class TestTTTensor:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            TTTensor([np.ones((1, 2, 3)), np.ones((2, 2, 1))])
        with pytest.raises(ValueError):
            TTTensor([np.ones((2, 2, 1))])
        with pytest.raises(ValueError):
            TTTensor([np.ones((1, 2))])

    def test_dims_ranks_storage(self):
        rng = np.random.default_rng(0)
        tt = random_tt(rng, (3, 4, 2), (2, 3))
        assert tt.dims == (3, 4, 2)
        assert tt.ranks == (1, 2, 3, 1)
        assert tt.storage == 1 * 3 * 2 + 2 * 4 * 3 + 3 * 2 * 1

    def test_storage_bound(self):
        rng = np.random.default_rng(1)
        tt = random_tt(rng, (5, 5, 5, 5), (3, 3, 3))
        bound = sum(
            tt.ranks[n] * tt.dims[n] * tt.ranks[n + 1] for n in range(tt.ndim)
        )
        assert tt.storage <= bound


class TestEvalAndFull:
    def test_all_ones(self):
        tt = TTTensor([np.ones((1, 2, 1)), np.ones((1, 3, 1))])
        for i in range(2):
            for j in range(3):
                assert tt_eval(tt, (i, j)) == 1.0

    def test_rank_one_product(self):
        u = [np.array([1.0, 2.0]), np.array([3.0, 4.0, 5.0]), np.array([-1.0, 6.0])]
        tt = rank_one_weights(u)
        assert tt_eval(tt, (1, 2, 0)) == pytest.approx(2.0 * 5.0 * -1.0, abs=1e-14)
        np.testing.assert_allclose(tt_full(tt), separable_tensor(u), atol=1e-13)

    def test_eval_matches_full(self):
        rng = np.random.default_rng(2)
        tt = random_tt(rng, (4, 3, 5), (2, 4))
        dense = tt_full(tt)
        for _ in range(10):
            idx = tuple(rng.integers(d) for d in tt.dims)
            assert abs(tt_eval(tt, idx) - dense[idx]) <= 1e-13

    def test_full_1d(self):
        tt = TTTensor([np.arange(4.0).reshape(1, 4, 1)])
        np.testing.assert_array_equal(tt_full(tt), np.arange(4.0))

    def test_index_checks(self):
        tt = TTTensor([np.ones((1, 2, 1))])
        with pytest.raises(IndexError):
            tt_eval(tt, (2,))
        with pytest.raises(IndexError):
            tt_eval(tt, (0, 0))


class TestUnfoldAndDense:
    def test_2d_unfold_is_identity(self):
        a = np.arange(12.0).reshape(3, 4, order="F")
        np.testing.assert_array_equal(unfold(a, 1), a)

    def test_rank_one_unfoldings(self):
        rng = np.random.default_rng(3)
        a = separable_tensor([rng.standard_normal(d) for d in (3, 4, 5)])
        for n in (1, 2):
            s = np.linalg.svd(unfold(a, n), compute_uv=False)
            assert s[1] <= 1e-12 * s[0]

    def test_unfold_element_identity(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((3, 4, 5))
        m = unfold(a, 1)
        for _ in range(5):
            i, j, k = (rng.integers(d) for d in a.shape)
            assert m[i, j + 4 * k] == a[i, j, k]

    def test_unfold_range(self):
        with pytest.raises(ValueError):
            unfold(np.zeros((2, 2)), 2)

    def test_dense_round_trip(self):
        rng = np.random.default_rng(5)
        a = tt_full(random_tt(rng, (3, 4, 3, 2), (2, 3, 2)))
        tt = tt_from_dense(a)
        np.testing.assert_allclose(tt_full(tt), a, atol=1e-12)


class TestMaxvol:
    def test_spec_example(self):
        m = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        rows = maxvol(m)
        assert sorted(rows.tolist()) == [0, 1]

    def test_identity_rows_bound_one(self):
        m = np.eye(4)[[2, 0, 3, 1]]
        rows = maxvol(m)
        sub = m[rows]
        coeff = m @ np.linalg.inv(sub)
        assert np.abs(coeff).max() <= 1.0 + 1e-12

    def test_random_dominance(self):
        rng = np.random.default_rng(6)
        start = time.perf_counter()
        for _ in range(100):
            m = rng.standard_normal((50, 5))
            rows = maxvol(m)
            coeff = m @ np.linalg.inv(m[rows])
            assert np.abs(coeff).max() <= 1.01
        assert time.perf_counter() - start < 1.0

    def test_square_input(self):
        m = np.random.default_rng(7).standard_normal((4, 4))
        np.testing.assert_array_equal(maxvol(m), np.arange(4))

    def test_rank_deficient(self):
        m = np.ones((6, 2))
        with pytest.raises(np.linalg.LinAlgError):
            maxvol(m)


class TestTruncatedSVD:
    def test_zero_matrix(self):
        u, s, vt, r = truncated_svd(np.zeros((3, 4)), 1e-10)
        assert r == 0 and s.size == 0

    def test_rank_two(self):
        rng = np.random.default_rng(8)
        m = np.outer(rng.standard_normal(6), rng.standard_normal(5))
        m += np.outer(rng.standard_normal(6), rng.standard_normal(5))
        u, s, vt, r = truncated_svd(m, 1e-10)
        assert r == 2
        np.testing.assert_allclose((u * s) @ vt, m, atol=1e-12)

    def test_eckart_young(self):
        rng = np.random.default_rng(9)
        m = np.diag([3.0, 1.0]) @ rng.standard_normal((2, 4))
        sv = np.linalg.svd(m, compute_uv=False)
        u, s, vt, r = truncated_svd(m, 0.0, rmax=1)
        assert r == 1
        err = np.linalg.norm((u * s) @ vt - m)
        assert abs(err - sv[1]) <= 1e-12

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            truncated_svd(np.array([[np.nan, 1.0]]), 1e-10)


class TestMatrixCross:
    def test_rank_one(self):
        rng = np.random.default_rng(10)
        u, v = rng.standard_normal(8), rng.standard_normal(7)
        oracle = FunctionOracle((8, 7), lambda idx: u[idx[0]] * v[idx[1]])
        rows, cols, c_mat, core, r_mat = matrix_cross(oracle, 1)
        approx = c_mat @ np.linalg.solve(core, r_mat)
        dense = np.outer(u, v)
        for _ in range(20):
            i, j = rng.integers(8), rng.integers(7)
            assert abs(approx[i, j] - dense[i, j]) <= 1e-13

    def test_full_rank_exact(self):
        rng = np.random.default_rng(11)
        dense = rng.standard_normal((5, 5))
        oracle = FunctionOracle((5, 5), lambda idx: dense[idx])
        rows, cols, c_mat, core, r_mat = matrix_cross(oracle, 5)
        np.testing.assert_allclose(c_mat @ np.linalg.solve(core, r_mat), dense, atol=1e-10)

    def test_call_budget(self):
        rng = np.random.default_rng(12)
        u, v = rng.standard_normal(30), rng.standard_normal(40)
        oracle = FunctionOracle((30, 40), lambda idx: u[idx[0]] * v[idx[1]])
        matrix_cross(oracle, 1, iters=5)
        # Column/row fibers only, all cached: well under the dense count.
        assert oracle.calls <= (30 + 40) * 1 * 6
        assert oracle.calls < 30 * 40


class TestFixedRankCross:
    def test_separable_rank_one(self):
        rng = np.random.default_rng(13)
        vecs = [rng.standard_normal(d) + 2.0 for d in (4, 3, 5)]
        dense = separable_tensor(vecs)
        oracle = FunctionOracle(dense.shape, lambda idx: dense[idx])
        tt = tt_cross_fixed_rank(oracle, [1, 1], sweeps=3)
        assert np.abs(tt_full(tt) - dense).max() <= 1e-12

    def test_two_term_sum_rank_two(self):
        rng = np.random.default_rng(14)
        dense = separable_tensor([rng.standard_normal(d) for d in (4, 4, 4)])
        dense += separable_tensor([rng.standard_normal(d) for d in (4, 4, 4)])
        oracle = FunctionOracle(dense.shape, lambda idx: dense[idx])
        tt = tt_cross_fixed_rank(oracle, [2, 2], sweeps=4)
        assert np.abs(tt_full(tt) - dense).max() <= 1e-10

    def test_underestimated_rank_bounded_below(self):
        rng = np.random.default_rng(15)
        dense = separable_tensor([rng.standard_normal(d) + 1.5 for d in (5, 5)])
        dense += separable_tensor([rng.standard_normal(d) for d in (5, 5)])
        oracle = FunctionOracle(dense.shape, lambda idx: dense[idx])
        tt = tt_cross_fixed_rank(oracle, [1], sweeps=5)
        err = np.linalg.norm(tt_full(tt) - dense)
        best = np.linalg.svd(unfold(dense, 1), compute_uv=False)[1]
        assert err >= best - 1e-10

    def test_rank_validation(self):
        oracle = FunctionOracle((3, 3), lambda idx: 1.0)
        with pytest.raises(ValueError):
            tt_cross_fixed_rank(oracle, [4])
        with pytest.raises(ValueError):
            tt_cross_fixed_rank(oracle, [1, 1])


class TestGreedyCross:
    def test_separable_converges_first_sweep(self):
        rng = np.random.default_rng(16)
        vecs = [rng.standard_normal(2) + 2.0 for _ in range(12)]
        dense = separable_tensor(vecs)
        oracle = FunctionOracle(dense.shape, lambda idx: dense[idx])
        tt, diag = greedy_tt_cross(oracle, sweep_budget=5)
        assert diag.converged
        assert max(tt.ranks) == 1
        scale = np.abs(dense).max()
        assert np.abs(tt_full(tt) - dense).max() <= 1e-12 * scale
        assert oracle.calls < 4096

    def test_k_term_recovery(self):
        rng = np.random.default_rng(17)
        for k in (1, 2, 3):
            dense = np.zeros((5, 5, 5, 5))
            for _ in range(k):
                dense += separable_tensor(
                    [rng.standard_normal(5) + 1.0 for _ in range(4)]
                )
            oracle = FunctionOracle(dense.shape, lambda idx: dense[idx])
            tt, diag = greedy_tt_cross(oracle, sweep_budget=k + 1)
            assert np.abs(tt_full(tt) - dense).max() <= 1e-10, k
            fixed = tt_cross_fixed_rank(
                FunctionOracle(dense.shape, lambda idx: dense[idx]), [k] * 3
            )
            assert np.abs(tt_full(fixed) - dense).max() <= 1e-10, k

    def test_rank_growth_bound(self):
        rng = np.random.default_rng(18)
        dense = rng.standard_normal((4, 4, 4, 4))
        for budget in (1, 2, 3):
            oracle = FunctionOracle(dense.shape, lambda idx: dense[idx])
            tt, diag = greedy_tt_cross(oracle, sweep_budget=budget)
            assert max(tt.ranks) <= budget + 1
            for s, r in enumerate(diag.max_rank_per_sweep, start=1):
                assert r <= s + 1

    def test_calls_grow_linearly_in_dimension(self):
        rng = np.random.default_rng(19)
        calls = {}
        for ndim in (4, 8, 12, 16):
            vecs = [rng.standard_normal(3) + 2.0 for _ in range(ndim)]
            dense = None  # evaluated lazily through the oracle
            def fn(idx, vecs=vecs):
                out = 1.0
                for v, i in zip(vecs, idx):
                    out *= v[i]
                return out
            oracle = FunctionOracle([3] * ndim, fn)
            greedy_tt_cross(oracle, sweep_budget=2)
            calls[ndim] = oracle.calls
        # Linear in N at fixed rank: calls per dimension roughly constant.
        per_dim = {n: calls[n] / n for n in calls}
        assert max(per_dim.values()) <= 3.0 * min(per_dim.values())

    def test_diagnostics_json(self):
        oracle = FunctionOracle((2, 2), lambda idx: float(idx[0] + idx[1]))
        _, diag = greedy_tt_cross(oracle, sweep_budget=2, seed=123)
        blob = diag.to_json()
        assert '"seed": 123' in blob


class TestTTArithmetic:
    def test_dot_rank_one(self):
        u = [np.array([1.0, 2.0]), np.array([0.5, 1.5])]
        v = [np.array([3.0, -1.0]), np.array([2.0, 2.0])]
        got = tt_dot(rank_one_weights(u), rank_one_weights(v))
        expect = (u[0] @ v[0]) * (u[1] @ v[1])
        assert abs(got - expect) <= 1e-13

    def test_dot_matches_dense(self):
        rng = np.random.default_rng(20)
        a = random_tt(rng, (3, 3, 3), (2, 2))
        b = random_tt(rng, (3, 3, 3), (3, 2))
        expect = float(np.sum(tt_full(a) * tt_full(b)))
        assert abs(tt_dot(a, b) - expect) <= 1e-12

    def test_weight_self_dot_closed_form(self):
        w = [clenshaw_curtis(1).weights] * 4
        tt = rank_one_weights(w)
        expect = np.prod([float(v @ v) for v in w])
        assert abs(tt_dot(tt, tt) - expect) <= 1e-14

    def test_middle_weight_entry(self):
        w12 = [clenshaw_curtis(1).weights] * 12
        tt = rank_one_weights(w12)
        assert tt_eval(tt, (1,) * 12) == pytest.approx((2.0 / 3.0) ** 12, rel=1e-13)

    def test_hadamard_with_ones(self):
        rng = np.random.default_rng(21)
        a = random_tt(rng, (3, 4), (2,))
        ones = rank_one_weights([np.ones(3), np.ones(4)])
        np.testing.assert_allclose(
            tt_full(tt_hadamard(a, ones)), tt_full(a), atol=1e-13
        )

    def test_hadamard_matches_dense(self):
        rng = np.random.default_rng(22)
        a = random_tt(rng, (3, 3, 3), (2, 3))
        b = random_tt(rng, (3, 3, 3), (2, 2))
        np.testing.assert_allclose(
            tt_full(tt_hadamard(a, b)), tt_full(a) * tt_full(b), atol=1e-12
        )

    def test_dimension_mismatch(self):
        a = rank_one_weights([np.ones(2)])
        b = rank_one_weights([np.ones(3)])
        with pytest.raises(ValueError):
            tt_dot(a, b)
        with pytest.raises(ValueError):
            tt_hadamard(a, b)

    def test_quadrature_identity(self):
        # Full-grid weighted sum equals the TT inner product with the
        # rank-1 weight tensor.
        rng = np.random.default_rng(23)
        dims = (3, 4, 2, 3)
        dense = rng.standard_normal(dims)
        weights = [rng.random(d) for d in dims]
        tt = tt_from_dense(dense)
        got = tt_dot(tt, rank_one_weights(weights))
        expect = float(np.einsum("ijkl,i,j,k,l->", dense, *weights))
        assert abs(got - expect) <= 1e-11


class TestFunctionOracle:
    def test_distinct_call_counting(self):
        hits = []
        oracle = FunctionOracle((3, 3), lambda idx: hits.append(idx) or 1.0)
        oracle((0, 0))
        oracle((0, 0))
        oracle((1, 2))
        assert oracle.calls == 2
        assert len(hits) == 2

    def test_concurrent_single_evaluation(self):
        import threading

        count = [0]
        lock = threading.Lock()

        def fn(idx):
            with lock:
                count[0] += 1
            time.sleep(0.01)
            return float(sum(idx))

        oracle = FunctionOracle((4, 4), fn)
        threads = [
            threading.Thread(target=lambda: oracle((1, 1))) for _ in range(8)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert count[0] == 1
        assert oracle.calls == 1

    def test_bounds(self):
        oracle = FunctionOracle((2, 2), lambda idx: 0.0)
        with pytest.raises(IndexError):
            oracle((2, 0))


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(24)
    tt = random_tt(rng, (3, 4, 2), (2, 3))
    path = tmp_path / "q.tt.json"
    tt_save_json(tt, str(path))
    back = tt_load_json(str(path))
    assert back.dims == tt.dims and back.ranks == tt.ranks
    for c1, c2 in zip(tt.cores, back.cores):
        np.testing.assert_array_equal(c1, c2)


def test_serialization_rejects_foreign_payload(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError):
        tt_load_json(str(path))
