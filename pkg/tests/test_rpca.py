import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tests.conftest import random_orthonormal
from thermaltwin.errors import NonFiniteInput
from thermaltwin.rpca import RpcaParams, rpca, rpca_bench, shrink, svt


def planted(seed, n=100, w=50, rank=2, spike_frac=0.01, spike_scale=10.0):
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, w))
    support = rng.random((n, w)) < spike_frac
    S = support * rng.normal(0.0, spike_scale, (n, w))
    return L, S, support


class TestShrinkOracle:
    def test_scalar_oracle(self):
        # Elementwise definition checked value by value.
        v = np.array([-3.0, -0.5, 0.0, 0.2, 1.7])
        tau = 0.5
        got = shrink(v, tau)
        for x, y in zip(v, got):
            expected = np.sign(x) * max(abs(x) - tau, 0.0)
            assert abs(y - expected) <= 1e-12

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 1000), tau=st.floats(0.0, 5.0))
    def test_random_arrays(self, seed, tau):
        v = np.random.default_rng(seed).normal(0, 3, (7, 5))
        got = shrink(v, tau)
        expected = np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_zero_threshold_is_identity(self, rng):
        v = rng.standard_normal(20)
        np.testing.assert_allclose(shrink(v, 0.0), v, atol=1e-12)


class TestSvtOracle:
    def test_known_spectrum(self, rng):
        # Build a matrix with a known SVD and verify the spectrum shrink.
        U = random_orthonormal(12, 4, rng)
        V = random_orthonormal(8, 4, rng)
        s = np.array([5.0, 3.0, 1.0, 0.2])
        M = (U * s) @ V.T
        tau = 0.5
        expected = (U * np.maximum(s - tau, 0.0)) @ V.T
        np.testing.assert_allclose(svt(M, tau), expected, atol=1e-9)

    def test_large_threshold_zeroes_everything(self, rng):
        M = rng.standard_normal((6, 4))
        s0 = np.linalg.svd(M, compute_uv=False)[0]
        np.testing.assert_allclose(svt(M, s0 + 1.0), 0.0, atol=1e-12)

    def test_nuclear_norm_decreases(self, rng):
        M = rng.standard_normal((10, 7))
        before = np.linalg.svd(M, compute_uv=False).sum()
        after = np.linalg.svd(svt(M, 0.3), compute_uv=False).sum()
        assert after < before


class TestRpca:
    @pytest.mark.parametrize("seed", range(5))
    def test_planted_recovery(self, seed):
        L, S, support = planted(seed)
        res = rpca(L + S)
        rel = np.linalg.norm(res.L - L) / np.linalg.norm(L)
        assert rel <= 1e-3
        assert res.converged
        # Every sizeable planted spike appears in the sparse component.
        big = support & (np.abs(S) > 1.0)
        assert np.all(np.abs(res.S[big]) > 0)

    def test_feasibility(self, rng):
        L, S, _ = planted(42)
        X = L + S
        res = rpca(X)
        assert np.linalg.norm(X - res.L - res.S) / np.linalg.norm(X) < 1e-6

    def test_zero_input(self):
        res = rpca(np.zeros((10, 5)))
        assert res.converged
        np.testing.assert_array_equal(res.L, 0.0)
        np.testing.assert_array_equal(res.S, 0.0)

    def test_non_finite_rejected(self):
        X = np.zeros((4, 4))
        X[1, 2] = np.nan
        with pytest.raises(NonFiniteInput):
            rpca(X)

    def test_iteration_cap_reports_non_convergence(self):
        L, S, _ = planted(7)
        res = rpca(L + S, RpcaParams(max_iter=1))
        assert not res.converged
        assert res.iterations == 1
        assert res.residual > 0

    def test_fixed_profile_values(self):
        p = RpcaParams.tuned_profile()
        assert p.lam == 0.001
        assert p.mu == 1e-5

    def test_param_validation(self):
        with pytest.raises(ValueError):
            RpcaParams(lam=-1.0)
        with pytest.raises(ValueError):
            RpcaParams(mu=0.0)
        with pytest.raises(ValueError):
            RpcaParams(tol=-1e-9)


class TestBench:
    def test_rows_and_timings(self):
        rows = rpca_bench(200, [5, 10], reps=2,
                          params=RpcaParams(max_iter=5), seed=0)
        assert len(rows) == 4
        assert [(r[0], r[1], r[2]) for r in rows] == [
            (200, 5, 0), (200, 5, 1), (200, 10, 0), (200, 10, 1)]
        assert all(r[3] > 0 for r in rows)

    def test_empty_windows_rejected(self):
        with pytest.raises(ValueError):
            rpca_bench(100, [])
