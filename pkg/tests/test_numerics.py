import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from barron_risk.numerics import (
    NotPositiveDefiniteError,
    RngStream,
    cholesky_solve,
    loglog_slope,
    sample_l1_sphere,
    stream_id,
)


class TestCholeskySolve:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky_solve(np.eye(2), [3.0, -1.0]), [3.0, -1.0])

    def test_diagonal(self):
        np.testing.assert_allclose(cholesky_solve([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0]), [1.0, 2.0])

    def test_random_spd_residual(self, rng):
        M = rng.standard_normal((5, 5))
        A = M.T @ M + np.eye(5)
        b = rng.standard_normal(5)
        x = cholesky_solve(A, b)
        assert np.max(np.abs(A @ x - b)) <= 1e-8 * (1 + np.max(np.abs(b)))

    def test_residual_bound_many_systems(self, rng):
        for _ in range(100):
            k = int(rng.integers(1, 51))
            M = rng.standard_normal((k, k))
            A = M.T @ M + np.eye(k)
            b = rng.standard_normal(k)
            x = cholesky_solve(A, b)
            assert np.max(np.abs(A @ x - b)) <= 1e-8 * (1 + np.max(np.abs(b)))

    def test_not_positive_definite_names_pivot(self):
        A = np.diag([1.0, 2.0, -1.0, 4.0])
        with pytest.raises(NotPositiveDefiniteError, match="not positive definite.*index 2") as exc:
            cholesky_solve(A, np.ones(4))
        assert exc.value.pivot == 2

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape error"):
            cholesky_solve(np.eye(3), np.ones(2))


class TestSampleL1Sphere:
    def test_one_dimensional_is_fair_coin(self, stream):
        w = sample_l1_sphere(1, stream, size=10_000)
        assert set(np.unique(w)) == {-1.0, 1.0}
        assert abs(np.mean(w > 0) - 0.5) <= 0.02

    @settings(max_examples=50, deadline=None)
    @given(d=st.integers(1, 200), seed=st.integers(0, 2**32))
    def test_unit_l1_norm(self, d, seed):
        w = sample_l1_sphere(d, RngStream(seed))
        assert abs(np.abs(w).sum() - 1.0) <= 1e-12

    def test_sign_symmetry(self, stream):
        w = sample_l1_sphere(3, stream, size=100_000)
        sem = w.std(axis=0) / np.sqrt(w.shape[0])
        assert np.all(np.abs(w.mean(axis=0)) <= 3 * sem)

    def test_empty_dimension(self, stream):
        with pytest.raises(ValueError, match="empty dimension"):
            sample_l1_sphere(0, stream)


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(5, 3).generator().standard_normal(100)
        b = RngStream(5, 3).generator().standard_normal(100)
        assert a.tobytes() == b.tobytes()

    def test_distinct_streams_differ(self):
        a = RngStream(5, 3).generator().standard_normal(1000)
        b = RngStream(5, 4).generator().standard_normal(1000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.15

    def test_stream_id_stable(self):
        assert stream_id("rate", 10, 0) == stream_id("rate", 10, 0)
        assert stream_id("rate", 10, 0) != stream_id("rate", 10, 1)
        assert 0 <= stream_id("x") < 2**63


class TestLoglogSlope:
    def test_exact_power_law(self):
        slope, _ = loglog_slope([(10, 0.1), (100, 0.01)])
        assert slope == pytest.approx(1.0, abs=1e-12)

    def test_constant(self):
        slope, intercept = loglog_slope([(n, 5.0) for n in range(10, 1001, 90)])
        assert slope == pytest.approx(0.0, abs=1e-12)
        assert intercept == pytest.approx(np.log(5.0))

    @pytest.mark.parametrize("beta", [0.5, 1.18, 0.35])
    def test_planted_exponent(self, beta):
        ns = [64, 256, 1024, 4096, 16384]
        slope, intercept = loglog_slope([(n, 2 * n**-beta) for n in ns])
        assert slope == pytest.approx(beta, abs=1e-10)
        assert intercept == pytest.approx(np.log(2), abs=1e-9)

    def test_non_positive(self):
        with pytest.raises(ValueError, match="log of non-positive"):
            loglog_slope([(10, 0.1), (100, 0.0)])
