import numpy as np
import pytest

from barron_risk.barron import rep_from_network
from barron_risk.model import (
    InitSpec,
    LossSpec,
    NetParams,
    forward,
    forward_truncated,
    grad,
    init_params,
    load_params,
    path_norm,
    save_params,
)
from barron_risk.numerics import RngStream


def net(a, W):
    return NetParams(np.array(a, float), np.array(W, float))


class TestForward:
    def test_single_active_relu(self):
        assert forward(net([1.0], [[1.0, 0.0]]), [0.5, -1.0]) == 0.5

    def test_hand_evaluation(self):
        assert forward(net([1.0, -1.0], [[0.5, 0.5], [1.0, 0.0]]), [1.0, -1.0]) == -1.0

    def test_zero_network(self, rng):
        p = NetParams(np.zeros(4), rng.standard_normal((4, 3)))
        assert np.all(forward(p, rng.uniform(-1, 1, (20, 3))) == 0)

    def test_shape_error(self):
        with pytest.raises(ValueError, match="shape error"):
            forward(net([1.0], [[1.0, 0.0]]), [0.5, 0.5, 0.5])

    @pytest.mark.parametrize("raw,expected", [(-1.0, 0.0), (0.5, 0.5), (3.2, 1.0)])
    def test_truncation(self, raw, expected):
        assert forward_truncated(net([raw], [[1.0]]), [1.0]) == expected

    def test_positive_homogeneity(self, rng):
        p = NetParams(rng.standard_normal(8), rng.standard_normal((8, 5)))
        X = rng.uniform(-1, 1, (50, 5))
        for c in (1e-3, 0.7, 3.0, 250.0):
            np.testing.assert_allclose(forward(p.rescaled(c), X), forward(p, X), rtol=1e-12, atol=1e-12)
            assert path_norm(p.rescaled(c)) == pytest.approx(path_norm(p), rel=1e-12)

    def test_truncated_in_unit_interval(self, rng):
        p = NetParams(5 * rng.standard_normal(16), rng.standard_normal((16, 4)))
        out = forward_truncated(p, rng.uniform(-1, 1, (500, 4)))
        assert out.min() >= 0 and out.max() <= 1


class TestPathNorm:
    def test_hand_evaluation(self):
        assert path_norm(net([0.5, -1.0], [[1.0, -2.0], [0.5, 0.5]])) == 2.5

    def test_zero(self):
        assert path_norm(NetParams(np.zeros(3), np.zeros((3, 2)))) == 0.0

    def test_homogeneity_in_a(self, rng):
        p = NetParams(rng.standard_normal(6), rng.standard_normal((6, 3)))
        assert path_norm(NetParams(3.5 * p.a, p.W)) == pytest.approx(3.5 * path_norm(p), rel=1e-14)

    def test_equals_gamma1_of_induced_rep(self, rng):
        for _ in range(20):
            m, d = rng.integers(1, 30), rng.integers(1, 12)
            p = NetParams(rng.standard_normal(m), rng.standard_normal((m, d)))
            assert rep_from_network(p).gamma_p(1) == pytest.approx(path_norm(p), rel=1e-12)


class TestInit:
    def test_variance(self):
        p = init_params(10_000, 100, InitSpec(1.0, RngStream(1)))
        assert abs(p.a.var() / 2e-4 - 1) < 0.1
        assert abs(p.W.var() / 2e-2 - 1) < 0.1

    def test_deterministic(self):
        p = init_params(30, 7, InitSpec(2.0, RngStream(9, 1)))
        q = init_params(30, 7, InitSpec(2.0, RngStream(9, 1)))
        assert p.a.tobytes() == q.a.tobytes() and p.W.tobytes() == q.W.tobytes()

    def test_tiny_kappa(self):
        assert path_norm(init_params(100, 10, InitSpec(1e-30, RngStream(0)))) < 1e-10

    def test_kappa_positive(self):
        with pytest.raises(ValueError):
            InitSpec(0.0)


def objective(p, X, y, loss, lam, b):
    pred = np.clip(forward(p, X), 0, 1)
    return loss.per_sample(pred, y).mean() + lam * b * (path_norm(p) + 1)


def smooth_config(rng, m, d, n=12):
    """Random network and batch with every kink at least a margin away."""
    while True:
        W = rng.standard_normal((m, d))
        a = rng.standard_normal(m) / m
        W += np.sign(W) * 0.05
        X = rng.uniform(-1, 1, (n, d))
        p = NetParams(a, W)
        Z = X @ W.T
        f = forward(p, X)
        # f == 0 only when every unit is off, which small perturbations preserve
        off_clip = (np.abs(f) > 1e-4) | (f == 0)
        if np.min(np.abs(Z)) > 1e-4 and np.all(off_clip) and np.min(np.abs(f - 1)) > 1e-4:
            y = rng.uniform(0, 1, n)
            return p, X, y


def fd_grad(p, X, y, loss, lam, b, h=1e-6):
    """Central differences, all coordinates perturbed in one batched evaluation."""
    m, d = p.W.shape
    flat = np.concatenate([p.a, p.W.ravel()])
    step = h * np.eye(flat.size)

    def batch_objective(V):
        a, W = V[:, :m], V[:, m:].reshape(-1, m, d)
        f = np.einsum("bk,bnk->bn", a, np.maximum(np.einsum("bkd,nd->bnk", W, X), 0))
        risk = loss.per_sample(np.clip(f, 0, 1), y).mean(axis=1)
        return risk + lam * b * (np.sum(np.abs(a) * np.abs(W).sum(axis=2), axis=1) + 1)

    return (batch_objective(flat + step) - batch_objective(flat - step)) / (2 * h)


class TestGrad:
    def test_zero_at_interpolation(self):
        p = net([1.0, 0.5], [[1.0, 0.0], [0.0, 1.0]])
        X = np.array([[0.2, 0.3], [0.5, -0.4], [-0.3, 0.8]])
        y = np.clip(forward(p, X), 0, 1)
        g, risk = grad(p, X, y, LossSpec(), 0.0)
        assert risk == 0
        assert np.all(g.a == 0) and np.all(g.W == 0)

    def test_single_neuron_chain_rule(self):
        # f = a relu(w.x); dJ/da = (f - y) relu(w.x), dJ/dw = (f - y) a x
        a, w, x, y = 0.8, np.array([0.5, 0.25]), np.array([0.6, 0.4]), 0.1
        z = w @ x
        f = a * z
        g, _ = grad(net([a], [w]), x[None, :], [y], LossSpec(), 0.0)
        assert g.a[0] == pytest.approx((f - y) * z, rel=1e-14)
        np.testing.assert_allclose(g.W[0], (f - y) * a * x, rtol=1e-14)

    def test_single_neuron_with_regularizer(self):
        a, w, x, y, lam = 0.3, np.array([-0.5, 0.25]), np.array([-0.6, 0.4]), 0.9, 0.05
        z = w @ x
        f = a * z
        g, _ = grad(net([a], [w]), x[None, :], [y], LossSpec(), lam, 2.0)
        assert g.a[0] == pytest.approx((f - y) * z + 2 * lam * np.sign(a) * np.abs(w).sum(), rel=1e-14)
        np.testing.assert_allclose(g.W[0], (f - y) * a * x + 2 * lam * abs(a) * np.sign(w), rtol=1e-14)

    @pytest.mark.parametrize("loss", [LossSpec(), LossSpec("truncated", 1.0)])
    def test_finite_differences(self, rng, loss):
        for m, d in [(1, 2), (8, 5), (16, 3)]:
            p, X, y = smooth_config(rng, m, d)
            g, _ = grad(p, X, y, loss, 0.03, 1.5)
            analytic = np.concatenate([g.a, g.W.ravel()])
            numeric = fd_grad(p, X, y, loss, 0.03, 1.5)
            assert np.linalg.norm(analytic - numeric) <= 1e-5 * max(np.linalg.norm(numeric), 1e-12)

    def test_kink_conventions(self):
        # f(x) = 0 at the ReLU kink and clip boundary; sign(0) = 0 in the regularizer
        p = net([0.0, 1.0], [[1.0, 0.0], [0.0, 1.0]])
        g, _ = grad(p, np.array([[0.5, 0.0]]), [1.0], LossSpec(), 0.1)
        assert g.a[0] == 0.0
        np.testing.assert_array_equal(g.W[0], [0.0, 0.0])

    def test_truncated_cap_zero_slope(self):
        p = net([0.5], [[1.0]])
        g, risk = grad(p, np.array([[1.0]]), [5.0], LossSpec("truncated", 1.0), 0.0)
        assert risk == 0.5 and g.a[0] == 0 and g.W[0, 0] == 0

    def test_shape_error(self):
        with pytest.raises(ValueError, match="shape error"):
            grad(net([1.0], [[1.0, 0.0]]), np.ones((3, 2)), np.ones(2), LossSpec())


def test_serialization_roundtrip(tmp_path, rng):
    p = NetParams(rng.standard_normal(5), rng.standard_normal((5, 3)))
    save_params(p, tmp_path / "net.bin", kappa=1.0, seed=4)
    raw = (tmp_path / "net.bin").read_bytes()
    assert raw[:8] == (5).to_bytes(4, "little") + (3).to_bytes(4, "little")
    assert len(raw) == 8 + 8 * 5 * 4
    q = load_params(tmp_path / "net.bin")
    assert q.a.tobytes() == p.a.tobytes() and q.W.tobytes() == p.W.tobytes()
    import json

    assert json.loads((tmp_path / "net.bin.json").read_text()) == {"m": 5, "d": 3, "kappa": 1.0, "seed": 4}
