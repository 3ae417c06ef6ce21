"""Random-feature estimate of the ReLU kernel under the uniform l1-sphere measure, and KRR.

``k(x, x') = E_w[relu(<w, x>) relu(<w, x'>)]`` is approximated by the mean
over ``M`` sampled directions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from barron_risk.numerics import cholesky_solve, sample_l1_sphere

JITTER = 1e-10


@dataclass(frozen=True)
class RandomFeatureKernel:
    directions: np.ndarray  # (M, d), rows on the l1 sphere
    seed: object = None

    def __post_init__(self):
        D = np.ascontiguousarray(self.directions, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] < 1:
            raise ValueError("directions must be a nonempty (M, d) array")
        if np.any(np.abs(np.abs(D).sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("kernel directions must lie on the unit l1 sphere")
        object.__setattr__(self, "directions", D)

    @classmethod
    def sample(cls, d: int, M: int, rng) -> "RandomFeatureKernel":
        return cls(sample_l1_sphere(d, rng, size=M), seed=rng)

    @property
    def M(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def features(self, X) -> np.ndarray:
        """``relu(X W^T) / sqrt(M)`` so that ``k(x, x') = phi(x) . phi(x')``."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.d:
            raise ValueError(f"dimension mismatch: input {X.shape[-1]}, kernel {self.d}")
        return np.maximum(X @ self.directions.T, 0.0) / np.sqrt(self.M)


def kernel_eval(k: RandomFeatureKernel, x, x2) -> float:
    u = np.maximum(k.directions @ np.asarray(x, dtype=np.float64), 0.0)
    v = np.maximum(k.directions @ np.asarray(x2, dtype=np.float64), 0.0)
    # elementwise product commutes, so the estimate is exactly symmetric
    return float(np.mean(u * v))


def gram(k: RandomFeatureKernel, X, jitter: bool = True) -> np.ndarray:
    """Gram matrix with ``1e-10 * trace / n`` added to the diagonal."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a nonempty (n, d) array")
    phi = k.features(X)
    K = phi @ phi.T
    K = 0.5 * (K + K.T)
    if jitter:
        K[np.diag_indices_from(K)] += JITTER * np.trace(K) / K.shape[0]
    return K


def krr_solve(K: np.ndarray, y, ridge: float) -> np.ndarray:
    """Dual coefficients solving ``(K + 2 n ridge I) alpha = y``.

    This is the stationary point of ``|K alpha - y|^2 / (2n) + ridge * alpha^T K alpha``.
    """
    if not ridge > 0:
        raise ValueError("ridge must be positive")
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = K.shape[0]
    if K.shape != (n, n) or y.shape[0] != n:
        raise ValueError(f"shape error: K {K.shape} vs y {y.shape}")
    A = K.copy()
    A[np.diag_indices_from(A)] += 2 * n * ridge
    return cholesky_solve(A, y)


def ridge_objective(K, y, alpha, ridge) -> float:
    r = K @ alpha - y
    return float(r @ r / (2 * len(y)) + ridge * alpha @ K @ alpha)


@dataclass(frozen=True)
class KrrModel:
    alpha: np.ndarray
    train_x: np.ndarray
    kernel: RandomFeatureKernel
    ridge: float

    def __post_init__(self):
        if self.alpha.shape[0] != self.train_x.shape[0]:
            raise ValueError("shape error: alpha and train_x disagree")
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("non-finite dual coefficients")

    def save(self, path) -> None:
        path = Path(path)
        D, X = self.kernel.directions, self.train_x
        with open(path, "wb") as fh:
            fh.write(self.alpha.astype("<f8").tobytes())
            fh.write(X.astype("<f8").tobytes())
            fh.write(D.astype("<f8").tobytes())
        meta = {"n": X.shape[0], "d": X.shape[1], "M": D.shape[0], "ridge": self.ridge}
        Path(str(path) + ".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "KrrModel":
        meta = json.loads(Path(str(path) + ".json").read_text())
        n, d, M = meta["n"], meta["d"], meta["M"]
        vals = np.frombuffer(Path(path).read_bytes(), dtype="<f8").astype(np.float64)
        if vals.size != n + n * d + M * d:
            raise ValueError(f"length error: {path} does not match its sidecar")
        alpha, X, D = vals[:n], vals[n : n + n * d].reshape(n, d), vals[n + n * d :].reshape(M, d)
        return cls(alpha, X, RandomFeatureKernel(D), meta["ridge"])


def krr_fit(k: RandomFeatureKernel, X, y, ridge: float) -> KrrModel:
    X = np.asarray(X, dtype=np.float64)
    alpha = krr_solve(gram(k, X), y, ridge)
    return KrrModel(alpha, X, k, float(ridge))


def krr_predict(model: KrrModel, x, clip: bool = True):
    """``sum_i alpha_i k(x_i, x)`` clipped to [0, 1]."""
    k = model.kernel
    coef = k.features(model.train_x).T @ model.alpha
    out = k.features(x) @ coef
    if clip:
        out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def rkhs_norm_sq(model: KrrModel) -> float:
    phi = model.kernel.features(model.train_x)
    v = phi.T @ model.alpha
    return max(float(v @ v), 0.0)
