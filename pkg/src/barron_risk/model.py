"""The two-layer ReLU network ``f(x) = sum_k a_k relu(<w_k, x>)``."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from barron_risk.numerics import _as_generator


@dataclass(frozen=True)
class NetParams:
    a: np.ndarray  # (m,)
    W: np.ndarray  # (m, d)

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=np.float64).reshape(-1)
        W = np.ascontiguousarray(self.W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != a.shape[0] or a.shape[0] < 1:
            raise ValueError(f"shape error: a {a.shape} vs W {W.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "W", W)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def rescaled(self, c: float) -> "NetParams":
        """The function-preserving rescaling ``(a, W) -> (a / c, c W)``."""
        return NetParams(self.a / c, self.W * c)


@dataclass(frozen=True)
class InitSpec:
    kappa: float = 1.0
    rng: object = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


@dataclass(frozen=True)
class LossSpec:
    """Squared loss ``(y - y')^2 / 2``, optionally capped at ``B^2 / 2``."""

    kind: str = "squared"
    B: float = 1.0

    def __post_init__(self):
        if self.kind not in ("squared", "truncated"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "truncated" and self.B < 1:
            raise ValueError("truncation scale B must be >= 1")

    @property
    def cap(self) -> float:
        return self.B**2 / 2 if self.kind == "truncated" else np.inf

    def per_sample(self, pred: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.minimum(0.5 * (pred - y) ** 2, self.cap)


def _check_inputs(params: NetParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != params.d:
        raise ValueError(f"shape error: input has dimension {X.shape[-1]}, network expects {params.d}")
    return X


def forward(params: NetParams, X) -> np.ndarray | float:
    """Evaluate the raw network on one input vector or on the rows of a matrix."""
    X = _check_inputs(params, X)
    out = np.maximum(X @ params.W.T, 0.0) @ params.a
    return float(out) if X.ndim == 1 else out


def forward_truncated(params: NetParams, X) -> np.ndarray | float:
    out = np.clip(forward(params, X), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def path_norm(params: NetParams) -> float:
    return float(np.abs(params.a) @ np.abs(params.W).sum(axis=1))


def init_params(m: int, d: int, spec: InitSpec) -> NetParams:
    """Gaussian initialization with ``a_i ~ N(0, 2 kappa / m)``, ``w_ij ~ N(0, 2 kappa / d)``."""
    if m < 1 or d < 1:
        raise ValueError("width and dimension must be >= 1")
    gen = _as_generator(spec.rng)
    a = gen.standard_normal(m) * np.sqrt(2 * spec.kappa / m)
    W = gen.standard_normal((m, d)) * np.sqrt(2 * spec.kappa / d)
    return NetParams(a, W)


def path_norm_subgradient(params: NetParams) -> NetParams:
    row_l1 = np.abs(params.W).sum(axis=1)
    return NetParams(np.sign(params.a) * row_l1, np.abs(params.a)[:, None] * np.sign(params.W))


def grad(params: NetParams, X, y, loss: LossSpec, lam: float = 0.0, b_scale: float = 1.0):
    """Subgradient of ``mean loss(Tf(x), y) + lam * b_scale * (path_norm + 1)``.

    Conventions at kinks: relu'(0) = 0, the clip has zero slope outside
    (0, 1), sign(0) = 0, and a capped loss has zero slope.
    Returns ``(gradient, empirical_risk)`` with the gradient as a NetParams.
    """
    X = _check_inputs(params, X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError(f"shape error: batch X {X.shape} vs y {y.shape}")
    n = X.shape[0]
    Z = X @ params.W.T
    H = np.maximum(Z, 0.0)
    f = H @ params.a
    pred = np.clip(f, 0.0, 1.0)
    losses = loss.per_sample(pred, y)
    g = (pred - y) * ((f > 0.0) & (f < 1.0))
    if loss.kind == "truncated":
        g = g * (losses < loss.cap)
    g /= n
    ga = H.T @ g
    gW = ((Z > 0.0) * (g[:, None] * params.a[None, :])).T @ X
    if lam:
        reg = path_norm_subgradient(params)
        scale = lam * b_scale
        ga = ga + scale * reg.a
        gW = gW + scale * reg.W
    return NetParams(ga, gW), float(losses.mean())


def save_params(params: NetParams, path, **sidecar) -> None:
    """Write ``path`` (little-endian u32 m, u32 d, a, W row-major) and ``path.json``."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", params.m, params.d))
        fh.write(params.a.astype("<f8").tobytes())
        fh.write(params.W.astype("<f8").tobytes())
    meta = {"m": params.m, "d": params.d, **sidecar}
    Path(str(path) + ".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_params(path) -> NetParams:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"length error: {path} too short for a parameter container")
    m, d = struct.unpack("<II", raw[:8])
    expected = 8 + 8 * m * (d + 1)
    if len(raw) != expected:
        raise ValueError(f"length error: {path} has {len(raw)} bytes, expected {expected}")
    vals = np.frombuffer(raw[8:], dtype="<f8").astype(np.float64)
    return NetParams(vals[:m], vals[m:].reshape(m, d))
