"""Losses, regularized objectives, the Adam training loop and the plug-in classifier."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from barron_risk.data import Dataset
from barron_risk.model import (
    InitSpec,
    LossSpec,
    NetParams,
    forward_truncated,
    grad,
    init_params,
    path_norm,
)
from barron_risk.numerics import RngStream, _as_generator

log = logging.getLogger(__name__)

__all__ = [
    "DivergenceError",
    "LossSpec",
    "TrainConfig",
    "TrainedModel",
    "b_n",
    "empirical_risk",
    "lambda_n",
    "plug_in_classify",
    "regularized_risk",
    "train",
    "zero_one_risk",
]

HISTORY_FIELDS = ("step", "lr", "emp_risk", "path_norm", "J_lambda")


class DivergenceError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"divergence: non-finite objective at step {step}")
        self.step = step


def lambda_n(d: int, n: int) -> float:
    """Theory-driven regularization scale ``4 sqrt(2 ln(2d) / n)``; needs ``ln(2d) >= 1``."""
    if d < 2:
        raise ValueError("dimension too small for bound: need ln(2d) >= 1, i.e. d >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    return 4.0 * math.sqrt(2.0 * math.log(2 * d) / n)


def b_n(tau0: float, sigma: float, n: int) -> float:
    """Truncation level ``1 + max(tau0, sigma^2 ln n)`` for sub-Gaussian noise."""
    if n < 1 or tau0 < 0 or sigma < 0:
        raise ValueError("need n >= 1 and nonnegative tau0, sigma")
    return 1.0 + max(tau0, sigma**2 * math.log(n))


def empirical_risk(params: NetParams, data: Dataset, loss: LossSpec = LossSpec()) -> float:
    if data.n == 0:
        raise ValueError("empty dataset")
    return float(loss.per_sample(forward_truncated(params, data.X), data.y).mean())


def regularized_risk(
    params: NetParams, data: Dataset, loss: LossSpec, lam: float, b_scale: float = 1.0
) -> float:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return empirical_risk(params, data, loss) + lam * b_scale * (path_norm(params) + 1.0)


def plug_in_classify(params: NetParams, x) -> np.ndarray | int:
    out = np.asarray(forward_truncated(params, x)) >= 0.5
    return int(out) if out.ndim == 0 else out.astype(np.int64)


def zero_one_risk(params: NetParams, data: Dataset) -> float:
    if not np.all((data.y == 0) | (data.y == 1)):
        raise ValueError("label error: zero-one risk needs labels in {0, 1}")
    return float(np.mean(plug_in_classify(params, data.X) != data.y))


@dataclass(frozen=True)
class TrainConfig:
    """Adam settings with a piecewise-constant step decay.

    ``lam=None`` resolves to ``lam_factor * lambda_n(d, n)`` at train time.
    ``batch_size=None`` means full-batch.
    """

    T: int = 2000
    base_lr: float = 1e-3
    decay_factor: float = 0.1
    decay_at: tuple = (0.7, 0.9)
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int | None = None
    lam: float | None = None
    lam_factor: float = 0.1
    b_scale: float = 1.0
    seed: RngStream = field(default_factory=lambda: RngStream(0))
    record_every: int | None = None

    def __post_init__(self):
        if self.T < 1 or not self.base_lr > 0:
            raise ValueError("need T >= 1 and base_lr > 0")
        if any(not 0 < f < 1 for f in self.decay_at):
            raise ValueError("decay breakpoints must be fractions in (0, 1)")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def lr_at(self, step: int) -> float:
        k = sum(step >= math.floor(f * self.T) for f in self.decay_at)
        return self.base_lr * self.decay_factor**k

    def resolve_lam(self, d: int, n: int) -> float:
        if self.lam is not None:
            return float(self.lam)
        return self.lam_factor * lambda_n(d, n)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["seed"] = {"seed": self.seed.seed, "stream_id": self.seed.stream_id}
        out["decay_at"] = list(self.decay_at)
        out["betas"] = list(self.betas)
        return out


@dataclass(frozen=True)
class TrainedModel:
    params: NetParams
    history: np.ndarray  # (records, 5) columns HISTORY_FIELDS
    config: TrainConfig
    lam: float
    loss: LossSpec
    m: int

    def history_table(self):
        rows = [[int(r[0])] + [float(v) for v in r[1:]] for r in self.history]
        return list(HISTORY_FIELDS), rows


def _adam_update(theta, g, mom, vel, t, lr, b1, b2, eps):
    mom *= b1
    mom += (1 - b1) * g
    vel *= b2
    vel += (1 - b2) * g * g
    mhat = mom / (1 - b1**t)
    vhat = vel / (1 - b2**t)
    theta -= lr * mhat / (np.sqrt(vhat) + eps)


def train(
    data: Dataset,
    m: int,
    loss: LossSpec,
    cfg: TrainConfig,
    init: InitSpec | NetParams,
) -> TrainedModel:
    """Minimize ``emp_risk + lam * b_scale * (path_norm + 1)`` with Adam.

    ``init`` is either an :class:`InitSpec` or explicit starting parameters.
    """
    if data.n == 0:
        raise ValueError("empty dataset")
    params = init if isinstance(init, NetParams) else init_params(m, data.d, init)
    if params.m != m or params.d != data.d:
        raise ValueError(f"shape error: init has (m, d)=({params.m}, {params.d})")
    lam = cfg.resolve_lam(data.d, data.n)
    scale = lam * cfg.b_scale
    a, W = params.a.copy(), params.W.copy()
    ma, va = np.zeros_like(a), np.zeros_like(a)
    mW, vW = np.zeros_like(W), np.zeros_like(W)
    b1, b2 = cfg.betas
    every = cfg.record_every or max(1, cfg.T // 1000)
    batch_gen = _as_generator(cfg.seed) if cfg.batch_size else None
    history = []

    def objective(theta: NetParams, emp: float) -> tuple[float, float]:
        pn = path_norm(theta)
        return pn, emp + scale * (pn + 1.0)

    for step in range(cfg.T):
        theta = NetParams(a, W)
        if batch_gen is not None and cfg.batch_size < data.n:
            idx = batch_gen.choice(data.n, size=cfg.batch_size, replace=False)
            g, emp = grad(theta, data.X[idx], data.y[idx], loss, lam, cfg.b_scale)
            record_emp = None
        else:
            g, emp = grad(theta, data.X, data.y, loss, lam, cfg.b_scale)
            record_emp = emp
        lr = cfg.lr_at(step)
        if step % every == 0:
            if record_emp is None:
                record_emp = empirical_risk(theta, data, loss)
            pn, J = objective(theta, record_emp)
            if not math.isfinite(J):
                raise DivergenceError(step)
            history.append((step, lr, record_emp, pn, J))
        elif not math.isfinite(emp):
            raise DivergenceError(step)
        _adam_update(a, g.a, ma, va, step + 1, lr, b1, b2, cfg.eps)
        _adam_update(W, g.W, mW, vW, step + 1, lr, b1, b2, cfg.eps)

    final = NetParams(a, W)
    emp = empirical_risk(final, data, loss)
    pn, J = objective(final, emp)
    if not math.isfinite(J):
        raise DivergenceError(cfg.T)
    history.append((cfg.T, cfg.lr_at(cfg.T - 1), emp, pn, J))
    log.debug("trained m=%d n=%d lam=%.3g: J=%.6g path_norm=%.4g", m, data.n, lam, J, pn)
    return TrainedModel(final, np.array(history, dtype=np.float64), cfg, lam, loss, m)
