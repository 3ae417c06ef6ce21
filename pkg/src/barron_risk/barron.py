"""Finite-atom Barron representations and the Monte-Carlo network construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from barron_risk.data import NoiseSpec
from barron_risk.model import NetParams, forward, path_norm
from barron_risk.numerics import _as_generator, sample_l1_sphere


@dataclass(frozen=True)
class DiscreteBarronRep:
    """``f(x) = sum_j p_j a_j relu(<w_j, x>)`` with ``sum p_j = 1`` and ``|w_j|_1 = 1``."""

    p: np.ndarray  # (k,)
    W: np.ndarray  # (k, d)
    a: np.ndarray  # (k,)

    def __post_init__(self):
        p = np.ascontiguousarray(self.p, dtype=np.float64).reshape(-1)
        W = np.ascontiguousarray(self.W, dtype=np.float64)
        a = np.ascontiguousarray(self.a, dtype=np.float64).reshape(-1)
        if W.ndim == 1:
            W = W[None, :]
        if p.size == 0 or not (p.shape == a.shape and W.shape[0] == p.shape[0]):
            raise ValueError(f"shape error: p {p.shape}, W {W.shape}, a {a.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("atom masses must be nonnegative and sum to 1")
        if np.any(np.abs(np.abs(W).sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("atom directions must lie on the unit l1 sphere")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "a", a)

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def k(self) -> int:
        return self.W.shape[0]

    def eval(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.d:
            raise ValueError(f"dimension mismatch: input {X.shape[-1]}, representation {self.d}")
        out = np.maximum(X @ self.W.T, 0.0) @ (self.p * self.a)
        return float(out) if X.ndim == 1 else out

    def gamma_p(self, order: float) -> float:
        """Value of the order-``order`` norm attained by this representation.

        This upper-bounds the infimum over all representations of the same function.
        """
        if order < 1:
            raise ValueError("order must be >= 1")
        if np.isinf(order):
            return float(np.max(np.abs(self.a[self.p > 0])))
        return float((self.p @ np.abs(self.a) ** order) ** (1.0 / order))

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "atoms": [
                {"p": float(p), "w": [float(v) for v in w], "a": float(a)}
                for p, w, a in zip(self.p, self.W, self.a)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DiscreteBarronRep":
        atoms = doc["atoms"]
        rep = cls([t["p"] for t in atoms], [t["w"] for t in atoms], [t["a"] for t in atoms])
        if rep.d != doc["d"]:
            raise ValueError(f"atom dimension {rep.d} disagrees with declared d={doc['d']}")
        return rep

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "DiscreteBarronRep":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TargetSpec:
    rep: DiscreteBarronRep
    noise: NoiseSpec = field(default_factory=NoiseSpec)


def eval_rep(rep: DiscreteBarronRep, x):
    return rep.eval(x)


def rep_gamma_p(rep: DiscreteBarronRep, order: float) -> float:
    return rep.gamma_p(order)


def one_neuron(d: int, direction=None) -> DiscreteBarronRep:
    """The single-neuron target ``relu(<w*, x>)``; ``w*`` defaults to the first basis vector."""
    w = np.zeros(d)
    if direction is None:
        w[0] = 1.0
    else:
        w = np.asarray(direction, dtype=np.float64)
        w = w / np.abs(w).sum()
    return DiscreteBarronRep([1.0], w[None, :], [1.0])


def random_rep(d: int, k: int, rng, coef_scale: float = 2.0) -> DiscreteBarronRep:
    """A random ``k``-atom representation with Dirichlet masses and uniform coefficients."""
    gen = _as_generator(rng)
    p = gen.dirichlet(np.ones(k))
    W = sample_l1_sphere(d, gen, size=k)
    a = gen.uniform(-coef_scale, coef_scale, k)
    return DiscreteBarronRep(p / p.sum(), W, a)


def positive_rep(d: int, k: int, rng) -> DiscreteBarronRep:
    """A random ``k``-atom representation with positive coefficients and ``gamma_1 = 1``.

    Its function takes values in [0, 1] on the cube.
    """
    gen = _as_generator(rng)
    p = gen.dirichlet(np.ones(k))
    p = p / p.sum()
    W = sample_l1_sphere(d, gen, size=k)
    a = gen.uniform(0.5, 1.5, k)
    return DiscreteBarronRep(p, W, a / (p @ a))


def sample_network(rep: DiscreteBarronRep, m: int, rng) -> NetParams:
    """Width-``m`` network from ``m`` i.i.d. atom draws, outer weights ``a(w_j) / m``."""
    if m < 1:
        raise ValueError("width must be >= 1")
    idx = _as_generator(rng).choice(rep.k, size=m, p=rep.p)
    return NetParams(rep.a[idx] / m, rep.W[idx])


@dataclass(frozen=True)
class Approximant:
    params: NetParams
    tries: int
    sq_error: float
    path_norm: float


class ConstructionFailed(RuntimeError):
    def __init__(self, tries: int, best: Approximant):
        super().__init__(f"construction failed after {tries} tries")
        self.tries = tries
        self.best = best


def construct_approximant(
    rep: DiscreteBarronRep, m: int, test_x, rng, max_tries: int = 64
) -> Approximant:
    """Resample networks until ``mean (f - f_m)^2 <= 3 gamma_2^2 / m`` and ``path norm <= 2 gamma_2``.

    The expectation over ``x`` is replaced by the mean over ``test_x``. On
    failure the raised :class:`ConstructionFailed` carries the draw with the
    smallest squared error.
    """
    if max_tries < 1:
        raise ValueError("max_tries must be >= 1")
    test_x = np.asarray(test_x, dtype=np.float64)
    if test_x.ndim != 2 or test_x.shape[0] == 0:
        raise ValueError("test_x must be a nonempty (n, d) array")
    gen = _as_generator(rng)
    g2 = rep.gamma_p(2)
    err_bound, norm_bound = 3 * g2**2 / m, 2 * g2
    target = rep.eval(test_x)
    best = None
    for t in range(1, max_tries + 1):
        net = sample_network(rep, m, gen)
        err = float(np.mean((forward(net, test_x) - target) ** 2))
        cand = Approximant(net, t, err, path_norm(net))
        if err <= err_bound and cand.path_norm <= norm_bound:
            return cand
        if best is None or err < best.sq_error:
            best = cand
    raise ConstructionFailed(max_tries, best)


def rep_from_network(params: NetParams) -> DiscreteBarronRep:
    """The discrete representation induced by a network, with rows l1-normalized.

    Zero rows contribute nothing and are dropped; the remaining neurons share
    the mass uniformly.
    """
    norms = np.abs(params.W).sum(axis=1)
    keep = norms > 0
    k = int(keep.sum())
    if k == 0:
        raise ValueError("network has no nonzero inner weight rows")
    W = params.W[keep] / norms[keep, None]
    # renormalize so the l1 constraint holds to rounding
    W = W / np.abs(W).sum(axis=1, keepdims=True)
    a = k * params.a[keep] * norms[keep]
    return DiscreteBarronRep(np.full(k, 1.0 / k), W, a)
