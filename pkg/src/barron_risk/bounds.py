"""Closed-form generalization and a-priori risk bounds for path-norm controlled networks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from barron_risk.data import Dataset
from barron_risk.model import LossSpec, path_norm
from barron_risk.training import b_n, empirical_risk

# sum_{k >= 1} 1 / k^2
UNION_CONSTANT = math.pi**2 / 6


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ValueError(f"confidence error: delta must lie in (0, 1), got {delta}")


def rademacher_bound(Q: float, d: int, n: int) -> float:
    """Empirical Rademacher complexity bound ``2 Q sqrt(2 ln(2d) / n)`` for the path-norm ball."""
    if Q < 0 or d < 1 or n < 1:
        raise ValueError("need Q >= 0, d >= 1, n >= 1")
    return 2.0 * Q * math.sqrt(2.0 * math.log(2 * d) / n)


def complexity_term(path_norm_value: float, A: float, d: int, n: int) -> float:
    return 4.0 * A * math.sqrt(2.0 * math.log(2 * d) / n) * (path_norm_value + 1.0)


def confidence_term(path_norm_value: float, B: float, n: int, delta: float) -> float:
    _check_delta(delta)
    q = path_norm_value + 1.0
    return B * math.sqrt(2.0 * math.log(2.0 * UNION_CONSTANT * q * q / delta) / n)


def posterior_gap_bound(path_norm_value: float, A: float, B: float, d: int, n: int, delta: float) -> float:
    """Uniform bound on ``|L(theta) - L_n(theta)|`` for an ``A``-Lipschitz loss bounded by ``B``."""
    _check_delta(delta)
    if not (A > 0 and B > 0):
        raise ValueError("Lipschitz constant A and loss bound B must be positive")
    return complexity_term(path_norm_value, A, d, n) + confidence_term(path_norm_value, B, n, delta)


def truncation_gap_bound(c0: float, sigma: float, n: int) -> float:
    return 2.0 * c0 * sigma**2 / math.sqrt(n)


def apriori_terms(
    gamma2: float,
    m: int,
    lam: float,
    n: int,
    delta: float,
    noise: tuple | None = None,
) -> dict:
    """Explicit-constant terms of the a-priori excess-risk estimate.

    The estimate holds up to a universal constant. ``noise`` is
    ``(c0, sigma, B_n)``; when given, the regularization term is scaled by
    ``B_n``, the estimation and confidence terms by ``B_n^2``, and the
    truncation gap ``2 c0 sigma^2 / sqrt(n)`` is added.
    """
    if not lam > 0 or m < 1:
        raise ValueError("need lambda > 0 and m >= 1")
    _check_delta(delta)
    g_hat = max(1.0, gamma2)
    approx = 3.0 * gamma2**2 / m
    rn = math.sqrt(n)
    terms = {
        "approx": approx,
        "regularization": 8.0 * lam * g_hat,
        "estimation": 3.0 / rn * (math.sqrt(approx / (rn * lam)) + g_hat),
        "confidence": 3.0 / rn * math.sqrt(max(math.log(n / delta), 0.0)),
    }
    if noise is not None:
        c0, sigma, bn = noise
        terms["regularization"] *= bn
        terms["estimation"] *= bn**2
        terms["confidence"] *= bn**2
        terms["noise"] = truncation_gap_bound(c0, sigma, n)
    terms["total"] = math.fsum(v for k, v in terms.items())
    return terms


@dataclass
class BoundReport:
    path_norm: float
    lambda_n: float
    rademacher_term: float
    confidence_term: float
    total_posterior_gap: float
    apriori_terms: dict
    delta: float
    constants: dict
    n: int
    d: int
    m: int
    train_risk: float
    path_norm_over_sqrt_n: float
    note: str = "each term holds up to a universal constant"
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        lines = [
            f"bound report  (n={self.n}, d={self.d}, m={self.m}, delta={self.delta})",
            f"  path norm                {self.path_norm:.6g}",
            f"  path norm / sqrt(n)      {self.path_norm_over_sqrt_n:.6g}",
            f"  lambda_n                 {self.lambda_n:.6g}",
            f"  training risk            {self.train_risk:.6g}",
            f"  complexity term          {self.rademacher_term:.6g}",
            f"  confidence term          {self.confidence_term:.6g}",
            f"  posterior gap bound      {self.total_posterior_gap:.6g}",
            "  constants                " + ", ".join(f"{k}={v:.6g}" for k, v in self.constants.items()),
        ]
        if self.apriori_terms:
            lines.append(f"  a-priori terms; {self.note}")
            lines += [f"    {k:<22} {v:.6g}" for k, v in self.apriori_terms.items()]
        return "\n".join(lines) + "\n"


REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "path_norm", "lambda_n", "rademacher_term", "confidence_term", "total_posterior_gap",
        "apriori_terms", "delta", "constants", "n", "d", "m", "train_risk", "path_norm_over_sqrt_n",
    ],
    "properties": {
        "path_norm": {"type": "number", "minimum": 0},
        "lambda_n": {"type": "number", "minimum": 0},
        "rademacher_term": {"type": "number", "minimum": 0},
        "confidence_term": {"type": "number", "minimum": 0},
        "total_posterior_gap": {"type": "number", "minimum": 0},
        "apriori_terms": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "constants": {
            "type": "object",
            "required": ["A", "B", "c"],
            "additionalProperties": {"type": "number"},
        },
        "n": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "train_risk": {"type": "number", "minimum": 0},
        "path_norm_over_sqrt_n": {"type": "number", "minimum": 0},
        "note": {"type": "string"},
        "provenance": {"type": "object"},
    },
}


def loss_constants(loss) -> tuple[float, float]:
    """Lipschitz constant and bound of the loss on [0, 1]-valued predictions."""
    if loss.kind == "truncated":
        return loss.B, loss.B**2 / 2
    return 1.0, 2.0


def make_report(model, data: Dataset, delta: float, gamma2: float | None = None) -> BoundReport:
    """Assemble the posterior gap bound (and a-priori terms when ``gamma2`` is known).

    ``model`` is a :class:`TrainedModel` or bare :class:`NetParams`.
    """
    _check_delta(delta)
    params = getattr(model, "params", model)
    loss = getattr(model, "loss", None)
    A, B = loss_constants(loss) if loss is not None else (1.0, 2.0)
    n, d = data.n, data.d
    pn = path_norm(params)
    # the ln(2d) >= 1 precondition of lambda_n is not needed to report the scale
    lam_n = 4.0 * math.sqrt(2.0 * math.log(2 * d) / n)
    rad = complexity_term(pn, A, d, n)
    conf = confidence_term(pn, B, n, delta)
    if gamma2 is None:
        gamma2 = data.meta.get("gamma2")
    apriori = {}
    if gamma2 is not None:
        lam = getattr(model, "lam", 0.0) or lam_n
        noise = None
        spec = data.meta.get("noise") or {}
        if spec.get("kind", "none") != "none":
            noise = (spec["c0"], spec["sigma"], b_n(spec["tau0"], spec["sigma"], n))
        apriori = apriori_terms(gamma2, params.m, lam, n, delta, noise)
    return BoundReport(
        path_norm=pn,
        lambda_n=lam_n,
        rademacher_term=rad,
        confidence_term=conf,
        total_posterior_gap=rad + conf,
        apriori_terms=apriori,
        delta=delta,
        constants={"A": A, "B": B, "c": UNION_CONSTANT},
        n=n,
        d=d,
        m=params.m,
        train_risk=empirical_risk(params, data, loss or LossSpec()),
        path_norm_over_sqrt_n=pn / math.sqrt(n),
    )

