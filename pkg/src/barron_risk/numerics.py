"""Seeded random streams and the small linear-algebra kernels shared by the package.

Dense matrices are plain ``numpy.ndarray`` objects of dtype float64.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import lapack


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, pivot: int):
        super().__init__(f"not positive definite: non-positive pivot at index {pivot}")
        self.pivot = pivot


def stream_id(*labels) -> int:
    """Map an arbitrary tuple of labels to a stable 63-bit stream id."""
    key = "\x1f".join(str(label) for label in labels).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams with distinct ids are derived through ``numpy.random.SeedSequence``
    spawn keys, so they are statistically independent.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *labels) -> "RngStream":
        return RngStream(self.seed, stream_id(self.stream_id, *labels))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def cholesky_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive-definite ``A``.

    Raises :class:`NotPositiveDefiniteError` carrying the index of the first
    non-positive pivot.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"shape error: expected square matrix, got {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"shape error: matrix is {A.shape}, rhs has {b.shape[0]} rows")
    c, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise ValueError(f"invalid argument {-info} to dpotrf")
    x, info = lapack.dpotrs(c, b, lower=1)
    if info != 0:
        raise ValueError(f"dpotrs failed with info={info}")
    return x


def sample_l1_sphere(d: int, rng, size: int | None = None) -> np.ndarray:
    """Draw points uniformly from the unit l1 sphere in ``R^d``.

    Magnitudes follow a symmetric Dirichlet(1, ..., 1) law and signs are
    independent fair coins. With ``size`` given, returns a ``(size, d)`` array.
    """
    if d < 1:
        raise ValueError("empty dimension: d must be >= 1")
    gen = _as_generator(rng)
    shape = (d,) if size is None else (size, d)
    mags = gen.standard_exponential(shape)
    signs = np.where(gen.random(shape) < 0.5, -1.0, 1.0)
    w = signs * mags
    w /= np.abs(w).sum(axis=-1, keepdims=True)
    return w


def loglog_slope(points: Iterable[Sequence[float]]) -> tuple[float, float]:
    """Least-squares fit of ``log(value) = intercept - slope * log(n)``.

    Returns ``(slope, intercept)``; the slope is the decay exponent.
    """
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (n, value) points")
    if np.any(pts <= 0):
        raise ValueError("log of non-positive value in loglog_slope input")
    logn, logv = np.log(pts[:, 0]), np.log(pts[:, 1])
    coef, intercept = np.polyfit(logn, logv, 1)
    return float(-coef), float(intercept)
