"""Datasets: synthetic Barron targets with noise, MNIST IDX ingestion, CSV export."""

from __future__ import annotations

import csv
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from barron_risk.numerics import _as_generator

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    """Additive response noise.

    ``gaussian`` draws N(0, sigma^2); ``bounded`` draws uniformly from
    [-tau0, tau0]. ``c0``, ``tau0`` and ``sigma`` are the tail constants fed
    to the noisy-case bounds.
    """

    kind: str = "none"
    sigma: float = 0.0
    tau0: float = 0.0
    c0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "bounded"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if min(self.sigma, self.tau0, self.c0) < 0:
            raise ValueError("noise parameters must be nonnegative")
        if self.kind == "none" and (self.sigma, self.tau0, self.c0) != (0.0, 0.0, 0.0):
            raise ValueError("noise kind 'none' requires sigma = tau0 = c0 = 0")

    @classmethod
    def gaussian(cls, sigma: float, c0: float = 2.0) -> "NoiseSpec":
        return cls("gaussian", sigma=float(sigma), tau0=0.0, c0=float(c0))

    def sample(self, n: int, rng) -> np.ndarray:
        gen = _as_generator(rng)
        if self.kind == "gaussian":
            return self.sigma * gen.standard_normal(n)
        if self.kind == "bounded":
            return gen.uniform(-self.tau0, self.tau0, n)
        return np.zeros(n)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "tau0": self.tau0, "c0": self.c0}


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"shape error: X {X.shape} vs y {y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset entries must be finite")
        if X.size and np.max(np.abs(X)) > 1 + 1e-12:
            raise ValueError("inputs must lie in [-1, 1]^d")
        if not self.meta.get("noisy", False) and y.size and (y.min() < 0 or y.max() > 1):
            raise ValueError("noiseless responses must lie in [0, 1]")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.meta)


def uniform_cube(n: int, d: int, rng) -> np.ndarray:
    return _as_generator(rng).uniform(-1.0, 1.0, (n, d))


def synth(target, n: int, d: int, rng, input_dist: str = "uniform_cube") -> Dataset:
    """Sample ``n`` pairs ``(x, f*(x) + noise)`` from a :class:`TargetSpec`."""
    if target.rep.d != d:
        raise ValueError(f"shape error: target has d={target.rep.d}, requested d={d}")
    if input_dist != "uniform_cube":
        raise ValueError(f"unsupported input distribution {input_dist!r}")
    gen = _as_generator(rng)
    X = uniform_cube(n, d, gen)
    y = target.rep.eval(X) + target.noise.sample(n, gen)
    meta = {
        "source": "synthetic",
        "input_dist": input_dist,
        "noise": target.noise.to_dict(),
        "noisy": target.noise.kind != "none",
        "gamma2": target.rep.gamma_p(2),
    }
    return Dataset(X, y, meta)


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise IdxFormatError(f"length error: {path} is too short for an IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IdxFormatError(
            f"format error: expected 0x{IDX_IMAGES_MAGIC:08X}/0x{IDX_LABELS_MAGIC:08X}, "
            f"got 0x{found:08X} in {path}"
        )
    if len(raw) < 4 + 4 * ndim:
        raise IdxFormatError(f"length error: {path} is too short for an IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    payload = raw[4 + 4 * ndim :]
    expected = int(np.prod(dims))
    if len(payload) != expected:
        raise IdxFormatError(
            f"length error: {path} holds {len(payload)} payload bytes, header implies {expected}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_mnist(image_path, label_path, scale: str = "pm1", binarize: str = "lt5_map") -> Dataset:
    """Read an MNIST image/label IDX pair into a flattened, binarized dataset.

    Pixels are mapped affinely from [0, 255] to [-1, 1]; digits 0-4 become
    label 0 and digits 5-9 label 1.
    """
    if scale != "pm1" or binarize != "lt5_map":
        raise ValueError("only scale='pm1' and binarize='lt5_map' are supported")
    images = _read_idx(image_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(label_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"length error: {images.shape[0]} images but {labels.shape[0]} labels"
        )
    X = images.reshape(images.shape[0], -1).astype(np.float64) * (2.0 / 255.0) - 1.0
    y = (labels >= 5).astype(np.float64)
    meta = {"source": "mnist", "images": str(image_path), "labels": str(label_path)}
    return Dataset(X, y, meta)


def verify_sha256(path, expected: str) -> None:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    if digest != expected.lower():
        raise IdxFormatError(f"checksum mismatch: {path} has sha256 {digest}, expected {expected}")


def with_bias(data: Dataset) -> Dataset:
    """Prepend a constant-1 coordinate so the bias is carried by the first weight."""
    X = np.hstack([np.ones((data.n, 1)), data.X])
    return Dataset(X, data.y, {**data.meta, "bias": True})


def subsample(data: Dataset, n: int, rng) -> Dataset:
    if n > data.n or n < 1:
        raise ValueError(f"size error: cannot draw {n} rows from a dataset of {data.n}")
    idx = _as_generator(rng).choice(data.n, size=n, replace=False)
    return data.take(idx)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def export_csv(table, path) -> None:
    """Write a :class:`Dataset` or a table of rows to CSV.

    A table is ``(header, rows)``. Floats carry 17 significant digits so
    float64 values round-trip exactly.
    """
    if isinstance(table, Dataset):
        header = [f"x{j}" for j in range(table.d)] + ["y"]
        rows = np.column_stack([table.X, table.y]).tolist()
    else:
        header, rows = table
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def load_dataset_csv(path, meta: Mapping | None = None) -> Dataset:
    header, rows = read_csv_table(path)
    if not header or header[-1] != "y":
        raise ValueError(f"{path}: last column must be 'y'")
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    y = arr[:, -1]
    info = {"source": str(path), "noisy": bool(y.size and (y.min() < 0 or y.max() > 1))}
    info.update(meta or {})
    return Dataset(arr[:, :-1], y, info)


def table_rows(header: Sequence[str], records: Sequence[Mapping]) -> tuple[list[str], list[list]]:
    return list(header), [[rec[h] for h in header] for rec in records]
