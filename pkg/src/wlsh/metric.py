"""Points, weight vectors, datasets and exact weighted distances.

A weighted distance applies the base distance to element-wise weighted
vectors: ``D_W(x, y) = D(W * x, W * y)``. Three base distances are supported:
l_p for ``0 < p <= 2``, Hamming over binary vectors, and angular distance.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch, IndexFormatError

DATA_MAGIC = b"WLSHDATA"
DATA_VERSION = 1
_DATA_HEADER = struct.Struct("<8sIIIii")


@dataclass(frozen=True)
class Metric:
    kind: str
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in ("lp", "hamming", "angular"):
            raise ConfigError(f"unknown metric kind {self.kind!r}")
        if self.kind == "lp" and not (0.0 < self.p <= 2.0):
            raise ConfigError(f"l_p metric requires 0 < p <= 2, got p={self.p}")

    @classmethod
    def lp(cls, p: float) -> "Metric":
        return cls("lp", float(p))

    @classmethod
    def hamming(cls) -> "Metric":
        return cls("hamming", 1.0)

    @classmethod
    def angular(cls) -> "Metric":
        return cls("angular", 2.0)

    def __str__(self) -> str:
        return f"l{self.p:g}" if self.kind == "lp" else self.kind


@dataclass(frozen=True)
class WeightVector:
    id: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ConfigError("weight vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ConfigError(f"weight vector {self.id} has a nonpositive or non-finite weight")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class Point:
    id: int
    coords: np.ndarray

    @property
    def d(self) -> int:
        return len(self.coords)


@dataclass
class Dataset:
    """``n`` integer points of dimensionality ``d``; point ids are row indices."""

    coords: np.ndarray
    value_range: tuple[int, int] = (0, 10000)
    _digest: str | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.int32)
        if coords.ndim != 2:
            raise ConfigError("dataset coordinates must be a 2-D array (n, d)")
        lo, hi = int(self.value_range[0]), int(self.value_range[1])
        if hi < lo:
            raise ConfigError(f"invalid value range ({lo}, {hi})")
        if coords.size and (coords.min() < lo or coords.max() > hi):
            raise ConfigError(f"dataset coordinates fall outside declared range [{lo}, {hi}]")
        self.coords = coords
        self.value_range = (lo, hi)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    def point(self, i: int) -> Point:
        return Point(int(i), self.coords[i])

    @property
    def points(self) -> list[Point]:
        return [Point(i, row) for i, row in enumerate(self.coords)]

    def to_bytes(self) -> bytes:
        lo, hi = self.value_range
        header = _DATA_HEADER.pack(DATA_MAGIC, DATA_VERSION, self.n, self.d, lo, hi)
        return header + self.coords.astype("<i4", copy=False).tobytes()

    @property
    def digest(self) -> str:
        if self._digest is None:
            self._digest = hashlib.sha256(self.to_bytes()).hexdigest()
        return self._digest

    def without(self, ids: Sequence[int]) -> "Dataset":
        keep = np.ones(self.n, dtype=bool)
        keep[np.asarray(ids, dtype=np.int64)] = False
        return Dataset(self.coords[keep], self.value_range)


def _as_coords(x) -> np.ndarray:
    if isinstance(x, Point):
        x = x.coords
    return np.asarray(x, dtype=np.float64)


def _as_weights(w) -> np.ndarray:
    if isinstance(w, WeightVector):
        return w.weights
    w = np.asarray(w, dtype=np.float64)
    if np.any(w <= 0):
        raise ConfigError("weights must be strictly positive")
    return w


def weighted_distance(metric: Metric, w, x, y) -> float:
    """Return ``D_W(x, y)`` under ``metric``.

    ``w`` may be a :class:`WeightVector` or a plain array; ``x`` and ``y`` may be
    :class:`Point` instances or arrays.
    """
    wv = _as_weights(w)
    xv = _as_coords(x)
    yv = _as_coords(y)
    if not (xv.shape == yv.shape == wv.shape):
        raise DimensionMismatch(
            f"dimensionality mismatch: w={wv.shape}, x={xv.shape}, y={yv.shape}"
        )
    if metric.kind == "lp":
        diff = np.abs(wv * xv - wv * yv)
        if metric.p == 1.0:
            return float(diff.sum())
        if metric.p == 2.0:
            return float(math.sqrt(float(np.dot(diff, diff))))
        return float(np.sum(diff ** metric.p) ** (1.0 / metric.p))
    if metric.kind == "hamming":
        if not (np.isin(xv, (0.0, 1.0)).all() and np.isin(yv, (0.0, 1.0)).all()):
            raise ConfigError("Hamming distance requires binary coordinates")
        return float(np.sum(np.abs(wv * xv - wv * yv)))
    return _angle(wv * xv, wv * yv)


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ConfigError("angular distance is undefined for a zero vector")
    cos = float(np.dot(a, b)) / (na * nb)
    return math.acos(min(1.0, max(-1.0, cos)))


def weighted_distances(metric: Metric, w, X: np.ndarray, q) -> np.ndarray:
    """Vectorised ``D_W(row, q)`` for every row of ``X``."""
    wv = _as_weights(w)
    qv = _as_coords(q)
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != wv.size or qv.shape != wv.shape:
        raise DimensionMismatch(
            f"dimensionality mismatch: w={wv.shape}, X={X.shape}, q={qv.shape}"
        )
    if metric.kind == "angular":
        A = X * wv
        b = qv * wv
        norms = np.linalg.norm(A, axis=1) * np.linalg.norm(b)
        if np.any(norms == 0):
            raise ConfigError("angular distance is undefined for a zero vector")
        return np.arccos(np.clip((A @ b) / norms, -1.0, 1.0))
    diff = np.abs(X * wv - qv * wv)
    if metric.kind == "hamming" or metric.p == 1.0:
        return diff.sum(axis=1)
    if metric.p == 2.0:
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return np.sum(diff ** metric.p, axis=1) ** (1.0 / metric.p)


def brute_force_knn(dataset: Dataset, metric: Metric, w, q, k: int) -> list[tuple[int, float]]:
    """Exact k nearest neighbours of ``q`` under ``D_W``; ties broken by point id."""
    if not 1 <= k <= dataset.n:
        raise ConfigError(f"k must satisfy 1 <= k <= n={dataset.n}, got {k}")
    dist = weighted_distances(metric, w, dataset.coords, q)
    if k < dataset.n:
        # everything tied with the k-th distance must survive the cut for id tie-breaks
        kth = np.partition(dist, k - 1)[k - 1]
        pool = np.flatnonzero(dist <= kth)
    else:
        pool = np.arange(dataset.n)
    order = pool[np.lexsort((pool, dist[pool]))][:k]
    return [(int(i), float(dist[i])) for i in order]


# ---------------------------------------------------------------------------
# dataset files


def save_dataset(dataset: Dataset, path: str | Path) -> str:
    """Write the binary dataset format; returns the sha256 digest of the bytes."""
    data = dataset.to_bytes()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_dataset(path: str | Path) -> Dataset:
    """Read a dataset file, binary (``WLSHDATA`` header) or whitespace text.

    Text files hold one point per line. A first line of the form
    ``# range LO HI`` declares the value range; otherwise it is taken from the
    data itself.
    """
    raw = Path(path).read_bytes()
    if raw[:8] == DATA_MAGIC:
        if len(raw) < _DATA_HEADER.size:
            raise IndexFormatError(f"{path}: truncated dataset header")
        _, version, n, d, lo, hi = _DATA_HEADER.unpack_from(raw)
        if version != DATA_VERSION:
            raise IndexFormatError(f"{path}: unsupported dataset version {version}")
        expected = _DATA_HEADER.size + 4 * n * d
        if len(raw) != expected:
            raise IndexFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
        coords = np.frombuffer(raw, dtype="<i4", offset=_DATA_HEADER.size).reshape(n, d)
        return Dataset(coords.copy(), (lo, hi))
    return _parse_text_dataset(raw.decode("utf-8"), path)


def _parse_text_dataset(text: str, path) -> Dataset:
    rows = []
    value_range = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 3 and parts[0] == "range":
                value_range = (int(parts[1]), int(parts[2]))
            continue
        rows.append([int(round(float(v))) for v in line.split()])
    if not rows:
        raise ConfigError(f"{path}: no points found")
    if len({len(r) for r in rows}) != 1:
        raise DimensionMismatch(f"{path}: rows have differing dimensionality")
    coords = np.asarray(rows, dtype=np.int64)
    if value_range is None:
        value_range = (int(coords.min()), int(coords.max()))
    return Dataset(coords, value_range)


def save_weights(weights: Sequence[WeightVector], path: str | Path) -> str:
    """Write one weight vector per line; line order defines the vector ids."""
    lines = [" ".join(repr(float(v)) for v in wv.weights) for wv in weights]
    data = ("\n".join(lines) + "\n").encode()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_weights(path: str | Path) -> list[WeightVector]:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        out.append(WeightVector(len(out), np.array([float(v) for v in line.split()])))
    if not out:
        raise ConfigError(f"{path}: no weight vectors found")
    if len({wv.d for wv in out}) != 1:
        raise DimensionMismatch(f"{path}: weight vectors have differing dimensionality")
    return out
