"""Domain types: datasets, clusterings, mappings and Voronoi partitions.

Partitions are always over integer point ids (position in the dataset), never
over raw coordinates, so duplicate points stay distinguishable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class ValidationError(ValueError):
    """Rejected input: shape mismatch, bad ids, non-finite values, ..."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValidationError(f"dataset needs shape (n>=1, d>=1), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("dataset contains NaN or Inf")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return isinstance(other, Dataset) and np.array_equal(self.points, other.points)


@dataclass(frozen=True, eq=False)
class Clustering:
    """A k-block partition of a set of point ids.

    ``ids`` is sorted; ``labels[j]`` is the block index of ``ids[j]``.
    Blocks may be empty.
    """

    k: int
    ids: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64).ravel()
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.k < 1:
            raise ValidationError(f"k must be positive, got {self.k}")
        if ids.shape != labels.shape:
            raise ValidationError("ids and labels differ in length")
        if ids.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValidationError(f"block index outside [0, {self.k})")
        order = np.argsort(ids, kind="stable")
        ids, labels = ids[order], labels[order]
        if ids.size > 1 and np.any(ids[1:] == ids[:-1]):
            raise ValidationError("duplicate point id in clustering")
        if ids.size and ids[0] < 0:
            raise ValidationError("negative point id")
        object.__setattr__(self, "ids", _frozen(ids))
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_labels(cls, labels: Sequence[int], k: int | None = None, ids: Sequence[int] | None = None) -> "Clustering":
        labels = np.asarray(labels, dtype=np.int64)
        if k is None:
            k = int(labels.max()) + 1 if labels.size else 1
        if ids is None:
            ids = np.arange(labels.size)
        return cls(k, ids, labels)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Iterable[int]]) -> "Clustering":
        ids, labels = [], []
        for b, block in enumerate(blocks):
            for x in block:
                ids.append(x)
                labels.append(b)
        return cls(len(blocks), np.asarray(ids, dtype=np.int64), np.asarray(labels, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.ids.size

    @property
    def blocks(self) -> list[frozenset[int]]:
        return [frozenset(int(i) for i in self.ids[self.labels == b]) for b in range(self.k)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def label_of(self, x: int) -> int:
        j = np.searchsorted(self.ids, x)
        if j >= self.ids.size or self.ids[j] != x:
            raise ValidationError(f"point id {x} not in clustering domain")
        return int(self.labels[j])

    def relabel(self, perm: Sequence[int]) -> "Clustering":
        """Move block ``b`` to block ``perm[b]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return Clustering(self.k, self.ids, perm[self.labels])

    def __eq__(self, other):
        return (
            isinstance(other, Clustering)
            and self.k == other.k
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self):
        return f"Clustering(k={self.k}, blocks={[sorted(b) for b in self.blocks]})"


@dataclass(frozen=True, eq=False)
class LinearMapping:
    """x -> matrix @ x, with every entry bounded by ``bound`` in absolute value."""

    matrix: np.ndarray
    bound: float = np.inf

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim == 1:
            m = m[None, :]
        if m.ndim != 2 or 0 in m.shape:
            raise ValidationError(f"mapping matrix must be 2-D and non-empty, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("mapping matrix has non-finite entries")
        if not self.bound > 0:
            raise ValidationError("entry bound must be positive")
        if np.any(np.abs(m) > self.bound * (1 + 1e-12)):
            raise ValidationError(f"mapping entry exceeds bound {self.bound}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def d_in(self) -> int:
        return self.matrix.shape[1]

    @property
    def d_out(self) -> int:
        return self.matrix.shape[0]

    def images(self, X: Dataset) -> np.ndarray:
        if X.dim != self.d_in:
            raise ValidationError(f"mapping expects d_in={self.d_in}, dataset has {X.dim}")
        return X.points @ self.matrix.T

    @classmethod
    def identity(cls, d: int) -> "LinearMapping":
        return cls(np.eye(d))

    def __eq__(self, other):
        return isinstance(other, LinearMapping) and np.array_equal(self.matrix, other.matrix)

    def __repr__(self):
        return f"LinearMapping({self.matrix.tolist()})"


@dataclass(frozen=True, eq=False)
class AffineMapping:
    """x -> scale * inner(x) + shift. Used to squeeze linear images into (0, 1)^d."""

    inner: object
    scale: float
    shift: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shift", _frozen(np.asarray(self.shift, dtype=float).ravel()))

    @property
    def d_in(self) -> int:
        return self.inner.d_in

    @property
    def d_out(self) -> int:
        return self.inner.d_out

    def images(self, X: Dataset) -> np.ndarray:
        return self.scale * self.inner.images(X) + self.shift


@dataclass(frozen=True, eq=False)
class TableMapping:
    """Per-point lookup table: the image of point id ``i`` is ``table[i]``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ValidationError("table mapping needs a 2-D table")
        object.__setattr__(self, "table", _frozen(t))

    @property
    def d_in(self):
        return None

    @property
    def d_out(self) -> int:
        return self.table.shape[1]

    def images(self, X: Dataset) -> np.ndarray:
        if X.n != self.table.shape[0]:
            raise ValidationError(f"table has {self.table.shape[0]} rows, dataset has {X.n} points")
        return self.table.copy()


@dataclass(frozen=True, eq=False)
class CenterSet:
    centers: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValidationError("center set needs shape (k>=1, d)")
        if not np.all(np.isfinite(c)):
            raise ValidationError("non-finite center coordinates")
        object.__setattr__(self, "centers", _frozen(c))

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def as_centers(mu) -> np.ndarray:
    return mu.centers if isinstance(mu, CenterSet) else CenterSet(mu).centers


def images_of(f, X: Dataset) -> np.ndarray:
    """Mapped points f(x) as an (n, d_out) array. ``f=None`` means identity."""
    if f is None:
        return np.array(X.points)
    return np.asarray(f.images(X), dtype=float)


def apply_mapping(f, X: Dataset) -> Dataset:
    return Dataset(images_of(f, X))


def nearest_center(Y: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest center per row (lowest index on ties) and the squared distance."""
    if Y.shape[1] != centers.shape[1]:
        raise ValidationError(f"points have dim {Y.shape[1]}, centers have dim {centers.shape[1]}")
    d2 = ((Y[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    idx = np.argmin(d2, axis=1)
    return idx, d2[np.arange(Y.shape[0]), idx]


def voronoi_partition(f, mu, X: Dataset) -> Clustering:
    """The clustering of X induced by the Voronoi cells of ``mu`` in the mapped space."""
    centers = as_centers(mu)
    labels, _ = nearest_center(images_of(f, X), centers)
    return Clustering(centers.shape[0], X.ids, labels)


def restrict(C: Clustering, S: Iterable[int]) -> Clustering:
    """Induced partition of the id-set S, keeping block indices."""
    S = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
    pos = np.searchsorted(C.ids, S)
    if S.size and (np.any(pos >= C.ids.size) or np.any(C.ids[np.minimum(pos, C.ids.size - 1)] != S)):
        raise ValidationError("sample contains ids outside the clustering's domain")
    return Clustering(C.k, S, C.labels[pos])


def collapse_mapping(C: Clustering, d_out: int) -> TableMapping:
    """A table mapping that sends every point of block i to a single vertex v_i.

    With k <= d_out the vertices are 0.25 + 0.5 * e_i; otherwise they are
    spread evenly along the first axis. Exact k-means on the image recovers C.
    """
    if d_out < 1:
        raise ValidationError("d_out must be >= 1")
    k = C.k
    if k <= d_out:
        vertices = np.full((k, d_out), 0.25)
        vertices[np.arange(k), np.arange(k)] = 0.75
    else:
        vertices = np.full((k, d_out), 0.5)
        vertices[:, 0] = (np.arange(k) + 1) / (k + 1)
    n = int(C.ids.max()) + 1 if C.n else 0
    if C.n != n:
        raise ValidationError("collapse_mapping needs a clustering of the full id range 0..n-1")
    return TableMapping(vertices[C.labels])


# CSV formats: datasets have one point per row, no header; clusterings are
# rows of ``point_id,block_index``; mappings are matrices, one row per output dim.

def read_dataset(path) -> Dataset:
    return Dataset(np.loadtxt(path, delimiter=",", ndmin=2))


def write_dataset(X: Dataset, path) -> None:
    _write_rows(path, ([repr(float(v)) for v in row] for row in X.points))


def read_mapping(path, bound: float = np.inf) -> LinearMapping:
    return LinearMapping(np.loadtxt(path, delimiter=",", ndmin=2), bound)


def write_mapping(f: LinearMapping, path) -> None:
    _write_rows(path, ([repr(float(v)) for v in row] for row in f.matrix))


def read_clustering(path, k: int | None = None) -> Clustering:
    ids, labels = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"bad clustering row {row!r} in {path}") from exc
    if k is None:
        k = max(labels) + 1 if labels else 1
    return Clustering(k, ids, labels)


def write_clustering(C: Clustering, path) -> None:
    _write_rows(path, ([str(int(i)), str(int(b))] for i, b in zip(C.ids, C.labels)))


def _write_rows(path, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow(row)
