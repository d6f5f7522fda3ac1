"""Distances from correlation/aggregation matrices, average-linkage clustering
and classical (Torgerson) MDS."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .aggregate import AggregationMatrix
from .matrices import CorrelationMatrix


class NumericError(ArithmeticError):
    """A numerical self-check (e.g. eigen residual) failed."""


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: tuple[str, ...]
    d: np.ndarray
    absent: int = 0

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64)
        n = len(self.labels)
        if d.shape != (n, n):
            raise ValueError("distance matrix must be square and match the labels")
        if not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0) or np.any(d < 0):
            raise ValueError("distances must be >= 0 with a zero diagonal")
        d.flags.writeable = False
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.labels)


def to_distance(
    a: Union[AggregationMatrix, CorrelationMatrix, np.ndarray], labels: Optional[Sequence[str]] = None
) -> DistanceMatrix:
    """1 - a off the diagonal, 0 on it; absent entries become distance 1."""
    if isinstance(a, AggregationMatrix):
        values, labels = a.shares, a.labels
    elif isinstance(a, CorrelationMatrix):
        values, labels = a.entries, a.labels
    else:
        values = np.asarray(a, dtype=np.float64)
        if labels is None:
            labels = [str(i) for i in range(values.shape[0])]
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(values[off & ~np.isnan(values)] > 1):
        raise ValueError("input entries must be <= 1")
    missing = off & np.isnan(values)
    d = np.where(missing, 1.0, 1.0 - np.nan_to_num(values))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(labels, d, int(missing.sum() // 2))


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree; leaves are nodes 0..n-1, merge k creates node n + k.

    Heights are the linkage distances themselves (not halved).
    """

    labels: tuple[str, ...]
    merges: tuple[Merge, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "merges", tuple(self.merges))
        n = len(self.labels)
        if len(self.merges) != n - 1:
            raise ValueError("a dendrogram over n leaves needs n - 1 merges")
        used = set()
        sizes = [1] * n
        for k, m in enumerate(self.merges):
            for node in (m.left, m.right):
                if node >= n + k or node in used:
                    raise ValueError(f"merge {k} references an invalid or reused node {node}")
                used.add(node)
            sizes.append(sizes[m.left] + sizes[m.right])
            if sizes[-1] != m.size:
                raise ValueError(f"merge {k} size mismatch")

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def leaf_order(self) -> list[int]:
        n = self.n_leaves
        if n == 1:
            return [0]
        order = []
        stack = [n + len(self.merges) - 1]
        while stack:
            node = stack.pop()
            if node < n:
                order.append(node)
            else:
                m = self.merges[node - n]
                stack.extend((m.right, m.left))
        return order

    def node_height(self, node: int) -> float:
        return 0.0 if node < self.n_leaves else self.merges[node - self.n_leaves].height

    def to_linkage(self) -> np.ndarray:
        """SciPy-style linkage matrix."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=np.float64).reshape(-1, 4)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "height_convention": "linkage distance",
            "merges": [{"a": m.left, "b": m.right, "height": m.height, "size": m.size} for m in self.merges],
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_json(cls, path) -> "Dendrogram":
        doc = json.loads(Path(path).read_text())
        return cls(doc["labels"], [Merge(m["a"], m["b"], m["height"], m["size"]) for m in doc["merges"]])

    def to_newick(self) -> str:
        n = self.n_leaves

        def label(i):
            s = self.labels[i]
            return s if re.fullmatch(r"[A-Za-z0-9_.\-]+", s) else "'" + s.replace("'", "''") + "'"

        def render(node, parent_h):
            if node < n:
                text = label(node)
            else:
                m = self.merges[node - n]
                text = f"({render(m.left, m.height)},{render(m.right, m.height)})"
            return f"{text}:{parent_h - self.node_height(node)!r}"

        if n == 1:
            return label(0) + ";"
        m = self.merges[-1]
        return f"({render(m.left, m.height)},{render(m.right, m.height)});"


def upgma(D: DistanceMatrix | np.ndarray) -> Dendrogram:
    """Average-linkage agglomerative clustering.

    Equal linkage distances are broken by the smallest (left, right) pair of
    cluster representatives, a cluster's representative being its smallest
    leaf index.
    """
    if not isinstance(D, DistanceMatrix):
        D = DistanceMatrix([str(i) for i in range(len(D))], D)
    n = len(D)
    if n < 2:
        raise ValueError("clustering needs at least two items")
    dist = D.d.copy()
    np.fill_diagonal(dist, np.inf)
    # active clusters kept sorted by representative
    reps = list(range(n))
    nodes = list(range(n))
    sizes = [1] * n
    merges = []
    for step in range(n - 1):
        k = len(reps)
        sub = dist[:k, :k]
        flat = int(np.argmin(np.where(np.triu(np.ones((k, k), dtype=bool), 1), sub, np.inf)))
        i, j = divmod(flat, k)
        h = float(sub[i, j])
        ni, nj = sizes[i], sizes[j]
        lo = np.minimum(dist[i, :k], dist[j, :k])
        hi = np.maximum(dist[i, :k], dist[j, :k])
        w_hi = np.where(dist[i, :k] >= dist[j, :k], ni, nj) / (ni + nj)
        # lo + (hi - lo) * w keeps the update >= both inputs' minimum in floating point
        new = lo + (hi - lo) * w_hi
        merges.append(Merge(nodes[i], nodes[j], h, ni + nj))
        if merges[-1].height < (merges[-2].height if len(merges) > 1 else -np.inf):
            raise NumericError("average-linkage heights decreased")
        dist[i, :k] = new
        dist[:k, i] = new
        dist[i, i] = np.inf
        keep = [x for x in range(k) if x != j]
        dist[: k - 1, : k - 1] = dist[np.ix_(keep, keep)]
        nodes[i] = n + step
        sizes[i] = ni + nj
        del reps[j], nodes[j], sizes[j]
    return Dendrogram(D.labels, merges)


def cut(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Flat labels after undoing the last k - 1 merges, numbered by first leaf occurrence."""
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step, m in enumerate(dendrogram.merges[: n - k]):
        parent[find(m.left)] = n + step
        parent[find(m.right)] = n + step
    roots = {}
    out = np.empty(n, dtype=np.int64)
    for leaf in range(n):
        out[leaf] = roots.setdefault(find(leaf), len(roots))
    return out


@dataclass(frozen=True, eq=False)
class Embedding:
    labels: tuple[str, ...]
    coordinates: np.ndarray
    eigenvalues: np.ndarray
    stress: float
    negative_eigenvalue_flag: bool = False
    spectrum: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "coordinates", np.asarray(self.coordinates, dtype=np.float64))
        if self.coordinates.shape[0] != len(self.labels):
            raise ValueError("one coordinate row per label required")

    @property
    def k(self) -> int:
        return self.coordinates.shape[1]

    def distances(self) -> np.ndarray:
        return _pairwise(self.coordinates)

    def to_csv(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            axes = ["x", "y", "z"][: self.k] if self.k <= 3 else [f"x{i + 1}" for i in range(self.k)]
            w.writerow(["label", *axes])
            for lab, row in zip(self.labels, self.coordinates):
                w.writerow([lab, *(repr(float(v)) for v in row)])
        meta = {
            "eigenvalues": self.eigenvalues.tolist(),
            "stress": self.stress,
            "negative_eigenvalue_flag": self.negative_eigenvalue_flag,
            "spectrum": None if self.spectrum is None else self.spectrum.tolist(),
        }
        path.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Embedding":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        labels = [r[0] for r in rows[1:]]
        coords = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(len(labels), len(rows[0]) - 1)
        meta = json.loads(path.with_suffix(".json").read_text())
        spectrum = None if meta.get("spectrum") is None else np.array(meta["spectrum"])
        return cls(labels, coords, np.array(meta["eigenvalues"]), meta["stress"], meta["negative_eigenvalue_flag"], spectrum)


def _pairwise(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def stress(D: DistanceMatrix | np.ndarray, embedding: Embedding | np.ndarray) -> float:
    """sqrt(sum (d - d_hat)^2 / sum d^2) over i < j."""
    d = D.d if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=np.float64)
    if isinstance(embedding, Embedding):
        if isinstance(D, DistanceMatrix) and tuple(D.labels) != tuple(embedding.labels):
            raise ValueError("distance matrix and embedding labels differ")
        coords = embedding.coordinates
    else:
        coords = np.asarray(embedding, dtype=np.float64)
    iu = np.triu_indices(d.shape[0], k=1)
    dh = _pairwise(coords)[iu]
    den = float(np.sum(d[iu] ** 2))
    if den == 0:
        return 0.0
    return float(np.sqrt(np.sum((d[iu] - dh) ** 2) / den))


def classical_mds(D: DistanceMatrix | np.ndarray, k: int = 2, residual_tol: float = 1e-9) -> Embedding:
    """Torgerson scaling of the double-centered squared distances.

    Axes whose eigenvalue is negative (non-Euclidean input) are zero-filled and
    flagged. Each axis is oriented so its largest-magnitude coordinate is positive.
    """
    if not isinstance(D, DistanceMatrix):
        D = DistanceMatrix([str(i) for i in range(len(D))], D)
    n = len(D)
    if n < 2:
        raise ValueError("embedding needs at least two items")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    B = -0.5 * J @ (D.d * D.d) @ J
    B = (B + B.T) / 2
    w, v = np.linalg.eigh(B)
    order = np.argsort(w, kind="stable")[::-1]
    w, v = w[order], v[:, order]
    norm_b = np.linalg.norm(B, 2)
    resid = np.linalg.norm(B @ v - v * w, axis=0)
    if np.any(resid > residual_tol * max(norm_b, np.finfo(float).tiny)):
        raise NumericError(f"eigen residual {resid.max():.3e} exceeds {residual_tol:g} * ||B||")
    top = w[:k]
    tol = 1e-12 * max(np.abs(w).max(), 1.0)
    negative = bool(np.any(top < -tol))
    scale = np.sqrt(np.clip(top, 0.0, None))
    coords = v[:, :k] * scale
    coords[:, top <= tol] = 0.0
    coords = coords - coords.mean(axis=0)
    for a in range(k):
        i = int(np.argmax(np.abs(coords[:, a])))
        if coords[i, a] < 0:
            coords[:, a] = -coords[:, a]
    coords = coords + 0.0  # drop negative zeros for stable text output
    emb = Embedding(D.labels, coords, top.copy(), 0.0, negative, w.copy())
    object.__setattr__(emb, "stress", stress(D, emb))
    return emb
