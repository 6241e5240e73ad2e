"""Attributed undirected graphs, canonical dataset files, and graph-level augmentations.

Graphs store their adjacency as a symmetric CSR matrix with no self-loops.
Every random transformation takes an explicit seed and is deterministic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels


class DataError(ValueError):
    """Malformed or inconsistent dataset input."""


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Compressed sparse row matrix with float64 weights.

    Column indices are strictly increasing within a row.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    shape: tuple[int, int]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def rows(self) -> np.ndarray:
        """Row index of every stored entry."""
        if "rows" not in self._cache:
            self._cache["rows"] = np.repeat(
                np.arange(self.shape[0], dtype=np.int64), np.diff(self.indptr)
            )
        return self._cache["rows"]

    def with_data(self, data: np.ndarray) -> "SparseMatrix":
        out = SparseMatrix(self.indptr, self.indices, np.asarray(data, dtype=np.float64), self.shape)
        out._cache.update(self._cache)
        return out

    def transpose_struct(self):
        """Return (indptr_t, indices_t, perm) so that the transpose has data ``data[perm]``."""
        if "T" not in self._cache:
            rows = self.rows
            perm = np.lexsort((rows, self.indices))
            counts = np.bincount(self.indices, minlength=self.shape[1])
            indptr_t = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            self._cache["T"] = (indptr_t, rows[perm].astype(np.int64), perm)
        return self._cache["T"]

    def matmul(self, x: np.ndarray) -> np.ndarray:
        return kernels.spmm(self.indptr, self.indices, self.data, x)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.indices] = self.data
        return out

    def pruned(self) -> "SparseMatrix":
        """Drop explicit zeros."""
        keep = self.data != 0
        counts = np.bincount(self.rows[keep], minlength=self.shape[0])
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return SparseMatrix(indptr, self.indices[keep], self.data[keep], self.shape)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrix":
        """Build from coordinates; duplicates are summed, explicit zeros kept."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows):
            new = np.ones(len(rows), dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new)
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        counts = np.bincount(rows, minlength=shape[0])
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return cls(indptr, cols, vals, (int(shape[0]), int(shape[1])))

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "SparseMatrix":
        r, c = np.nonzero(a)
        return cls.from_coo(r, c, a[r, c], a.shape)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected attributed graph.

    ``edges`` holds each undirected edge once as ``(i, j)`` with ``i < j``;
    ``adj`` is the symmetric 0/1 CSR adjacency built from it.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    num_classes: int | None = None
    adj: SparseMatrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.num_nodes)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise DataError(f"features must have {n} rows, got shape {feats.shape}")
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise DataError(f"edge index out of range [0, {n})")
        edges = canonical_edges(edges, n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", feats)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise DataError(f"labels must have length {n}, got {labels.shape}")
            object.__setattr__(self, "labels", labels)
            if self.num_classes is None:
                object.__setattr__(self, "num_classes", int(labels.max()) + 1 if n else 0)
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        adj = SparseMatrix.from_coo(rows, cols, np.ones(len(rows)), (n, n))
        object.__setattr__(self, "adj", adj)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feat_dim(self) -> int:
        return self.features.shape[1]

    @property
    def density(self) -> float:
        """Non-zero rate of the adjacency matrix."""
        return 2 * self.num_edges / float(self.num_nodes) ** 2

    def with_edges(self, edges: np.ndarray) -> "Graph":
        return Graph(self.num_nodes, edges, self.features, self.labels, self.num_classes)

    def with_features(self, features: np.ndarray) -> "Graph":
        return Graph(self.num_nodes, self.edges, features, self.labels, self.num_classes)


def canonical_edges(edges: np.ndarray, num_nodes: int) -> np.ndarray:
    """Orient pairs as i<j, drop self-loops and duplicates, sort lexicographically."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    keep = lo != hi
    key = np.unique(lo[keep] * num_nodes + hi[keep])
    return np.stack([key // num_nodes, key % num_nodes], axis=1) if len(key) else np.zeros((0, 2), np.int64)


@dataclass(frozen=True, eq=False)
class LinkSplit:
    train_edges: np.ndarray
    val_edges: np.ndarray
    test_edges: np.ndarray
    val_negatives: np.ndarray
    test_negatives: np.ndarray


# ---------------------------------------------------------------------------
# Canonical dataset directory
# ---------------------------------------------------------------------------


def _fail(path, lineno, msg):
    where = f"{path}:{lineno}" if lineno else str(path)
    raise DataError(f"{where}: {msg}")


def load_graph(path) -> Graph:
    """Read a canonical dataset directory.

    Layout: ``meta.json`` with ``num_nodes``, ``feat_dim``, ``num_classes``;
    ``edges.tsv`` (``src<TAB>dst`` per line, 0-based, any orientation);
    ``features.csv`` (N rows of D comma-separated reals); optional
    ``labels.csv`` (N integers, one per line).
    """
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        _fail(meta_path, None, "missing file")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        n = int(meta["num_nodes"])
        d = int(meta["feat_dim"])
        k = meta.get("num_classes")
        k = None if k is None else int(k)
    except (ValueError, KeyError, TypeError) as exc:
        _fail(meta_path, None, f"malformed metadata ({exc})")

    edges_path = path / "edges.tsv"
    if not edges_path.is_file():
        _fail(edges_path, None, "missing file")
    pairs = []
    with open(edges_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                _fail(edges_path, lineno, f"expected 'src<TAB>dst', got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                _fail(edges_path, lineno, f"non-integer node id in {line!r}")
            if not (0 <= a < n and 0 <= b < n):
                _fail(edges_path, lineno, f"node index out of range [0, {n}) in {line!r}")
            pairs.append((a, b))

    feat_path = path / "features.csv"
    if not feat_path.is_file():
        _fail(feat_path, None, "missing file")
    rows = []
    with open(feat_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split(",")]
            except ValueError:
                _fail(feat_path, lineno, "non-numeric feature value")
            if len(row) != d:
                _fail(feat_path, lineno, f"expected {d} values, got {len(row)}")
            rows.append(row)
    if len(rows) != n:
        _fail(feat_path, None, f"expected {n} feature rows (meta.json), got {len(rows)}")

    labels = None
    label_path = path / "labels.csv"
    if label_path.is_file():
        vals = []
        with open(label_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    vals.append(int(line))
                except ValueError:
                    _fail(label_path, lineno, f"non-integer label {line!r}")
                if k is not None and not 0 <= vals[-1] < k:
                    _fail(label_path, lineno, f"label out of range [0, {k})")
        if len(vals) != n:
            _fail(label_path, None, f"expected {n} labels, got {len(vals)}")
        labels = np.array(vals, dtype=np.int64)

    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    features = np.array(rows, dtype=np.float64).reshape(n, d)
    return Graph(n, edges, features, labels, k)


def save_graph(g: Graph, path) -> None:
    """Write ``g`` in the canonical directory layout (UTF-8, LF)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {"num_nodes": g.num_nodes, "feat_dim": g.feat_dim, "num_classes": g.num_classes}
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    with open(path / "edges.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{a}\t{b}\n" for a, b in g.edges)
    with open(path / "features.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(",".join(repr(float(v)) for v in row) + "\n" for row in g.features)
    if g.labels is not None:
        with open(path / "labels.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{int(v)}\n" for v in g.labels)


def dataset_files(path) -> list[Path]:
    path = Path(path)
    return [path / f for f in ("meta.json", "edges.tsv", "features.csv", "labels.csv") if (path / f).is_file()]


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def self_loop_struct(g: Graph) -> tuple[SparseMatrix, np.ndarray]:
    """CSR pattern of A+I and, per stored entry, its undirected edge id (-1 on the diagonal)."""
    n, m = g.num_nodes, g.num_edges
    e = g.edges
    ar = np.arange(n, dtype=np.int64)
    eid = np.arange(m, dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1], ar])
    cols = np.concatenate([e[:, 1], e[:, 0], ar])
    ids = np.concatenate([eid, eid, np.full(n, -1, dtype=np.int64)])
    order = np.lexsort((cols, rows))
    rows, cols, ids = rows[order], cols[order], ids[order]
    counts = np.bincount(rows, minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return SparseMatrix(indptr, cols, np.ones(len(cols)), (n, n)), ids


def sym_normalize(g: Graph, edge_weight: np.ndarray | None = None) -> SparseMatrix:
    """Return D^-1/2 (A+I) D^-1/2 with D the degree matrix of A+I.

    ``edge_weight`` optionally scales each undirected edge (one value per row of
    ``g.edges``); zero-weight edges are dropped from the result.
    """
    struct, ids = self_loop_struct(g)
    w = np.ones(len(ids))
    if edge_weight is not None:
        edge_weight = np.asarray(edge_weight, dtype=np.float64).reshape(-1)
        off = ids >= 0
        w[off] = edge_weight[ids[off]]
    deg = np.bincount(struct.rows, weights=w, minlength=g.num_nodes)
    dinv = 1.0 / np.sqrt(deg)
    vals = w * dinv[struct.rows] * dinv[struct.indices]
    return struct.with_data(vals).pruned()


# ---------------------------------------------------------------------------
# Random transformations
# ---------------------------------------------------------------------------


def _pair_from_linear(idx: np.ndarray, n: int) -> np.ndarray:
    """Map linear indices over the strict upper triangle (row-major) to (i, j)."""
    idx = np.asarray(idx, dtype=np.int64)
    # row i starts at i*n - i*(i+1)/2
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(float(b) ** 2 - 8.0 * idx)) / 2).astype(np.int64)
    start = i * n - i * (i + 1) // 2
    # guard against floating rounding at row boundaries
    too_far = start > idx
    i[too_far] -= 1
    start = i * n - i * (i + 1) // 2
    nxt = (i + 1) * n - (i + 1) * (i + 2) // 2
    short = idx >= nxt
    i[short] += 1
    start = i * n - i * (i + 1) // 2
    j = idx - start + i + 1
    return np.stack([i, j], axis=1)


def _linear_from_pair(i: np.ndarray, j: np.ndarray, n: int) -> np.ndarray:
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def _sample_non_edges(g: Graph, k: int, rng: np.random.Generator, exclude=None) -> np.ndarray:
    """Draw ``k`` distinct unordered non-adjacent pairs uniformly at random."""
    n = g.num_nodes
    total = n * (n - 1) // 2
    taken = set(_linear_from_pair(g.edges[:, 0], g.edges[:, 1], n).tolist())
    if exclude is not None and len(exclude):
        ex = canonical_edges(exclude, n)
        taken.update(_linear_from_pair(ex[:, 0], ex[:, 1], n).tolist())
    if k > total - len(taken):
        raise DataError(f"cannot draw {k} non-edges: only {total - len(taken)} available")
    chosen: list[int] = []
    seen = set(taken)
    while len(chosen) < k:
        batch = rng.integers(0, total, size=max(64, 2 * (k - len(chosen))))
        for v in batch.tolist():
            if v not in seen:
                seen.add(v)
                chosen.append(v)
                if len(chosen) == k:
                    break
    if not chosen:
        return np.zeros((0, 2), dtype=np.int64)
    return _pair_from_linear(np.array(chosen, dtype=np.int64), n)


def inject_noise(g: Graph, h: float, seed) -> Graph:
    """Add each absent unordered pair as an edge independently with probability ``h``."""
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"noise probability must lie in [0, 1], got {h}")
    if h == 0.0:
        return g
    rng = np.random.default_rng(seed)
    n = g.num_nodes
    available = n * (n - 1) // 2 - g.num_edges
    k = int(rng.binomial(available, h))
    new = _sample_non_edges(g, k, rng)
    return g.with_edges(np.concatenate([g.edges, new]))


def sbm_generate(blocks, p_in: float, p_out: float, feat_dim: int, feat_noise: float, seed) -> Graph:
    """Stochastic block model with class-mean features plus isotropic Gaussian noise."""
    blocks = [int(b) for b in blocks]
    if not blocks or any(b <= 0 for b in blocks):
        raise ValueError(f"every block must be non-empty, got {blocks}")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(blocks)), blocks)
    n = len(labels)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    hit = rng.random(len(iu)) < prob
    edges = np.stack([iu[hit], ju[hit]], axis=1)
    means = rng.standard_normal((len(blocks), feat_dim))
    features = means[labels] + feat_noise * rng.standard_normal((n, feat_dim))
    return Graph(n, edges, features, labels, len(blocks))


def split_links(g: Graph, ratios=(0.85, 0.05, 0.10), seed=0) -> LinkSplit:
    """Partition edges into train/val/test and draw equally many non-edge negatives."""
    if g.num_edges < 20:
        raise DataError(f"link split needs at least 20 edges, got {g.num_edges}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    m = g.num_edges
    perm = rng.permutation(m)
    n_val = int(round(ratios[1] * m))
    n_test = int(round(ratios[2] * m))
    test = g.edges[np.sort(perm[:n_test])]
    val = g.edges[np.sort(perm[n_test : n_test + n_val])]
    train = g.edges[np.sort(perm[n_test + n_val :])]
    negs = _sample_non_edges(g, n_val + n_test, rng)
    return LinkSplit(train, val, test, negs[:n_val], negs[n_val:])


def feature_mask(x: np.ndarray, p_f: float, seed) -> np.ndarray:
    """Zero whole feature columns independently with probability ``p_f`` (no rescaling)."""
    if not 0.0 <= p_f < 1.0:
        raise ValueError(f"feature mask probability must lie in [0, 1), got {p_f}")
    rng = np.random.default_rng(seed)
    keep = rng.random(x.shape[1]) >= p_f
    return x * keep[None, :]


def drop_edges_random(g: Graph, p_e: float, seed) -> Graph:
    """Remove each undirected edge independently with probability ``p_e``."""
    if not 0.0 <= p_e < 1.0:
        raise ValueError(f"edge drop probability must lie in [0, 1), got {p_e}")
    rng = np.random.default_rng(seed)
    keep = rng.random(g.num_edges) >= p_e
    return g.with_edges(g.edges[keep])
