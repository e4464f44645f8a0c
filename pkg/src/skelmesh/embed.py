"""Graph-level representation learning and clustering.

Each skeleton graph is encoded by stacked graph convolutions; per-node
outputs of all layers concatenate into patch vectors whose pooled sum is the
graph's global vector. Training maximizes a Jensen-Shannon mutual-information
estimator over positive (own-graph) and negative (cross-graph) global-patch
pairs scored by a two-tower discriminator. A weighted-adjacency eigenvalue
spectrum serves as the baseline representation, and k-means++/hierarchical
clustering plus the label-assignment protocol complete the analysis side.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    DegenerateInputError,
    ParameterError,
    ShapeMismatchError,
    SizeError,
)
from .skelgraph import SkeletonGraph

__all__ = [
    "EmbedConfig",
    "GraphEncoder",
    "encode",
    "discriminator_score",
    "jsd_mi",
    "infograph_train",
    "InfoGraphResult",
    "graph_spectrum",
    "kmeanspp",
    "majority_label",
    "assign_nearest_center",
    "distance_matrix",
    "inter_intra",
    "hierarchical_cluster",
]

SCORE_CLAMP = 30.0  # discriminator scores clamp here before softplus


@dataclass(frozen=True)
class EmbedConfig:
    layer_widths: tuple = (32, 32, 36)   # concatenation gives the embed width
    pooling: str = "sum"
    disc_widths: tuple = (64, 64, 32)
    epochs: int = 300
    learning_rate: float = 0.01
    negatives_per_positive: int = 1
    seed: int = 0

    def __post_init__(self):
        if len(self.layer_widths) < 1 or any(w < 1 for w in self.layer_widths):
            raise ParameterError("layer widths must be positive")
        if len(self.disc_widths) != 3 or any(w < 1 for w in self.disc_widths):
            raise ParameterError("discriminator takes exactly 3 positive widths")
        if self.pooling not in ("sum", "mean"):
            raise ParameterError("pooling must be 'sum' or 'mean'")
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.negatives_per_positive < 1:
            raise ParameterError("negatives_per_positive must be >= 1")

    @property
    def embed_dim(self) -> int:
        return int(sum(self.layer_widths))


def _node_inputs(g: SkeletonGraph) -> np.ndarray:
    """Node input features: position, radius, degree."""
    degree = np.zeros(g.n_nodes)
    for i, j, _ in g.edges:
        degree[i] += 1
        degree[j] += 1
    return np.column_stack([g.positions, g.radii, degree])


def _normalized_adjacency(g: SkeletonGraph) -> np.ndarray:
    a = (g.adjacency_matrix() > 0).astype(np.float64) + np.eye(g.n_nodes)
    inv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv[:, None] * inv[None, :]


class GraphEncoder:
    """Stacked graph convolutions with layer-concatenated outputs.

    Weights are sampled deterministically from the config seed; they are
    plain Tensors so the InfoGraph trainer can optimize them in place.
    ``feature_stats``, when set (the trainer fits it on its corpus), z-scores
    the node inputs with one shared transform, so equal graphs still encode
    equally.
    """

    IN_DIM = 5  # position (3) + radius + degree

    def __init__(self, cfg: EmbedConfig = EmbedConfig()):
        self.cfg = cfg
        self.feature_stats: tuple[np.ndarray, np.ndarray] | None = None
        rng = np.random.default_rng(cfg.seed)
        dims = (self.IN_DIM, *cfg.layer_widths)
        self.weights = [
            Tensor(rng.normal(0.0, np.sqrt(2.0 / (dims[i] + dims[i + 1])),
                              size=(dims[i], dims[i + 1])), requires_grad=True)
            for i in range(len(dims) - 1)
        ]

    def parameters(self) -> list[Tensor]:
        return list(self.weights)

    def encode_tensors(self, g: SkeletonGraph) -> tuple[Tensor, Tensor]:
        """Patch matrix (n, d) and pooled global vector (1, d) on the tape."""
        if g.n_nodes < 1:
            raise ParameterError("cannot encode an empty graph")
        a_hat = Tensor(_normalized_adjacency(g))
        x = _node_inputs(g)
        if self.feature_stats is not None:
            mu, sd = self.feature_stats
            x = (x - mu) / sd
        h = Tensor(x)
        layers = []
        for w in self.weights:
            h = ad.relu(ad.matmul(ad.matmul(a_hat, h), w))
            layers.append(h)
        patch = ad.concat(layers, axis=1)
        pool = np.full((1, g.n_nodes), 1.0 / g.n_nodes if self.cfg.pooling == "mean" else 1.0)
        globalv = ad.matmul(Tensor(pool), patch)
        return patch, globalv


def encode(g: SkeletonGraph, cfg: EmbedConfig = EmbedConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Patch representations (n, d) and the global representation (d,) under
    freshly initialized encoder weights (deterministic per config seed)."""
    patch, globalv = GraphEncoder(cfg).encode_tensors(g)
    return patch.data, globalv.data.reshape(-1)


class _Discriminator:
    """Two-tower scorer: dot product of nonlinearly transformed patch and
    global vectors, three linear layers per tower with ReLU between."""

    def __init__(self, in_dim: int, widths: tuple, rng):
        def make(widths_in, widths_out):
            return Tensor(rng.normal(0.0, np.sqrt(2.0 / (widths_in + widths_out)),
                                     size=(widths_in, widths_out)), requires_grad=True)

        dims = (in_dim, *widths)
        self.towers = []
        for _ in range(2):
            layers = []
            for i in range(3):
                layers.append((make(dims[i], dims[i + 1]),
                               Tensor(np.zeros((1, dims[i + 1])), requires_grad=True)))
            self.towers.append(layers)

    def parameters(self) -> list[Tensor]:
        return [t for tower in self.towers for w, b in tower for t in (w, b)]

    def _tower(self, x: Tensor, which: int) -> Tensor:
        for depth, (w, b) in enumerate(self.towers[which]):
            x = ad.add(ad.matmul(x, w), b)
            if depth < 2:
                x = ad.relu(x)
        return x

    def score(self, h: Tensor, g: Tensor) -> Tensor:
        """Row-wise scores for matched (patch, global) batches."""
        return ad.row_sum(ad.mul(self._tower(h, 0), self._tower(g, 1)))


def discriminator_score(h, g, disc: _Discriminator | None = None,
                        widths: tuple = (64, 64, 32), seed: int = 0) -> np.ndarray:
    """Score global-patch pairs; rows of ``h`` pair with rows of ``g``."""
    ht, gt = ad.as_tensor(h), ad.as_tensor(g)
    if ht.data.ndim != 2 or ht.data.shape != gt.data.shape:
        raise ShapeMismatchError("patch and global batches must be equal-shaped 2-d")
    if disc is None:
        disc = _Discriminator(ht.data.shape[1], widths, np.random.default_rng(seed))
    return disc.score(ht, gt).data


def jsd_mi(positive_scores, negative_scores) -> Tensor:
    """Jensen-Shannon mutual-information estimate from discriminator scores.

    mean(-sp(-s)) over positives minus the same expression over negatives,
    sp(z) = log(1 + e^z): zero when the two score samples are identically
    distributed, growing as positives score above negatives.
    """
    pos = ad.as_tensor(positive_scores)
    neg = ad.as_tensor(negative_scores)
    if pos.data.size == 0 or neg.data.size == 0:
        raise DegenerateInputError("need at least one positive and one negative score")

    def expect(t: Tensor) -> Tensor:
        clamped = ad.clamp(t, -SCORE_CLAMP, SCORE_CLAMP)
        return ad.mul(ad.mean(ad.softplus(ad.mul(clamped, -1.0))), -1.0)

    return ad.sub(expect(pos), expect(neg))


@dataclass
class InfoGraphResult:
    embeddings: np.ndarray        # (k, d) final global representations
    objective_trace: np.ndarray   # (epochs,) MI objective per epoch
    encoder: GraphEncoder


def infograph_train(graphs: list[SkeletonGraph],
                    cfg: EmbedConfig = EmbedConfig()) -> InfoGraphResult:
    """Learn graph embeddings by maximizing mutual information.

    Positive pairs couple each node's patch vector with its own graph's
    global vector; negatives pair it with another graph's global vector,
    drawn uniformly. The per-graph estimates average into the objective,
    maximized by Adam. Deterministic per config seed.
    """
    if len(graphs) < 2:
        raise DegenerateInputError("negative pairs require at least 2 graphs")
    rng = np.random.default_rng(cfg.seed)
    encoder = GraphEncoder(cfg)
    stacked = np.vstack([_node_inputs(g) for g in graphs])
    sd = stacked.std(axis=0)
    sd[sd == 0] = 1.0
    encoder.feature_stats = (stacked.mean(axis=0), sd)
    disc = _Discriminator(cfg.embed_dim, cfg.disc_widths, rng)
    opt = ad.Adam(encoder.parameters() + disc.parameters(), lr=cfg.learning_rate)

    sizes = [g.n_nodes for g in graphs]
    offsets = np.cumsum([0] + sizes)
    total = int(offsets[-1])
    # negatives: per graph, matched count of patch rows from other graphs
    neg_idx_per_graph = []
    for gi, n in enumerate(sizes):
        pool = np.concatenate(
            [np.arange(offsets[j], offsets[j + 1]) for j in range(len(graphs)) if j != gi]
        )
        neg_idx_per_graph.append(rng.choice(pool, size=n * cfg.negatives_per_positive))

    trace = np.empty(cfg.epochs)
    k = len(graphs)
    for epoch in range(cfg.epochs):
        patches, globals_ = [], []
        for g in graphs:
            p, gv = encoder.encode_tensors(g)
            patches.append(p)
            globals_.append(gv)
        all_patch = ad.concat(patches, axis=0)
        mi = None
        for gi, n in enumerate(sizes):
            own = ad.gather(globals_[gi], np.zeros(n, dtype=np.int64))
            pos_scores = disc.score(patches[gi], own)
            neg_rows = ad.gather(all_patch, neg_idx_per_graph[gi])
            own_neg = ad.gather(
                globals_[gi], np.zeros(len(neg_idx_per_graph[gi]), dtype=np.int64))
            neg_scores = disc.score(neg_rows, own_neg)
            term = jsd_mi(pos_scores, neg_scores)
            mi = term if mi is None else ad.add(mi, term)
        mi = ad.mul(mi, 1.0 / k)
        trace[epoch] = mi.item()
        loss = ad.mul(mi, -1.0)
        opt.zero_grad()
        loss.backward()
        opt.step()

    embeddings = np.vstack([
        encoder.encode_tensors(g)[1].data.reshape(1, -1) for g in graphs
    ])
    return InfoGraphResult(embeddings, trace, encoder)


def graph_spectrum(g: SkeletonGraph, d: int) -> np.ndarray:
    """Eigenvalues of the weighted adjacency, sorted descending, padded or
    truncated to length ``d``. Invariant under node relabeling."""
    if d < 1:
        raise ParameterError("d must be >= 1")
    values = np.linalg.eigvalsh(g.adjacency_matrix())[::-1]
    out = np.zeros(d)
    take = min(d, values.size)
    out[:take] = values[:take]
    return out


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------

def kmeanspp(vectors: np.ndarray, k: int, seed: int = 0,
             max_iters: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """k-means++ seeding followed by Lloyd iterations.

    Deterministic per seed. Assignment ties go to the lower center index.
    Identical points make any assignment valid (inertia 0); empty clusters
    keep their previous center.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError("vectors must be 2-d")
    n = x.shape[0]
    if k > n:
        raise SizeError(f"k={k} exceeds {n} vectors")
    if k < 1:
        raise ParameterError("k must be >= 1")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c] = x[rng.integers(n)]
        else:
            centers[c] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(axis=1))
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iters):
        dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist.argmin(axis=1)
        for c in range(k):
            sel = new_assign == c
            if sel.any():
                centers[c] = x[sel].mean(axis=0)
        if (new_assign == assign).all():
            assign = new_assign
            break
        assign = new_assign
    return assign, centers


def majority_label(assignments: np.ndarray, labels: np.ndarray) -> dict[int, object]:
    """Map each cluster to the modal ground-truth label.

    Ties break toward the smallest label; empty clusters are skipped with a
    warning and do not appear in the map.
    """
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    if assignments.shape != labels.shape:
        raise ShapeMismatchError("assignments and labels must align")
    out: dict[int, object] = {}
    for c in np.unique(assignments):
        sel = labels[assignments == c]
        if sel.size == 0:
            warnings.warn(f"cluster {c} is empty; skipped")
            continue
        values, counts = np.unique(sel, return_counts=True)
        out[int(c)] = values[counts.argmax()]  # unique() sorts: ties -> smallest
    return out


def assign_nearest_center(v: np.ndarray, centers: np.ndarray) -> int:
    """Index of the Euclidean-nearest center; ties go to the lower index."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.size == 0:
        raise SizeError("no centers to assign to")
    d = np.linalg.norm(centers - np.asarray(v, dtype=np.float64), axis=1)
    return int(d.argmin())


def distance_matrix(reps: np.ndarray) -> np.ndarray:
    """Symmetric pairwise Euclidean distances with a zero diagonal."""
    x = np.asarray(reps, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise SizeError("need at least 2 representations")
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(d, 0.0)
    return (d + d.T) / 2.0


def inter_intra(dist: np.ndarray, labels: np.ndarray) -> tuple[list, np.ndarray]:
    """Class-by-class mean distances.

    Off-diagonal (a, b): mean distance over all cross pairs. Diagonal (a, a):
    mean over distinct same-class pairs; NaN (absent) for singleton classes.
    Returns (sorted class list, matrix).
    """
    dist = np.asarray(dist, dtype=np.float64)
    labels = np.asarray(labels)
    if dist.shape[0] != dist.shape[1] or dist.shape[0] != labels.shape[0]:
        raise ShapeMismatchError("distance matrix and labels must align")
    classes = sorted(np.unique(labels).tolist())
    out = np.empty((len(classes), len(classes)))
    for a, ca in enumerate(classes):
        ia = np.flatnonzero(labels == ca)
        for b, cb in enumerate(classes):
            ib = np.flatnonzero(labels == cb)
            block = dist[np.ix_(ia, ib)]
            if a == b:
                if len(ia) < 2:
                    out[a, b] = np.nan
                else:
                    iu, ju = np.triu_indices(len(ia), k=1)
                    out[a, b] = block[iu, ju].mean()
            else:
                out[a, b] = block.mean()
    return classes, out


def hierarchical_cluster(dist: np.ndarray, linkage: str = "average") -> list[tuple]:
    """Agglomerative clustering on a distance matrix.

    Returns n-1 merges as (step, id_a, id_b, height) where new clusters take
    ids n, n+1, ... in merge order. Heights are non-decreasing for the
    supported linkages (single, average, complete).
    """
    if linkage not in ("single", "average", "complete"):
        raise ParameterError(f"unknown linkage {linkage!r}")
    d = np.asarray(dist, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ParameterError("distance matrix must be square")
    if not np.allclose(d, d.T, atol=1e-9):
        raise ParameterError("distance matrix must be symmetric")
    if not np.allclose(np.diagonal(d), 0.0, atol=1e-9):
        raise ParameterError("distance matrix must have a zero diagonal")
    n = d.shape[0]
    merges: list[tuple] = []
    if n < 2:
        return merges
    active: dict[int, int] = {i: 1 for i in range(n)}  # cluster id -> size
    cur = {i: i for i in range(n)}  # row index -> cluster id
    work = d.copy()
    alive = list(range(n))
    next_id = n
    for step in range(n - 1):
        best = None
        for ai in range(len(alive)):
            for bi in range(ai + 1, len(alive)):
                i, j = alive[ai], alive[bi]
                h = work[i, j]
                key = (h, min(cur[i], cur[j]), max(cur[i], cur[j]))
                if best is None or key < best[0]:
                    best = (key, i, j)
        (h, ida, idb), i, j = best
        merges.append((step, ida, idb, float(h)))
        size_i, size_j = active[cur[i]], active[cur[j]]
        for kk in alive:
            if kk in (i, j):
                continue
            if linkage == "single":
                new = min(work[i, kk], work[j, kk])
            elif linkage == "complete":
                new = max(work[i, kk], work[j, kk])
            else:
                new = (size_i * work[i, kk] + size_j * work[j, kk]) / (size_i + size_j)
            work[i, kk] = work[kk, i] = new
        active[next_id] = size_i + size_j
        cur[i] = next_id
        next_id += 1
        alive.remove(j)
    return merges
