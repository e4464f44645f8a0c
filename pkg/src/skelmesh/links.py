"""Connect skeleton balls into a skeleton mesh.

Two geometric priors seed the adjacency: overlapping balls are connected,
far-apart balls are disconnected, and everything else is left unknown. A
small graph auto-encoder (two graph-convolution layers, inner-product
decoder) is trained on the trusted entries with a masked balanced
cross-entropy loss and fills in the unknowns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    DegenerateInputError,
    EmptyInputError,
    ParameterError,
    ParseError,
    ShapeMismatchError,
    SizeError,
)
from .geometry import PointCloud
from .skeleton import Skeleton

__all__ = [
    "AdjacencyInit",
    "LinkPrediction",
    "init_adjacency",
    "node_features",
    "mbce_loss",
    "gae_train",
    "threshold_links",
    "save_mesh",
    "load_mesh",
]


@dataclass(frozen=True)
class AdjacencyInit:
    """Prior adjacency knowledge: trusted edges and the trust mask.

    ``known_edges[i, j]`` is meaningful only where ``known_mask[i, j]`` is
    true; masked-off entries are unknown and left to the link predictor.
    """

    known_edges: np.ndarray  # (n, n) bool, symmetric, empty diagonal
    known_mask: np.ndarray   # (n, n) bool, symmetric, empty diagonal

    def __post_init__(self):
        e, m = np.asarray(self.known_edges, bool), np.asarray(self.known_mask, bool)
        if e.shape != m.shape or e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ShapeMismatchError("adjacency matrices must be square and equal-shaped")
        if not ((e == e.T).all() and (m == m.T).all()):
            raise ParameterError("adjacency matrices must be symmetric")
        if e.diagonal().any() or m.diagonal().any():
            raise ParameterError("diagonal entries must be empty")
        if (e & ~m).any():
            raise ParameterError("known edges must lie inside the known mask")
        object.__setattr__(self, "known_edges", e)
        object.__setattr__(self, "known_mask", m)

    @property
    def n(self) -> int:
        return self.known_edges.shape[0]


@dataclass(frozen=True)
class LinkPrediction:
    """Symmetric link probabilities; the diagonal is meaningless."""

    probabilities: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ShapeMismatchError("probabilities must be square")
        if not np.allclose(p, p.T, atol=1e-9):
            raise ParameterError("probabilities must be symmetric")
        if p.min() < -1e-9 or p.max() > 1 + 1e-9:
            raise ParameterError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "probabilities", p)


def init_adjacency(skel: Skeleton, k: int = 2, far_factor: float = 3.0) -> AdjacencyInit:
    """Label ball pairs from two geometric priors.

    Pairs farther apart than ``far_factor`` times the radius sum are trusted
    non-edges. Among the remaining pairs, overlapping balls and mutual
    k-nearest neighbors are trusted edges; everything else stays unknown.
    """
    n = len(skel)
    if n < 2:
        raise SizeError("need at least 2 balls to connect")
    if k < 1:
        raise ParameterError("k must be >= 1")
    c, r = skel.centers, skel.radii
    dist = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
    rsum = r[:, None] + r[None, :]
    far = dist > far_factor * rsum
    overlap = dist <= rsum
    k_eff = min(k, n - 1)
    neigh = _kernels.knn(c, k_eff)
    is_neigh = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k_eff)
    is_neigh[rows, neigh.ravel()] = True
    mutual = is_neigh & is_neigh.T
    known_edges = (overlap | mutual) & ~far
    known_mask = known_edges | far
    np.fill_diagonal(known_edges, False)
    np.fill_diagonal(known_mask, False)
    return AdjacencyInit(known_edges, known_mask)


def node_features(skel: Skeleton, init: AdjacencyInit,
                  cloud: PointCloud | None = None,
                  weights: np.ndarray | None = None) -> np.ndarray:
    """Per-ball feature rows: [center xyz, radius, prior degree,
    mean spoke length, supporting surface-point count].

    Spoke length and support count come from assigning each surface point to
    its nearest ball (or, when a weight matrix is given, to its largest
    weight); balls with no assigned points fall back to their radius and 0.
    """
    n = len(skel)
    if init.n != n:
        raise ShapeMismatchError("adjacency size does not match ball count")
    degree = init.known_edges.sum(axis=1).astype(np.float64)
    spoke = skel.radii.copy()
    support = np.zeros(n)
    if cloud is not None and len(cloud) > 0:
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)
            if w.shape != (len(cloud), n):
                raise ShapeMismatchError("weight matrix shape mismatch")
            assign = w.argmax(axis=1)
        else:
            assign, _ = _kernels.nearest(cloud.points, skel.centers)
        d = np.linalg.norm(cloud.points - skel.centers[assign], axis=1)
        for b in range(n):
            sel = assign == b
            support[b] = sel.sum()
            if sel.any():
                spoke[b] = d[sel].mean()
    return np.column_stack([skel.centers, skel.radii, degree, spoke, support])


def mbce_loss(scores, labels: np.ndarray) -> Tensor:
    """Masked balanced cross-entropy on logit scores of trusted entries.

    Positive and negative entries contribute through their own means, so the
    two classes weigh equally regardless of their counts. A perfect
    predictor's loss tends to zero as score magnitudes grow.
    """
    s = ad.as_tensor(scores)
    y = np.asarray(labels, dtype=bool)
    if s.data.shape != y.shape or y.ndim != 1:
        raise ShapeMismatchError("scores and labels must be equal-length vectors")
    if y.size == 0:
        raise DegenerateInputError("no trusted entries to train on")
    pos = np.flatnonzero(y)
    neg = np.flatnonzero(~y)
    parts = []
    if pos.size:
        parts.append(ad.mean(ad.softplus(ad.mul(ad.gather(s, pos), -1.0))))
    if neg.size:
        parts.append(ad.mean(ad.softplus(ad.gather(s, neg))))
    total = parts[0]
    for p in parts[1:]:
        total = ad.add(total, p)
    return total


def _normalized_adjacency(edges: np.ndarray) -> np.ndarray:
    """Symmetric normalization with self-loops: D^-1/2 (A + I) D^-1/2."""
    a = edges.astype(np.float64) + np.eye(edges.shape[0])
    d = a.sum(axis=1)
    inv = 1.0 / np.sqrt(d)
    return a * inv[:, None] * inv[None, :]


def gae_train(features: np.ndarray, init: AdjacencyInit,
              epochs: int = 200, hidden: tuple[int, int] = (16, 8),
              learning_rate: float = 0.01, seed: int = 0,
              return_trace: bool = False):
    """Train the link predictor and score every pair.

    Two graph-convolution layers over the trusted-edge adjacency produce node
    embeddings; sigmoid of their pairwise dot products gives the probability
    matrix. Only masked (trusted) entries contribute to the loss.
    """
    if epochs < 1:
        raise ParameterError("epochs must be >= 1")
    x = np.asarray(features, dtype=np.float64)
    n = init.n
    if x.ndim != 2 or x.shape[0] != n:
        raise ShapeMismatchError("features must have one row per ball")
    iu, ju = np.triu_indices(n, k=1)
    trusted = init.known_mask[iu, ju]
    if not trusted.any():
        raise DegenerateInputError("no trusted entries to train on")
    ei, ej = iu[trusted], ju[trusted]
    labels = init.known_edges[ei, ej]

    # z-score features for conditioning; constant columns stay zero
    mu, sd = x.mean(axis=0), x.std(axis=0)
    sd[sd == 0] = 1.0
    x_std = (x - mu) / sd

    rng = np.random.default_rng(seed)
    a_hat = Tensor(_normalized_adjacency(init.known_edges))
    x_in = Tensor(x_std)
    dims = (x.shape[1], *hidden)
    params = [
        Tensor(rng.normal(0.0, np.sqrt(2.0 / (dims[i] + dims[i + 1])),
                          size=(dims[i], dims[i + 1])), requires_grad=True)
        for i in range(len(dims) - 1)
    ]
    opt = ad.Adam(params, lr=learning_rate)
    trace = np.empty(epochs)
    z = None
    for epoch in range(epochs):
        h = ad.relu(ad.matmul(ad.matmul(a_hat, x_in), params[0]))
        z = ad.matmul(ad.matmul(a_hat, h), params[1])
        scores = ad.row_sum(ad.mul(ad.gather(z, ei), ad.gather(z, ej)))
        loss = mbce_loss(scores, labels)
        trace[epoch] = loss.item()
        opt.zero_grad()
        loss.backward()
        opt.step()
    zd = z.data
    logits = zd @ zd.T
    probs = 1.0 / (1.0 + np.exp(-np.clip(logits, -500, 500)))
    np.fill_diagonal(probs, 0.0)
    pred = LinkPrediction((probs + probs.T) / 2.0)
    if return_trace:
        return pred, trace
    return pred


def threshold_links(pred: LinkPrediction, init: AdjacencyInit,
                    threshold: float = 0.5, ensure_connected: bool = True,
                    centers: np.ndarray | None = None) -> np.ndarray:
    """Binarize link probabilities into a symmetric adjacency matrix.

    Trusted edges are always kept; unknown entries become edges when their
    probability reaches the threshold. With ``ensure_connected``, remaining
    components are joined by the minimum-total-length set of center-distance
    edges (a spanning tree over components); ``centers`` supplies the
    distances and is required only when that rule fires.
    """
    if not 0.0 < threshold < 1.0:
        raise ParameterError("threshold must lie strictly inside (0, 1)")
    n = init.n
    if pred.probabilities.shape[0] != n:
        raise ShapeMismatchError("prediction size does not match adjacency size")
    adj = init.known_edges.copy()
    unknown = ~init.known_mask
    np.fill_diagonal(unknown, False)
    adj |= unknown & (pred.probabilities >= threshold)
    adj = adj | adj.T
    if ensure_connected and n > 1:
        comp = _components(adj)
        if comp.max() > 0:
            if centers is None:
                raise ParameterError("ensure_connected requires ball centers")
            centers = np.asarray(centers, dtype=np.float64)
            dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
            # Kruskal over cross-component candidate pairs
            iu, ju = np.triu_indices(n, k=1)
            cross = comp[iu] != comp[ju]
            order = np.argsort(dist[iu[cross], ju[cross]], kind="stable")
            ci, cj = iu[cross][order], ju[cross][order]
            group = comp.copy()
            for a, b in zip(ci, cj):
                ga, gb = group[a], group[b]
                if ga != gb:
                    adj[a, b] = adj[b, a] = True
                    group[group == gb] = ga
    return adj


def _components(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    comp = np.full(n, -1, dtype=np.int64)
    cid = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = cid
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adj[u]):
                if comp[v] < 0:
                    comp[v] = cid
                    stack.append(v)
        cid += 1
    return comp


def save_mesh(skel: Skeleton, adjacency: np.ndarray, path) -> None:
    """Write 'n_balls n_edges', ball lines 'x y z r', then edge lines 'i j'."""
    adjacency = np.asarray(adjacency, dtype=bool)
    iu, ju = np.triu_indices(len(skel), k=1)
    edges = [(int(i), int(j)) for i, j in zip(iu, ju) if adjacency[i, j]]
    with open(path, "w") as fh:
        fh.write(f"{len(skel)} {len(edges)}\n")
        for c, r in zip(skel.centers, skel.radii):
            fh.write(f"{c[0]!r} {c[1]!r} {c[2]!r} {r!r}\n")
        for i, j in edges:
            fh.write(f"{i} {j}\n")


def load_mesh(path) -> tuple[Skeleton, np.ndarray]:
    """Read the mesh format written by :func:`save_mesh`."""
    with open(path) as fh:
        lines = [(no, raw.strip()) for no, raw in enumerate(fh, start=1)
                 if raw.strip() and not raw.lstrip().startswith("#")]
    if not lines:
        raise EmptyInputError(f"{path} is empty")
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise ParseError("expected 'n_balls n_edges' header", line=lineno)
    try:
        n_balls, n_edges = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError("bad counts in header", line=lineno) from None
    if len(lines) != 1 + n_balls + n_edges:
        raise ParseError(f"expected {1 + n_balls + n_edges} lines, found {len(lines)}")
    centers, radii = [], []
    for lineno, raw in lines[1 : 1 + n_balls]:
        parts = raw.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", line=lineno)
        vals = [float(v) for v in parts]
        centers.append(vals[:3])
        radii.append(vals[3])
    adj = np.zeros((n_balls, n_balls), dtype=bool)
    for lineno, raw in lines[1 + n_balls :]:
        parts = raw.split()
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", line=lineno)
        i, j = int(parts[0]), int(parts[1])
        if not (0 <= i < n_balls and 0 <= j < n_balls) or i == j:
            raise ParseError(f"bad edge ({i}, {j})", line=lineno)
        adj[i, j] = adj[j, i] = True
    return Skeleton(np.asarray(centers), np.asarray(radii)), adj
