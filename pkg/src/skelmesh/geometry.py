"""Point-cloud primitives.

Loading and saving, density-aware subsampling, normal estimation, unit-cube
normalization, set distances (Chamfer, Hausdorff), and synthetic test shapes
with analytic normals. All operations are pure functions; randomness enters
only through explicit integer seeds.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import (
    DegenerateInputError,
    EmptyInputError,
    ParameterError,
    ParseError,
    SizeError,
)

__all__ = [
    "PointCloud",
    "NormalizationTransform",
    "ShapeSpec",
    "load_point_cloud",
    "save_point_cloud",
    "weighted_sample",
    "estimate_normals",
    "normalize_to_unit_cube",
    "chamfer_distance",
    "hausdorff_distance",
    "farthest_point_indices",
    "synth_shape",
]


@dataclass(frozen=True)
class PointCloud:
    """Surface samples with optional unit normals.

    points : (m, 3) float64
    normals : (m, 3) float64 or None, rows unit length within 1e-6
    """

    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ParameterError("points must be an (m, 3) array")
        if not np.isfinite(pts).all():
            raise ParameterError("points must be finite")
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            nrm = np.ascontiguousarray(self.normals, dtype=np.float64)
            if nrm.shape != pts.shape:
                raise ParameterError("normals must match points in shape")
            lengths = np.linalg.norm(nrm, axis=1)
            if not np.allclose(lengths, 1.0, atol=1e-6):
                raise ParameterError("normals must be unit length within 1e-6")
            object.__setattr__(self, "normals", nrm)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def has_normals(self) -> bool:
        return self.normals is not None


@dataclass(frozen=True)
class NormalizationTransform:
    """Maps a cloud into the unit cube: p -> (p + translation) / scale."""

    translation: np.ndarray  # (3,)
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ParameterError("scale must be positive")
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3)
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) + self.translation) / self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale - self.translation


@dataclass(frozen=True)
class ShapeSpec:
    """Synthetic shape request: kind, per-kind dimensions, sample count."""

    kind: str
    count: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.count <= 0:
            raise ParameterError("count must be positive")
        for name, value in self.params.items():
            if not (isinstance(value, (int, float)) and value > 0):
                raise ParameterError(f"shape parameter {name!r} must be > 0")


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _parse_floats(parts, n, lineno):
    try:
        return [float(p) for p in parts[:n]]
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno) from None


def _load_xyz(lines):
    pts, nrm = [], []
    for lineno, raw in lines:
        parts = raw.split()
        if len(parts) == 3:
            pts.append(_parse_floats(parts, 3, lineno))
        elif len(parts) == 6:
            vals = _parse_floats(parts, 6, lineno)
            pts.append(vals[:3])
            nrm.append(vals[3:])
        else:
            raise ParseError(f"expected 3 or 6 fields, got {len(parts)}", line=lineno)
    if nrm and len(nrm) != len(pts):
        raise ParseError("mixed lines with and without normals")
    return pts, nrm


def _load_off(lines):
    it = iter(lines)
    try:
        lineno, header = next(it)
    except StopIteration:
        raise EmptyInputError("empty OFF file") from None
    counts_line = None
    if header.strip() != "OFF":
        if header.strip().startswith("OFF"):  # counts on the header line
            counts_line = (lineno, header.strip()[3:])
        else:
            raise ParseError("missing OFF header", line=lineno)
    if counts_line is None:
        try:
            counts_line = next(it)
        except StopIteration:
            raise ParseError("missing OFF element counts", line=lineno) from None
    lineno, counts = counts_line
    parts = counts.split()
    if len(parts) < 2:
        raise ParseError("expected vertex and face counts", line=lineno)
    try:
        n_vert = int(parts[0])
    except ValueError:
        raise ParseError("bad vertex count", line=lineno) from None
    pts = []
    for _ in range(n_vert):
        try:
            lineno, raw = next(it)
        except StopIteration:
            raise ParseError("unexpected end of OFF vertex list", line=lineno) from None
        parts = raw.split()
        if len(parts) < 3:
            raise ParseError(f"expected 3 coordinates, got {len(parts)}", line=lineno)
        pts.append(_parse_floats(parts, 3, lineno))
    return pts, []


def _load_ply_ascii(lines):
    it = iter(lines)
    try:
        lineno, magic = next(it)
    except StopIteration:
        raise EmptyInputError("empty PLY file") from None
    if magic.strip() != "ply":
        raise ParseError("missing ply magic line", line=lineno)
    n_vert = None
    props: list[str] = []
    in_vertex = False
    for lineno, raw in it:
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise ParseError("only ascii PLY is supported", line=lineno)
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                n_vert = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            props.append(parts[-1])
        elif parts[0] == "end_header":
            break
    else:
        raise ParseError("missing end_header", line=lineno)
    if n_vert is None:
        raise ParseError("no vertex element declared", line=lineno)
    for name in ("x", "y", "z"):
        if name not in props:
            raise ParseError(f"vertex element lacks property {name!r}", line=lineno)
    col = {name: props.index(name) for name in props}
    has_normals = all(name in props for name in ("nx", "ny", "nz"))
    pts, nrm = [], []
    for _ in range(n_vert):
        try:
            lineno, raw = next(it)
        except StopIteration:
            raise ParseError("unexpected end of PLY vertex list", line=lineno) from None
        parts = raw.split()
        if len(parts) < len(props):
            raise ParseError(f"expected {len(props)} fields, got {len(parts)}", line=lineno)
        vals = _parse_floats(parts, len(props), lineno)
        pts.append([vals[col["x"]], vals[col["y"]], vals[col["z"]]])
        if has_normals:
            nrm.append([vals[col["nx"]], vals[col["ny"]], vals[col["nz"]]])
    return pts, nrm


_LOADERS = {"xyz": _load_xyz, "off": _load_off, "ply_ascii": _load_ply_ascii}


def load_point_cloud(path, fmt: str | None = None) -> PointCloud:
    """Read a point cloud from an xyz, ascii PLY, or OFF file.

    ``fmt`` is one of "xyz", "ply_ascii", "off"; inferred from the file
    extension when omitted. Normals are populated when the file carries them.
    """
    path = Path(path)
    if fmt is None:
        fmt = {".xyz": "xyz", ".ply": "ply_ascii", ".off": "off"}.get(path.suffix.lower())
        if fmt is None:
            raise ParameterError(f"cannot infer format from {path.suffix!r}")
    if fmt not in _LOADERS:
        raise ParameterError(f"unknown format {fmt!r}")
    with open(path) as fh:
        lines = [
            (lineno, raw)
            for lineno, raw in enumerate(fh, start=1)
            if raw.strip() and not raw.lstrip().startswith("#")
        ]
    if not lines:
        raise EmptyInputError(f"{path} contains no data")
    pts, nrm = _LOADERS[fmt](lines)
    if not pts:
        raise EmptyInputError(f"{path} contains no points")
    normals = np.asarray(nrm) if nrm else None
    if normals is not None:
        lengths = np.linalg.norm(normals, axis=1, keepdims=True)
        if np.any(lengths == 0):
            raise ParseError("zero-length normal in file")
        normals = normals / lengths
    return PointCloud(np.asarray(pts), normals)


def save_point_cloud(cloud: PointCloud, path) -> None:
    """Write a cloud as xyz text (6 columns when normals are present)."""
    with open(path, "w") as fh:
        if cloud.has_normals:
            for p, n in zip(cloud.points, cloud.normals):
                fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r} {n[0]!r} {n[1]!r} {n[2]!r}\n")
        else:
            for p in cloud.points:
                fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n")


# ---------------------------------------------------------------------------
# sampling and normals
# ---------------------------------------------------------------------------

def weighted_sample(cloud: PointCloud, m: int, seed: int, k: int = 8) -> PointCloud:
    """Draw ``m`` points favoring spatial uniformity.

    Each point starts with weight equal to its mean distance to its ``k``
    nearest neighbors. Points are then drawn one at a time with probability
    proportional to weight, and after every draw each remaining weight is
    capped by the distance to the nearest already-drawn point, which
    suppresses picks next to previous ones. Deterministic for a fixed seed.
    """
    n = len(cloud)
    if m == 0:
        raise ParameterError("requested an empty sample")
    if m > n:
        raise SizeError(f"requested {m} points from a cloud of {n}")
    rng = np.random.default_rng(seed)
    if n == 1:
        return cloud
    k_eff = min(k, n - 1)
    neigh = _kernels.knn(cloud.points, k_eff)
    diffs = cloud.points[neigh] - cloud.points[:, None, :]
    weights = np.linalg.norm(diffs, axis=2).mean(axis=1)
    chosen = np.empty(m, dtype=np.int64)
    w = weights.copy()
    alive = np.ones(n, dtype=bool)
    for t in range(m):
        active = w[alive]
        total = active.sum()
        alive_idx = np.flatnonzero(alive)
        if total <= 0:
            pick = alive_idx[rng.integers(len(alive_idx))]
        else:
            pick = rng.choice(alive_idx, p=active / total)
        chosen[t] = pick
        alive[pick] = False
        d = np.linalg.norm(cloud.points - cloud.points[pick], axis=1)
        np.minimum(w, d, out=w)
    pts = cloud.points[chosen]
    nrm = cloud.normals[chosen] if cloud.has_normals else None
    return PointCloud(pts, nrm)


def estimate_normals(cloud: PointCloud, k: int = 16) -> PointCloud:
    """Attach unit normals from local covariance analysis.

    Each normal is the eigenvector of the smallest eigenvalue of the
    covariance of the point's k-nearest neighborhood. Signs are made
    consistent by flip propagation over a minimum spanning tree of the
    neighbor graph, then globally flipped so that most normals point away
    from the centroid (outward for star-convex shapes).
    """
    if k < 3:
        raise ParameterError("k must be >= 3")
    n = len(cloud)
    if n < k:
        raise SizeError(f"need at least {k} points, got {n}")
    pts = cloud.points
    k_eff = min(k, n - 1)
    neigh = _kernels.knn(pts, k_eff)
    hood = np.concatenate([pts[:, None, :], pts[neigh]], axis=1)
    centered = hood - hood.mean(axis=1, keepdims=True)
    cov = np.einsum("nij,nik->njk", centered, centered) / hood.shape[1]
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]  # eigenvector of the smallest eigenvalue
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)

    # orientation: MST flip propagation over the kNN graph
    adj: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in neigh[i]:
            adj[i].append(int(j))
            adj[int(j)].append(i)
    visited = np.zeros(n, dtype=bool)
    order = np.argsort(-pts[:, 2], kind="stable")  # roots: highest z first
    for root in order:
        root = int(root)
        if visited[root]:
            continue
        visited[root] = True
        if normals[root, 2] < 0:
            normals[root] = -normals[root]
        heap = []
        for j in adj[root]:
            heapq.heappush(heap, (1.0 - abs(normals[root] @ normals[j]), root, j))
        while heap:
            _, parent, child = heapq.heappop(heap)
            if visited[child]:
                continue
            visited[child] = True
            if normals[parent] @ normals[child] < 0:
                normals[child] = -normals[child]
            for j in adj[child]:
                if not visited[j]:
                    heapq.heappush(heap, (1.0 - abs(normals[child] @ normals[j]), child, j))

    outward = np.einsum("ij,ij->i", normals, pts - pts.mean(axis=0))
    if np.count_nonzero(outward >= 0) < n / 2:
        normals = -normals
    return PointCloud(pts, normals)


def normalize_to_unit_cube(cloud: PointCloud) -> tuple[PointCloud, NormalizationTransform]:
    """Center the bounding box at the origin and scale isotropically so the
    largest absolute coordinate is exactly 1."""
    if len(cloud) == 0:
        raise EmptyInputError("cannot normalize an empty cloud")
    lo = cloud.points.min(axis=0)
    hi = cloud.points.max(axis=0)
    center = (lo + hi) / 2.0
    centered = cloud.points - center
    scale = float(np.abs(centered).max())
    if scale == 0.0:
        raise DegenerateInputError("all points are identical")
    transform = NormalizationTransform(translation=-center, scale=scale)
    return PointCloud(centered / scale, cloud.normals), transform


# ---------------------------------------------------------------------------
# set distances
# ---------------------------------------------------------------------------

def chamfer_distance(a: PointCloud | np.ndarray, b: PointCloud | np.ndarray,
                     normalized: bool = False) -> float:
    """Bidirectional sum of nearest-neighbor distances between two sets.

    With ``normalized=True`` each directed sum is divided by its set size
    (the variant used for reported metrics).
    """
    pa = a.points if isinstance(a, PointCloud) else np.asarray(a, dtype=np.float64)
    pb = b.points if isinstance(b, PointCloud) else np.asarray(b, dtype=np.float64)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyInputError("chamfer distance of an empty set")
    _, dab = _kernels.nearest(pa, pb)
    _, dba = _kernels.nearest(pb, pa)
    if normalized:
        return float(dab.mean() + dba.mean())
    return float(dab.sum() + dba.sum())


def hausdorff_distance(a: PointCloud | np.ndarray, b: PointCloud | np.ndarray) -> float:
    """Max over both directions of the farthest nearest-neighbor distance."""
    pa = a.points if isinstance(a, PointCloud) else np.asarray(a, dtype=np.float64)
    pb = b.points if isinstance(b, PointCloud) else np.asarray(b, dtype=np.float64)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyInputError("hausdorff distance of an empty set")
    _, dab = _kernels.nearest(pa, pb)
    _, dba = _kernels.nearest(pb, pa)
    return float(max(dab.max(), dba.max()))


def farthest_point_indices(points: np.ndarray, n: int, start: int | None = None) -> np.ndarray:
    """Greedy farthest-point sample of ``n`` indices; deterministic.

    The first pick is the point farthest from the centroid unless ``start``
    is given.
    """
    pts = np.asarray(points, dtype=np.float64)
    m = pts.shape[0]
    if not 1 <= n <= m:
        raise SizeError(f"requested {n} of {m} points")
    if start is None:
        start = int(np.argmax(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
    chosen = np.empty(n, dtype=np.int64)
    chosen[0] = start
    dist = np.linalg.norm(pts - pts[start], axis=1)
    for t in range(1, n):
        nxt = int(np.argmax(dist))
        chosen[t] = nxt
        np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1), out=dist)
    return chosen


# ---------------------------------------------------------------------------
# synthetic shapes
# ---------------------------------------------------------------------------

def _unit_directions(rng, n):
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def _sphere(rng, n, radius):
    dirs = _unit_directions(rng, n)
    return dirs * radius, dirs


def _capsule_points(rng, n, radius, length):
    """Capsule: cylinder of given length along z plus hemispherical caps."""
    side = 2 * math.pi * radius * length
    caps = 4 * math.pi * radius * radius
    u = rng.random(n)
    on_side = u < side / (side + caps)
    n_side = int(on_side.sum())
    pts = np.empty((n, 3))
    nrm = np.empty((n, 3))
    theta = rng.random(n_side) * 2 * math.pi
    z = (rng.random(n_side) - 0.5) * length
    pts[on_side] = np.column_stack(
        [radius * np.cos(theta), radius * np.sin(theta), z]
    )
    nrm[on_side] = np.column_stack([np.cos(theta), np.sin(theta), np.zeros(n_side)])
    n_cap = n - n_side
    dirs = _unit_directions(rng, n_cap)
    sign = np.where(rng.random(n_cap) < 0.5, 1.0, -1.0)
    dirs[:, 2] = np.abs(dirs[:, 2]) * sign
    offset = np.zeros((n_cap, 3))
    offset[:, 2] = sign * length / 2.0
    pts[~on_side] = offset + dirs * radius
    nrm[~on_side] = dirs
    return pts, nrm


def _ellipsoid(rng, n, a, b, c):
    axes = np.array([a, b, c])
    pts = np.empty((n, 3))
    got = 0
    gmax = float(max(b * c, a * c, a * b))
    while got < n:
        u = _unit_directions(rng, 2 * (n - got) + 16)
        # area element of the ellipsoid map relative to the sphere
        g = np.sqrt((u[:, 0] * b * c) ** 2 + (u[:, 1] * a * c) ** 2 + (u[:, 2] * a * b) ** 2)
        keep = u[rng.random(len(u)) < g / gmax]
        takes = min(len(keep), n - got)
        pts[got : got + takes] = keep[:takes] * axes
        got += takes
    nrm = pts / (axes**2)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return pts, nrm


def _torus_band(rng, n, ring_radius, tube_radius, arc=2 * math.pi):
    """Uniform-by-area samples on the tube around an arc of the main circle."""
    theta = (rng.random(n) - 0.5) * arc
    phi = np.empty(n)
    got = 0
    while got < n:
        cand = rng.random(2 * (n - got) + 16) * 2 * math.pi
        w = (ring_radius + tube_radius * np.cos(cand)) / (ring_radius + tube_radius)
        keep = cand[rng.random(len(cand)) < w]
        takes = min(len(keep), n - got)
        phi[got : got + takes] = keep[:takes]
        got += takes
    nrm = np.column_stack(
        [np.cos(theta) * np.cos(phi), np.sin(theta) * np.cos(phi), np.sin(phi)]
    )
    ring = np.column_stack(
        [ring_radius * np.cos(theta), ring_radius * np.sin(theta), np.zeros(n)]
    )
    return ring + tube_radius * nrm, nrm


def _crescent(rng, n, ring_radius, tube_radius, arc):
    """Concave bent tube: a torus arc closed by hemispherical end caps."""
    band_area = arc * ring_radius * 2 * math.pi * tube_radius
    cap_area = 4 * math.pi * tube_radius**2
    n_band = int(round(n * band_area / (band_area + cap_area)))
    pts_b, nrm_b = _torus_band(rng, n_band, ring_radius, tube_radius, arc)
    n_cap = n - n_band
    dirs = _unit_directions(rng, n_cap)
    side = np.where(rng.random(n_cap) < 0.5, 1.0, -1.0)
    half = arc / 2.0
    ends = np.column_stack(
        [ring_radius * np.cos(side * half), ring_radius * np.sin(side * half), np.zeros(n_cap)]
    )
    # keep the hemisphere pointing away from the arc (along the end tangent)
    tangents = np.column_stack([-np.sin(side * half) * side, np.cos(side * half) * side, np.zeros(n_cap)])
    flip = np.einsum("ij,ij->i", dirs, tangents) < 0
    dirs[flip] -= 2 * np.einsum("ij,ij->i", dirs[flip], tangents[flip])[:, None] * tangents[flip]
    pts_c = ends + tube_radius * dirs
    return np.vstack([pts_b, pts_c]), np.vstack([nrm_b, dirs])


def _segment_closest(points, a, b):
    """Closest point on segment ab for each query point."""
    ab = b - a
    denom = float(ab @ ab)
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(points))
    return a + t[:, None] * ab


def _ybranch(rng, n, radius, trunk_length, arm_length, angle_deg):
    """Union of three capsules meeting at the origin: a trunk down -z and two
    arms fanning out in the xz-plane."""
    alpha = math.radians(angle_deg)
    segs = [
        (np.zeros(3), np.array([0.0, 0.0, -trunk_length])),
        (np.zeros(3), arm_length * np.array([math.sin(alpha), 0.0, math.cos(alpha)])),
        (np.zeros(3), arm_length * np.array([-math.sin(alpha), 0.0, math.cos(alpha)])),
    ]
    lengths = np.array([trunk_length, arm_length, arm_length])
    areas = 2 * math.pi * radius * lengths + 4 * math.pi * radius**2
    probs = areas / areas.sum()
    pts = np.empty((n, 3))
    nrm = np.empty((n, 3))
    got = 0
    while got < n:
        want = n - got
        seg_pick = rng.choice(3, size=2 * want + 8, p=probs)
        for s, (a, b) in enumerate(segs):
            m = int((seg_pick == s).sum())
            if m == 0:
                continue
            local, local_n = _capsule_points(rng, m, radius, lengths[s])
            # capsule is built along z centered at the origin; map onto ab
            axis = (b - a) / lengths[s]
            ref = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
            e1 = np.cross(axis, ref)
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(axis, e1)
            basis = np.stack([e1, e2, axis])
            world = local @ basis + (a + b) / 2.0
            world_n = local_n @ basis
            # reject samples buried inside one of the other capsules
            keep = np.ones(m, dtype=bool)
            for s2, (a2, b2) in enumerate(segs):
                if s2 == s:
                    continue
                closest = _segment_closest(world, a2, b2)
                keep &= np.linalg.norm(world - closest, axis=1) > radius * (1 - 1e-9)
            world, world_n = world[keep], world_n[keep]
            takes = min(len(world), n - got)
            pts[got : got + takes] = world[:takes]
            nrm[got : got + takes] = world_n[:takes]
            got += takes
            if got == n:
                break
    return pts, nrm


def synth_shape(spec: ShapeSpec, seed: int) -> PointCloud:
    """Sample ``spec.count`` surface points with analytic outward normals.

    Kinds and their parameters (all dimensions > 0):
      sphere    radius
      capsule   radius, length (cylinder section)
      ellipsoid a, b, c
      torus     ring_radius, tube_radius
      ybranch   radius, trunk_length, arm_length, angle_deg
      crescent  ring_radius, tube_radius, arc_deg (concave torus arc)
    """
    rng = np.random.default_rng(seed)
    p = spec.params
    n = spec.count
    if spec.kind == "sphere":
        pts, nrm = _sphere(rng, n, p.get("radius", 1.0))
    elif spec.kind == "capsule":
        pts, nrm = _capsule_points(rng, n, p.get("radius", 0.5), p.get("length", 2.0))
    elif spec.kind == "ellipsoid":
        pts, nrm = _ellipsoid(rng, n, p.get("a", 1.0), p.get("b", 0.7), p.get("c", 0.4))
    elif spec.kind == "torus":
        pts, nrm = _torus_band(rng, n, p.get("ring_radius", 1.0), p.get("tube_radius", 0.25))
    elif spec.kind == "ybranch":
        pts, nrm = _ybranch(
            rng, n,
            p.get("radius", 0.3),
            p.get("trunk_length", 1.5),
            p.get("arm_length", 1.2),
            p.get("angle_deg", 40.0),
        )
    elif spec.kind == "crescent":
        pts, nrm = _crescent(
            rng, n,
            p.get("ring_radius", 1.0),
            p.get("tube_radius", 0.3),
            math.radians(p.get("arc_deg", 300.0)),
        )
    else:
        raise ParameterError(f"unknown shape kind {spec.kind!r}")
    nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    return PointCloud(pts, nrm)
