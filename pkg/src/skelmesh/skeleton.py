"""Skeleton-ball prediction from an oriented surface cloud.

Ball centers are convex combinations of the input points, parameterized by a
column-stochastic weight matrix; radii reuse the same weights applied to the
point-to-nearest-center distances. The weights' logits are optimized by Adam
against four terms: a Chamfer-style sampling loss between sphere samples and
the surface, a point-to-sphere reconstruction loss, a radius reward, and a
spoke/normal alignment penalty that keeps centers inside concave shapes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    EmptyInputError,
    NumericError,
    ParameterError,
    ParseError,
    ShapeMismatchError,
)
from .geometry import PointCloud, farthest_point_indices

__all__ = [
    "Skeleton",
    "SkeletonOptConfig",
    "SkeletonResult",
    "fibonacci_directions",
    "compute_centers",
    "compute_radii",
    "sample_sphere_points",
    "loss_sampling",
    "loss_point_to_sphere",
    "loss_radius",
    "loss_norm",
    "optimize_skeleton",
    "save_skeleton",
    "load_skeleton",
]


@dataclass(frozen=True)
class Skeleton:
    """Medial balls: centers (n, 3) and radii (n,)."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.centers, dtype=np.float64).reshape(-1, 3)
        r = np.ascontiguousarray(self.radii, dtype=np.float64).reshape(-1)
        if c.shape[0] != r.shape[0]:
            raise ShapeMismatchError("centers and radii disagree in length")
        if not (np.isfinite(c).all() and np.isfinite(r).all()):
            raise ParameterError("skeleton values must be finite")
        if (r < 0).any():
            raise ParameterError("radii must be nonnegative")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    def __len__(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class SkeletonOptConfig:
    n_balls: int = 64
    iterations: int = 1500
    learning_rate: float = 0.01
    lr_decay: float = 0.1        # final lr as a fraction of the initial (cosine)
    lambda_point: float = 0.3
    lambda_radius: float = 0.3
    lambda_norm: float = 0.1
    sphere_samples: int = 24
    init_bias: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n_balls < 1:
            raise ParameterError("n_balls must be >= 1")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if self.lambda_point < 0 or self.lambda_radius < 0 or self.lambda_norm < 0:
            raise ParameterError("loss weights must be nonnegative")
        if self.sphere_samples < 4:
            raise ParameterError("sphere_samples must be >= 4")


@dataclass
class SkeletonResult:
    skeleton: Skeleton
    weights: np.ndarray          # (m, n) column-stochastic
    loss_trace: np.ndarray       # (iterations,) total loss
    loss_terms: dict = field(default_factory=dict)  # per-term traces


def fibonacci_directions(n: int) -> np.ndarray:
    """Deterministic, roughly uniform unit directions (spherical Fibonacci)."""
    i = np.arange(n) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / n)
    azim = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.column_stack(
        [np.sin(polar) * np.cos(azim), np.sin(polar) * np.sin(azim), np.cos(polar)]
    )


def _points_of(p) -> np.ndarray:
    if isinstance(p, PointCloud):
        return p.points
    return np.asarray(p, dtype=np.float64).reshape(-1, 3)


def _nearest_detached(query: np.ndarray, ref: np.ndarray):
    """Nearest-neighbor indices treated as constants through backward.

    When a kink watch is active, near-ties between the best and second-best
    neighbor are reported: they are the nondifferentiable points of min-based
    correspondences.
    """
    if ad._kink_log is not None:
        i1, d1, _, d2 = _kernels.nearest2(query, ref)
        if ref.shape[0] > 1 and np.any(d2 - d1 <= ad.KINK_ATOL * (1.0 + d1)):
            ad.note_kink("nearest-tie")
        return i1, d1
    return _kernels.nearest(query, ref)


def compute_centers(weights: np.ndarray, points) -> np.ndarray:
    """Centers as convex combinations of the input points (W^T P)."""
    w = np.asarray(weights, dtype=np.float64)
    pts = _points_of(points)
    if w.ndim != 2 or w.shape[0] != pts.shape[0]:
        raise ShapeMismatchError(
            f"weights with {w.shape} rows do not match {pts.shape[0]} points")
    return w.T @ pts


def compute_radii(weights: np.ndarray, points, centers: np.ndarray) -> np.ndarray:
    """Radii from the same weights applied to nearest-center distances."""
    w = np.asarray(weights, dtype=np.float64)
    pts = _points_of(points)
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    if w.ndim != 2 or w.shape[0] != pts.shape[0] or w.shape[1] != centers.shape[0]:
        raise ShapeMismatchError("weights, points, and centers disagree in shape")
    _, d = _kernels.nearest(pts, centers)
    return w.T @ d


def sample_sphere_points(centers, radii, k: int = 16):
    """``k`` points per ball on a scaled Fibonacci lattice (set of sphere
    surface samples). Differentiable when given Tensors."""
    if k < 4:
        raise ParameterError("need at least 4 samples per sphere")
    tape = isinstance(centers, Tensor) or isinstance(radii, Tensor)
    c = ad.as_tensor(centers)
    r = ad.as_tensor(radii)
    n = c.data.shape[0]
    dirs = np.tile(fibonacci_directions(k), (n, 1))
    rep = np.repeat(np.arange(n), k)
    out = ad.add(ad.gather(c, rep), ad.mul(ad.reshape(ad.gather(ad.reshape(r, (n, 1)), rep), (n * k, 1)), Tensor(dirs)))
    return out if tape else out.data


def loss_sampling(t, p) -> Tensor:
    """Bidirectional Chamfer sum between sphere samples and surface points."""
    tt = ad.as_tensor(t)
    pts = _points_of(p)
    if tt.data.shape[0] == 0 or pts.shape[0] == 0:
        raise EmptyInputError("sampling loss needs non-empty sets")
    p_const = Tensor(pts)
    ia, _ = _nearest_detached(pts, tt.data)       # surface -> nearest sample
    ib, _ = _nearest_detached(tt.data, pts)       # sample -> nearest surface
    to_t = ad.row_norm(ad.sub(p_const, ad.gather(tt, ia)))
    to_p = ad.row_norm(ad.sub(tt, ad.gather(p_const, ib)))
    return ad.add(ad.sum_all(to_t), ad.sum_all(to_p))


def loss_point_to_sphere(p, centers, radii) -> Tensor:
    """Reconstruction error against ball surfaces.

    Sum over surface points of (nearest-center distance minus that center's
    radius) plus sum over centers of (nearest-surface distance minus radius).
    """
    pts = _points_of(p)
    c = ad.as_tensor(centers)
    r = ad.as_tensor(radii)
    if c.data.shape[0] == 0 or pts.shape[0] == 0:
        raise EmptyInputError("point-to-sphere loss needs non-empty sets")
    p_const = Tensor(pts)
    ic, _ = _nearest_detached(pts, c.data)
    d_surf = ad.row_norm(ad.sub(p_const, ad.gather(c, ic)))
    term1 = ad.sum_all(ad.sub(d_surf, ad.gather(r, ic)))
    jc, _ = _nearest_detached(c.data, pts)
    d_cent = ad.row_norm(ad.sub(c, ad.gather(p_const, jc)))
    term2 = ad.sum_all(ad.sub(d_cent, r))
    return ad.add(term1, term2)


def loss_radius(radii) -> Tensor:
    """Negated radius sum: minimizing it rewards large balls."""
    r = ad.as_tensor(radii)
    return ad.mul(ad.sum_all(r), -1.0)


def loss_norm(p: PointCloud, centers) -> Tensor:
    """Spoke/normal misalignment penalty.

    For each ball's nearest surface point and each surface point's nearest
    ball, accumulates 1 - <outward normal, spoke direction>; spokes that point
    back into the shape or sideways are charged, which pulls centers inside
    even for concave shapes.
    """
    if not isinstance(p, PointCloud) or not p.has_normals:
        raise ParameterError("normal-alignment loss requires a cloud with normals")
    c = ad.as_tensor(centers)
    if c.data.shape[0] == 0 or len(p) == 0:
        raise EmptyInputError("normal-alignment loss needs non-empty sets")
    pts, nrm = p.points, p.normals
    p_const = Tensor(pts)

    jc, _ = _nearest_detached(c.data, pts)        # per ball: nearest surface point
    spoke_b = ad.sub(ad.gather(p_const, jc), c)
    len_b = ad.clip_min(ad.row_norm(spoke_b), 1e-12)
    align_b = ad.div(ad.row_sum(ad.mul(spoke_b, Tensor(nrm[jc]))), len_b)
    term1 = ad.sum_all(ad.sub(Tensor(np.ones(len(jc))), align_b))

    ic, _ = _nearest_detached(pts, c.data)        # per surface point: nearest ball
    spoke_p = ad.sub(p_const, ad.gather(c, ic))
    len_p = ad.clip_min(ad.row_norm(spoke_p), 1e-12)
    align_p = ad.div(ad.row_sum(ad.mul(spoke_p, Tensor(nrm))), len_p)
    term2 = ad.sum_all(ad.sub(Tensor(np.ones(len(pts))), align_p))
    return ad.add(term1, term2)


def _init_logits(points: np.ndarray, n_balls: int, rng, bias: float) -> np.ndarray:
    """Gaussian logits plus a deterministic bias steering each column toward
    one farthest-point sample, which breaks symmetry between columns."""
    m = points.shape[0]
    logits = rng.normal(0.0, 0.01, size=(m, n_balls))
    fps = farthest_point_indices(points, n_balls)
    logits[fps, np.arange(n_balls)] += bias
    return logits


def _rotated_directions(n_balls: int, k: int) -> np.ndarray:
    """Per-ball azimuthal rotations of the Fibonacci lattice.

    Coincident balls with identical sample lattices would produce duplicate
    sample points, blinding the sampling loss to overlap; a deterministic
    golden-angle twist per ball index keeps the union well spread.
    """
    base = fibonacci_directions(k)
    out = np.empty((n_balls * k, 3))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for b in range(n_balls):
        az, tilt = b * golden, b * golden / math.e
        ca, sa = math.cos(az), math.sin(az)
        cb, sb = math.cos(tilt), math.sin(tilt)
        rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cb, -sb], [0.0, sb, cb]])
        out[b * k : (b + 1) * k] = base @ (rx @ rz).T
    return out


def optimize_skeleton(cloud: PointCloud, cfg: SkeletonOptConfig = SkeletonOptConfig()) -> SkeletonResult:
    """Fit skeleton balls to an oriented, unit-normalized surface cloud.

    Minimizes sampling + lambda_p * point-to-sphere + lambda_r * radius +
    lambda_n * normal-alignment by Adam on the weight logits. Deterministic
    for a fixed config. With ``lambda_norm=0`` the objective reduces to the
    three-term variant (the concavity ablation switch).
    """
    if not cloud.has_normals:
        raise ParameterError("skeleton optimization requires normals")
    m = len(cloud)
    if cfg.n_balls > m:
        raise ParameterError(f"n_balls={cfg.n_balls} exceeds cloud size {m}")
    rng = np.random.default_rng(cfg.seed)
    pts = cloud.points
    p_const = Tensor(pts)
    logits = Tensor(_init_logits(pts, cfg.n_balls, rng, cfg.init_bias), requires_grad=True)
    dirs = _rotated_directions(cfg.n_balls, cfg.sphere_samples)
    rep = np.repeat(np.arange(cfg.n_balls), cfg.sphere_samples)
    opt = ad.Adam([logits], lr=cfg.learning_rate)

    trace = np.empty(cfg.iterations)
    terms: dict[str, np.ndarray] = {
        name: np.empty(cfg.iterations) for name in ("sampling", "point_to_sphere", "radius", "norm")
    }
    weights = None
    for it in range(cfg.iterations):
        try:
            w = ad.column_softmax(logits)
            c = ad.matmul(ad.transpose(w), p_const)
            ic, _ = _nearest_detached(pts, c.data)
            d = ad.row_norm(ad.sub(p_const, ad.gather(c, ic)))
            r = ad.reshape(ad.matmul(ad.transpose(w), ad.reshape(d, (m, 1))), (cfg.n_balls,))

            t = ad.add(ad.gather(c, rep),
                       ad.mul(ad.gather(ad.reshape(r, (cfg.n_balls, 1)), rep), Tensor(dirs)))
            l_s = loss_sampling(t, pts)
            # the point-to-sphere correspondences reuse this iteration's d
            ls_term1 = ad.sum_all(ad.sub(d, ad.gather(r, ic)))
            jc, _ = _nearest_detached(c.data, pts)
            d_cent = ad.row_norm(ad.sub(c, ad.gather(p_const, jc)))
            l_p = ad.add(ls_term1, ad.sum_all(ad.sub(d_cent, r)))
            l_r = loss_radius(r)
            if cfg.lambda_norm > 0:
                l_n = loss_norm(cloud, c)
            else:
                l_n = Tensor(0.0)
            total = ad.add(ad.add(l_s, ad.mul(l_p, cfg.lambda_point)),
                           ad.add(ad.mul(l_r, cfg.lambda_radius), ad.mul(l_n, cfg.lambda_norm)))
        except NumericError as exc:
            raise NumericError(f"iteration {it}: {exc}") from exc
        trace[it] = total.item()
        terms["sampling"][it] = l_s.item()
        terms["point_to_sphere"][it] = l_p.item()
        terms["radius"][it] = l_r.item()
        terms["norm"][it] = l_n.item()
        opt.zero_grad()
        total.backward()
        frac = it / max(cfg.iterations - 1, 1)
        opt.lr = cfg.learning_rate * (
            cfg.lr_decay + (1.0 - cfg.lr_decay) * 0.5 * (1.0 + math.cos(math.pi * frac))
        )
        opt.step()
        weights = w.data
    final_w = _column_softmax_np(logits.data)
    centers = compute_centers(final_w, pts)
    radii = compute_radii(final_w, pts, centers)
    return SkeletonResult(
        skeleton=Skeleton(centers, radii),
        weights=final_w,
        loss_trace=trace,
        loss_terms=terms,
    )


def _column_softmax_np(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def save_skeleton(skel: Skeleton, path) -> None:
    """Write balls as 'x y z r' text, one per line."""
    with open(path, "w") as fh:
        for c, r in zip(skel.centers, skel.radii):
            fh.write(f"{c[0]!r} {c[1]!r} {c[2]!r} {r!r}\n")


def load_skeleton(path) -> Skeleton:
    """Read 'x y z r' text."""
    centers, radii = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip() or raw.lstrip().startswith("#"):
                continue
            parts = raw.split()
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", line=lineno)
            try:
                vals = [float(v) for v in parts]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            centers.append(vals[:3])
            radii.append(vals[3])
    if not centers:
        raise EmptyInputError(f"{path} contains no balls")
    return Skeleton(np.asarray(centers), np.asarray(radii))
