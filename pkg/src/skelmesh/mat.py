"""Brute-force medial axis transform on a voxel lattice.

Ground truth for validating the skeleton optimizer: an interior occupancy
grid from the oriented surface cloud, lattice medial points with radii and
separation angles, a spike filter, and union-of-balls volume for the
reconstructed-volume error metric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyInputError, ParameterError
from .geometry import PointCloud

__all__ = [
    "InteriorGrid",
    "MedialPoints",
    "is_inside",
    "interior_grid",
    "medial_points",
    "simplify_mat",
    "reconstruct_volume",
    "vol_pct",
    "save_medial_points",
    "load_medial_points",
]


@dataclass(frozen=True)
class InteriorGrid:
    """Voxel lattice with an inside/outside flag per voxel center."""

    origin: np.ndarray      # (3,) corner of the lattice
    spacing: float
    occupancy: np.ndarray   # (nx, ny, nz) bool

    def centers(self, mask: np.ndarray | None = None) -> np.ndarray:
        """Voxel-center coordinates, optionally restricted by a mask."""
        nx, ny, nz = self.occupancy.shape
        ii, jj, kk = np.meshgrid(
            np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
        )
        idx = np.column_stack([ii.ravel(), jj.ravel(), kk.ravel()])
        if mask is not None:
            idx = idx[mask.ravel()]
        return self.origin + (idx + 0.5) * self.spacing

    @property
    def interior_volume(self) -> float:
        return float(self.occupancy.sum()) * self.spacing**3


@dataclass(frozen=True)
class MedialPoints:
    """Lattice medial points: positions, inscribed radii, and the angle
    between the two surface-contact directions."""

    positions: np.ndarray          # (k, 3)
    radii: np.ndarray              # (k,)
    separation_angles: np.ndarray  # (k,) radians in [0, pi]

    def __len__(self) -> int:
        return self.positions.shape[0]


def is_inside(cloud: PointCloud, queries: np.ndarray) -> np.ndarray:
    """Inside test by the sign of the nearest surface normal.

    A query is inside when the vector from its nearest surface sample points
    against that sample's outward normal. Boundary ties (dot ~ 0) resolve to
    outside.
    """
    if not cloud.has_normals:
        raise ParameterError("inside test requires normals")
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    idx, _ = _kernels.nearest(q, cloud.points)
    dots = np.einsum("ij,ij->i", cloud.normals[idx], q - cloud.points[idx])
    return dots < 0.0


def interior_grid(cloud: PointCloud, resolution: int, pad_voxels: int = 2) -> InteriorGrid:
    """Voxelize the interior of an oriented surface cloud.

    ``resolution`` counts voxels along the longest bounding-box axis; the
    other axes keep cubic voxels. The lattice is padded by ``pad_voxels`` on
    every side so outside space surrounds the shape.
    """
    if not cloud.has_normals:
        raise ParameterError("interior grid requires normals")
    if resolution < 8:
        raise ParameterError("resolution must be >= 8")
    lo = cloud.points.min(axis=0)
    hi = cloud.points.max(axis=0)
    extent = hi - lo
    spacing = float(extent.max()) / resolution
    if spacing <= 0:
        raise ParameterError("degenerate bounding box")
    dims = np.maximum(np.ceil(extent / spacing).astype(int), 1) + 2 * pad_voxels
    origin = lo - pad_voxels * spacing
    grid = InteriorGrid(origin=origin, spacing=spacing,
                        occupancy=np.zeros(tuple(dims), dtype=bool))
    centers = grid.centers()
    inside = is_inside(cloud, centers)
    occupancy = inside.reshape(tuple(dims))
    return InteriorGrid(origin=origin, spacing=spacing, occupancy=occupancy)


def medial_points(grid: InteriorGrid, surface: PointCloud, eps: float = 0.03,
                  min_angle: float = math.pi / 3,
                  min_radius: float | None = None,
                  spoke_tol: float = 0.35) -> MedialPoints:
    """Interior lattice points with two nearly equidistant surface contacts.

    A point qualifies when some surface sample subtending at least
    ``min_angle`` with the nearest-contact direction lies within
    (1 + eps) times the nearest distance. The radius is the nearest distance;
    the reported angle is the one between the two contact directions.

    Two artifact guards are applied on top, both consequences of working
    with discrete samples rather than a continuous surface. First, a lattice
    point lodged in the gap between adjacent surface samples sees them at a
    wide angle, but its spokes graze the surface instead of meeting it
    perpendicularly; both contact spokes must therefore align with the
    contact normals within ``spoke_tol``. Second, radii below ``min_radius``
    (default: twice the mean nearest-neighbor spacing of the surface
    samples) are unresolvable at the sampling density and are dropped.

    ``eps`` should shrink proportionally with the voxel spacing when the
    resolution grows, so the medial set converges onto the true axis.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if not 0 < min_angle < math.pi:
        raise ParameterError("min_angle must lie in (0, pi)")
    if not surface.has_normals:
        raise ParameterError("medial extraction requires surface normals")
    queries = grid.centers(grid.occupancy)
    if len(queries) == 0:
        return MedialPoints(np.empty((0, 3)), np.empty(0), np.empty(0))
    if min_radius is None:
        if len(surface) > 1:
            nn = _kernels.knn(surface.points, 1)[:, 0]
            gap = np.linalg.norm(surface.points[nn] - surface.points, axis=1)
            min_radius = 2.0 * float(gap.mean())
        else:
            min_radius = 0.0
    i1, d1, i2, d2, cos12 = _kernels.nearest_cone(
        queries, surface.points, math.cos(min_angle), 1.0 + 4.0 * eps
    )
    keep = (i2 >= 0) & (d2 - d1 <= eps * d1) & (d1 >= min_radius) & (d1 > 0)
    if keep.any():
        q = queries[keep]
        cos_tol = math.cos(spoke_tol)
        aligned = np.ones(len(q), dtype=bool)
        for idx, dist in ((i1[keep], d1[keep]), (i2[keep], d2[keep])):
            spokes = (surface.points[idx] - q) / dist[:, None]
            aligned &= np.einsum("ij,ij->i", spokes, surface.normals[idx]) >= cos_tol
        keep[keep] = aligned
    angles = np.arccos(np.clip(cos12[keep], -1.0, 1.0))
    return MedialPoints(queries[keep], d1[keep], angles)


def simplify_mat(points: MedialPoints, angle_floor: float) -> MedialPoints:
    """Drop medial points whose contact separation angle is below the floor."""
    if not 0 <= angle_floor <= math.pi:
        raise ParameterError("angle_floor must lie in [0, pi]")
    keep = points.separation_angles >= angle_floor
    return MedialPoints(points.positions[keep], points.radii[keep],
                        points.separation_angles[keep])


def reconstruct_volume(centers: np.ndarray, radii: np.ndarray, resolution: int = 64) -> float:
    """Voxelized volume of a union of balls."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    radii = np.asarray(radii, dtype=np.float64).reshape(-1)
    if len(centers) == 0:
        raise EmptyInputError("no balls to reconstruct")
    if resolution < 16:
        raise ParameterError("resolution must be >= 16")
    lo = (centers - radii[:, None]).min(axis=0)
    hi = (centers + radii[:, None]).max(axis=0)
    extent = hi - lo
    spacing = float(extent.max()) / resolution
    if spacing <= 0:  # single zero-radius ball
        return 0.0
    dims = np.maximum(np.ceil(extent / spacing).astype(int), 1) + 2
    origin = lo - spacing
    occ = np.zeros(tuple(dims), dtype=bool)
    axes = [origin[a] + (np.arange(dims[a]) + 0.5) * spacing for a in range(3)]
    for c, r in zip(centers, radii):
        if r <= 0:
            continue
        sl = []
        for a in range(3):
            j0 = max(0, int((c[a] - r - origin[a]) / spacing) - 1)
            j1 = min(dims[a], int((c[a] + r - origin[a]) / spacing) + 2)
            sl.append((j0, j1))
        dx = axes[0][sl[0][0]:sl[0][1]] - c[0]
        dy = axes[1][sl[1][0]:sl[1][1]] - c[1]
        dz = axes[2][sl[2][0]:sl[2][1]] - c[2]
        d2 = (dx[:, None, None] ** 2 + dy[None, :, None] ** 2 + dz[None, None, :] ** 2)
        occ[sl[0][0]:sl[0][1], sl[1][0]:sl[1][1], sl[2][0]:sl[2][1]] |= d2 <= r * r
    return float(occ.sum()) * spacing**3


def vol_pct(v_recon: float, v_gt: float) -> float:
    """Relative volume error |v_recon - v_gt| / v_gt."""
    if v_gt <= 0:
        raise ParameterError("reference volume must be positive")
    if v_recon < 0:
        raise ParameterError("reconstructed volume must be nonnegative")
    return abs(v_recon - v_gt) / v_gt


def save_medial_points(points: MedialPoints, path) -> None:
    """Write medial points as 'x y z r' text."""
    with open(path, "w") as fh:
        for p, r in zip(points.positions, points.radii):
            fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r} {r!r}\n")


def load_medial_points(path) -> MedialPoints:
    """Read 'x y z r' text; separation angles are not stored and load as pi."""
    rows = np.loadtxt(path, ndmin=2)
    if rows.size == 0:
        raise EmptyInputError(f"{path} contains no medial points")
    return MedialPoints(rows[:, :3], rows[:, 3], np.full(len(rows), math.pi))
