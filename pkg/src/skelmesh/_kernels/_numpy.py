"""Pure-numpy nearest-neighbor kernels (fallback backend).

Brute force with chunking to bound peak memory. Semantics must match the
compiled backend in ``_core.pyx`` exactly: squared distances accumulated as
dx*dx + dy*dy + dz*dz, ties broken toward the lowest reference index.
"""
import numpy as np

BACKEND = "numpy"

# cap on distance-matrix cells materialized at once (~16 MB of float64)
_CHUNK_CELLS = 2_000_000


def _as_pts(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError("expected an (n, 3) array")
    return a


def _rows_per_chunk(n_ref):
    return max(1, _CHUNK_CELLS // max(n_ref, 1))


def nearest(query, ref):
    """Index and distance of the nearest reference point for every query."""
    q, r = _as_pts(query), _as_pts(ref)
    nq = q.shape[0]
    idx = np.empty(nq, dtype=np.int64)
    dist = np.empty(nq, dtype=np.float64)
    step = _rows_per_chunk(r.shape[0])
    for s in range(0, nq, step):
        e = min(nq, s + step)
        diff = q[s:e, None, :] - r[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        ii = np.argmin(d2, axis=1)  # first occurrence = lowest ref index
        idx[s:e] = ii
        dist[s:e] = np.sqrt(d2[np.arange(e - s), ii])
    return idx, dist


def nearest2(query, ref):
    """Two nearest reference points per query.

    Returns (i1, d1, i2, d2); i2 is -1 when the reference has a single point.
    """
    q, r = _as_pts(query), _as_pts(ref)
    nq, nr = q.shape[0], r.shape[0]
    i1 = np.empty(nq, dtype=np.int64)
    d1 = np.empty(nq, dtype=np.float64)
    i2 = np.full(nq, -1, dtype=np.int64)
    d2_out = np.full(nq, np.inf, dtype=np.float64)
    step = _rows_per_chunk(nr)
    rows = None
    for s in range(0, nq, step):
        e = min(nq, s + step)
        diff = q[s:e, None, :] - r[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        if rows is None or len(rows) != e - s:
            rows = np.arange(e - s)
        a = np.argmin(d2, axis=1)
        i1[s:e] = a
        d1[s:e] = np.sqrt(d2[rows, a])
        if nr > 1:
            d2[rows, a] = np.inf
            b = np.argmin(d2, axis=1)
            i2[s:e] = b
            d2_out[s:e] = np.sqrt(d2[rows, b])
    return i1, d1, i2, d2_out


def nearest_cone(query, ref, cos_thresh, dmax_factor):
    """Nearest reference, plus nearest reference outside a cone.

    For each query point: (i1, d1) is the globally nearest reference; (i2, d2)
    is the nearest reference whose direction from the query subtends an angle
    >= arccos(cos_thresh) with the direction toward i1, restricted to
    d <= dmax_factor * d1. i2 is -1 when no such reference exists (including
    the degenerate d1 == 0 case). cos12 holds the direction cosine of the
    found pair (0 where i2 == -1).
    """
    q, r = _as_pts(query), _as_pts(ref)
    nq, nr = q.shape[0], r.shape[0]
    i1 = np.empty(nq, dtype=np.int64)
    d1 = np.empty(nq, dtype=np.float64)
    i2 = np.full(nq, -1, dtype=np.int64)
    d2 = np.full(nq, np.inf, dtype=np.float64)
    cos12 = np.zeros(nq, dtype=np.float64)
    step = _rows_per_chunk(nr)
    for s in range(0, nq, step):
        e = min(nq, s + step)
        diff = r[None, :, :] - q[s:e, None, :]  # direction query -> ref
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        rows = np.arange(e - s)
        a = np.argmin(sq, axis=1)
        da = np.sqrt(sq[rows, a])
        i1[s:e] = a
        d1[s:e] = da
        ok = da > 0.0
        u1 = np.zeros((e - s, 3))
        u1[ok] = diff[rows[ok], a[ok]] / da[ok, None]
        d = np.sqrt(sq)
        with np.errstate(invalid="ignore", divide="ignore"):
            cosang = np.einsum("ijk,ik->ij", diff, u1) / np.where(d > 0, d, 1.0)
        admissible = (cosang <= cos_thresh) & (d <= dmax_factor * da[:, None]) & (d > 0)
        admissible[~ok] = False
        masked = np.where(admissible, sq, np.inf)
        b = np.argmin(masked, axis=1)
        found = np.isfinite(masked[rows, b])
        i2[s:e][found] = b[found]
        d2[s:e][found] = np.sqrt(sq[rows[found], b[found]])
        cos12[s:e][found] = cosang[rows[found], b[found]]
    return i1, d1, i2, d2, cos12


def knn(points, k):
    """Indices of the k nearest neighbors (self excluded) per point.

    Rows are sorted by (distance, index) ascending.
    """
    p = _as_pts(points)
    m = p.shape[0]
    if not 1 <= k <= m - 1:
        raise ValueError("k must be in [1, n_points - 1]")
    out = np.empty((m, k), dtype=np.int64)
    step = _rows_per_chunk(m)
    for s in range(0, m, step):
        e = min(m, s + step)
        diff = p[s:e, None, :] - p[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d2[np.arange(e - s), np.arange(s, e)] = np.inf
        # stable sort keeps equal distances in ascending index order
        order = np.argsort(d2, axis=1, kind="stable")
        out[s:e] = order[:, :k]
    return out
