# Compiled nearest-neighbor kernels. Semantics must match _numpy.py:
# squared distances accumulated as dx*dx + dy*dy + dz*dz, ties broken toward
# the lowest reference index. A uniform grid accelerates queries against
# reference sets of >= 256 points; below that brute force wins.
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, ceil, INFINITY

cnp.import_array()

BACKEND = "compiled"

DEF GRID_MIN_REFS = 256
DEF MAX_GRID_DIM = 96


cdef inline long _clampl(long v, long lo, long hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline long _maxl(long a, long b) nogil:
    return a if a > b else b


cdef inline long _absl(long a) nogil:
    return a if a >= 0 else -a


def _build_grid(cnp.ndarray[cnp.float64_t, ndim=2] r):
    """Bucket reference points into a uniform grid (CSR layout)."""
    lo = r.min(axis=0)
    hi = r.max(axis=0)
    ext = hi - lo
    n = r.shape[0]
    pos = ext[ext > 0]
    if pos.size == 0:
        h = 1.0
    else:
        # ~2 points per occupied cell on average
        h = float(np.prod(pos) / max(n / 2.0, 1.0)) ** (1.0 / max(pos.size, 1))
        h = max(h, float(ext.max()) / MAX_GRID_DIM, 1e-300)
    dims = np.maximum(np.ceil(ext / h).astype(np.int64), 1)
    dims = np.minimum(dims, MAX_GRID_DIM)
    cell = np.minimum(((r - lo) / h).astype(np.int64), dims - 1)
    cell = np.maximum(cell, 0)
    flat = (cell[:, 0] * dims[1] + cell[:, 1]) * dims[2] + cell[:, 2]
    order = np.argsort(flat, kind="stable").astype(np.int64)
    ncells = int(dims[0] * dims[1] * dims[2])
    counts = np.bincount(flat, minlength=ncells)
    start = np.zeros(ncells + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    return lo, float(h), dims, start, order


cdef void _brute_nn(double[:, ::1] q, double[:, ::1] r,
                    cnp.int64_t[::1] idx, double[::1] dist) nogil:
    cdef Py_ssize_t i, j, nq = q.shape[0], nr = r.shape[0]
    cdef double dx, dy, dz, d2, best
    cdef Py_ssize_t bj
    for i in range(nq):
        best = INFINITY
        bj = -1
        for j in range(nr):
            dx = q[i, 0] - r[j, 0]
            dy = q[i, 1] - r[j, 1]
            dz = q[i, 2] - r[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
                bj = j
        idx[i] = bj
        dist[i] = sqrt(best)


cdef void _grid_nn(double[:, ::1] q, double[:, ::1] r,
                   cnp.int64_t[::1] idx, double[::1] dist,
                   double lx, double ly, double lz, double h,
                   long nx, long ny, long nz,
                   cnp.int64_t[::1] start, cnp.int64_t[::1] order) nogil:
    cdef Py_ssize_t i, t, nq = q.shape[0]
    cdef long cx, cy, cz, L, mr, ax, ay, az, cid
    cdef cnp.int64_t j, bj
    cdef double dx, dy, dz, d2, best, lb
    for i in range(nq):
        cx = _clampl(<long>((q[i, 0] - lx) / h), 0, nx - 1)
        cy = _clampl(<long>((q[i, 1] - ly) / h), 0, ny - 1)
        cz = _clampl(<long>((q[i, 2] - lz) / h), 0, nz - 1)
        best = INFINITY
        bj = -1
        mr = _maxl(_maxl(nx, ny), nz)
        for L in range(0, mr + 1):
            if bj >= 0 and L >= 1:
                lb = (L - 1) * h
                if best <= lb * lb:
                    break
            for ax in range(_clampl(cx - L, 0, nx - 1), _clampl(cx + L, 0, nx - 1) + 1):
                for ay in range(_clampl(cy - L, 0, ny - 1), _clampl(cy + L, 0, ny - 1) + 1):
                    for az in range(_clampl(cz - L, 0, nz - 1), _clampl(cz + L, 0, nz - 1) + 1):
                        if _maxl(_maxl(_absl(ax - cx), _absl(ay - cy)), _absl(az - cz)) != L:
                            continue
                        cid = (ax * ny + ay) * nz + az
                        for t in range(start[cid], start[cid + 1]):
                            j = order[t]
                            dx = q[i, 0] - r[j, 0]
                            dy = q[i, 1] - r[j, 1]
                            dz = q[i, 2] - r[j, 2]
                            d2 = dx * dx + dy * dy + dz * dz
                            if d2 < best or (d2 == best and j < bj):
                                best = d2
                                bj = j
        idx[i] = bj
        dist[i] = sqrt(best)


def nearest(query, ref):
    """Index and distance of the nearest reference point for every query."""
    q = np.ascontiguousarray(query, dtype=np.float64)
    r = np.ascontiguousarray(ref, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != 3 or r.ndim != 2 or r.shape[1] != 3:
        raise ValueError("expected (n, 3) arrays")
    nq = q.shape[0]
    idx = np.empty(nq, dtype=np.int64)
    dist = np.empty(nq, dtype=np.float64)
    if nq == 0:
        return idx, dist
    if r.shape[0] < GRID_MIN_REFS:
        _brute_nn(q, r, idx, dist)
    else:
        lo, h, dims, start, order = _build_grid(r)
        _grid_nn(q, r, idx, dist,
                 float(lo[0]), float(lo[1]), float(lo[2]), h,
                 int(dims[0]), int(dims[1]), int(dims[2]), start, order)
    return idx, dist


def nearest2(query, ref):
    """Two nearest reference points per query (i1, d1, i2, d2); i2 = -1 when
    the reference holds a single point."""
    q = np.ascontiguousarray(query, dtype=np.float64)
    r = np.ascontiguousarray(ref, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != 3 or r.ndim != 2 or r.shape[1] != 3:
        raise ValueError("expected (n, 3) arrays")
    cdef Py_ssize_t nq = q.shape[0], nr = r.shape[0]
    i1 = np.empty(nq, dtype=np.int64)
    d1 = np.empty(nq, dtype=np.float64)
    i2 = np.full(nq, -1, dtype=np.int64)
    d2a = np.full(nq, np.inf, dtype=np.float64)
    cdef double[:, ::1] qv = q
    cdef double[:, ::1] rv = r
    cdef cnp.int64_t[::1] i1v = i1
    cdef double[::1] d1v = d1
    cdef cnp.int64_t[::1] i2v = i2
    cdef double[::1] d2v = d2a
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz, d2, b1, b2
    cdef cnp.int64_t j1, j2
    with nogil:
        for i in range(nq):
            b1 = INFINITY
            b2 = INFINITY
            j1 = -1
            j2 = -1
            for j in range(nr):
                dx = qv[i, 0] - rv[j, 0]
                dy = qv[i, 1] - rv[j, 1]
                dz = qv[i, 2] - rv[j, 2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < b1:
                    b2 = b1
                    j2 = j1
                    b1 = d2
                    j1 = j
                elif d2 < b2:
                    b2 = d2
                    j2 = j
            i1v[i] = j1
            d1v[i] = sqrt(b1)
            i2v[i] = j2
            if j2 >= 0:
                d2v[i] = sqrt(b2)
    return i1, d1, i2, d2a


def nearest_cone(query, ref, double cos_thresh, double dmax_factor):
    """Nearest reference, plus nearest admissible reference outside a cone.

    Admissible references lie at distance in (0, dmax_factor * d1] and their
    direction from the query subtends an angle >= arccos(cos_thresh) with the
    direction toward the nearest reference. i2 = -1 when none exists.
    """
    q = np.ascontiguousarray(query, dtype=np.float64)
    r = np.ascontiguousarray(ref, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != 3 or r.ndim != 2 or r.shape[1] != 3:
        raise ValueError("expected (n, 3) arrays")
    cdef Py_ssize_t nq = q.shape[0], nr = r.shape[0]
    i1 = np.empty(nq, dtype=np.int64)
    d1 = np.empty(nq, dtype=np.float64)
    i2 = np.full(nq, -1, dtype=np.int64)
    d2a = np.full(nq, np.inf, dtype=np.float64)
    cos12 = np.zeros(nq, dtype=np.float64)
    if nq == 0:
        return i1, d1, i2, d2a, cos12
    # pass 1: plain nearest
    i1[:], d1[:] = nearest(q, r)

    cdef double[:, ::1] qv = q
    cdef double[:, ::1] rv = r
    cdef cnp.int64_t[::1] i1v = i1
    cdef double[::1] d1v = d1
    cdef cnp.int64_t[::1] i2v = i2
    cdef double[::1] d2v = d2a
    cdef double[::1] c12v = cos12

    cdef bint use_grid = nr >= GRID_MIN_REFS
    cdef double lx = 0, ly = 0, lz = 0, h = 1
    cdef long nx = 1, ny = 1, nz = 1
    cdef cnp.int64_t[::1] startv
    cdef cnp.int64_t[::1] orderv
    if use_grid:
        lo, h, dims, start, order = _build_grid(r)
        lx, ly, lz = float(lo[0]), float(lo[1]), float(lo[2])
        nx, ny, nz = int(dims[0]), int(dims[1]), int(dims[2])
        startv = start
        orderv = order
    else:
        startv = np.zeros(1, dtype=np.int64)
        orderv = np.zeros(1, dtype=np.int64)

    cdef Py_ssize_t i, t
    cdef long cx, cy, cz, L, mr, ax, ay, az, cid
    cdef cnp.int64_t j, bj
    cdef double dx, dy, dz, d2, d, best, lb, rmax, ux, uy, uz, ca, bca
    with nogil:
        for i in range(nq):
            if d1v[i] <= 0.0:
                continue
            ux = (rv[i1v[i], 0] - qv[i, 0]) / d1v[i]
            uy = (rv[i1v[i], 1] - qv[i, 1]) / d1v[i]
            uz = (rv[i1v[i], 2] - qv[i, 2]) / d1v[i]
            rmax = dmax_factor * d1v[i]
            best = INFINITY
            bj = -1
            bca = 0.0
            if not use_grid:
                for j in range(nr):
                    dx = rv[j, 0] - qv[i, 0]
                    dy = rv[j, 1] - qv[i, 1]
                    dz = rv[j, 2] - qv[i, 2]
                    d2 = dx * dx + dy * dy + dz * dz
                    if d2 == 0.0 or d2 > rmax * rmax or d2 >= best:
                        if not (d2 == best and j < bj):
                            continue
                    d = sqrt(d2)
                    ca = (dx * ux + dy * uy + dz * uz) / d
                    if ca <= cos_thresh:
                        if d2 < best or (d2 == best and j < bj):
                            best = d2
                            bj = j
                            bca = ca
            else:
                cx = _clampl(<long>((qv[i, 0] - lx) / h), 0, nx - 1)
                cy = _clampl(<long>((qv[i, 1] - ly) / h), 0, ny - 1)
                cz = _clampl(<long>((qv[i, 2] - lz) / h), 0, nz - 1)
                mr = _maxl(_maxl(nx, ny), nz)
                for L in range(0, mr + 1):
                    if L >= 1:
                        lb = (L - 1) * h
                        if lb > rmax:
                            break
                        if bj >= 0 and best <= lb * lb:
                            break
                    for ax in range(_clampl(cx - L, 0, nx - 1), _clampl(cx + L, 0, nx - 1) + 1):
                        for ay in range(_clampl(cy - L, 0, ny - 1), _clampl(cy + L, 0, ny - 1) + 1):
                            for az in range(_clampl(cz - L, 0, nz - 1), _clampl(cz + L, 0, nz - 1) + 1):
                                if _maxl(_maxl(_absl(ax - cx), _absl(ay - cy)), _absl(az - cz)) != L:
                                    continue
                                cid = (ax * ny + ay) * nz + az
                                for t in range(startv[cid], startv[cid + 1]):
                                    j = orderv[t]
                                    dx = rv[j, 0] - qv[i, 0]
                                    dy = rv[j, 1] - qv[i, 1]
                                    dz = rv[j, 2] - qv[i, 2]
                                    d2 = dx * dx + dy * dy + dz * dz
                                    if d2 == 0.0 or d2 > rmax * rmax:
                                        continue
                                    if d2 > best or (d2 == best and j >= bj and bj >= 0):
                                        continue
                                    d = sqrt(d2)
                                    ca = (dx * ux + dy * uy + dz * uz) / d
                                    if ca <= cos_thresh:
                                        best = d2
                                        bj = j
                                        bca = ca
            if bj >= 0:
                i2v[i] = bj
                d2v[i] = sqrt(best)
                c12v[i] = bca
    return i1, d1, i2, d2a, cos12


def knn(points, long k):
    """Indices of the k nearest neighbors (self excluded) per point, rows
    sorted by (distance, index) ascending."""
    p = np.ascontiguousarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValueError("expected an (n, 3) array")
    cdef Py_ssize_t m = p.shape[0]
    if not 1 <= k <= m - 1:
        raise ValueError("k must be in [1, n_points - 1]")
    out = np.empty((m, k), dtype=np.int64)
    dbuf = np.empty(k, dtype=np.float64)
    cdef double[:, ::1] pv = p
    cdef cnp.int64_t[:, ::1] ov = out
    cdef double[::1] dv = dbuf
    cdef Py_ssize_t i, j, t, pos, filled
    cdef double dx, dy, dz, d2
    with nogil:
        for i in range(m):
            filled = 0
            for j in range(m):
                if j == i:
                    continue
                dx = pv[i, 0] - pv[j, 0]
                dy = pv[i, 1] - pv[j, 1]
                dz = pv[i, 2] - pv[j, 2]
                d2 = dx * dx + dy * dy + dz * dz
                if filled == k and d2 >= dv[k - 1]:
                    continue
                # insertion position: after entries with smaller (d2, idx)
                pos = filled if filled < k else k - 1
                while pos > 0 and dv[pos - 1] > d2:
                    pos -= 1
                if filled < k:
                    filled += 1
                for t in range(filled - 1, pos, -1):
                    dv[t] = dv[t - 1]
                    ov[i, t] = ov[i, t - 1]
                dv[pos] = d2
                ov[i, pos] = j
    return out
