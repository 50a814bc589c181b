# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled counterparts of ``mutinf._pykernels``; same signatures, same arithmetic."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


def kendall_score(const double[::1] x, const double[::1] y):
    cdef Py_ssize_t n = x.shape[0], i, j
    cdef long long total = 0
    cdef double dx, dy
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if (dx > 0 and dy > 0) or (dx < 0 and dy < 0):
                total += 1
            elif (dx > 0 and dy < 0) or (dx < 0 and dy > 0):
                total -= 1
    return total


cdef void _row_means(const double[::1] v, double* out) nogil:
    cdef Py_ssize_t n = v.shape[0], i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += fabs(v[i] - v[j])
        out[i] = s / n


def dcov_sums(const double[::1] x, const double[::1] y):
    cdef Py_ssize_t n = x.shape[0], i, j
    cdef double* ra = <double*> malloc(n * sizeof(double))
    cdef double* rb = <double*> malloc(n * sizeof(double))
    cdef double ga = 0.0, gb = 0.0, A, B, sab = 0.0, saa = 0.0, sbb = 0.0
    if ra == NULL or rb == NULL:
        free(ra)
        free(rb)
        raise MemoryError()
    with nogil:
        _row_means(x, ra)
        _row_means(y, rb)
        for i in range(n):
            ga += ra[i]
            gb += rb[i]
        ga /= n
        gb /= n
        for i in range(n):
            for j in range(n):
                A = fabs(x[i] - x[j]) - ra[i] - ra[j] + ga
                B = fabs(y[i] - y[j]) - rb[i] - rb[j] + gb
                sab += A * B
                saa += A * A
                sbb += B * B
    free(ra)
    free(rb)
    return sab, saa, sbb


def ksg_counts(const double[::1] x, const double[::1] y, int k):
    cdef Py_ssize_t n = x.shape[0], i, j, m
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nx = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ny = np.empty(n, dtype=np.int64)
    cdef double* best = <double*> malloc(k * sizeof(double))
    cdef double d, dx, dy, eps
    cdef long long cx, cy
    if best == NULL:
        raise MemoryError()
    for i in range(n):
        # k smallest joint distances kept sorted ascending
        for m in range(k):
            best[m] = INFINITY
        for j in range(n):
            if j == i:
                continue
            dx = fabs(x[i] - x[j])
            dy = fabs(y[i] - y[j])
            d = dx if dx > dy else dy
            if d < best[k - 1]:
                m = k - 1
                while m > 0 and best[m - 1] > d:
                    best[m] = best[m - 1]
                    m -= 1
                best[m] = d
        eps = best[k - 1]
        cx = 0
        cy = 0
        for j in range(n):
            if j == i:
                continue
            if fabs(x[i] - x[j]) < eps:
                cx += 1
            if fabs(y[i] - y[j]) < eps:
                cy += 1
        nx[i] = cx
        ny[i] = cy
    free(best)
    return nx, ny


def equipartition(const long long[::1] group_sizes, long long nbins):
    cdef Py_ssize_t g, ng = group_sizes.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(ng, dtype=np.int64)
    cdef long long total = 0, b = 0, current = 0, assigned = 0, s
    cdef double desired
    for g in range(ng):
        total += group_sizes[g]
    desired = <double> total / nbins
    for g in range(ng):
        s = group_sizes[g]
        if current > 0 and b < nbins - 1 and fabs(current + s - desired) >= fabs(current - desired):
            b += 1
            desired = <double> (total - assigned) / (nbins - b)
            current = 0
        out[g] = b
        current += s
        assigned += s
    return out, b + 1


def mic_dp(const long long[:, ::1] prefix, const double[::1] xlogx, long long max_bins):
    cdef Py_ssize_t k = prefix.shape[0] - 1, ny = prefix.shape[1]
    cdef Py_ssize_t i, j, q, l
    cdef long long c, m
    cdef double s, v
    cdef cnp.ndarray[cnp.float64_t, ndim=2] score_arr = np.full((k + 1, k + 1), -np.inf)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_arr = np.full(max_bins + 1, -np.inf)
    cdef double[:, ::1] score = score_arr
    cdef double[::1] best = best_arr
    cdef double* f = <double*> malloc((k + 1) * sizeof(double))
    cdef double* g = <double*> malloc((k + 1) * sizeof(double))
    cdef double* tmp
    if f == NULL or g == NULL:
        free(f)
        free(g)
        raise MemoryError()
    with nogil:
        for i in range(k + 1):
            for j in range(i + 1, k + 1):
                s = 0.0
                m = 0
                for q in range(ny):
                    c = prefix[j, q] - prefix[i, q]
                    s += xlogx[c]
                    m += c
                score[i, j] = s - xlogx[m]
        for j in range(k + 1):
            f[j] = score[0, j]
        if max_bins >= 1:
            best[1] = f[k]
        for l in range(2, max_bins + 1):
            if l > k:
                break
            for j in range(k + 1):
                v = -INFINITY
                for i in range(j):
                    s = f[i] + score[i, j]
                    if s > v:
                        v = s
                g[j] = v
            tmp = f
            f = g
            g = tmp
            best[l] = f[k]
    free(f)
    free(g)
    return best_arr


cdef bint _segment_hits_box(double ox, double oy, double dx, double dy,
                            double xmin, double ymin, double xmax, double ymax) nogil:
    cdef double tmin = 0.0, tmax = 1.0, t1, t2, tmp
    if dx == 0.0:
        if ox < xmin or ox > xmax:
            return False
    else:
        t1 = (xmin - ox) / dx
        t2 = (xmax - ox) / dx
        if t1 > t2:
            tmp = t1
            t1 = t2
            t2 = tmp
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
    if dy == 0.0:
        if oy < ymin or oy > ymax:
            return False
    else:
        t1 = (ymin - oy) / dy
        t2 = (ymax - oy) / dy
        if t1 > t2:
            tmp = t1
            t1 = t2
            t2 = tmp
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
    return tmin <= tmax


def scn_visibility(const double[::1] cam_x, const double[::1] cam_y,
                   const double[::1] ux, const double[::1] uy,
                   const double[::1] cos_half, const double[::1] r_near,
                   const double[::1] r_far, const double[::1] tx,
                   const double[::1] ty, const double[:, ::1] pillars):
    cdef Py_ssize_t n_c = cam_x.shape[0], n_t = tx.shape[0], n_p = pillars.shape[0]
    cdef Py_ssize_t c, t, p
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] vis_arr = np.zeros((n_c, n_t), dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rewards = np.zeros(n_c, dtype=np.int64)
    cdef cnp.uint8_t[:, ::1] vis = vis_arr
    cdef double dx, dy, d
    cdef bint ok
    cdef long long cnt
    with nogil:
        for c in range(n_c):
            for t in range(n_t):
                dx = tx[t] - cam_x[c]
                dy = ty[t] - cam_y[c]
                d = sqrt(dx * dx + dy * dy)
                if d < r_near[c] or d > r_far[c]:
                    continue
                if dx * ux[c] + dy * uy[c] < d * cos_half[c]:
                    continue
                ok = True
                for p in range(n_p):
                    if _segment_hits_box(cam_x[c], cam_y[c], dx, dy, pillars[p, 0],
                                         pillars[p, 1], pillars[p, 2], pillars[p, 3]):
                        ok = False
                        break
                if ok:
                    vis[c, t] = 1
        for t in range(n_t):
            cnt = 0
            for c in range(n_c):
                cnt += vis[c, t]
            if cnt >= 2:
                for c in range(n_c):
                    rewards[c] += vis[c, t]
    return rewards, vis_arr
