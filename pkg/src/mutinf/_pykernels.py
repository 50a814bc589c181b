"""Pure-Python/numpy implementations of the hot kernels.

These define the reference semantics. ``_ckernels.pyx`` mirrors every
function here with the same arithmetic so both backends agree to rounding.
"""


import numpy as np

_CHUNK = 512


def kendall_score(x, y):
    """Return ``#concordant - #discordant`` over all pairs ``i < j``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    total = 0
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        sx = np.sign(x[start:stop, None] - x[None, :])
        sy = np.sign(y[start:stop, None] - y[None, :])
        prod = (sx * sy).astype(np.int64)
        # keep only j > i
        rows = np.arange(start, stop)[:, None]
        cols = np.arange(n)[None, :]
        total += int(prod[cols > rows].sum())
    return total


def _row_means(v):
    n = v.shape[0]
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        out[start:stop] = np.abs(v[start:stop, None] - v[None, :]).mean(axis=1)
    return out


def dcov_sums(x, y):
    """Sums of A*B, A*A and B*B over the double-centred distance matrices."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    ra = _row_means(x)
    rb = _row_means(y)
    ga = ra.mean()
    gb = rb.mean()
    sab = saa = sbb = 0.0
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        a = np.abs(x[start:stop, None] - x[None, :])
        b = np.abs(y[start:stop, None] - y[None, :])
        A = a - ra[start:stop, None] - ra[None, :] + ga
        B = b - rb[start:stop, None] - rb[None, :] + gb
        sab += float((A * B).sum())
        saa += float((A * A).sum())
        sbb += float((B * B).sum())
    return sab, saa, sbb


def ksg_counts(x, y, k):
    """Marginal neighbour counts for the Kraskov estimator (algorithm 1).

    For each point the max-norm distance ``eps`` to its k-th neighbour in the
    joint space is found; ``nx[i]`` counts points ``j != i`` with
    ``|x_i - x_j| < eps`` and ``ny`` likewise.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    nx = np.empty(n, dtype=np.int64)
    ny = np.empty(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        dx = np.abs(x[start:stop, None] - x[None, :])
        dy = np.abs(y[start:stop, None] - y[None, :])
        idx = np.arange(stop - start)
        dx[idx, idx + start] = np.inf
        dy[idx, idx + start] = np.inf
        d = np.maximum(dx, dy)
        eps = np.partition(d, k - 1, axis=1)[:, k - 1]
        nx[start:stop] = (dx < eps[:, None]).sum(axis=1)
        ny[start:stop] = (dy < eps[:, None]).sum(axis=1)
    return nx, ny


def equipartition(group_sizes, nbins):
    """Assign consecutive tie groups to at most ``nbins`` bins of near-equal mass.

    Returns ``(group_bin, n_used)``. A tie group is never split; a new bin is
    opened when adding the next group would move the current bin further from
    its target size than leaving it as is.
    """
    group_sizes = np.asarray(group_sizes, dtype=np.int64)
    total = int(group_sizes.sum())
    out = np.empty(group_sizes.shape[0], dtype=np.int64)
    b = 0
    current = 0
    assigned = 0
    desired = total / nbins
    for g in range(group_sizes.shape[0]):
        s = int(group_sizes[g])
        if current > 0 and b < nbins - 1 and abs(current + s - desired) >= abs(current - desired):
            b += 1
            desired = (total - assigned) / (nbins - b)
            current = 0
        out[g] = b
        current += s
        assigned += s
    return out, b + 1


def mic_dp(prefix, xlogx, max_bins):
    """Best partition scores of ``k`` ordered cells into exactly ``l`` bins.

    ``prefix`` is the ``(k+1, ny)`` cumulative count matrix of the cells over
    the fixed partition of the other axis, ``xlogx[c] = c*log2(c)``. A bin
    spanning cells ``i..j-1`` scores ``sum_q xlogx[c_q] - xlogx[m]`` (``-m``
    times its conditional entropy). Returns ``best[l]`` for ``l = 0..max_bins``
    with ``-inf`` where no partition exists.
    """
    prefix = np.asarray(prefix, dtype=np.int64)
    xlogx = np.asarray(xlogx, dtype=np.float64)
    k = prefix.shape[0] - 1
    counts = prefix[None, :, :] - prefix[:, None, :]
    upper = np.triu(np.ones((k + 1, k + 1), dtype=bool), 1)
    counts = np.where(upper[:, :, None], counts, 0)
    score = xlogx[counts].sum(axis=2) - xlogx[counts.sum(axis=2)]
    score = np.where(upper, score, -np.inf)
    best = np.full(max_bins + 1, -np.inf)
    f = score[0].copy()
    best[1] = f[k]
    for l in range(2, max_bins + 1):
        if l > k:
            break
        f = (f[:, None] + score).max(axis=0)
        best[l] = f[k]
    return best


def scn_visibility(cam_x, cam_y, ux, uy, cos_half, r_near, r_far, tx, ty, pillars):
    """Visibility matrix (cameras x targets) and the at-least-two-cameras rewards."""
    cam_x = np.asarray(cam_x, dtype=np.float64)
    cam_y = np.asarray(cam_y, dtype=np.float64)
    tx = np.asarray(tx, dtype=np.float64)
    ty = np.asarray(ty, dtype=np.float64)
    pillars = np.asarray(pillars, dtype=np.float64).reshape(-1, 4)
    n_c = cam_x.shape[0]
    n_t = tx.shape[0]
    if n_t == 0:
        return np.zeros(n_c, dtype=np.int64), np.zeros((n_c, 0), dtype=np.uint8)
    dx = tx[None, :] - cam_x[:, None]
    dy = ty[None, :] - cam_y[:, None]
    d = np.sqrt(dx * dx + dy * dy)
    dot = dx * np.asarray(ux)[:, None] + dy * np.asarray(uy)[:, None]
    vis = (
        (d >= np.asarray(r_near)[:, None])
        & (d <= np.asarray(r_far)[:, None])
        & (dot >= d * np.asarray(cos_half)[:, None])
    )
    for xmin, ymin, xmax, ymax in pillars:
        vis &= ~_segment_hits_box(cam_x[:, None], cam_y[:, None], dx, dy, xmin, ymin, xmax, ymax)
    counts = vis.sum(axis=0)
    rewards = (vis & (counts >= 2)[None, :]).sum(axis=1).astype(np.int64)
    return rewards, vis.astype(np.uint8)


def _segment_hits_box(ox, oy, dx, dy, xmin, ymin, xmax, ymax):
    ox = np.broadcast_to(ox, dx.shape)
    oy = np.broadcast_to(oy, dy.shape)
    tmin = np.zeros(dx.shape)
    tmax = np.ones(dx.shape)
    hit = np.ones(dx.shape, dtype=bool)
    for o, dv, lo, hi in ((ox, dx, xmin, xmax), (oy, dy, ymin, ymax)):
        flat = dv == 0.0
        hit &= ~(flat & ((o < lo) | (o > hi)))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - o) / dv
            t2 = (hi - o) / dv
        lo_t = np.where(flat, -np.inf, np.minimum(t1, t2))
        hi_t = np.where(flat, np.inf, np.maximum(t1, t2))
        tmin = np.maximum(tmin, lo_t)
        tmax = np.minimum(tmax, hi_t)
    return hit & (tmin <= tmax)
