"""Slow, independently written reference implementations used as test oracles.

Everything here works on plain Python lists with explicit loops so that it
shares no code path with the vectorised estimators under test.
"""

import math
from collections import Counter
from itertools import combinations

from scipy.special import digamma


def _mean(v):
    return sum(v) / len(v)


def pearson(x, y):
    n = len(x)
    if n < 2 or len(set(x)) == 1 or len(set(y)) == 1:
        return None
    mx, my = _mean(x), _mean(y)
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def kendall(x, y):
    n = len(x)
    if n < 2:
        return None
    s = 0
    for i, j in combinations(range(n), 2):
        a = (x[i] > x[j]) - (x[i] < x[j])
        b = (y[i] > y[j]) - (y[i] < y[j])
        s += a * b
    return s / (n * (n - 1) / 2)


def average_ranks(v):
    order = sorted(range(len(v)), key=lambda i: v[i])
    ranks = [0.0] * len(v)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and v[order[j + 1]] == v[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(x, y):
    if len(x) < 2:
        return None
    return pearson(average_ranks(x), average_ranks(y))


def _centred(v):
    n = len(v)
    d = [[abs(a - b) for b in v] for a in v]
    row = [sum(r) / n for r in d]
    grand = sum(row) / n
    return [[d[i][j] - row[i] - row[j] + grand for j in range(n)] for i in range(n)]


def dcor(x, y):
    """Normalised distance correlation from explicit double-centred matrices."""
    n = len(x)
    if n < 2 or len(set(x)) == 1 or len(set(y)) == 1:
        return None
    a, b = _centred(x), _centred(y)
    ab = math.fsum(a[i][j] * b[i][j] for i in range(n) for j in range(n)) / n ** 2
    aa = math.fsum(a[i][j] ** 2 for i in range(n) for j in range(n)) / n ** 2
    bb = math.fsum(b[i][j] ** 2 for i in range(n) for j in range(n)) / n ** 2
    return math.sqrt(max(ab, 0.0) / math.sqrt(aa * bb))


def _entropy(counter, n):
    return -sum(c / n * math.log2(c / n) for c in counter.values())


def discrete_mi(x, y):
    n = len(x)
    h = _entropy(Counter(x), n) + _entropy(Counter(y), n) - _entropy(Counter(zip(x, y)), n)
    return max(h, 0.0)


def ksg(x, y, k=3):
    """Kraskov estimator (algorithm 1, max-norm) in bits, strict-inequality counts."""
    n = len(x)
    total = 0.0
    for i in range(n):
        dists = sorted(max(abs(x[i] - x[j]), abs(y[i] - y[j])) for j in range(n) if j != i)
        eps = dists[k - 1]
        nx = sum(1 for j in range(n) if j != i and abs(x[i] - x[j]) < eps)
        ny = sum(1 for j in range(n) if j != i and abs(y[i] - y[j]) < eps)
        total += digamma(nx + 1) + digamma(ny + 1)
    return (digamma(k) + digamma(n) - total / n) / math.log(2)


def ksg_tiebroken(x, y, k=3, seed=20160901, scale=1e-10):
    """KSG with the package's tie-breaking convention, averaged over both noise roles."""
    import numpy as np

    rng = np.random.default_rng(seed)
    u = [float(a) - 0.5 for a in rng.random(len(x))]
    v = [float(a) - 0.5 for a in rng.random(len(x))]
    sx = scale * max(1.0, max(abs(a) for a in x))
    sy = scale * max(1.0, max(abs(b) for b in y))
    one = ksg([a + sx * e for a, e in zip(x, u)], [b + sy * e for b, e in zip(y, v)], k)
    two = ksg([a + sx * e for a, e in zip(x, v)], [b + sy * e for b, e in zip(y, u)], k)
    return 0.5 * (one + two)


def equipartition(values, nbins):
    """Bins of sorted distinct values with near-equal mass; ties stay together.

    Walks the distinct values in order and opens a new bin when adding the
    next tie group would move the current bin further from its target.
    """
    counts = sorted(Counter(values).items())
    total = len(values)
    target = total / nbins
    assign = {}
    b, cur, done = 0, 0, 0
    for v, c in counts:
        if cur > 0 and b < nbins - 1 and abs(cur + c - target) >= abs(cur - target):
            b += 1
            target = (total - done) / (nbins - b)
            cur = 0
        assign[v] = b
        cur += c
        done += c
    return assign, b + 1


def _mi_codes(a, b):
    n = len(a)
    return _entropy(Counter(a), n) + _entropy(Counter(b), n) - _entropy(Counter(zip(a, b)), n)


def mic(x, y, exponent=0.6, min_bound=5):
    """Exhaustive search over every contiguous partition of the free axis."""
    n = len(x)
    if n < 4:
        return None
    if len(set(x)) == 1 or len(set(y)) == 1:
        return 0.0
    bound = max(math.ceil(n ** exponent), min_bound)
    best = 0.0
    for a, b in ((x, y), (y, x)):
        distinct = sorted(set(a))
        for ny in range(2, bound):
            assign, used = equipartition(b, ny)
            if used < 2:
                continue
            q = [assign[v] for v in b]
            for nx in range(2, bound):
                if nx * ny >= bound:
                    break
                # choose nx - 1 cut positions between consecutive distinct values
                for cuts in combinations(range(1, len(distinct)), nx - 1):
                    edges = (0,) + cuts + (len(distinct),)
                    cell = {}
                    for c in range(nx):
                        for v in distinct[edges[c]:edges[c + 1]]:
                            cell[v] = c
                    mi = _mi_codes([cell[v] for v in a], q)
                    best = max(best, max(mi, 0.0) / math.log2(min(nx, used)))
    return min(best, 1.0)


def value_iteration_chain(n_states, gamma, reward_at_end=1.0, sweeps=2000):
    """Optimal Q for the deterministic chain used in the RL tests.

    Actions: 0 moves left (floor at 0), 1 moves right; reaching the last
    state pays ``reward_at_end`` and the agent stays there.
    """
    q = [[0.0, 0.0] for _ in range(n_states)]
    for _ in range(sweeps):
        new = [[0.0, 0.0] for _ in range(n_states)]
        for s in range(n_states):
            for a in (0, 1):
                s2 = max(s - 1, 0) if a == 0 else min(s + 1, n_states - 1)
                r = reward_at_end if s2 == n_states - 1 else 0.0
                new[s][a] = r + gamma * max(q[s2])
        q = new
    return q
