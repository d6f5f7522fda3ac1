"""Independent brute-force reference implementations used only by the tests.

Nothing here imports from pqcorr: each oracle recomputes from first principles
so it cannot share a bug with the code it checks.
"""

import itertools
import math

import numpy as np


def brute_ranks(x):
    """rank_i = #(x_j < x_i) + (#(x_j == x_i) + 1) / 2, the average-rank convention."""
    x = np.asarray(x, dtype=float)
    less = (x[None, :] < x[:, None]).sum(axis=1)
    equal = (x[None, :] == x[:, None]).sum(axis=1)
    return less + (equal + 1) / 2.0


def sort_position_ranks(x):
    """Stable sort then average the 1-based positions of each tie run."""
    order = sorted(range(len(x)), key=lambda i: x[i])
    ranks = [0.0] * len(x)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and x[order[j + 1]] == x[order[i]]:
            j += 1
        avg = (i + 1 + j + 1) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def fsum_pearson(x, y):
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def brute_spearman(x, y):
    return fsum_pearson(brute_ranks(x), brute_ranks(y))


def brute_fisher(rs, eps=1e-7):
    vals = [min(1 - eps, max(-(1 - eps), r)) for r in rs if r is not None]
    if not vals:
        return None
    return math.tanh(math.fsum(math.atanh(v) for v in vals) / len(vals))


def brute_upgma(D):
    """Exhaustive average linkage from the ORIGINAL distances at every step.

    Returns [(rep_a, rep_b, height, size)] where reps are smallest leaf indices.
    Ties go to the lexicographically smallest (rep_a, rep_b).
    """
    D = np.asarray(D, dtype=float)
    clusters = [[i] for i in range(len(D))]
    out = []
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(range(len(clusters)), 2):
            ca, cb = clusters[a], clusters[b]
            avg = math.fsum(D[i, j] for i in ca for j in cb) / (len(ca) * len(cb))
            key = (avg, min(ca), min(cb))
            if best is None or key < best[0]:
                best = (key, a, b)
        (h, ra, rb), a, b = best
        merged = sorted(clusters[a] + clusters[b])
        out.append((min(ra, rb), max(ra, rb), h, len(merged)))
        clusters = [c for k, c in enumerate(clusters) if k not in (a, b)] + [merged]
        clusters.sort(key=min)
    return out


def pairwise_distances(X):
    X = np.asarray(X, dtype=float)
    n = len(X)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            D[i, j] = math.sqrt(math.fsum((X[i, k] - X[j, k]) ** 2 for k in range(X.shape[1])))
    return D


def direct_stress(D, coords):
    n = len(D)
    num, den = [], []
    for i in range(n):
        for j in range(i + 1, n):
            dh = math.sqrt(math.fsum((coords[i][k] - coords[j][k]) ** 2 for k in range(len(coords[i]))))
            num.append((D[i][j] - dh) ** 2)
            den.append(D[i][j] ** 2)
    return math.sqrt(math.fsum(num) / math.fsum(den))


def naive_counts(stack, tau, sense):
    M, n, _ = stack.shape
    out = np.zeros((n, n), dtype=int)
    for k in range(M):
        for i in range(n):
            for j in range(n):
                r = stack[k, i, j]
                if r != r:
                    continue
                if sense == "positive" and r >= tau:
                    out[i, j] += 1
                elif sense == "negative" and r <= -tau:
                    out[i, j] += 1
                elif sense == "absolute" and abs(r) >= tau:
                    out[i, j] += 1
    return out


def adjusted_rand(a, b):
    """Adjusted Rand index from the contingency table."""
    a, b = list(a), list(b)
    n = len(a)
    pairs = lambda m: m * (m - 1) / 2
    table = {}
    for x, y in zip(a, b):
        table[(x, y)] = table.get((x, y), 0) + 1
    rows, cols = {}, {}
    for (x, y), c in table.items():
        rows[x] = rows.get(x, 0) + c
        cols[y] = cols.get(y, 0) + c
    index = sum(pairs(c) for c in table.values())
    ra = sum(pairs(c) for c in rows.values())
    rb = sum(pairs(c) for c in cols.values())
    expected = ra * rb / pairs(n)
    maximum = (ra + rb) / 2
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)
