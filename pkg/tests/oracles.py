"""Slow, direct re-implementations used as test oracles.

Nothing here imports the code paths being checked: connectivity is plain
depth-first search over explicitly listed edges, labels follow the
three-case recursion literally, fractal questions are answered by brute force.
"""
from __future__ import annotations

import itertools


# ---------------------------------------------------------------------------
# connectivity

def open_neighbours(h_open, v_open, a, c):
    """Adjacency dict of a rectangle with h_open[x-a, y-c] / v_open[x-a, y-c] edge states."""
    W, H = len(h_open), len(h_open[0])
    adj = {(x, y): [] for x in range(a, a + W + 1) for y in range(c, c + H + 1)}
    for dx in range(W):
        for dy in range(H):
            x, y = a + dx, c + dy
            if h_open[dx][dy]:
                adj[(x, y)].append((x + 1, y))
                adj[(x + 1, y)].append((x, y))
            if v_open[dx][dy]:
                adj[(x, y)].append((x, y + 1))
                adj[(x, y + 1)].append((x, y))
    return adj


def reachable(adj, sources):
    seen = set(sources)
    stack = list(sources)
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def has_simple_path(adj, s, t):
    """Exhaustive simple-path search (exponential; tiny graphs only)."""
    def walk(u, visited):
        if u == t:
            return True
        return any(walk(w, visited | {w}) for w in adj[u] if w not in visited)
    return walk(s, {s})


def remainder_by_paths(h_open, v_open, a, b, c, d, S):
    adj = open_neighbours(h_open, v_open, a, c)
    return frozenset(y for y in range(c, d + 1)
                     if any(has_simple_path(adj, (a, s), (b, y)) for s in S))


def remainder_by_search(h_open, v_open, a, b, c, d, S):
    adj = open_neighbours(h_open, v_open, a, c)
    seen = reachable(adj, [(a, s) for s in S])
    return frozenset(y for y in range(c, d + 1) if (b, y) in seen)


# ---------------------------------------------------------------------------
# labels

def labels(xi, L, K):
    """H[k][i], B[k][i] from the three-case recursion, one parent at a time."""
    H = [list(int(v) for v in xi)]
    B = [[0] * len(xi)]
    for k in range(K):
        h_next, b_next = [], []
        for i in range(len(H[k]) // L):
            ch = H[k][i * L:(i + 1) * L]
            cb = B[k][i * L:(i + 1) * L]
            bad = [t for t in range(L) if ch[t] > 0]
            if not bad:
                h, b = 0, 0
            elif len(bad) == 1:
                h = ch[bad[0]] - 1
                b = cb[bad[0]] if h > 0 else 0
            else:
                h = 1 + sum(ch[t] for t in bad)
                b = k + 1
            h_next.append(h)
            b_next.append(b)
        H.append(h_next)
        B.append(b_next)
    return H, B


# ---------------------------------------------------------------------------
# fractals

def is_fractal(S, k, H, L, branching):
    """Definition by brute force: try every split of S into ordered sub-fractals."""
    S = sorted(S)
    if len(S) != branching ** k:
        return False
    if k == 0:
        return H[0][S[0]] == 0
    n = L ** k
    if any(H[k][s // n] != 0 for s in S):
        return False
    size = branching ** (k - 1)
    m = L ** (k - 1)
    for parts in _splits(S, branching, size):
        idx = [sorted({s // m for s in P}) for P in parts]
        if all(idx[t][0] > idx[t - 1][-1] for t in range(1, branching)) and \
                all(is_fractal(P, k - 1, H, L, branching) for P in parts):
            return True
    return False


def _splits(S, count, size):
    if count == 0:
        if not S:
            yield []
        return
    for first in itertools.combinations(S, size):
        rest = [s for s in S if s not in first]
        for tail in _splits(rest, count - 1, size):
            yield [list(first)] + tail


def max_ordered_fractals(T, k, H, L, branching):
    """Longest chain of k-fractals inside T whose scale-k intervals strictly increase."""
    n = L ** k
    fractals = [F for F in itertools.combinations(sorted(T), branching ** k)
                if is_fractal(F, k, H, L, branching)]
    spans = sorted({(min(s // n for s in F), max(s // n for s in F)) for F in fractals})
    best = {}
    for lo, hi in spans:
        prev = [v for (l2, h2), v in best.items() if h2 < lo]
        best[(lo, hi)] = max(best.get((lo, hi), 0), 1 + max(prev, default=0))
    return max(best.values(), default=0)


# ---------------------------------------------------------------------------
# oriented lattice

def oriented_reached(up, down, site_open, i0, j0, starts):
    """Forward search over an oriented sample; start sites count whatever their state."""
    cols, rows = len(up), len(up[0])
    frontier = set(starts)
    for c in range(cols):
        nxt = set()
        for j in frontier:
            r = j - j0
            if r + 1 < rows and up[c][r] and site_open[c + 1][r + 1]:
                nxt.add(j + 1)
            if r - 1 >= 0 and down[c][r] and site_open[c + 1][r - 1]:
                nxt.add(j - 1)
        frontier = nxt
    return frontier
