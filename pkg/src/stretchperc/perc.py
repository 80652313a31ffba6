"""Quenched bond percolation on rectangles of the stretched lattice.

A rectangle ``Rectangle(a, b, c, d)`` stands for ``[a, b) x [c, d)`` together
with its right and top faces: its sites are ``[a, b] x [c, d]`` and its edges
are the right and up edges of the sites in ``[a, b) x [c, d)``.  Two
rectangles that tile the plane therefore never share an edge.

Edge states come from uniforms hashed on (seed, edge coordinates), so the
sample of a sub-rectangle agrees with the sample of any enclosing rectangle
drawn with the same seed, and samples at different ``p`` are coupled.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import rng
from .env import Environment
from .errors import GeometryError, ParameterError, PreconditionError, ResourceError, WindowError

_TAG_H = rng.tag_value("edge-h")
_TAG_V = rng.tag_value("edge-v")
SMALL_SITES = 2048  # below this many sites the pure union-find is used


@dataclass(frozen=True)
class Rectangle:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if not (self.a < self.b and self.c < self.d):
            raise GeometryError(f"degenerate rectangle {self}")

    @property
    def width(self) -> int:
        return self.b - self.a

    @property
    def height(self) -> int:
        return self.d - self.c

    @property
    def n_edges(self) -> int:
        return 2 * self.width * self.height

    @property
    def n_sites(self) -> int:
        return (self.width + 1) * (self.height + 1)

    def contains_rect(self, other: "Rectangle") -> bool:
        return self.a <= other.a and other.b <= self.b and self.c <= other.c and other.d <= self.d

    def edges(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """All edges, horizontal ones first, each as (lower-left end, other end)."""
        xs, ys = range(self.a, self.b), range(self.c, self.d)
        horiz = [((x, y), (x + 1, y)) for x in xs for y in ys]
        vert = [((x, y), (x, y + 1)) for x in xs for y in ys]
        return horiz + vert

    def face(self, side: str) -> list[tuple[int, int]]:
        if side == "left":
            return [(self.a, y) for y in range(self.c, self.d + 1)]
        if side == "right":
            return [(self.b, y) for y in range(self.c, self.d + 1)]
        if side == "bottom":
            return [(x, self.c) for x in range(self.a, self.b + 1)]
        if side == "top":
            return [(x, self.d) for x in range(self.a, self.b + 1)]
        raise ParameterError(f"unknown face {side!r}")

    def site_index(self, x, y):
        return (np.asarray(x) - self.a) * (self.height + 1) + (np.asarray(y) - self.c)

    def transposed(self) -> "Rectangle":
        return Rectangle(self.c, self.d, self.a, self.b)


def _check_inside(env: Environment, rect: Rectangle):
    env.gaps_x(rect.a, rect.b)
    env.gaps_y(rect.c, rect.d)


def edge_probabilities(env: Environment, p: float, rect: Rectangle) -> tuple[np.ndarray, np.ndarray]:
    """Open probabilities of the horizontal and vertical edges, shape (width, height)."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    px = float(p) ** (env.gaps_x(rect.a, rect.b) + 1.0)
    py = float(p) ** (env.gaps_y(rect.c, rect.d) + 1.0)
    shape = (rect.width, rect.height)
    return np.broadcast_to(px[:, None], shape), np.broadcast_to(py[None, :], shape)


def edge_uniforms(seed, rect: Rectangle) -> tuple[np.ndarray, np.ndarray]:
    """Hashed uniforms of the rectangle's edges.

    ``seed`` is an integer or a 1-d array of per-trial seeds; in the latter case
    the result has a leading trial axis.
    """
    seed = np.asarray(seed, dtype=np.uint64)
    x = np.arange(rect.a, rect.b)[:, None]
    y = np.arange(rect.c, rect.d)[None, :]
    if seed.ndim:
        seed = seed[:, None, None]
    return rng.uniforms(seed, _TAG_H, x, y), rng.uniforms(seed, _TAG_V, x, y)


@dataclass(frozen=True, eq=False)
class PercSample:
    """Edge states of a rectangle: ``h_open[x-a, y-c]`` for the edge (x,y)-(x+1,y),
    ``v_open[x-a, y-c]`` for (x,y)-(x,y+1)."""

    rect: Rectangle
    h_open: np.ndarray
    v_open: np.ndarray
    p: float | None = None
    seed: int | None = None
    env: Environment | None = None

    def __post_init__(self):
        shape = (self.rect.width, self.rect.height)
        for name in ("h_open", "v_open"):
            arr = np.array(getattr(self, name), dtype=bool)
            if arr.shape != shape:
                raise GeometryError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def restrict(self, rect: Rectangle) -> "PercSample":
        """The same sample seen through a sub-rectangle."""
        if not self.rect.contains_rect(rect):
            raise WindowError(f"{rect} is not inside {self.rect}")
        xs = slice(rect.a - self.rect.a, rect.b - self.rect.a)
        ys = slice(rect.c - self.rect.c, rect.d - self.rect.c)
        return PercSample(rect, self.h_open[xs, ys], self.v_open[xs, ys], self.p, self.seed, self.env)

    def is_open(self, edge) -> bool:
        (x1, y1), (x2, y2) = sorted(edge)
        r = self.rect
        if (x2 - x1, y2 - y1) == (1, 0):
            arr = self.h_open
        elif (x2 - x1, y2 - y1) == (0, 1):
            arr = self.v_open
        else:
            raise GeometryError(f"{edge} is not a nearest-neighbour edge")
        if not (r.a <= x1 < r.b and r.c <= y1 < r.d):
            raise WindowError(f"{edge} is not an edge of {r}")
        return bool(arr[x1 - r.a, y1 - r.c])

    def to_text(self) -> str:
        """Debug picture, top row first: ``+`` sites, ``-``/``|`` open edges, ``.`` closed."""
        r = self.rect
        lines = []
        for y in range(r.d, r.c - 1, -1):
            row = []
            for x in range(r.a, r.b + 1):
                row.append("+")
                if x < r.b:
                    row.append(("-" if self.h_open[x - r.a, y - r.c] else ".") if y < r.d else " ")
            lines.append("".join(row))
            if y > r.c:
                lines.append(" ".join(
                    ("|" if self.v_open[x - r.a, y - 1 - r.c] else ".") if x < r.b else " "
                    for x in range(r.a, r.b + 1)).rstrip())
        return "\n".join(lines) + "\n"


def sample_configuration(env: Environment, p: float, rect: Rectangle, seed: int) -> PercSample:
    """Draw every edge of ``rect`` independently with its environment probability."""
    _check_inside(env, rect)
    ph, pv = edge_probabilities(env, p, rect)
    uh, uv = edge_uniforms(seed, rect)
    return PercSample(rect, uh < ph, uv < pv, p, seed, env)


def sample_batch(env: Environment, p: float, rect: Rectangle, seeds: np.ndarray):
    """Edge states for many trials at once; arrays of shape (trials, width, height)."""
    _check_inside(env, rect)
    ph, pv = edge_probabilities(env, p, rect)
    uh, uv = edge_uniforms(np.asarray(seeds, dtype=np.uint64), rect)
    return uh < ph, uv < pv


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]
        return True


def _open_edge_ends(sample: PercSample) -> tuple[np.ndarray, np.ndarray]:
    r = sample.rect
    hx, hy = np.nonzero(sample.h_open)
    vx, vy = np.nonzero(sample.v_open)
    stride = r.height + 1
    src = np.concatenate([hx * stride + hy, vx * stride + vy])
    dst = np.concatenate([(hx + 1) * stride + hy, vx * stride + vy + 1])
    return src, dst


def site_labels(sample: PercSample) -> np.ndarray:
    """Cluster label of every site, array of shape (width + 1, height + 1)."""
    r = sample.rect
    n = r.n_sites
    src, dst = _open_edge_ends(sample)
    if n <= SMALL_SITES:
        uf = UnionFind(n)
        for u, v in zip(src.tolist(), dst.tolist()):
            uf.union(u, v)
        labels = np.array([uf.find(i) for i in range(n)])
    else:
        graph = sparse.coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
        _, labels = csgraph.connected_components(graph, directed=False)
    return labels.reshape(r.width + 1, r.height + 1)


def _heights(S: Iterable[int]) -> frozenset[int]:
    return frozenset(int(s) for s in S)


def remainder(sample: PercSample, S: Iterable[int], rect: Rectangle | None = None) -> frozenset[int]:
    """Right-face heights of ``rect`` connected inside ``rect`` to the left-face heights ``S``."""
    rect = sample.rect if rect is None else rect
    S = _heights(S)
    if any(not rect.c <= s <= rect.d for s in S):
        raise PreconditionError(f"S must lie on the left face {{{rect.a}}} x [{rect.c}, {rect.d}]")
    if not S:
        return frozenset()
    sub = sample.restrict(rect) if rect != sample.rect else sample
    labels = site_labels(sub)
    wanted = {labels[0, s - rect.c] for s in S}
    right = labels[-1]
    return frozenset(rect.c + j for j in range(len(right)) if right[j] in wanted)


def slice_indices(S: Iterable[int], k: int, L: int) -> list[int]:
    """Sorted indices j of the scale-k intervals meeting S."""
    n = L ** k
    return sorted({s // n for s in S})


def sliced_remainder(sample: PercSample, S: Iterable[int], I: tuple[int, int], k: int,
                     params) -> frozenset[int]:
    """Union over the scale-k row slices meeting S of the per-slice remainders.

    ``I = (a, b)`` is the half-open horizontal interval; each slice is the
    rectangle ``[a, b) x [j L**k, (j+1) L**k)``, so no path may use edges of
    two different slices.
    """
    S = _heights(S)
    n = params.length(k)
    out: set[int] = set()
    for j in slice_indices(S, k, params.L):
        rect = Rectangle(I[0], I[1], j * n, (j + 1) * n)
        out |= remainder(sample, [s for s in S if j * n <= s < (j + 1) * n], rect)
    return frozenset(out)


def cluster_touches_boundary(sample: PercSample, origin: tuple[int, int]) -> bool:
    """Does the open cluster of ``origin`` reach a site on the rectangle's boundary?"""
    r = sample.rect
    x0, y0 = origin
    if not (r.a <= x0 <= r.b and r.c <= y0 <= r.d):
        raise WindowError("origin outside rectangle")
    if x0 in (r.a, r.b) or y0 in (r.c, r.d):
        return True
    n = r.n_sites
    src, dst = _open_edge_ends(sample)
    graph = sparse.csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    reached = csgraph.breadth_first_order(graph, int(r.site_index(x0, y0)), directed=False,
                                          return_predecessors=False)
    xs, ys = np.divmod(reached, r.height + 1)
    return bool(((xs == 0) | (xs == r.width) | (ys == 0) | (ys == r.height)).any())


def reaches_boundary(env: Environment, p: float, n: int, seed: int) -> bool:
    """Is the origin connected to the boundary of the box [-n, n]^2?"""
    if n < 1:
        raise ParameterError("box radius must be at least 1")
    sample = sample_configuration(env, p, Rectangle(-n, n, -n, n), seed)
    return cluster_touches_boundary(sample, (0, 0))


def exact_event_probability(env: Environment, p: float, rect: Rectangle,
                            predicate: Callable[[PercSample], bool], max_edges: int = 24) -> float:
    """Probability of an event by summing over every edge configuration of ``rect``."""
    if rect.n_edges > max_edges:
        raise ResourceError(f"{rect.n_edges} edges exceed the enumeration limit {max_edges}")
    _check_inside(env, rect)
    ph, pv = edge_probabilities(env, p, rect)
    probs = np.concatenate([ph.ravel(), pv.ravel()])
    m = len(probs)
    shape = (rect.width, rect.height)
    total = 0.0
    for bits in itertools.product((False, True), repeat=m):
        state = np.array(bits, dtype=bool)
        weight = float(np.prod(np.where(state, probs, 1.0 - probs)))
        if weight == 0.0:
            continue
        sample = PercSample(rect, state[:m // 2].reshape(shape), state[m // 2:].reshape(shape),
                            p, None, env)
        if predicate(sample):
            total += weight
    return total


def batch_flood(h_open: np.ndarray, v_open: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """Vectorised flood fill over a batch of small rectangles.

    ``h_open``/``v_open`` have shape (trials, width, height); ``sources`` is a
    boolean mask over left-face heights, shape (height + 1,) or
    (trials, height + 1).  Returns the reached right-face mask, shape
    (trials, height + 1).
    """
    T, W, H = h_open.shape
    reached = np.zeros((T, W + 1, H + 1), dtype=bool)
    reached[:, 0, :] = sources
    while True:
        before = reached.copy()
        for x in range(W):  # rightward sweep lets long horizontal runs settle in one pass
            reached[:, x + 1, :-1] |= reached[:, x, :-1] & h_open[:, x, :]
        reached[:, :-1, :-1] |= reached[:, 1:, :-1] & h_open
        reached[:, :-1, 1:] |= reached[:, :-1, :-1] & v_open
        reached[:, :-1, :-1] |= reached[:, :-1, 1:] & v_open
        if np.array_equal(before, reached):
            return reached[:, W, :]


def batch_cluster(h_open: np.ndarray, v_open: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Sites connected to the ``start`` mask (shape (width + 1, height + 1)), batched."""
    T, W, H = h_open.shape
    reached = np.broadcast_to(start, (T, W + 1, H + 1)).copy()
    while True:
        before = reached.copy()
        reached[:, 1:, :-1] |= reached[:, :-1, :-1] & h_open
        reached[:, :-1, :-1] |= reached[:, 1:, :-1] & h_open
        reached[:, :-1, 1:] |= reached[:, :-1, :-1] & v_open
        reached[:, :-1, :-1] |= reached[:, :-1, 1:] & v_open
        if np.array_equal(before, reached):
            return reached


def paving(k: int, L: int, window_x: tuple[int, int], window_y: tuple[int, int]) -> list[Rectangle]:
    """The scale-k rectangles ``I_(k,i) x I_(k,j)`` tiling a window of scale-k intervals.

    Windows are half-open ranges of interval indices.
    """
    n = L ** k
    return [Rectangle(i * n, (i + 1) * n, j * n, (j + 1) * n)
            for i in range(*window_x) for j in range(*window_y)]


def enumerate_states(env: Environment, p: float, rect: Rectangle, max_edges: int = 24,
                     chunk: int = 2**14):
    """Every edge configuration of ``rect`` with its probability, in batches.

    Yields ``(h_open, v_open, weight)`` with arrays of shape (T, width, height)
    and weights of shape (T,); the state bits are ordered as in
    :meth:`Rectangle.edges`.
    """
    if rect.n_edges > max_edges:
        raise ResourceError(f"{rect.n_edges} edges exceed the enumeration limit {max_edges}")
    _check_inside(env, rect)
    ph, pv = edge_probabilities(env, p, rect)
    probs = np.concatenate([ph.ravel(), pv.ravel()])
    m = len(probs)
    shape = (rect.width, rect.height)
    bit = np.arange(m - 1, -1, -1, dtype=np.int64)
    for start in range(0, 2 ** m, chunk):
        codes = np.arange(start, min(start + chunk, 2 ** m), dtype=np.int64)
        state = ((codes[:, None] >> bit) & 1).astype(bool)
        weight = np.prod(np.where(state, probs, 1.0 - probs), axis=1)
        T = len(codes)
        yield (state[:, :m // 2].reshape(T, *shape), state[:, m // 2:].reshape(T, *shape), weight)


def closure(h_open: np.ndarray, v_open: np.ndarray) -> np.ndarray:
    """Pairwise connectivity of the sites of a batch of rectangles.

    Computed by repeated squaring of the reflexive adjacency matrix.  Returns
    a boolean array (T, n, n) with sites numbered ``x * (height + 1) + y``.
    """
    T, W, H = h_open.shape
    n = (W + 1) * (H + 1)
    idx = np.arange(n).reshape(W + 1, H + 1)
    adj = np.zeros((T, n, n), dtype=np.float32)
    adj[:, np.arange(n), np.arange(n)] = 1.0
    for a, b, state in ((idx[:-1, :-1], idx[1:, :-1], h_open), (idx[:-1, :-1], idx[:-1, 1:], v_open)):
        a, b, s = a.ravel(), b.ravel(), state.reshape(T, -1).astype(np.float32)
        adj[:, a, b] = s
        adj[:, b, a] = s
    steps = 1
    while steps < n:
        adj = np.minimum(adj @ adj, 1.0)
        steps *= 2
    return adj > 0


def exact_batch_probability(env: Environment, p: float, rect: Rectangle,
                            predicate: Callable[[np.ndarray, np.ndarray], np.ndarray],
                            max_edges: int = 24) -> float:
    """Like :func:`exact_event_probability` with a predicate evaluated on batches."""
    total = 0.0
    for h_open, v_open, weight in enumerate_states(env, p, rect, max_edges):
        total += float(weight[np.asarray(predicate(h_open, v_open), dtype=bool)].sum())
    return total
