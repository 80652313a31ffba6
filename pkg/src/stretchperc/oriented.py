"""Oriented percolation on the even sublattice {(i, j): i + j even}.

Edges go from column i to column i + 1, one step up or down.  Two models
are provided: bond percolation where every edge leaving column i is open
with probability ``p ** (xi_i + 1)`` ("oriented_geom"), and the columnar site
model where a site in column i is open with probability ``p_g`` or ``p_b``
according to a column indicator ``eta_i`` ("ksv").

Both models are stored as an :class:`OrientedSample` holding up-edge,
down-edge and site states over an inclusive region of columns and rows, so
a single column sweep computes reachability for either one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .env import GapDistribution
from .errors import GeometryError, ParameterError, PreconditionError, WindowError
from .records import EstimateRecord

_TAG_UP = rng.tag_value("oriented-up")
_TAG_DOWN = rng.tag_value("oriented-down")
_TAG_SITE = rng.tag_value("oriented-site")

ORIENTED_COLUMNS = ["model", "experiment", "params", "mean", "stderr", "trials", "seed"]


def is_vertex(i: int, j: int) -> bool:
    return (i + j) % 2 == 0


@dataclass(frozen=True)
class OrientedGeometry:
    """Scale lengths L_k^x = L**k and L_k^y = (L / c)**k."""

    L: int = 10
    c: int = 10

    def __post_init__(self):
        if self.L < 2 or self.c < 1 or self.L % self.c:
            raise ParameterError("need L >= 2 and c dividing L")

    def lx(self, k: int) -> int:
        return self.L ** k

    def ly(self, k: int) -> int:
        return (self.L // self.c) ** k


def _check_edge(e) -> tuple[tuple[int, int], tuple[int, int]]:
    (i1, j1), (i2, j2) = e
    if i2 != i1 + 1 or abs(j2 - j1) != 1 or not is_vertex(i1, j1):
        raise GeometryError(f"{e} is not an oriented edge")
    return (i1, j1), (i2, j2)


@dataclass(frozen=True)
class OrientedBox:
    """Box of the edge ``e`` at scale ``k``: columns of I^x_(k,i), rows of two
    consecutive y-intervals starting at min(j, j')."""

    k: int
    edge: tuple

    def __post_init__(self):
        object.__setattr__(self, "edge", _check_edge(self.edge))

    def bounds(self, geom: OrientedGeometry) -> tuple[int, int, int, int]:
        """Half-open (x0, x1, y0, y1)."""
        (i, j), (_, j2) = self.edge
        lx, ly = geom.lx(self.k), geom.ly(self.k)
        lo = min(j, j2)
        return i * lx, (i + 1) * lx, lo * ly, (lo + 2) * ly

    def sites(self, geom: OrientedGeometry) -> set[tuple[int, int]]:
        x0, x1, y0, y1 = self.bounds(geom)
        return {(x, y) for x in range(x0, x1) for y in range(y0, y1) if is_vertex(x, y)}


def is_admissible(point: tuple[int, int], k: int, geom: OrientedGeometry) -> bool:
    """Point (x, y) with x = i L_k^x, y in I^y_(k,j) and i + j even."""
    x, y = point
    lx = geom.lx(k)
    if x % lx:
        return False
    return (x // lx + y // geom.ly(k)) % 2 == 0


def is_admissible_set(x: int, S: Iterable[int], k: int, geom: OrientedGeometry) -> bool:
    return all(is_admissible((x, s), k, geom) for s in S)


def is_oriented_fractal(x: int, S: Iterable[int], k: int, geom: OrientedGeometry,
                        branching: int = 2) -> bool:
    """k-fractal on the column x with admissibility in place of goodness."""
    S = sorted(set(S))
    if len(S) != branching ** k:
        return False
    if k == 0:
        return is_vertex(x, S[0])
    if not is_admissible_set(x, S, k, geom):
        return False
    size = branching ** (k - 1)
    chunks = [S[j * size:(j + 1) * size] for j in range(branching)]
    ly = geom.ly(k - 1)
    for prev, cur in zip(chunks, chunks[1:]):
        if cur[0] // ly <= prev[-1] // ly:
            return False
    return all(is_oriented_fractal(x, c, k - 1, geom, branching) for c in chunks)


# ---------------------------------------------------------------------------
# environments and samples

@dataclass(frozen=True, eq=False)
class ColumnSequence:
    """Per-column values (gaps or bad-column indicators) over ``[lo, lo + len - 1]``."""

    values: np.ndarray
    lo: int = 0

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0 or (arr < 0).any():
            raise ParameterError("column values must be a non-empty non-negative sequence")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Values over the half-open range [lo, hi)."""
        if lo > hi or lo < self.lo or hi > self.lo + len(self.values):
            raise WindowError(f"columns [{lo}, {hi}) outside window starting at {self.lo}")
        return self.values[lo - self.lo:hi - self.lo]


def sample_columns(dist: GapDistribution, lo: int, hi: int, seed: int) -> ColumnSequence:
    """Gap sequence over columns lo..hi inclusive, keyed by absolute index."""
    u = rng.uniforms(np.uint64(rng.derive_seed(seed, "oriented-xi")), np.arange(lo, hi + 1))
    return ColumnSequence(dist.ppf(u), lo)


def sample_eta(rho: float, lo: int, hi: int, seed: int) -> ColumnSequence:
    """Bernoulli(rho) bad-column indicators over columns lo..hi inclusive."""
    if not 0.0 <= rho <= 1.0:
        raise ParameterError("rho must lie in [0, 1]")
    u = rng.uniforms(np.uint64(rng.derive_seed(seed, "eta")), np.arange(lo, hi + 1))
    return ColumnSequence((u < rho).astype(np.int64), lo)


@dataclass(frozen=True)
class OrientedRegion:
    """Columns i0..i1 and rows j0..j1, both inclusive."""

    i0: int
    i1: int
    j0: int
    j1: int

    def __post_init__(self):
        if self.i0 > self.i1 or self.j0 > self.j1:
            raise ParameterError("empty oriented region")

    @property
    def width(self) -> int:
        return self.i1 - self.i0

    @property
    def height(self) -> int:
        return self.j1 - self.j0

    def vertex_mask(self) -> np.ndarray:
        i = np.arange(self.i0, self.i1 + 1)[:, None]
        j = np.arange(self.j0, self.j1 + 1)[None, :]
        return (i + j) % 2 == 0


def region_edges(r: OrientedRegion) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Every oriented edge with both endpoints in the region."""
    out = []
    for i in range(r.i0, r.i1):
        for j in range(r.j0, r.j1 + 1):
            if is_vertex(i, j):
                if j + 1 <= r.j1:
                    out.append(((i, j), (i + 1, j + 1)))
                if j - 1 >= r.j0:
                    out.append(((i, j), (i + 1, j - 1)))
    return out


@dataclass(frozen=True, eq=False)
class OrientedSample:
    """``up[c, r]`` is the edge from (i0 + c, j0 + r) to (i0 + c + 1, j0 + r + 1);
    ``down`` likewise to row j0 + r - 1; ``site_open`` has one extra column."""

    region: OrientedRegion
    up: np.ndarray
    down: np.ndarray
    site_open: np.ndarray
    model: str = "oriented_geom"
    seed: int | None = None

    def is_open(self, e) -> bool:
        (i, j), (_, j2) = _check_edge(e)
        r = self.region
        arr = self.up if j2 > j else self.down
        return bool(arr[i - r.i0, j - r.j0])


def _edge_masks(region: OrientedRegion) -> tuple[np.ndarray, np.ndarray]:
    v = region.vertex_mask()[:-1]
    up, down = v.copy(), v.copy()
    up[:, -1] = False
    down[:, 0] = False
    return up, down


def sample_oriented(xi: ColumnSequence, p: float, region: OrientedRegion, seed: int) -> OrientedSample:
    """Bond model: edges leaving column i open with probability p ** (xi_i + 1)."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    prob = float(p) ** (xi.window(region.i0, region.i1) + 1.0)
    i = np.arange(region.i0, region.i1)[:, None]
    j = np.arange(region.j0, region.j1 + 1)[None, :]
    mu, md = _edge_masks(region)
    up = (rng.uniforms(seed, _TAG_UP, i, j) < prob[:, None]) & mu
    down = (rng.uniforms(seed, _TAG_DOWN, i, j) < prob[:, None]) & md
    sites = region.vertex_mask()
    return OrientedSample(region, up, down, sites, "oriented_geom", seed)


def sample_ksv(eta: ColumnSequence, p_g: float, p_b: float, region: OrientedRegion,
               seed: int) -> OrientedSample:
    """Site model: a vertex in column i is open with probability p_g (eta_i = 0) or p_b."""
    for q in (p_g, p_b):
        if not 0.0 <= q <= 1.0:
            raise ParameterError("site probabilities must lie in [0, 1]")
    bad = eta.window(region.i0, region.i1 + 1).astype(bool)
    prob = np.where(bad, p_b, p_g)
    i = np.arange(region.i0, region.i1 + 1)[:, None]
    j = np.arange(region.j0, region.j1 + 1)[None, :]
    sites = (rng.uniforms(seed, _TAG_SITE, i, j) < prob[:, None]) & region.vertex_mask()
    mu, md = _edge_masks(region)
    return OrientedSample(region, mu, md, sites, "ksv", seed)


# ---------------------------------------------------------------------------
# reachability

def sweep(up: np.ndarray, down: np.ndarray, site_open: np.ndarray, start: np.ndarray,
          mask: np.ndarray | None = None) -> np.ndarray:
    """Reached rows of the last column from the start mask on the first column.

    Works on trailing (columns, rows) axes; leading axes are batch axes.  Start
    sites count as reached whatever their own state; every later site must be
    open and, when given, inside ``mask``.
    """
    reached = start.copy()
    if mask is not None:
        reached &= mask[..., 0, :]
    for c in range(up.shape[-2]):
        nxt = np.zeros_like(reached)
        nxt[..., 1:] |= reached[..., :-1] & up[..., c, :-1]
        nxt[..., :-1] |= reached[..., 1:] & down[..., c, 1:]
        nxt &= site_open[..., c + 1, :]
        if mask is not None:
            nxt &= mask[..., c + 1, :]
        reached = nxt
    return reached


@dataclass(frozen=True)
class OrientedCorridor:
    """Union of the scale-k boxes along an oriented path of renormalised vertices."""

    k: int
    path: tuple

    def __post_init__(self):
        path = tuple((int(i), int(j)) for i, j in self.path)
        if len(path) < 2:
            raise GeometryError("a corridor needs a path of length >= 1")
        for a, b in zip(path, path[1:]):
            _check_edge((a, b))
        object.__setattr__(self, "path", path)

    @property
    def length(self) -> int:
        return len(self.path) - 1

    @property
    def steps(self) -> tuple[int, ...]:
        return tuple(b[1] - a[1] for a, b in zip(self.path, self.path[1:]))

    def boxes(self) -> list[OrientedBox]:
        return [OrientedBox(self.k, (a, b)) for a, b in zip(self.path, self.path[1:])]

    def span(self, geom: OrientedGeometry) -> tuple[int, int]:
        """Inclusive column range, right boundary column included."""
        lx = geom.lx(self.k)
        return self.path[0][0] * lx, self.path[-1][0] * lx

    def mask(self, geom: OrientedGeometry, region: OrientedRegion) -> np.ndarray:
        out = np.zeros((region.width + 1, region.height + 1), dtype=bool)
        boxes = [b.bounds(geom) for b in self.boxes()]
        lx = geom.lx(self.k)
        x_start = boxes[0][0]
        for x in range(region.i0, region.i1 + 1):
            t = (x - x_start) // lx
            if x < x_start or t > len(boxes) or (t == len(boxes) and x != x_start + t * lx):
                continue
            _, _, y0, y1 = boxes[min(t, len(boxes) - 1)]
            lo, hi = max(y0, region.j0), min(y1 - 1, region.j1)
            if lo <= hi:
                out[x - region.i0, lo - region.j0:hi - region.j0 + 1] = True
        return out & region.vertex_mask()


def parallel_family(k: int, i: int, rows: Sequence[int], steps: Sequence[int] | str,
                    n: int | None = None) -> list[OrientedCorridor]:
    """Corridors starting at (i, j) for j in ``rows`` with identical steps.

    ``steps`` is ``"up"``, ``"down"`` (then ``n`` gives the length) or an
    explicit sequence of +1/-1 moves.
    """
    if isinstance(steps, str):
        if steps not in ("up", "down") or n is None:
            raise ParameterError("use 'up'/'down' with a length, or explicit steps")
        steps = [1 if steps == "up" else -1] * n
    out = []
    for j in rows:
        path = [(i, j)]
        for s in steps:
            path.append((path[-1][0] + 1, path[-1][1] + s))
        out.append(OrientedCorridor(k, tuple(path)))
    return out


def check_parallel(sigma: Sequence[OrientedCorridor]):
    first = sigma[0]
    for c in sigma[1:]:
        if (c.k != first.k or c.length != first.length or c.path[0][0] != first.path[0][0]
                or c.steps != first.steps):
            raise GeometryError("corridors in the family are not parallel")


def oriented_reachable(sample: OrientedSample, S: Iterable[int],
                       sigma: Sequence[OrientedCorridor] | None = None,
                       geom: OrientedGeometry | None = None,
                       I: tuple[int, int] | None = None) -> frozenset[int]:
    """Rows of the right column reached from the rows ``S`` of the left column.

    Without ``sigma`` the search is confined to the sample's region.  With a
    parallel family it runs separately inside each corridor (restricted to
    the inclusive column range ``I``) and the results are united.
    """
    r = sample.region
    S = frozenset(int(s) for s in S)
    a, b = (r.i0, r.i1) if I is None else I
    if not r.i0 <= a <= b <= r.i1:
        raise WindowError("column range outside the sample region")
    if any(not r.j0 <= s <= r.j1 for s in S):
        raise PreconditionError("S must lie on the left column of the region")
    cols = slice(a - r.i0, b - r.i0)
    up, down = sample.up[cols], sample.down[cols]
    sites = sample.site_open[a - r.i0:b - r.i0 + 1]
    start = np.zeros(r.height + 1, dtype=bool)
    start[[s - r.j0 for s in S if is_vertex(a, s)]] = True
    if sigma is None:
        reached = sweep(up, down, sites, start)
    else:
        if geom is None:
            raise ParameterError("a corridor family needs the geometry")
        sigma = list(sigma)
        check_parallel(sigma)
        lo, hi = sigma[0].span(geom)
        if not lo <= a <= b <= hi:
            raise GeometryError("column range is not inside the corridors' projection")
        reached = np.zeros_like(start)
        for c in sigma:
            m = c.mask(geom, r)[a - r.i0:b - r.i0 + 1]
            reached |= sweep(up, down, sites, start, m)
    return frozenset(int(r.j0 + t) for t in np.flatnonzero(reached))


def enumerate_paths(start: tuple[int, int], target_column: int, j0: int, j1: int):
    """Every oriented path from ``start`` to the target column within rows j0..j1."""
    i, j = start
    if i == target_column:
        yield [start]
        return
    for dj in (1, -1):
        if j0 <= j + dj <= j1:
            for rest in enumerate_paths((i + 1, j + dj), target_column, j0, j1):
                yield [start] + rest


# ---------------------------------------------------------------------------
# one-step block exploration

@dataclass(frozen=True)
class ExplorationResult:
    sizes: tuple
    survived: bool
    layers: tuple = field(default=(), compare=True)
    seeds: dict = field(default_factory=dict, compare=False)


def block_interval(z: tuple[int, int], ell: int) -> tuple[int, int, int]:
    """Column and half-open rows of the renormalised site z."""
    i, j = z
    return 5 * i * ell, j * ell, (j + 1) * ell


def block_box(z: tuple[int, int], w: tuple[int, int], ell: int) -> OrientedRegion:
    """Crossing box of the renormalised edge (z, w), right column included."""
    (i, j), (_, j2) = z, w
    return OrientedRegion(5 * i * ell, 5 * (i + 1) * ell, (min(j, j2) - 1) * ell,
                          (max(j, j2) + 2) * ell - 1)


def block_crossing(sample: OrientedSample, seed_rows: Iterable[int], z, w, ell: int) -> list[int]:
    """Rows of I_w reached from the seed rows of I_z inside the crossing box, ascending."""
    box = block_box(z, w, ell)
    r = sample.region
    if box.i0 < r.i0 or box.i1 > r.i1 or box.j0 < r.j0 or box.j1 > r.j1:
        raise GeometryError("sample region does not cover the crossing box")
    ci, cj = slice(box.i0 - r.i0, box.i1 - r.i0), slice(box.j0 - r.j0, box.j1 - r.j0 + 1)
    up, down = sample.up[ci, cj].copy(), sample.down[ci, cj].copy()
    up[:, -1] = False
    down[:, 0] = False
    sites = sample.site_open[box.i0 - r.i0:box.i1 - r.i0 + 1, cj]
    start = np.zeros(box.height + 1, dtype=bool)
    start[[s - box.j0 for s in seed_rows if box.j0 <= s <= box.j1 and is_vertex(box.i0, s)]] = True
    reached = sweep(up, down, sites, start)
    _, lo, hi = block_interval(w, ell)
    return [box.j0 + int(t) for t in np.flatnonzero(reached) if lo <= box.j0 + t < hi]


def exploration_region(ell: int, layers: int) -> OrientedRegion:
    return OrientedRegion(0, 5 * ell * layers, -(layers + 1) * ell, (layers + 2) * ell - 1)


def ksv_block_exploration(sample: OrientedSample, ell: int, layers: int,
                          need: int | None = None) -> ExplorationResult:
    """Layer-by-layer exploration of renormalised sites.

    Layer 0 holds the origin with its whole interval as seed.  A site w of
    the next layer is reached when some reached z has at least ``need`` rows
    of I_w connected to its seed inside the crossing box; the seed of w is the
    ``need`` lowest rows reached from any such z.
    """
    if ell < 1 or layers < 0:
        raise ParameterError("need ell >= 1 and layers >= 0")
    need = math.ceil(ell / 10) if need is None else need
    full = exploration_region(ell, layers)
    r = sample.region
    if full.i0 < r.i0 or full.i1 > r.i1 or full.j0 < r.j0 or full.j1 > r.j1:
        raise GeometryError("sample region too small for the requested layers")
    seeds = {(0, 0): list(range(0, ell))}
    current = [(0, 0)]
    sizes, history = [1], [((0, 0),)]
    for i in range(layers):
        found: dict = {}
        for z in current:
            for dj in (-1, 1):
                w = (i + 1, z[1] + dj)
                rows = block_crossing(sample, seeds[z], z, w, ell)
                if len(rows) >= need:
                    found.setdefault(w, set()).update(rows)
        current = sorted(found)
        for w in current:
            seeds[w] = sorted(found[w])[:need]
        sizes.append(len(current))
        history.append(tuple(current))
    return ExplorationResult(tuple(sizes), sizes[-1] > 0, tuple(history), seeds)


def tube_witness(ell: int, z, w, source_row: int) -> set[tuple[int, int]]:
    """Sites of a deterministic path from a seed row of I_z into I_w.

    Opening these sites (the seed itself excluded) guarantees the crossing
    event; the path descends or climbs diagonally to the middle of I_w,
    zigzags, and ends in a full cone reaching ceil(ell/10) rows of I_w.
    """
    x0, _, _ = block_interval(z, ell)
    x1, lo, hi = block_interval(w, ell)
    if not is_vertex(x0, source_row):
        raise GeometryError("source row is not a vertex of the seed column")
    need = math.ceil(ell / 10)
    d = need - 1
    target = lo + ell // 2
    sites: set[tuple[int, int]] = set()
    x, y = x0, source_row
    while x < x1 - d:
        step = 1 if y < target else -1 if y > target else (1 if (x - x0) % 2 == 0 else -1)
        x, y = x + 1, y + step
        sites.add((x, y))
    for t in range(1, d + 1):  # cone from (x, y)
        sites.update((x + t, y + s) for s in range(-t, t + 1, 2))
    if not all(lo <= yy < hi for xx, yy in sites if xx == x1):
        raise GeometryError("interval too small for the witness cone")
    return sites


# ---------------------------------------------------------------------------
# finite-depth percolation

def _depth_sweep(prob: np.ndarray, seeds: np.ndarray, depth: int, model: str) -> np.ndarray:
    """Batched origin-to-column-``depth`` indicator; ``prob`` has shape (T, depth + 1)."""
    T = len(seeds)
    rows = np.arange(-depth, depth + 1)
    reached = np.zeros((T, len(rows)), dtype=bool)
    reached[:, depth] = True
    s = seeds.astype(np.uint64)[:, None]
    for i in range(depth):
        vertex = ((i + rows) % 2 == 0)[None, :]
        if model == "ksv":
            up = down = np.ones_like(reached)
            site = rng.uniforms(s, _TAG_SITE, i + 1, rows[None, :]) < prob[:, i + 1:i + 2]
        else:
            up = (rng.uniforms(s, _TAG_UP, i, rows[None, :]) < prob[:, i:i + 1]) & vertex
            down = (rng.uniforms(s, _TAG_DOWN, i, rows[None, :]) < prob[:, i:i + 1]) & vertex
            site = np.ones_like(reached)
        nxt = np.zeros_like(reached)
        nxt[:, 1:] |= reached[:, :-1] & up[:, :-1]
        nxt[:, :-1] |= reached[:, 1:] & down[:, 1:]
        reached = nxt & site
    return reached.any(axis=1)


def oriented_percolation_probability(dist: GapDistribution, p: float, depth: int, trials: int,
                                     seed: int, xi: ColumnSequence | None = None) -> EstimateRecord:
    """Frequency of an open oriented path from (0, 0) to column ``depth``.

    Each trial draws its own gaps unless a fixed sequence ``xi`` is given.
    """
    if trials < 1 or depth < 1:
        raise ParameterError("trials and depth must be at least 1")
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    hits = 0
    for start in range(0, trials, 4096):
        n = min(4096, trials - start)
        seeds = rng.trial_seeds(seed, "oriented", n, start)
        if xi is None:
            env_seeds = rng.trial_seeds(seed, "oriented-env", n, start)
            gaps = dist.ppf(rng.uniforms(env_seeds[:, None], np.arange(depth + 1)[None, :]))
        else:
            gaps = np.broadcast_to(xi.window(0, depth + 1), (n, depth + 1))
        hits += int(_depth_sweep(float(p) ** (gaps + 1.0), seeds, depth, "oriented_geom").sum())
    params = {"model": "oriented_geom", "dist": repr(dist), "p": p, "depth": depth,
              "quenched": xi is not None}
    return EstimateRecord.from_count("oriented_percolation", params, hits, trials, seed)


def ksv_percolation_probability(rho: float, p_g: float, p_b: float, depth: int, trials: int,
                                seed: int) -> EstimateRecord:
    """Site-model analogue with Bernoulli(rho) bad columns drawn per trial."""
    if trials < 1 or depth < 1:
        raise ParameterError("trials and depth must be at least 1")
    hits = 0
    for start in range(0, trials, 4096):
        n = min(4096, trials - start)
        seeds = rng.trial_seeds(seed, "ksv", n, start)
        env_seeds = rng.trial_seeds(seed, "ksv-env", n, start)
        bad = rng.uniforms(env_seeds[:, None], np.arange(depth + 1)[None, :]) < rho
        hits += int(_depth_sweep(np.where(bad, p_b, p_g), seeds, depth, "ksv").sum())
    params = {"model": "ksv", "rho": rho, "p_g": p_g, "p_b": p_b, "depth": depth}
    return EstimateRecord.from_count("oriented_percolation", params, hits, trials, seed)


def oriented_exact_probability(xi: ColumnSequence, p: float, depth: int, max_edges: int = 24) -> float:
    """Exact origin-to-column-``depth`` probability by summing over edge states of the
    cone and checking every oriented path."""
    edges = []
    index = {}
    for i in range(depth):
        for j in range(-i, i + 1, 2):
            for dj in (1, -1):
                index[((i, j), (i + 1, j + dj))] = len(edges)
                edges.append((i, j, dj))
    m = len(edges)
    if m > max_edges:
        raise ParameterError(f"{m} edges exceed the enumeration limit {max_edges}")
    probs = np.array([float(p) ** (int(xi.window(i, i + 1)[0]) + 1) for i, _, _ in edges])
    paths = np.array([[index[(a, b)] for a, b in zip(path, path[1:])]
                      for path in enumerate_paths((0, 0), depth, -depth, depth)])
    bit = np.arange(m - 1, -1, -1, dtype=np.int64)
    total = 0.0
    for start in range(0, 2 ** m, 2**15):
        codes = np.arange(start, min(start + 2**15, 2 ** m), dtype=np.int64)
        state = ((codes[:, None] >> bit) & 1).astype(bool)
        weight = np.prod(np.where(state, probs, 1.0 - probs), axis=1)
        total += float(weight[state[:, paths].all(axis=2).any(axis=1)].sum())
    return total


def oriented_row(rec: EstimateRecord) -> list[str]:
    return [str(rec.params.get("model", ""))] + rec.row()
