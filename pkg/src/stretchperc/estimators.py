"""Monte Carlo estimators of crossing-failure probabilities and related checks.

Most events here are functions of one or more *remainders*: the right-face
heights reached from a start set through the row slices of a column.  An
:class:`Instance` bundles a fixed environment, the remainder queries and a
failure predicate.  The same instance can be evaluated by batched Monte Carlo
(:func:`mc_failure`) or by exhaustive enumeration (:func:`exact_failure`),
which is how the estimators are validated on small cases.

Suprema over environments and start sets cannot be computed; they are
approximated by the maximum over an explicit scenario family.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import rng
from .env import Environment, GapDistribution, Geometric, sample_environment
from .errors import ConditioningError, ParameterError, PreconditionError
from .fractal import (Corridor, FractalParams, build_grouped_fractal, contains_fractal,
                      contains_grouped_fractal, recovered)
from .perc import (Rectangle, batch_cluster, batch_flood, closure, cluster_touches_boundary, exact_batch_probability,
                   exact_event_probability,
                   sample_batch, sample_configuration, site_labels, sliced_remainder,
                   slice_indices)
from .records import EstimateRecord, bernoulli_stderr
from .renorm import IntervalIndex, LabelTable, ScaleParams, block_weight, compute_labels

BATCH_TRIALS = 20000


def thread_count() -> int:
    """Worker cap from STRETCHPERC_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("STRETCHPERC_THREADS", "1")))
    except ValueError:
        return 1


def exact_scale0(p: float, h: int, fparams: FractalParams = FractalParams()) -> tuple[float, float]:
    """Exact scale-0 failure probabilities (u_0, v_0 at intensity h)."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    if h < 1:
        raise ParameterError("h must be at least 1")
    return 1.0 - p, (1.0 - p ** (h + 1)) ** fparams.family_size(h)


# ---------------------------------------------------------------------------
# instances

@dataclass(frozen=True)
class RemainderQuery:
    """Sliced remainder of ``sources`` across the column ``I`` at slicing scale ``k``."""

    sources: frozenset
    I: tuple
    k: int


@dataclass
class Instance:
    env: Environment
    L: int
    queries: list
    predicate: Callable[[list], bool]
    info: dict = field(default_factory=dict)

    def slices(self, q: RemainderQuery) -> list[Rectangle]:
        n = self.L ** q.k
        return [Rectangle(q.I[0], q.I[1], j * n, (j + 1) * n)
                for j in slice_indices(q.sources, q.k, self.L)]

    def bounding_rect(self) -> Rectangle:
        rects = [r for q in self.queries for r in self.slices(q)]
        return Rectangle(min(r.a for r in rects), max(r.b for r in rects),
                         min(r.c for r in rects), max(r.d for r in rects))

    def fails(self, sample) -> bool:
        params = ScaleParams(self.L, 0)
        return self.predicate([sliced_remainder(sample, q.sources, q.I, q.k, params)
                               for q in self.queries])


def _trial_chunks(seed: int, trials: int, tag: str = "mc"):
    for start in range(0, trials, BATCH_TRIALS):
        yield rng.trial_seeds(seed, tag, min(BATCH_TRIALS, trials - start), start)


def _evaluate_rows(inst: Instance, matrix: np.ndarray, layout: list) -> np.ndarray:
    """Apply the predicate to each distinct row of concatenated remainder masks."""
    uniq, inverse = np.unique(np.packbits(matrix, axis=1), axis=0, return_inverse=True)
    outcome = np.empty(len(uniq), dtype=bool)
    for u, packed in enumerate(uniq):
        row = np.unpackbits(packed)[:matrix.shape[1]].astype(bool)
        remainders, offset = [], 0
        for heights in layout:
            part = row[offset:offset + len(heights)]
            remainders.append(frozenset(h for h, hit in zip(heights, part) if hit))
            offset += len(heights)
        outcome[u] = inst.predicate(remainders)
    return outcome[np.ravel(inverse)]


def _source_mask(q: RemainderQuery, rect: Rectangle) -> np.ndarray:
    src = np.zeros(rect.height + 1, dtype=bool)
    src[[s - rect.c for s in q.sources if rect.c <= s < rect.d]] = True
    return src


def _instance_failures(inst: Instance, p: float, seeds: np.ndarray) -> np.ndarray:
    columns, layout = [], []
    cache: dict = {}
    for q in inst.queries:
        heights = []
        for rect in inst.slices(q):
            if rect not in cache:
                cache[rect] = sample_batch(inst.env, p, rect, seeds)
            h_open, v_open = cache[rect]
            columns.append(batch_flood(h_open, v_open, _source_mask(q, rect)))
            heights.extend(range(rect.c, rect.d + 1))
        layout.append(heights)
    return _evaluate_rows(inst, np.concatenate(columns, axis=1), layout)


def mc_failure(inst: Instance, p: float, trials: int, seed: int) -> tuple[int, int]:
    """Number of failures among ``trials`` coupled samples (hashed per trial)."""
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    hits = 0
    for seeds in _trial_chunks(seed, trials):
        hits += int(_instance_failures(inst, p, seeds).sum())
    return hits, trials


def exact_failure(inst: Instance, p: float, max_edges: int = 24) -> float:
    """Failure probability of the instance summed over every configuration.

    Connectivity inside each slice comes from a transitive closure, not from
    the flood fill used by :func:`mc_failure`.
    """
    box = inst.bounding_rect()

    def failing(h_open, v_open):
        columns, layout, cache = [], [], {}
        for q in inst.queries:
            heights = []
            for rect in inst.slices(q):
                if rect not in cache:
                    xs = slice(rect.a - box.a, rect.b - box.a)
                    ys = slice(rect.c - box.c, rect.d - box.c)
                    cache[rect] = closure(h_open[:, xs, ys], v_open[:, xs, ys])
                conn = cache[rect]
                H = rect.height + 1
                src = np.flatnonzero(_source_mask(q, rect))
                right = rect.width * H + np.arange(H)
                columns.append(conn[:, src][:, :, right].any(axis=1))
                heights.extend(range(rect.c, rect.d + 1))
            layout.append(heights)
        return _evaluate_rows(inst, np.concatenate(columns, axis=1), layout)

    return exact_batch_probability(inst.env, p, box, failing, max_edges)


def exact_failure_scalar(inst: Instance, p: float, max_edges: int = 16) -> float:
    """Same as :func:`exact_failure` through per-configuration union-find (slow)."""
    return exact_event_probability(inst.env, p, inst.bounding_rect(), inst.fails, max_edges)


# ---------------------------------------------------------------------------
# scenario construction

def construct_gaps(h: int, k: int, L: int, policy: str = "left") -> np.ndarray:
    """Gaps over [0, L**k) whose scale-k label is exactly h.

    For h >= 1 the defect sits in the leftmost child ("left"), rightmost
    child ("right"), or is split across the two outer children ("multi",
    needs h >= 3 and k >= 1).  For h = 0, policies "left"/"right" insert one
    child of intensity 1, which keeps the interval good; "none" gives zeros.
    """
    if k == 0:
        return np.array([h], dtype=np.int64)
    size = L ** (k - 1)
    out = np.zeros(L * size, dtype=np.int64)

    def put(pos: int, child: np.ndarray):
        out[pos * size:(pos + 1) * size] = child

    if h == 0:
        if policy != "none":
            put(0 if policy != "right" else L - 1, construct_gaps(1, k - 1, L, "left"))
        return out
    if policy in ("left", "none"):
        put(0, construct_gaps(h + 1, k - 1, L, "left"))
    elif policy == "right":
        put(L - 1, construct_gaps(h + 1, k - 1, L, "right"))
    elif policy == "multi":
        if h < 3:
            raise ParameterError("a multi-defect column needs h >= 3")
        h1 = (h - 1) // 2
        put(0, construct_gaps(h1, k - 1, L, "left"))
        put(L - 1, construct_gaps(h - 1 - h1, k - 1, L, "left"))
    else:
        raise ParameterError(f"unknown defect policy {policy!r}")
    return out


@dataclass(frozen=True)
class ScenarioSpec:
    """One member of a scenario family for the u_k / v_k estimators.

    ``conditioning="construct"`` builds the column gaps deterministically and
    uses zero row gaps; ``"rejection"`` samples both from ``dist_x``/``dist_y``
    and rejects until the column label and start placement succeed.
    """

    k: int = 0
    h: int = 0
    defect: str = "none"
    start: str = "grouped"
    conditioning: str = "construct"
    L: int = 4
    fparams: FractalParams = FractalParams()
    dist_x: GapDistribution | None = None
    dist_y: GapDistribution | None = None
    env_seed: int = 0
    retry_budget: int = 10**6

    def __post_init__(self):
        if self.k < 0 or self.h < 0:
            raise ParameterError("k and h must be non-negative")
        if self.start not in ("grouped", "spread"):
            raise ParameterError(f"unknown start policy {self.start!r}")
        if self.conditioning not in ("construct", "rejection"):
            raise ParameterError(f"unknown conditioning {self.conditioning!r}")
        if self.conditioning == "rejection" and (self.dist_x is None or self.dist_y is None):
            raise ParameterError("rejection conditioning needs dist_x and dist_y")

    def describe(self) -> dict:
        d = {"k": self.k, "h": self.h, "defect": self.defect, "start": self.start,
             "conditioning": self.conditioning, "L": self.L,
             "branching": self.fparams.branching, "loss_exponent": self.fparams.loss_exponent}
        if self.conditioning == "rejection":
            d.update(dist_x=repr(self.dist_x), dist_y=repr(self.dist_y), env_seed=self.env_seed)
        return d


def _aligned_length(n_intervals: int, k: int, K: int, L: int) -> int:
    per = L ** (K - k)
    return -(-n_intervals // per) * L ** K


def place_family(labels: LabelTable, k: int, count: int, start: str,
                 fparams: FractalParams) -> list[frozenset] | None:
    """A k-ordered family of ``count`` k-fractals, scanning good intervals from the left.

    ``grouped`` members each fill one good k-interval; ``spread`` members use
    one (k-1)-grouped fractal in each of ``branching`` distinct good k-intervals.
    """
    L = labels.params.L
    family: list[frozenset] = []
    pieces: list[frozenset] = []
    for i in labels.index_range(k):
        if len(family) == count:
            break
        if not labels.is_good(k, i):
            continue
        if start == "grouped" or k == 0:
            S = build_grouped_fractal(labels, IntervalIndex(k, i), fparams)
            if S is not None:
                family.append(S)
            continue
        for child in IntervalIndex(k, i).children(L):
            if labels.is_good(*child):
                piece = build_grouped_fractal(labels, child, fparams)
                if piece is not None:
                    pieces.append(piece)
                    break
        if len(pieces) == fparams.branching:
            family.append(frozenset().union(*pieces))
            pieces = []
    return family if len(family) == count else None


def _column_and_rows(spec: ScenarioSpec, n_members: int, K: int):
    """Column gaps, row gaps, row labels and start family for a scenario."""
    L, k, fp = spec.L, spec.k, spec.fparams
    per_member = fp.branching if (spec.start == "spread" and k > 0) else 1
    n_int = n_members * per_member
    if spec.conditioning == "construct":
        xi_x = construct_gaps(spec.h, k, L, spec.defect)
        xi_y = np.zeros(_aligned_length(n_int, k, K, L), dtype=np.int64)
        labels = compute_labels(xi_y, ScaleParams(L, K))
        return xi_x, xi_y, labels, place_family(labels, k, n_members, spec.start, fp)
    ylen = _aligned_length(2 * n_int + 2, k, K, L)
    for attempt in range(spec.retry_budget):
        env = sample_environment(spec.dist_x, spec.dist_y, (0, L ** k - 1), (0, ylen - 1),
                                 rng.derive_seed(spec.env_seed, "condition", attempt))
        if compute_labels(env.xi_x, ScaleParams(L, k)).h(k, 0) != spec.h:
            continue
        labels = compute_labels(env.xi_y, ScaleParams(L, K))
        family = place_family(labels, k, n_members, spec.start, fp)
        if family is not None:
            return env.xi_x, env.xi_y, labels, family
    raise ConditioningError(f"no environment met the conditioning within {spec.retry_budget} draws")


def u_instance(spec: ScenarioSpec) -> Instance:
    """Failure to keep a k-grouped k-fractal after crossing a good k-column."""
    if spec.h != 0:
        raise PreconditionError("u_k scenarios cross a good column (h = 0)")
    xi_x, xi_y, labels, family = _column_and_rows(spec, 1, spec.k)
    if family is None:
        raise PreconditionError("could not place the start fractal")
    env = Environment(xi_x, xi_y, 0, 0)
    k, fp = spec.k, spec.fparams
    query = RemainderQuery(family[0], (0, spec.L ** k), k)
    pred = lambda rs: not contains_grouped_fractal(rs[0], k, labels, fp)
    return Instance(env, spec.L, [query], pred, {"start_set": sorted(family[0])})


def v_instance(spec: ScenarioSpec) -> Instance:
    """Failure to keep any k-fractal after crossing a column of intensity h."""
    if spec.h < 1:
        raise PreconditionError("v_k scenarios need h >= 1")
    fp = spec.fparams
    xi_x, xi_y, labels, family = _column_and_rows(spec, fp.family_size(spec.h), spec.k)
    if family is None:
        raise PreconditionError("could not place the start family")
    env = Environment(xi_x, xi_y, 0, 0)
    k = spec.k
    S = frozenset().union(*family)
    query = RemainderQuery(S, (0, spec.L ** k), k)
    pred = lambda rs: not contains_fractal(rs[0], k, labels, fp)
    return Instance(env, spec.L, [query], pred, {"family_size": len(family)})


def _record(name: str, params: dict, hits: int, trials: int, seed: int, **extra) -> EstimateRecord:
    return EstimateRecord.from_count(name, params, hits, trials, seed, **extra)


def estimate_u_k(k: int, p: float, scenario: ScenarioSpec, trials: int, seed: int) -> EstimateRecord:
    spec = replace(scenario, k=k, h=0)
    hits, n = mc_failure(u_instance(spec), p, trials, seed)
    return _record("u_k", {**spec.describe(), "p": p}, hits, n, seed)


def estimate_v_k(k: int, h: int, p: float, scenario: ScenarioSpec, trials: int,
                 seed: int) -> EstimateRecord:
    spec = replace(scenario, k=k, h=h)
    hits, n = mc_failure(v_instance(spec), p, trials, seed)
    return _record("v_k", {**spec.describe(), "p": p}, hits, n, seed)


def u_family(k: int, L: int, fparams: FractalParams) -> list[ScenarioSpec]:
    starts = ("grouped", "spread") if k > 0 else ("grouped",)
    defects = ("none", "left", "right") if k > 0 else ("none",)
    return [ScenarioSpec(k, 0, d, s, L=L, fparams=fparams) for s in starts for d in defects]


def v_family(k: int, L: int, fparams: FractalParams, hs: Sequence[int] = (1, 2)) -> list[ScenarioSpec]:
    starts = ("grouped", "spread") if k > 0 else ("grouped",)
    out = []
    for h in hs:
        defects = ["left", "right"] if k > 0 else ["left"]
        if k > 0 and h >= 3:
            defects.append("multi")
        out += [ScenarioSpec(k, h, d, s, L=L, fparams=fparams) for s in starts for d in defects]
    return out


def family_max(kind: str, specs: Sequence[ScenarioSpec], p: float, trials: int,
               seed: int) -> tuple[list[EstimateRecord], EstimateRecord]:
    """Per-scenario estimates and the record of the largest one."""
    if kind == "u":
        recs = [estimate_u_k(s.k, p, s, trials, seed) for s in specs]
    else:
        recs = [estimate_v_k(s.k, s.h, p, s, trials, seed) for s in specs]
    top = max(recs, key=lambda r: r.mean)
    summary = EstimateRecord(f"{kind}_k_max", {**top.params, "scenarios": len(recs)}, top.mean,
                             top.stderr, top.trials, seed)
    return recs, summary


# ---------------------------------------------------------------------------
# corridors and recovery

def block_gaps(n_intervals: int, k: int, L: int, defect_at: int | None = None) -> np.ndarray:
    """Gaps over a block of k-intervals, optionally with one intensity-1 interval."""
    xi = np.zeros(n_intervals * L ** k, dtype=np.int64)
    if defect_at is not None:
        xi[defect_at * L ** k:(defect_at + 1) * L ** k] = construct_gaps(1, k, L, "left")
    return xi


def corridor_instance(corridor: Corridor, L: int, fparams: FractalParams,
                      env: Environment | None = None, start: Iterable[int] | str = "grouped") -> Instance:
    """Not-well-crossed event of a good corridor from a fractal on its entry face."""
    k = corridor.k
    n = L ** k
    if env is None:
        span = (corridor.i1 + 1) * n
        across = (corridor.transverse + 1) * n
        zeros_a, zeros_t = np.zeros(span, dtype=np.int64), np.zeros(across, dtype=np.int64)
        env = (Environment(zeros_a, zeros_t) if corridor.orientation == "horizontal"
               else Environment(zeros_t, zeros_a))
    if corridor.orientation == "vertical":
        env = env.transposed()
        corridor = Corridor("horizontal", k, corridor.i0, corridor.i1, corridor.transverse)
    labels_x = _labels_on(env.xi_x, env.x_lo, k, L)
    labels_y = _labels_on(env.xi_y, env.y_lo, k, L)
    if not corridor.is_good(labels_x, labels_y):
        raise PreconditionError("corridor is not good")
    if start == "grouped":
        S = build_grouped_fractal(labels_y, IntervalIndex(k, corridor.transverse), fparams)
        if S is None:
            raise PreconditionError("no grouped fractal fits the corridor's entry interval")
    else:
        S = frozenset(start)
    query = RemainderQuery(frozenset(S), (corridor.i0 * n, (corridor.i1 + 1) * n), k)
    pred = lambda rs: not contains_fractal(rs[0], k, labels_y, fparams)
    return Instance(env, L, [query], pred, {"start_set": sorted(S)})


def _labels_on(xi: np.ndarray, lo: int, K: int, L: int) -> LabelTable:
    n = L ** K
    start = -(-lo // n) * n
    usable = (len(xi) - (start - lo)) // n * n
    if usable <= 0:
        raise PreconditionError("environment window too small for the requested scale")
    return compute_labels(xi[start - lo:start - lo + usable], ScaleParams(L, K), start)


def estimate_corridor_crossing(corridor: Corridor, p: float, start, trials: int, seed: int,
                               L: int = 4, fparams: FractalParams = FractalParams(),
                               env: Environment | None = None,
                               u_hat: float | None = None, v_hat: float | None = None) -> EstimateRecord:
    inst = corridor_instance(corridor, L, fparams, env, start)
    hits, n = mc_failure(inst, p, trials, seed)
    extra = {}
    if u_hat is not None and v_hat is not None:
        extra["bound"] = (corridor.i1 - corridor.i0 + 1) * max(u_hat, v_hat)
    params = {**asdict(corridor), "L": L, "p": p, "branching": fparams.branching}
    return _record("corridor_crossing", params, hits, n, seed, **extra)


def recovery_instance(k: int, L: int, fparams: FractalParams, block_len: int,
                      placement: str = "same", block_defect: int | None = None,
                      enforce_length: bool = True) -> Instance:
    """Joint non-recovery of three ordered k-grouped fractals across a good block.

    ``block_len`` is i1 - i0 for the block of k-intervals 0..block_len.
    ``placement="same"`` puts the three fractals in one (k+1)-interval,
    ``"split"`` in three consecutive ones.
    """
    if enforce_length and not (L / 2 + 2 <= block_len <= L):
        raise PreconditionError(f"block length {block_len} outside [L/2 + 2, L]")
    xi_x = block_gaps(block_len + 1, k, L, block_defect)
    labels_x = compute_labels(xi_x, ScaleParams(L, k))
    if block_weight(labels_x, k, 0, block_len) > 1:
        raise PreconditionError("block is not good")
    n_big = 1 if placement == "same" else 3
    xi_y = np.zeros(n_big * L ** (k + 1), dtype=np.int64)
    labels_y = compute_labels(xi_y, ScaleParams(L, k + 1))
    if placement == "same":
        if L < 3:
            raise PreconditionError("three fractals in one (k+1)-interval need L >= 3")
        spots = [IntervalIndex(k, j) for j in range(3)]
    elif placement == "split":
        spots = [IntervalIndex(k, j * L) for j in range(3)]
    else:
        raise ParameterError(f"unknown placement {placement!r}")
    starts = [build_grouped_fractal(labels_y, m, fparams) for m in spots]
    env = Environment(xi_x, xi_y)
    I = (0, (block_len + 1) * L ** k)
    queries = [RemainderQuery(S, I, k + 1) for S in starts]
    pred = lambda rs: not any(recovered(R, k, labels_y, fparams) for R in rs)
    return Instance(env, L, queries, pred, {"starts": [sorted(S) for S in starts]})


def estimate_recovery(k: int, p: float, block_len: int, trials: int, seed: int, L: int = 4,
                      fparams: FractalParams = FractalParams(), placement: str = "same",
                      block_defect: int | None = None, enforce_length: bool = True,
                      u_hat: float | None = None, v_hat: float | None = None) -> EstimateRecord:
    inst = recovery_instance(k, L, fparams, block_len, placement, block_defect, enforce_length)
    hits, n = mc_failure(inst, p, trials, seed)
    extra = {}
    if u_hat is not None and v_hat is not None:
        extra["bound"] = L ** 5 * max(u_hat, v_hat) ** 2
    params = {"k": k, "L": L, "p": p, "block_len": block_len, "placement": placement,
              "block_defect": block_defect, "branching": fparams.branching}
    return _record("recovery", params, hits, n, seed, **extra)


def contraction_report(k_range: Iterable[int], p: float, trials: int, seed: int, L: int = 4,
                       fparams: FractalParams = FractalParams(), hs: Sequence[int] = (1, 2),
                       C: float | None = None) -> list[dict]:
    """Per k: family-max estimates at k and k+1 next to C * max(u_k, v_k)**2."""
    C = float(L ** 6) if C is None else C
    cache: dict = {}

    def maxima(k: int) -> tuple[float, float]:
        if k not in cache:
            _, u = family_max("u", u_family(k, L, fparams), p, trials, seed)
            _, v = family_max("v", v_family(k, L, fparams, hs), p, trials, seed)
            cache[k] = (u.mean, v.mean)
        return cache[k]

    rows = []
    for k in k_range:
        u0, v0 = maxima(k)
        u1, v1 = maxima(k + 1)
        bound = C * max(u0, v0) ** 2
        rows.append({"k": k, "u_k": u0, "v_k": v0, "u_k1": u1, "v_k1": v1, "bound": bound,
                     "u_violation": u1 > bound, "v_violation": v1 > bound})
    return rows


# ---------------------------------------------------------------------------
# percolation smoke tests and the sharpness experiment

def _parallel_map(fn, items: list) -> list:
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def reach_frequency(p: float, rect: Rectangle, trials: int, seed: int,
                    env: Environment | None = None,
                    dists: tuple | None = None, origin=(0, 0)) -> tuple[int, int]:
    """Trials in which the origin's cluster touches the boundary of ``rect``.

    With ``env`` the environment is fixed (quenched); otherwise each trial
    draws its own environment from ``dists`` (annealed).
    """
    seeds = rng.trial_seeds(seed, "reach", trials)
    if env is not None:
        start = np.zeros((rect.width + 1, rect.height + 1), dtype=bool)
        start[origin[0] - rect.a, origin[1] - rect.c] = True
        hits = 0
        for lo in range(0, trials, 4096):
            h_open, v_open = sample_batch(env, p, rect, seeds[lo:lo + 4096])
            reached = batch_cluster(h_open, v_open, start)
            hits += int((reached[:, [0, -1], :].any(axis=(1, 2))
                         | reached[:, :, [0, -1]].any(axis=(1, 2))).sum())
        return hits, trials
    env_seeds = rng.trial_seeds(seed, "reach-env", trials)

    def one(t: int) -> bool:
        e = env if env is not None else sample_environment(
            dists[0], dists[1], (rect.a, rect.b), (rect.c, rect.d), int(env_seeds[t]))
        return cluster_touches_boundary(sample_configuration(e, p, rect, int(seeds[t])), origin)

    return int(sum(_parallel_map(one, list(range(trials))))), trials


def percolation_probability(dist_x: GapDistribution, dist_y: GapDistribution, p: float, n: int,
                            trials: int, seed: int, env: Environment | None = None) -> EstimateRecord:
    """Frequency of the origin reaching the boundary of [-n, n]^2."""
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    hits, t = reach_frequency(p, Rectangle(-n, n, -n, n), trials, seed, env, (dist_x, dist_y))
    params = {"dist_x": repr(dist_x), "dist_y": repr(dist_y), "p": p, "n": n,
              "quenched": env is not None}
    return _record("percolation_probability", params, hits, t, seed)


def k_of_p(p: float) -> int | None:
    """Smallest k >= 1 with p + p**k < 1; None when p = 1 (no such k)."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    if p == 1.0:
        return None
    k = 1
    while p + p ** k >= 1.0:
        k += 1
    return k


def longest_run(mask: np.ndarray) -> int:
    best = cur = 0
    for m in mask.tolist():
        cur = cur + 1 if m else 0
        best = max(best, cur)
    return best


def two_proportion_pvalue(h1: int, n1: int, h2: int, n2: int) -> float:
    """One-sided p-value for the first proportion exceeding the second."""
    pooled = (h1 + h2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 1.0 if h1 / n1 <= h2 / n2 else 0.0
    return float(stats.norm.sf((h1 / n1 - h2 / n2) / se))


def sharpness_experiment(dist_x: GapDistribution, dist_y: GapDistribution, p: float,
                         n_list: Sequence[int], delta: float, trials: int, seed: int,
                         a: float | None = None, run_length: int | None = None,
                         max_width: int = 10**5) -> list[dict]:
    """Rows per n with the frequencies of A_n, B_n and origin-to-boundary of R_n.

    ``R_n = [-e^n, e^n] x [-e^(delta n), e^(delta n)]`` (integer parts).  A_n is
    a run of ``run_length`` consecutive column gaps >= k(p) in [1, e^n);
    the default run length is ceil(beta n) with beta = 1 / (2 log(1/alpha)),
    alpha = P(xi^x >= k(p)).  B_n is max of xi^y over [1, e^(delta n)]
    exceeding a n, with default a = 1.01 / log(1/p).
    """
    if trials == 0:
        return []
    if trials < 0:
        raise ParameterError("trials must be non-negative")
    kp = k_of_p(p)
    alpha = float(dist_x.sf(kp)) if kp is not None else 0.0
    beta = 1 / (2 * math.log(1 / alpha)) if 0 < alpha < 1 else (math.inf if alpha >= 1 else 0.0)
    if a is None:
        a = 1.01 / math.log(1 / p) if 0 < p < 1 else (math.inf if p == 1 else 0.0)
    rows, prev = [], None
    for n in n_list:
        W = int(math.floor(math.exp(n)))
        Hn = max(1, int(math.floor(math.exp(delta * n))))
        if W > max_width:
            raise ParameterError(f"e^{n} exceeds the window limit {max_width}")
        if run_length is not None:
            run = run_length
        else:
            run = max(1, math.ceil(beta * n)) if beta < math.inf else 1
        rect = Rectangle(-W, W, -Hn, Hn)
        env_seeds = rng.trial_seeds(seed, f"sharp-env-{n}", trials)
        perc_seeds = rng.trial_seeds(seed, f"sharp-perc-{n}", trials)

        def one(t: int) -> tuple[bool, bool, bool]:
            env = sample_environment(dist_x, dist_y, (-W, W), (-Hn, Hn), int(env_seeds[t]))
            A = (kp is not None and W > 1 and longest_run(env.gaps_x(1, W) >= kp) >= run)
            B = bool(env.gaps_y(1, Hn + 1).max() > a * n)
            C = cluster_touches_boundary(sample_configuration(env, p, rect, int(perc_seeds[t])), (0, 0))
            return A, B, C

        res = np.array(_parallel_map(one, list(range(trials))), dtype=bool).reshape(trials, 3)
        hits = int(res[:, 2].sum())
        mean = hits / trials
        row = {"n": n, "width": W, "height": Hn, "k_p": kp, "run_length": run, "a": a,
               "A_freq": float(res[:, 0].mean()), "B_freq": float(res[:, 1].mean()),
               "conn_hits": hits, "trials": trials, "conn": mean,
               "conn_se": bernoulli_stderr(mean, trials),
               "pvalue_decrease": (two_proportion_pvalue(prev["conn_hits"], trials, hits, trials)
                                   if prev else None)}
        rows.append(row)
        prev = row
    return rows


# ---------------------------------------------------------------------------
# concentration bound

def binomial_cdf_exact(n: int, alpha, m: int) -> Fraction:
    """P(Bin(n, alpha) <= m) as an exact fraction (alpha parsed as a decimal)."""
    a = Fraction(str(alpha)) if not isinstance(alpha, Fraction) else alpha
    return sum((Fraction(math.comb(n, j)) * a ** j * (1 - a) ** (n - j) for j in range(0, m + 1)),
               Fraction(0))


def binomial_tail_check(alpha: float, n_list: Sequence[int], trials: int, seed: int) -> list[dict]:
    """Empirical P(sum of n Bernoulli(alpha) <= n/2) against 10(1-alpha) and the exact CDF."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError("alpha must lie in [0, 1]")
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    rows = []
    for n in n_list:
        draws = rng.generator(seed, "binomial", n).binomial(n, alpha, size=trials)
        hits = int((draws <= n / 2).sum())
        mean = hits / trials
        se = bernoulli_stderr(mean, trials)
        exact = float(binomial_cdf_exact(n, alpha, n // 2))
        bound = 10 * (1 - alpha)
        rows.append({"alpha": alpha, "n": n, "mean": mean, "stderr": se, "exact": exact,
                     "bound": bound, "trials": trials,
                     "bound_ok": mean <= bound + 3 * se,
                     "exact_ok": abs(mean - exact) <= 3 * bernoulli_stderr(exact, trials) + 1e-12})
    return rows


# ---------------------------------------------------------------------------
# nested crossings from the origin

def good_origin_environment(dist_x: GapDistribution, dist_y: GapDistribution, K: int, L: int,
                            seed: int, budget: int = 10**6) -> Environment:
    """Rejection-sample gaps on [0, L**K) with I_(k,0) good on both axes for k <= K."""
    for attempt in range(budget):
        env = sample_environment(dist_x, dist_y, (0, L ** K - 1), (0, L ** K - 1),
                                 rng.derive_seed(seed, "good-origin", attempt))
        if _origin_good(env, K, L):
            return env
    raise ConditioningError("no environment with good origin intervals within budget")


def _origin_good(env: Environment, K: int, L: int) -> bool:
    lx = compute_labels(env.gaps_x(0, L ** K), ScaleParams(L, K))
    ly = compute_labels(env.gaps_y(0, L ** K), ScaleParams(L, K))
    return all(lx.is_good(k, 0) and ly.is_good(k, 0) for k in range(K + 1))


def _crosses(h_open: np.ndarray, v_open: np.ndarray) -> np.ndarray:
    """Left-to-right crossing indicator for a batch of rectangles."""
    src = np.ones(h_open.shape[2] + 1, dtype=bool)
    return batch_flood(h_open, v_open, src).any(axis=1)


def _gluing_success(h_open: np.ndarray, v_open: np.ndarray, k0: int, K: int, L: int) -> np.ndarray:
    ok = v_open[:, 0, :L ** k0].all(axis=1)
    for k in range(k0, K):
        a, b = L ** (k + 1), L ** k
        ok &= _crosses(h_open[:, :a, :b], v_open[:, :a, :b])
        # vertical traversal of [0, L^k) x [0, L^(k+1)) is a horizontal one after transposing
        ok &= _crosses(v_open[:, :b, :a].transpose(0, 2, 1), h_open[:, :b, :a].transpose(0, 2, 1))
    return ok


def _gluing_rect(k0: int, K: int, L: int) -> Rectangle:
    side = L ** max(K, k0)
    return Rectangle(0, side, 0, side)


def gluing_event(sample, k0: int, K: int, L: int) -> bool:
    """The nested-crossing event on one sample (union-find path)."""
    if not all(sample.is_open(((0, y), (0, y + 1))) for y in range(L ** k0)):
        return False
    for k in range(k0, K):
        for rect, axis in ((Rectangle(0, L ** (k + 1), 0, L ** k), "h"),
                           (Rectangle(0, L ** k, 0, L ** (k + 1)), "v")):
            lab = site_labels(sample.restrict(rect))
            first, last = (lab[0], lab[-1]) if axis == "h" else (lab[:, 0], lab[:, -1])
            if not set(first.tolist()) & set(last.tolist()):
                return False
    return True


def gluing_diagnostic(k0: int, K: int, p: float, env: Environment, trials: int, seed: int,
                      L: int = 4) -> EstimateRecord:
    """Frequency of: open column {0} x I^y_(k0,0), then for k0 <= k < K a horizontal
    traversal of I^x_(k+1,0) x I^y_(k,0) and a vertical one of I^x_(k,0) x I^y_(k+1,0)."""
    if K < k0 or k0 < 0:
        raise ParameterError("need 0 <= k0 <= K")
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    if not _origin_good(env, K, L):
        raise PreconditionError("origin intervals of the environment are not all good")
    rect = _gluing_rect(k0, K, L)
    hits = 0
    for seeds in _trial_chunks(seed, trials, "gluing"):
        h_open, v_open = sample_batch(env, p, rect, seeds)
        hits += int(_gluing_success(h_open, v_open, k0, K, L).sum())
    return _record("gluing_diagnostic", {"k0": k0, "K": K, "L": L, "p": p}, hits, trials, seed)


def _closure_crosses(h_open: np.ndarray, v_open: np.ndarray) -> np.ndarray:
    conn = closure(h_open, v_open)
    W, H = h_open.shape[1], h_open.shape[2] + 1
    left, right = np.arange(H), W * H + np.arange(H)
    return conn[:, left][:, :, right].any(axis=(1, 2))


def gluing_exact(k0: int, K: int, p: float, env: Environment, L: int = 4) -> float:
    """Exact probability of the nested-crossing event (transitive-closure connectivity)."""

    def success(h_open, v_open):
        ok = v_open[:, 0, :L ** k0].all(axis=1)
        for k in range(k0, K):
            a, b = L ** (k + 1), L ** k
            ok &= _closure_crosses(h_open[:, :a, :b], v_open[:, :a, :b])
            ok &= _closure_crosses(v_open[:, :b, :a].transpose(0, 2, 1),
                                   h_open[:, :b, :a].transpose(0, 2, 1))
        return ok

    return exact_batch_probability(env, p, _gluing_rect(k0, K, L), success)


def reach_exact(p: float, rect: Rectangle, env: Environment, origin=(0, 0)) -> float:
    """Exact probability that the origin's cluster touches the boundary of ``rect``."""
    H = rect.height + 1
    xs, ys = np.divmod(np.arange(rect.n_sites), H)
    boundary = np.flatnonzero((xs == 0) | (xs == rect.width) | (ys == 0) | (ys == H - 1))
    o = int(rect.site_index(*origin))

    def touches(h_open, v_open):
        return closure(h_open, v_open)[:, o, boundary].any(axis=1)

    return exact_batch_probability(env, p, rect, touches)
