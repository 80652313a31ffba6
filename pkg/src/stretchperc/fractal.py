"""Fractal site sets, ordered families, corridors and recovery.

Sets of heights are plain ``frozenset`` objects of integers.  Goodness of a
height or of a scale-k interval is always read from a :class:`LabelTable`
built on the row gaps ``xi_y``.

A 0-fractal is a single good height.  A k-fractal is a k-good set made of
``branching`` (k-1)-fractals whose scale-(k-1) intervals come in strictly
increasing order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import GeometryError, ParameterError, PreconditionError
from .perc import PercSample, sliced_remainder
from .renorm import IntervalIndex, LabelTable, ScaleParams, block_weight


@dataclass(frozen=True)
class FractalParams:
    branching: int = 2
    loss_exponent: int = 1
    corridor_count_vertical: int = 4
    recovery_family_size: int | None = None  # None means L - 1

    def __post_init__(self):
        if self.branching < 1 or self.loss_exponent < 1 or self.corridor_count_vertical < 1:
            raise ParameterError("fractal parameters must be positive")
        if self.recovery_family_size is not None and self.recovery_family_size < 1:
            raise ParameterError("recovery family size must be positive")

    def recovery_size(self, L: int) -> int:
        size = L - 1 if self.recovery_family_size is None else self.recovery_family_size
        if size > L:
            raise ParameterError("recovery family size cannot exceed L")
        return size

    def family_size(self, h: int) -> int:
        """Number of fractals in the start family for a column of intensity h."""
        return 2 ** (self.loss_exponent * (h - 1))


def _L(params) -> int:
    return params.L if isinstance(params, (ScaleParams,)) else int(params)


def z_k(S: Iterable[int], k: int, params) -> set[IntervalIndex]:
    """The scale-k intervals meeting S."""
    n = _L(params) ** k
    return {IntervalIndex(k, s // n) for s in S}


def _indices(S: Iterable[int], k: int, L: int) -> list[int]:
    n = L ** k
    return sorted({s // n for s in S})


class GroupedResult:
    """Truthy when the set sits in a single interval; ``degenerate`` flags the empty set."""

    __slots__ = ("grouped", "degenerate")

    def __init__(self, grouped: bool, degenerate: bool):
        self.grouped = grouped
        self.degenerate = degenerate

    def __bool__(self):
        return self.grouped

    def __repr__(self):
        return f"GroupedResult(grouped={self.grouped}, degenerate={self.degenerate})"


def is_grouped(S: Iterable[int], k: int, params) -> GroupedResult:
    S = list(S)
    if not S:
        return GroupedResult(True, True)
    return GroupedResult(len(z_k(S, k, params)) == 1, False)


def is_k_good(S: Iterable[int], k: int, labels: LabelTable) -> bool:
    return all(labels.is_good(k, i) for i in _indices(S, k, labels.params.L))


def is_k_ordered(sets: Sequence[Iterable[int]], k: int, L: int) -> bool:
    """Do the sets occupy strictly increasing runs of scale-k intervals?"""
    prev = None
    for S in sets:
        idx = _indices(S, k, L)
        if not idx:
            return False
        if prev is not None and idx[0] <= prev:
            return False
        prev = idx[-1]
    return True


def is_k_fractal(S: Iterable[int], k: int, labels: LabelTable, fparams: FractalParams) -> bool:
    S = sorted(set(S))
    b = fparams.branching
    if len(S) != b ** k:
        return False
    if k == 0:
        return labels.h(0, S[0]) == 0
    if not is_k_good(S, k, labels):
        return False
    # an ordered family is increasing, so the children are consecutive chunks
    size = b ** (k - 1)
    chunks = [S[j * size:(j + 1) * size] for j in range(b)]
    return (is_k_ordered(chunks, k - 1, labels.params.L)
            and all(is_k_fractal(c, k - 1, labels, fparams) for c in chunks))


@dataclass(frozen=True)
class OrderedFamily:
    sets: tuple
    k: int
    L: int

    def __post_init__(self):
        sets = tuple(frozenset(int(s) for s in S) for S in self.sets)
        if not is_k_ordered(sets, self.k, self.L):
            raise GeometryError("family is not ordered at the given scale")
        object.__setattr__(self, "sets", sets)

    def __len__(self):
        return len(self.sets)

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "sets": [sorted(S) for S in self.sets]})

    @classmethod
    def from_json(cls, text: str, L: int) -> "OrderedFamily":
        obj = json.loads(text)
        return cls(tuple(obj["sets"]), obj["k"], L)


def siteset_to_json(S: Iterable[int]) -> str:
    return json.dumps(sorted(int(s) for s in S))


def build_grouped_fractal(labels: LabelTable, m: IntervalIndex,
                          fparams: FractalParams) -> frozenset[int] | None:
    """Greedy k-fractal inside the good interval m, taking leftmost good children first."""
    L = labels.params.L
    if not labels.is_good(m.k, m.i):
        raise PreconditionError(f"interval {tuple(m)} is bad")

    def build(k: int, i: int):
        if k == 0:
            return [i] if labels.h(0, i) == 0 else None
        parts = []
        for child in IntervalIndex(k, i).children(L):
            if labels.is_good(*child):
                sub = build(*child)
                if sub is not None:
                    parts.append(sub)
                    if len(parts) == fparams.branching:
                        return [x for part in parts for x in part]
        return None

    out = build(m.k, m.i)
    return None if out is None else frozenset(out)


def _group_by_interval(T: Sequence[int], k: int, L: int) -> list[tuple[int, list[int]]]:
    n = L ** k
    groups: list[tuple[int, list[int]]] = []
    for t in T:
        i = t // n
        if groups and groups[-1][0] == i:
            groups[-1][1].append(t)
        else:
            groups.append((i, [t]))
    return groups


def count_ordered_fractals(T: Iterable[int], k: int, labels: LabelTable,
                           fparams: FractalParams, stop_at: int | None = None) -> int:
    """Largest N such that T contains a k-ordered family of N k-fractals.

    Scale by scale, intervals are scanned left to right and a fractal is
    closed as soon as the pooled points of the good intervals seen so far
    hold ``branching`` ordered fractals one scale down.  Closing at the
    earliest interval is optimal because the next fractal may only use later
    intervals.  ``stop_at`` ends the scan once that count is reached.
    """
    L = labels.params.L
    b = fparams.branching

    def count(points: list[int], k: int, cap: int | None) -> int:
        if k == 0:
            good = sum(1 for t in points if labels.h(0, t) == 0)
            return good if cap is None else min(good, cap)
        found, pool = 0, []
        for i, members in _group_by_interval(points, k, L):
            if not labels.is_good(k, i):
                continue
            pool.extend(members)
            if count(pool, k - 1, b) >= b:
                found += 1
                pool = []
                if cap is not None and found >= cap:
                    break
        return found

    return count(sorted(set(T)), k, stop_at)


def contains_fractal(T: Iterable[int], k: int, labels: LabelTable, fparams: FractalParams) -> bool:
    return count_ordered_fractals(T, k, labels, fparams, stop_at=1) >= 1


def contains_grouped_fractal(T: Iterable[int], k: int, labels: LabelTable,
                             fparams: FractalParams) -> bool:
    """Does T contain a k-fractal lying inside one scale-k interval?"""
    L = labels.params.L
    return any(labels.is_good(k, i) and contains_fractal(members, k, labels, fparams)
               for i, members in _group_by_interval(sorted(set(T)), k, L))


@dataclass(frozen=True)
class Corridor:
    """A row (horizontal) or column (vertical) of scale-k squares.

    The block axis runs over interval indices ``i0..i1``; ``transverse`` is
    the index of the interval on the other axis.
    """

    orientation: str
    k: int
    i0: int
    i1: int
    transverse: int

    def __post_init__(self):
        if self.orientation not in ("horizontal", "vertical"):
            raise ParameterError("orientation must be horizontal or vertical")
        if self.i0 > self.i1:
            raise ParameterError("corridor needs i0 <= i1")

    @property
    def length(self) -> int:
        return self.i1 - self.i0

    def cells(self) -> set[tuple[int, int]]:
        """Scale-k squares (x-index, y-index) covered."""
        if self.orientation == "horizontal":
            return {(i, self.transverse) for i in range(self.i0, self.i1 + 1)}
        return {(self.transverse, i) for i in range(self.i0, self.i1 + 1)}

    def rect(self, L: int):
        from .perc import Rectangle
        n = L ** self.k
        lo, hi = self.i0 * n, (self.i1 + 1) * n
        t0, t1 = self.transverse * n, (self.transverse + 1) * n
        if self.orientation == "horizontal":
            return Rectangle(lo, hi, t0, t1)
        return Rectangle(t0, t1, lo, hi)

    def is_good(self, labels_x: LabelTable, labels_y: LabelTable) -> bool:
        """Transverse interval good and block k-good."""
        along, across = (labels_x, labels_y) if self.orientation == "horizontal" else (labels_y, labels_x)
        return (across.is_good(self.k, self.transverse)
                and block_weight(along, self.k, self.i0, self.i1) <= 1)


def branch_corridors(k: int, i0: int, i1: int, j: int, L: int,
                     labels_x: LabelTable | None = None,
                     n_vertical: int = 4) -> tuple[list[Corridor], list[Corridor]]:
    """Corridors crossing the rectangle (block i0..i1 at scale k) x I^y_(k+1, j).

    Horizontal corridors sit on the L scale-k rows of the (k+1)-interval j.
    Vertical corridors use the leftmost ``n_vertical`` good k-intervals of the
    block (the leftmost intervals when no labels are given).
    """
    if i1 - i0 < L / 2:
        raise PreconditionError(f"block length {i1 - i0} is shorter than L/2 = {L / 2}")
    horizontal = [Corridor("horizontal", k, i0, i1, j * L + l - 1) for l in range(1, L + 1)]
    candidates = [i for i in range(i0, i1 + 1) if labels_x is None or labels_x.is_good(k, i)]
    if len(candidates) < n_vertical:
        raise PreconditionError(
            f"block has {len(candidates)} usable intervals, {n_vertical} vertical corridors needed")
    vertical = [Corridor("vertical", k, j * L, j * L + L - 1, i) for i in candidates[:n_vertical]]
    return horizontal, vertical


def detect_recovery(sample: PercSample, S: Iterable[int], I: tuple[int, int],
                    labels_y: LabelTable, fparams: FractalParams, k: int,
                    check_fractal: bool = True) -> bool:
    """Does the scale-(k+1) sliced remainder of S across I hold enough k-fractals
    in one (k+1)-interval?"""
    S = frozenset(S)
    if check_fractal and not is_k_fractal(S, k, labels_y, fparams):
        raise PreconditionError("S is not a k-fractal")
    params = labels_y.params
    if params.K_max < k + 1:
        raise PreconditionError("labels must reach scale k + 1")
    R = sliced_remainder(sample, S, I, k + 1, params)
    return recovered(R, k, labels_y, fparams)


def recovered(R: Iterable[int], k: int, labels_y: LabelTable, fparams: FractalParams) -> bool:
    """Some (k+1)-interval holds a k-ordered family of the recovery size inside R."""
    L = labels_y.params.L
    need = fparams.recovery_size(L)
    return any(count_ordered_fractals(members, k, labels_y, fparams, stop_at=need) >= need
               for _, members in _group_by_interval(sorted(set(R)), k + 1, L))
