"""Multiscale interval paving and the recursive defect labels.

Scale ``k`` intervals are ``[i L**k, (i+1) L**k)``.  Every interval carries a
defect intensity ``H`` (0 means good) and a structure label ``B``: the last
scale at which two or more defects merged.  The labels are built bottom-up
from a gap sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import rng
from .env import GapDistribution, Geometric
from .errors import AlignmentError, ParameterError, ResourceError, WindowError
from .records import EstimateRecord, fmt

RENORM_COLUMNS = ("experiment", "k", "h", "b", "L", "rho", "trials", "seed", "mean", "stderr")


@dataclass(frozen=True)
class ScaleParams:
    L: int = 10
    K_max: int = 2

    def __post_init__(self):
        if self.L < 2:
            raise ParameterError("scale ratio L must be at least 2")
        if self.K_max < 0:
            raise ParameterError("K_max must be non-negative")
        if self.L ** self.K_max >= 2**63:
            raise ParameterError("L**K_max does not fit in 64-bit arithmetic")

    def length(self, k: int) -> int:
        return self.L ** k


class IntervalIndex(NamedTuple):
    k: int
    i: int

    def bounds(self, L: int) -> tuple[int, int]:
        n = L ** self.k
        return self.i * n, (self.i + 1) * n

    def children(self, L: int) -> list["IntervalIndex"]:
        if self.k == 0:
            return []
        return [IntervalIndex(self.k - 1, self.i * L + j) for j in range(L)]

    def parent(self, L: int) -> "IntervalIndex":
        return IntervalIndex(self.k + 1, self.i // L)


def interval_of(x: int, k: int, L: int) -> int:
    """Index i of the scale-k interval containing the integer x."""
    return x // (L ** k)


def label_arrays(xi: np.ndarray, L: int, K: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """H and B labels for every scale, vectorised over leading batch axes.

    ``xi`` has shape (..., n) with n a multiple of L**K.
    """
    H = [np.asarray(xi, dtype=np.int64)]
    B = [np.zeros_like(H[0])]
    for k in range(K):
        ch = H[k].reshape(*H[k].shape[:-1], -1, L)
        cb = B[k].reshape(*B[k].shape[:-1], -1, L)
        bad = ch > 0
        nbad = bad.sum(axis=-1)
        first = np.argmax(bad, axis=-1)[..., None]
        h_single = np.take_along_axis(ch, first, axis=-1)[..., 0] - 1
        b_single = np.take_along_axis(cb, first, axis=-1)[..., 0]
        h_multi = 1 + ch.sum(axis=-1)  # good children contribute 0
        h = np.where(nbad == 0, 0, np.where(nbad == 1, h_single, h_multi))
        b = np.where(nbad >= 2, k + 1, np.where((nbad == 1) & (h > 0), b_single, 0))
        H.append(h)
        B.append(b)
    return H, B


@dataclass(frozen=True, eq=False)
class LabelTable:
    """Labels over a window starting at ``lo`` (a multiple of L**K_max)."""

    params: ScaleParams
    lo: int
    H: tuple
    B: tuple

    def _pos(self, k: int, i: int) -> int:
        if not 0 <= k <= self.params.K_max:
            raise WindowError(f"scale {k} outside [0, {self.params.K_max}]")
        first = self.lo // self.params.length(k)
        if not first <= i < first + len(self.H[k]):
            raise WindowError(f"interval ({k},{i}) outside the labelled window")
        return i - first

    def index_range(self, k: int) -> range:
        first = self.lo // self.params.length(k)
        return range(first, first + len(self.H[k]))

    def contains(self, k: int, i: int) -> bool:
        return 0 <= k <= self.params.K_max and i in self.index_range(k)

    def h(self, k: int, i: int) -> int:
        return int(self.H[k][self._pos(k, i)])

    def b(self, k: int, i: int) -> int:
        return int(self.B[k][self._pos(k, i)])

    def is_good(self, k: int, i: int) -> bool:
        return self.h(k, i) == 0


def compute_labels(xi, params: ScaleParams, lo: int = 0) -> LabelTable:
    """Build the label table of a gap sequence whose first entry sits at ``lo``."""
    xi = np.asarray(xi, dtype=np.int64)
    n = params.length(params.K_max)
    if xi.ndim != 1 or len(xi) == 0 or len(xi) % n or lo % n:
        raise AlignmentError(
            f"window [{lo}, {lo + len(xi)}) is not aligned to scale {params.K_max} (L={params.L})")
    H, B = label_arrays(xi, params.L, params.K_max)
    for arr in (*H, *B):
        arr.setflags(write=False)
    return LabelTable(params, lo, tuple(H), tuple(B))


def block_weight(table: LabelTable, k: int, i0: int, i1: int) -> int:
    """Sum of H over the scale-k intervals i0..i1 inclusive."""
    if i0 > i1:
        raise ParameterError("block needs i0 <= i1")
    table._pos(k, i0)
    table._pos(k, i1)
    return int(sum(table.h(k, i) for i in range(i0, i1 + 1)))


def is_good_block(table: LabelTable, k: int, i0: int, i1: int) -> bool:
    return block_weight(table, k, i0, i1) <= 1


def block_length(i0: int, i1: int) -> int:
    return i1 - i0


def _position_zero_labels(dist: GapDistribution, params: ScaleParams, trials: int,
                          seed: int, chunk_sites: int = 1 << 22):
    """Yield (H, B) label columns at position 0 for chunks of fresh environments."""
    n = params.length(params.K_max)
    chunk = max(1, chunk_sites // n)
    base = np.uint64(rng.derive_seed(seed, "renorm-env"))
    idx = np.arange(n)
    for start in range(0, trials, chunk):
        t = np.arange(start, min(trials, start + chunk))
        u = rng.uniforms(base, t[:, None], idx[None, :])
        H, B = label_arrays(dist.ppf(u), params.L, params.K_max)
        yield [h[:, 0] for h in H], [b[:, 0] for b in B]


def _check_trials(trials: int):
    if trials < 1:
        raise ParameterError("trials must be at least 1")


def _rho_of(dist) -> float | str:
    return dist.rho if isinstance(dist, Geometric) else ""


def estimate_pk(dist: GapDistribution, params: ScaleParams, trials: int,
                seed: int) -> list[EstimateRecord]:
    """Frequency of {H_(k,0) > 0} for every k <= K_max over fresh environments."""
    _check_trials(trials)
    bad = np.zeros(params.K_max + 1, dtype=np.int64)
    for H, _ in _position_zero_labels(dist, params, trials, seed):
        bad += [int((h > 0).sum()) for h in H]
    return [
        EstimateRecord.from_count("estimate_pk", {"k": k, "h": "", "b": "", "L": params.L,
                                                  "rho": _rho_of(dist), "dist": repr(dist)},
                                  int(bad[k]), trials, seed)
        for k in range(params.K_max + 1)
    ]


def estimate_pkhb(dist: GapDistribution, params: ScaleParams, trials: int, seed: int,
                  h_max: int = 32) -> dict[tuple[int, int, int], EstimateRecord]:
    """Joint frequencies of (H_(k,0), B_(k,0)).

    Keys are (k, h, b) with h in [0, h_max + 1] and b in [0, K_max]; the bin
    h = h_max + 1 pools every h > h_max.
    """
    _check_trials(trials)
    K = params.K_max
    counts = np.zeros((K + 1, h_max + 2, K + 1), dtype=np.int64)
    for H, B in _position_zero_labels(dist, params, trials, seed):
        for k in range(K + 1):
            h = np.minimum(H[k], h_max + 1)
            np.add.at(counts[k], (h, B[k]), 1)
    out = {}
    for k in range(K + 1):
        for h in range(h_max + 2):
            for b in range(K + 1):
                params_row = {"k": k, "h": h, "b": b, "L": params.L, "rho": _rho_of(dist),
                              "dist": repr(dist), "overflow": h == h_max + 1}
                out[(k, h, b)] = EstimateRecord.from_count(
                    "estimate_pkhb", params_row, int(counts[k, h, b]), trials, seed)
    return out


def renorm_row(rec: EstimateRecord) -> list[str]:
    p = rec.params
    return [rec.experiment, str(p["k"]), str(p["h"]), str(p["b"]), str(p["L"]),
            fmt(p["rho"]), str(rec.trials), str(rec.seed), fmt(rec.mean), fmt(rec.stderr)]


# ---------------------------------------------------------------------------
# certificate

@dataclass
class CertificateReport:
    checked_ranges: dict
    violations: list
    min_margin: float
    violation_count: int = 0
    hypotheses: dict | None = None

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def to_json(self) -> dict:
        return {
            "checked_ranges": self.checked_ranges,
            "violations": self.violations,
            "min_margin": self.min_margin,
            "violation_count": self.violation_count,
            "hypotheses": self.hypotheses or {},
            "passed": self.passed,
        }


_SLACK = 1e-12  # relative slack; far above accumulated float64 rounding here


def _log_L(x, L: int) -> float:
    """log base L of a positive int, float or Fraction."""
    if isinstance(x, Fraction):
        return (math.log(x.numerator) - math.log(x.denominator)) / math.log(L)
    return math.log(x) / math.log(L)


def _as_fraction(rho) -> Fraction:
    return rho if isinstance(rho, Fraction) else Fraction(rho)


def phi(r, h, k, L: int):
    """Exponent comparing the multi-defect bound with the target bound (base L)."""
    lg = np.log(L)
    return (-(r - 1) * k - h / ((k + 1) * (k + 2)) - 12 * r + 18
            + r * np.log(h) / lg + r * np.log(k + 1) / lg)


def _phi_interval(r: int, h: int, k: int, L: int):
    import mpmath
    iv = mpmath.iv
    iv.prec = 200
    lg = iv.log(L)
    return (-(r - 1) * k - iv.mpf(h) / ((k + 1) * (k + 2)) - 12 * r + 18
            + r * iv.log(h) / lg + r * iv.log(k + 1) / lg)


class _Collector:
    def __init__(self, limit: int = 100):
        self.items: list = []
        self.count = 0
        self.min_margin = math.inf
        self.limit = limit

    def margin(self, value: float):
        self.min_margin = min(self.min_margin, float(value))

    def add(self, check: str, point: dict, margin: float):
        self.count += 1
        if len(self.items) < self.limit:
            self.items.append({"check": check, "point": point, "margin": float(margin)})

    def add_many(self, check: str, names: tuple, coords: list, margins: np.ndarray):
        """Record clear violations given as parallel coordinate arrays."""
        self.count += len(margins)
        room = self.limit - len(self.items)
        for j in range(min(room, len(margins))):
            point = {n: int(c[j]) for n, c in zip(names, coords)}
            self.items.append({"check": check, "point": point, "margin": float(margins[j])})


def check_certificate(L: int, rho, r_max: int = 100, h_max: int = 10**4,
                      k_max: int = 100, b_max: int | None = None,
                      max_points: float = 5e9) -> CertificateReport:
    """Verify the decay-induction inequalities on a finite grid.

    Checks, all compared as base-L exponents:

    * base case: ``rho**h <= L**(-3h-13)`` for h in [1, h_max];
    * single-defect step: ``1 - (k + (h+1)/(b+1)) - 2(h+1) - 13 <= -((k+1) + h/(b+1)) - 2h - 13``;
    * multi-defect step: ``phi(r, h, k) < -r`` for r in [2, r_max];
    * summation: ``(k+1) L**(-k-15) / (1 - L**-2) <= L**(-k/2)``.

    A margin is "right side minus left side" and must be >= 0 (> 0 for the
    strict inequality).  Float64 evaluation carries a relative slack; grid
    points inside the slack are re-decided exactly (fractions) or with
    interval arithmetic, so a pass is rigorous on the grid.

    ``rho`` may be a float or a ``fractions.Fraction``; pass a Fraction such as
    ``Fraction(1, L**16)`` to test equality cases exactly.
    """
    if L < 2:
        raise ParameterError("L must be at least 2")
    if b_max is None:
        b_max = k_max
    if min(r_max - 1, h_max, k_max + 1, b_max + 1) < 1:
        raise ParameterError("empty certificate grid")
    n_phi = (r_max - 1) * h_max * (k_max + 1)
    n_case1 = h_max * sum(min(k, b_max) + 1 for k in range(k_max + 1))
    total = n_phi + n_case1 + h_max + k_max + 1
    if total > max_points:
        scale = max_points / total
        raise ResourceError(
            f"certificate grid has {total:.3g} points (limit {max_points:.3g}); "
            f"try h_max <= {max(1, int(h_max * scale))} or k_max <= {max(0, int(k_max * scale))}")

    out = _Collector()
    rho_f = _as_fraction(rho)
    if not 0 < rho_f < 1:
        raise ParameterError("rho must lie in (0, 1)")
    lrho = _log_L(rho_f, L)

    # base case
    h = np.arange(1, h_max + 1, dtype=np.float64)
    margin = (-3 * h - 13) - h * lrho
    slack = _SLACK * (np.abs(3 * h + 13) + np.abs(h * lrho) + 1)
    for idx in np.flatnonzero(margin < slack):
        hh = int(h[idx])
        holds = rho_f ** hh * Fraction(L) ** (3 * hh + 13) <= 1
        m = 0.0 if (holds and margin[idx] < 0) else float(margin[idx])
        if not holds:
            out.add("base_case", {"h": hh}, min(m, -abs(m)))
        margin[idx] = m
    out.margin(margin.min())

    # single-defect chain
    hs = np.arange(1, h_max + 1, dtype=np.float64)[None, :]
    for k in range(k_max + 1):
        b = np.arange(0, min(k, b_max) + 1, dtype=np.float64)[:, None]
        lhs = 1 - (k + (hs + 1) / (b + 1)) - 2 * (hs + 1) - 13
        rhs = -((k + 1) + hs / (b + 1)) - 2 * hs - 13
        m = rhs - lhs
        slack = _SLACK * (np.abs(lhs) + np.abs(rhs) + 1)
        for bi, hi in zip(*np.nonzero(m < slack)):
            bb, hh = int(b[bi, 0]), int(hs[0, hi])
            lhs_q = 1 - (k + Fraction(hh + 1, bb + 1)) - 2 * (hh + 1) - 13
            rhs_q = -((k + 1) + Fraction(hh, bb + 1)) - 2 * hh - 13
            if lhs_q > rhs_q:
                out.add("case1_chain", {"k": k, "h": hh, "b": bb}, float(rhs_q - lhs_q))
        out.margin(m.min())

    # multi-defect exponent
    r = np.arange(2, r_max + 1, dtype=np.float64)[:, None]
    for k in range(k_max + 1):
        m = -r - phi(r, hs, k, L)
        terms = (r - 1) * k + hs / ((k + 1) * (k + 2)) + 12 * r + 18 + r * np.log(hs) + r * np.log(k + 1)
        slack = _SLACK * (terms + 1)
        clear = np.nonzero(m <= -slack)
        if len(clear[0]):
            out.add_many("phi_lt_minus_r", ("r", "h", "k"),
                         [r[clear[0], 0], hs[0, clear[1]], np.full(len(clear[0]), k)], m[clear])
        for ri, hi in zip(*np.nonzero(np.abs(m) < slack)):
            rr, hh = int(r[ri, 0]), int(hs[0, hi])
            if not _phi_interval(rr, hh, k, L).b < -rr:
                out.add("phi_lt_minus_r", {"r": rr, "h": hh, "k": k}, float(m[ri, hi]))
        out.margin(m.min())

    # summation bound
    ks = np.arange(k_max + 1, dtype=np.float64)
    lhs = np.log(ks + 1) / np.log(L) - ks - 15 - np.log1p(-float(L) ** -2) / np.log(L)
    m = -ks / 2 - lhs
    for idx in np.flatnonzero(m < _SLACK * (np.abs(lhs) + ks + 1)):
        kk = int(ks[idx])
        lhs_q = Fraction(kk + 1) / (Fraction(L) ** (kk + 15) * (1 - Fraction(1, L * L)))
        # compare lhs_q**2 <= L**(-k) exactly
        if lhs_q ** 2 > Fraction(1, L ** kk):
            out.add("summation", {"k": kk}, float(m[idx]))
    out.margin(m.min())

    ranges = {"r": [2, r_max], "h": [1, h_max], "k": [0, k_max], "b": [0, b_max],
              "L": L, "rho": str(rho_f) if rho_f.denominator < 10**30 else float(rho_f)}
    hyp = {"rho_at_most_L^-16": bool(rho_f <= Fraction(1, L ** 16)),
           "L_at_least_2^15+1": L >= 2**15 + 1}
    return CertificateReport(ranges, out.items, out.min_margin, out.count, hyp)
