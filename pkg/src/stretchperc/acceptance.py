"""Acceptance checks grouped into suites.

Each suite returns a list of :class:`Check` records whose ``detail`` strings
depend only on the configured seed, so reruns are byte-identical.  The
independent oracles used here (a straight-line label derivation, exhaustive
enumeration, exact binomial sums, path enumeration) are kept separate from
the code paths they check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import estimators as est
from . import oriented as ori
from . import rng
from .env import BoundedUniform, Environment, Geometric, PointMass, PolynomialTail
from .fractal import Corridor, FractalParams
from .perc import Rectangle
from .renorm import ScaleParams, check_certificate, compute_labels, estimate_pkhb

MASTER_SEED = 20261018


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.criterion}: {self.name} ({self.detail})"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# ---------------------------------------------------------------------------
# criterion 1: scale-0 exact formulas

def scale0_checks(trials: int = 10**5, seed: int = MASTER_SEED) -> list[Check]:
    fp = FractalParams(branching=2, loss_exponent=1)
    out = []
    for p in (0.5, 0.9, 0.99):
        u_exact, _ = est.exact_scale0(p, 1, fp)
        rec = est.estimate_u_k(0, p, est.ScenarioSpec(L=4, fparams=fp), trials, seed)
        out.append(Check(1, f"u_0(p={p}) = 1 - p", rec.within(u_exact),
                         f"estimate {_fmt(rec.mean)} exact {_fmt(u_exact)}"))
        for h in (1, 2, 3):
            _, v_exact = est.exact_scale0(p, h, fp)
            spec = est.ScenarioSpec(0, h, "left", L=4, fparams=fp)
            rec = est.estimate_v_k(0, h, p, spec, trials, seed)
            out.append(Check(1, f"v_0(p={p}, h={h})", rec.within(v_exact),
                             f"estimate {_fmt(rec.mean)} exact {_fmt(v_exact)}"))
    return out


# ---------------------------------------------------------------------------
# criteria 2 and 3: labels

def straight_line_labels(xi, L: int, K: int) -> tuple[dict, dict]:
    """Labels by direct top-down recursion over interval indices (dict based)."""
    H: dict = {}
    B: dict = {}

    def label(k: int, i: int):
        if (k, i) in H:
            return H[(k, i)], B[(k, i)]
        if k == 0:
            H[(0, i)], B[(0, i)] = int(xi[i]), 0
            return H[(0, i)], B[(0, i)]
        kids = [label(k - 1, i * L + t) for t in range(L)]
        bad = [hb for hb in kids if hb[0] != 0]
        if not bad:
            h, b = 0, 0
        elif len(bad) == 1:
            h = bad[0][0] - 1
            b = bad[0][1] if h != 0 else 0
        else:
            h = 1 + sum(hb[0] for hb in bad)
            b = k
        H[(k, i)], B[(k, i)] = h, b
        return h, b

    for i in range(len(xi) // L ** K):
        label(K, i)
    return H, B


def _label_corpus(n_envs: int, seed: int):
    dists = [Geometric(0.05), Geometric(0.3), Geometric(0.6), PolynomialTail(2.0, 1000)]
    for L in (3, 4, 10):
        for t in range(n_envs):
            dist = dists[t % len(dists)]
            u = rng.uniforms(np.uint64(rng.derive_seed(seed, "label-corpus", L, t)), np.arange(L ** 3))
            yield L, dist.ppf(u)


def label_checks(n_envs: int = 1000, seed: int = MASTER_SEED) -> list[Check]:
    K = 3
    mismatches = 0
    viol = {"B_m = k has >= 2 bad children": 0, "bad with B_m < k has one bad child": 0,
            "good parent has <= 1 bad child, of intensity 1": 0}
    n_parents = 0
    for L, xi in _label_corpus(n_envs, seed):
        table = compute_labels(xi, ScaleParams(L, K))
        H, B = straight_line_labels(xi, L, K)
        for (k, i), h in H.items():
            if table.h(k, i) != h or table.b(k, i) != B[(k, i)]:
                mismatches += 1
        for k in range(1, K + 1):
            for i in table.index_range(k):
                n_parents += 1
                kids = [table.h(k - 1, i * L + t) for t in range(L)]
                nbad = sum(1 for h in kids if h > 0)
                h, b = table.h(k, i), table.b(k, i)
                if b == k and nbad < 2:
                    viol["B_m = k has >= 2 bad children"] += 1
                if h > 0 and b < k and nbad != 1:
                    viol["bad with B_m < k has one bad child"] += 1
                if h == 0 and (nbad > 1 or any(x not in (0, 1) for x in kids)):
                    viol["good parent has <= 1 bad child, of intensity 1"] += 1
    out = [Check(2, "compute_labels equals straight-line derivation", mismatches == 0,
                 f"{3 * n_envs} environments, {mismatches} mismatches")]
    for name, count in viol.items():
        out.append(Check(3, name, count == 0, f"{n_parents} parents, {count} violations"))
    return out


# ---------------------------------------------------------------------------
# criterion 4: base distribution

def base_distribution_checks(trials: int = 10**5, seed: int = MASTER_SEED) -> list[Check]:
    out = []
    for rho in (0.1, 0.01):
        table = estimate_pkhb(Geometric(rho), ScaleParams(4, 1), trials, seed, h_max=8)
        for h in (1, 2, 3):
            exact = rho ** h * (1 - rho)
            rec = table[(0, h, 0)]
            out.append(Check(4, f"p_(0,{h},0) for rho={rho}", rec.within(exact),
                             f"estimate {_fmt(rec.mean)} exact {_fmt(exact)}"))
    return out


# ---------------------------------------------------------------------------
# criterion 5: Monte Carlo against exhaustive enumeration

def _fp() -> FractalParams:
    return FractalParams(branching=2)


def _u_cases():
    fp = _fp()
    S = est.ScenarioSpec
    cases = [(S(0, 0, L=2, fparams=fp), 0.3), (S(0, 0, L=2, fparams=fp), 0.8),
             (S(1, 0, "none", L=2, fparams=fp), 0.5), (S(1, 0, "left", L=2, fparams=fp), 0.7),
             (S(1, 0, "right", L=2, fparams=fp), 0.7), (S(1, 0, "none", "spread", L=2, fparams=fp), 0.6),
             (S(1, 0, "left", "spread", L=2, fparams=fp), 0.8),
             (S(1, 0, "none", L=3, fparams=fp), 0.7), (S(1, 0, "right", L=3, fparams=fp), 0.8)]
    for env_seed in (3, 11):
        cases.append((S(1, 0, "none", "grouped", "rejection", L=2, fparams=fp, dist_x=Geometric(0.3),
                        dist_y=Geometric(0.2), env_seed=env_seed), 0.75))
    return [(f"u {c.describe()} p={p}", est.u_instance(c), p) for c, p in cases]


def _v_cases():
    fp = _fp()
    S = est.ScenarioSpec
    cases = [(S(0, 1, L=2, fparams=fp), 0.5), (S(0, 2, L=2, fparams=fp), 0.7),
             (S(0, 3, L=2, fparams=fp), 0.8), (S(1, 1, "left", L=2, fparams=fp), 0.7),
             (S(1, 1, "right", L=2, fparams=fp), 0.8), (S(1, 1, "left", "spread", L=2, fparams=fp), 0.8),
             (S(1, 2, "left", L=2, fparams=fp), 0.85), (S(1, 2, "right", L=2, fparams=fp), 0.9),
             (S(1, 1, "left", L=3, fparams=fp), 0.8), (S(1, 1, "right", L=3, fparams=fp), 0.9)]
    return [(f"v {c.describe()} p={p}", est.v_instance(c), p) for c, p in cases]


def _corridor_cases():
    fp = _fp()
    cases = []
    for i1, p in ((1, 0.5), (2, 0.7), (3, 0.8), (5, 0.9)):
        cases.append((Corridor("horizontal", 0, 0, i1, 0), None, p))
    for i1, p in ((2, 0.6), (4, 0.85)):
        cases.append((Corridor("vertical", 0, 0, i1, 0), None, p))
    cases.append((Corridor("horizontal", 0, 0, 3, 0), Environment([0, 1, 0, 0], [0]), 0.8))
    cases.append((Corridor("vertical", 0, 0, 3, 0), Environment([0], [0, 0, 1, 0]), 0.8))
    cases.append((Corridor("horizontal", 1, 0, 1, 0), None, 0.8))
    cases.append((Corridor("horizontal", 1, 0, 1, 0), Environment([0, 0, 1, 0], [0, 0]), 0.9))
    return [(f"corridor {c} env={e is not None} p={p}", est.corridor_instance(c, 2, fp, e), p)
            for c, e, p in cases]


def _recovery_cases():
    fp = _fp()
    cases = [(3, 1, None, 0.5), (3, 1, None, 0.7), (3, 1, None, 0.9), (3, 1, 0, 0.8), (3, 1, 1, 0.8),
             (3, 2, None, 0.8), (4, 1, None, 0.6), (4, 1, None, 0.85), (4, 1, 0, 0.9), (4, 1, 1, 0.75)]
    return [(f"recovery L={L} len={bl} defect={d} p={p}",
             est.recovery_instance(0, L, fp, bl, "same", d, enforce_length=False), p)
            for L, bl, d, p in cases]


def _gluing_cases():
    envs = {"zero2": Environment([0, 0], [0, 0]), "x01": Environment([0, 1], [0, 0]),
            "y01": Environment([0, 0], [0, 1]), "both": Environment([0, 1], [0, 1]),
            "zero3": Environment([0, 0, 0], [0, 0, 0])}
    return [("zero2", 0, 1, 2, 0.6), ("zero2", 0, 1, 2, 0.8), ("zero2", 1, 1, 2, 0.7),
            ("x01", 0, 1, 2, 0.8), ("y01", 0, 1, 2, 0.8), ("both", 0, 1, 2, 0.9),
            ("both", 1, 1, 2, 0.9), ("zero2", 0, 0, 2, 0.7), ("zero3", 0, 1, 3, 0.8),
            ("zero3", 1, 1, 3, 0.75)], envs


def _reach_cases():
    r1, r2, r3, r4 = (Rectangle(-1, 1, -1, 1), Rectangle(-2, 2, -1, 1), Rectangle(-1, 1, -2, 2),
                      Rectangle(-1, 2, -1, 1))
    z = Environment([0] * 4, [0] * 4, -2, -2)
    e1 = Environment([0, 1, 2, 0], [1, 0, 0, 3], -2, -2)
    e2 = Environment([3, 0, 0, 1], [0, 2, 1, 0], -2, -2)
    return [(r1, z, 0.3), (r1, z, 0.5), (r1, e1, 0.7), (r1, e2, 0.9), (r2, z, 0.4),
            (r2, e1, 0.8), (r3, z, 0.45), (r3, e2, 0.75), (r4, e1, 0.6), (r4, e2, 0.85)]


def _oriented_cases():
    seqs = {"zero": ori.ColumnSequence([0] * 5), "mixed": ori.ColumnSequence([0, 1, 0, 2, 0]),
            "heavy": ori.ColumnSequence([2, 0, 3, 0, 1])}
    return [("zero", 2, 0.5), ("zero", 3, 0.6), ("zero", 4, 0.7), ("mixed", 2, 0.8),
            ("mixed", 3, 0.9), ("mixed", 4, 0.8), ("heavy", 2, 0.9), ("heavy", 3, 0.95),
            ("heavy", 4, 0.9), ("zero", 4, 0.4)], seqs


def oracle_checks(trials: int = 20000, seed: int = MASTER_SEED, max_edges: int = 20) -> list[Check]:
    out = []

    def compare(estimator: str, name: str, hits: int, n: int, exact: float, edges: int):
        mean = hits / n
        se = math.sqrt(exact * (1 - exact) / n)
        ok = edges <= max_edges and abs(mean - exact) <= 3 * se + 1e-12
        out.append(Check(5, f"{estimator}: {name}", ok,
                         f"{edges} edges, estimate {_fmt(mean)} exact {_fmt(exact)}"))

    for estimator, cases in (("u_k", _u_cases()), ("v_k", _v_cases()),
                             ("corridor_crossing", _corridor_cases()), ("recovery", _recovery_cases())):
        for t, (name, inst, p) in enumerate(cases):
            edges = inst.bounding_rect().n_edges
            exact = est.exact_failure(inst, p, max_edges)
            hits, n = est.mc_failure(inst, p, trials, rng.derive_seed(seed, estimator, t))
            compare(estimator, name, hits, n, exact, edges)

    gcases, envs = _gluing_cases()
    for t, (key, k0, K, L, p) in enumerate(gcases):
        env = envs[key]
        rec = est.gluing_diagnostic(k0, K, p, env, trials, rng.derive_seed(seed, "gluing", t), L)
        edges = est._gluing_rect(k0, K, L).n_edges
        compare("gluing_diagnostic", f"env={key} k0={k0} K={K} L={L} p={p}",
                round(rec.mean * rec.trials), rec.trials, est.gluing_exact(k0, K, p, env, L), edges)

    for t, (rect, env, p) in enumerate(_reach_cases()):
        rec = est.percolation_probability(PointMass(0), PointMass(0), p, 1, trials,
                                          rng.derive_seed(seed, "reach", t), env=env) \
            if rect == Rectangle(-1, 1, -1, 1) else None
        if rec is not None:
            hits, n = round(rec.mean * rec.trials), rec.trials
        else:
            hits, n = est.reach_frequency(p, rect, trials, rng.derive_seed(seed, "reach", t), env=env)
        compare("boundary_reach", f"{rect} p={p}", hits, n, est.reach_exact(p, rect, env), rect.n_edges)

    ocases, seqs = _oriented_cases()
    for t, (key, depth, p) in enumerate(ocases):
        xi = seqs[key]
        rec = ori.oriented_percolation_probability(PointMass(0), p, depth, trials,
                                                   rng.derive_seed(seed, "oriented", t), xi=xi)
        compare("oriented_percolation", f"xi={key} depth={depth} p={p}", round(rec.mean * rec.trials),
                rec.trials, ori.oriented_exact_probability(xi, p, depth), depth * (depth + 1))
    return out


# ---------------------------------------------------------------------------
# criterion 6: certificate

def certificate_checks() -> list[Check]:
    L = 10**6
    rep = check_certificate(L, Fraction(1, L**16), r_max=100, h_max=10**4, k_max=100)
    small = check_certificate(2, Fraction(1, 2**16), r_max=100, h_max=10**4, k_max=100)
    first = small.violations[0] if small.violations else {}
    return [Check(6, "certificate passes at L=10^6, rho=L^-16", rep.passed,
                  f"{rep.violation_count} violations, min margin {_fmt(rep.min_margin)}"),
            Check(6, "certificate reports a violation at L=2", not small.passed,
                  f"{small.violation_count} violations, first {first.get('check')} at {first.get('point')}")]


# ---------------------------------------------------------------------------
# criteria 7 and 8: regime checks

SMOKE_GOLDEN = {"high": 0.5, "low": 0.05}


def smoke_checks(trials: int = 500, n: int = 256, seed: int = MASTER_SEED) -> list[Check]:
    g = Geometric(0.01)
    hi = est.percolation_probability(g, g, 0.95, n, trials, rng.derive_seed(seed, "smoke-high"))
    lo = est.percolation_probability(g, g, 0.45, n, trials, rng.derive_seed(seed, "smoke-low"))
    return [Check(7, f"Geometric(0.01), p=0.95, n={n}: reach >= {SMOKE_GOLDEN['high']}",
                  hi.mean >= SMOKE_GOLDEN["high"], f"frequency {_fmt(hi.mean)} over {trials}"),
            Check(7, f"Geometric(0.01), p=0.45, n={n}: reach <= {SMOKE_GOLDEN['low']}",
                  lo.mean <= SMOKE_GOLDEN["low"], f"frequency {_fmt(lo.mean)} over {trials}")]


SHARPNESS_ARMS = {
    "heavy": dict(dist_x=PolynomialTail(3.0), dist_y=PolynomialTail(3.0), p=0.9),
    "control": dict(dist_x=BoundedUniform(1), dist_y=Geometric(0.01), p=0.97),
}
SHARPNESS_DELTA = 1.0
SIGNIFICANCE = 0.01


def sharpness_checks(trials: int = 2000, seed: int = MASTER_SEED,
                     n_list=(3, 4, 5)) -> tuple[list[Check], dict]:
    tables = {}
    for arm, cfg in SHARPNESS_ARMS.items():
        tables[arm] = est.sharpness_experiment(cfg["dist_x"], cfg["dist_y"], cfg["p"], list(n_list),
                                               SHARPNESS_DELTA, trials,
                                               rng.derive_seed(seed, "sharpness", arm))
    heavy, control = tables["heavy"], tables["control"]
    trend = " -> ".join(_fmt(r["conn"]) for r in heavy)
    dec = all(b["conn"] < a["conn"] and b["pvalue_decrease"] < SIGNIFICANCE
              for a, b in zip(heavy, heavy[1:]))
    ctrl = " -> ".join(_fmt(r["conn"]) for r in control)
    no_dec = all(b["pvalue_decrease"] >= SIGNIFICANCE for b in control[1:])
    return [Check(8, "heavy-tailed rows: connection strictly decreasing, significant at 1%", dec,
                  f"{trend}; p-values {[_fmt(r['pvalue_decrease']) for r in heavy[1:]]}"),
            Check(8, "geometric control: no significant decrease", no_dec,
                  f"{ctrl}; p-values {[_fmt(r['pvalue_decrease']) for r in control[1:]]}")], tables


# ---------------------------------------------------------------------------
# criterion 9: concentration

def binomial_checks(trials: int = 10**5, seed: int = MASTER_SEED) -> list[Check]:
    out = []
    for alpha in (0.9, 0.95, 0.99):
        for row in est.binomial_tail_check(alpha, [1, 10, 100], trials, rng.derive_seed(seed, "binom")):
            out.append(Check(9, f"alpha={alpha}, n={row['n']}", row["bound_ok"] and row["exact_ok"],
                             f"estimate {_fmt(row['mean'])} exact {_fmt(row['exact'])} "
                             f"bound {_fmt(row['bound'])}"))
    return out


# ---------------------------------------------------------------------------
# criterion 10: oriented

def _box_checks() -> tuple[int, int]:
    violations = checked = 0
    for L, c in ((4, 2), (4, 4), (10, 10), (10, 5)):
        geom = ori.OrientedGeometry(L, c)
        for k in range(3):
            edges = [((i, j), (i + 1, j + d)) for i in range(0, 2) for j in range(-3, 4)
                     if ori.is_vertex(i, j) for d in (1, -1)]
            boxes = {e: ori.OrientedBox(k, e).sites(geom) for e in edges}
            for e1, e2 in itertools.combinations(edges, 2):
                if set(e1) & set(e2):
                    continue
                checked += 1
                if boxes[e1] & boxes[e2]:
                    violations += 1
    return checked, violations


def _admissibility_checks() -> tuple[int, int]:
    violations = checked = 0
    for L, c in ((4, 2), (4, 4), (10, 10), (10, 5)):
        geom = ori.OrientedGeometry(L, c)
        for k in range(3):
            lx, ly = geom.lx(k), geom.ly(k)
            for i in range(-2, 3):
                x = i * lx
                states = []
                for j in range(-3, 4):
                    members = [ori.is_admissible((x, y), k, geom) for y in range(j * ly, (j + 1) * ly)]
                    checked += 1
                    if len(set(members)) != 1 or members[0] != ((i + j) % 2 == 0):
                        violations += 1
                    states.append(members[0])
                violations += sum(1 for a, b in zip(states, states[1:]) if a == b)
                if k == 0:
                    violations += sum(1 for y in range(-4, 5)
                                      if ori.is_admissible((x, y), 0, geom) != ori.is_vertex(x, y))
                off = x + 1 if lx > 1 else None
                if off is not None and ori.is_admissible((off, 0), k, geom):
                    violations += 1
    return checked, violations


def _reachability_oracle(samples: int, seed: int) -> tuple[int, int]:
    mismatches = total = 0
    for t in range(samples):
        width, rows = (2, 4) if t % 2 else (3, 3)
        region = ori.OrientedRegion(0, width, -(rows // 2), rows - rows // 2)
        n_edges = len(ori.region_edges(region))
        if n_edges > 20:
            continue
        xi = ori.ColumnSequence([t % 3, 0, 1, 0])
        sample = ori.sample_oriented(xi, 0.6, region, rng.derive_seed(seed, "reach-oracle", t))
        starts = [j for j in range(region.j0, region.j1 + 1) if ori.is_vertex(0, j)]
        S = starts[: 1 + t % len(starts)]
        got = ori.oriented_reachable(sample, S)
        want = set()
        for s in S:
            for path in ori.enumerate_paths((0, s), width, region.j0, region.j1):
                if all(sample.is_open((a, b)) for a, b in zip(path, path[1:])):
                    want.add(path[-1][1])
        total += 1
        mismatches += got != frozenset(want)
    return total, mismatches


ORIENTED_GOLDEN = {"homogeneous_0.3": 0.02, "geometric_0.95": 0.3}


def oriented_checks(trials: int = 2000, seed: int = MASTER_SEED) -> list[Check]:
    out = []
    checked, viol = _box_checks()
    out.append(Check(10, "boxes of edges without common endpoint are disjoint", viol == 0,
                     f"{checked} pairs, {viol} violations"))
    checked, viol = _admissibility_checks()
    out.append(Check(10, "admissibility: parity at k=0, alternating intervals", viol == 0,
                     f"{checked} intervals, {viol} violations"))
    total, mism = _reachability_oracle(40, seed)
    out.append(Check(10, "oriented reachability equals path enumeration", mism == 0 and total > 0,
                     f"{total} samples, {mism} mismatches"))
    ell, layers = 5, 3
    region = ori.exploration_region(ell, layers)
    eta = ori.ColumnSequence(np.zeros(region.i1 + 1, dtype=np.int64))
    full = ori.ksv_block_exploration(ori.sample_ksv(eta, 1.0, 1.0, region, seed), ell, layers)
    dead = ori.ksv_block_exploration(ori.sample_ksv(eta, 0.0, 0.0, region, seed), ell, layers)
    out.append(Check(10, "exploration with p_g = p_b = 1 fills every layer",
                     full.sizes == tuple(range(1, layers + 2)), f"sizes {full.sizes}"))
    out.append(Check(10, "exploration with p_g = p_b = 0 dies at layer 1",
                     dead.sizes[1:] == (0,) * layers and not dead.survived, f"sizes {dead.sizes}"))
    low = ori.oriented_percolation_probability(PointMass(0), 0.3, 128, trials,
                                               rng.derive_seed(seed, "oriented-low"))
    high = ori.oriented_percolation_probability(Geometric(0.01), 0.95, 128, trials,
                                                rng.derive_seed(seed, "oriented-high"))
    se_low = math.sqrt(ORIENTED_GOLDEN["homogeneous_0.3"] * (1 - ORIENTED_GOLDEN["homogeneous_0.3"]) / trials)
    se_high = math.sqrt(ORIENTED_GOLDEN["geometric_0.95"] * (1 - ORIENTED_GOLDEN["geometric_0.95"]) / trials)
    out.append(Check(10, "homogeneous p=0.3, depth 128: <= 0.02",
                     low.mean <= ORIENTED_GOLDEN["homogeneous_0.3"] + 3 * se_low,
                     f"frequency {_fmt(low.mean)}"))
    out.append(Check(10, "Geometric(0.01), p=0.95, depth 128: >= 0.3",
                     high.mean >= ORIENTED_GOLDEN["geometric_0.95"] - 3 * se_high,
                     f"frequency {_fmt(high.mean)}"))
    return out


# ---------------------------------------------------------------------------

SUITES: dict[str, Callable[[], list[Check]]] = {
    "unit": lambda: scale0_checks() + label_checks() + base_distribution_checks() + binomial_checks(),
    "oracle": oracle_checks,
    "smoke": smoke_checks,
    "sharpness": lambda: sharpness_checks()[0],
    "oriented": oriented_checks,
    "certificate": certificate_checks,
}
