import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

import oracles
from stretchperc import rng
from stretchperc.acceptance import MASTER_SEED
from stretchperc.env import Environment, Geometric, PointMass, edge_open_probability
from stretchperc.errors import ParameterError, PreconditionError
from stretchperc.estimators import (ScenarioSpec, binomial_cdf_exact, binomial_tail_check,
                                    contraction_report, corridor_instance, estimate_recovery,
                                    estimate_u_k, estimate_v_k, exact_failure, exact_failure_scalar,
                                    exact_scale0, gluing_diagnostic, gluing_exact, k_of_p, mc_failure,
                                    percolation_probability, recovery_instance, sharpness_experiment,
                                    two_proportion_pvalue, u_instance, v_instance)
from stretchperc.fractal import Corridor, FractalParams

FP = FractalParams()
GOLDEN = Path(__file__).parent / "golden"


def within3(hits, trials, exact):
    return abs(hits / trials - exact) <= 3 * math.sqrt(exact * (1 - exact) / trials) + 1e-12


def brute_failure(inst, p, fails):
    """Sum over every configuration of the bounding box, remainders by graph search."""
    box = inst.bounding_rect()
    cells = [(x, y) for x in range(box.a, box.b) for y in range(box.c, box.d)]
    probs = [edge_open_probability(inst.env, ((x, y), (x + 1, y)), p) for x, y in cells] + \
            [edge_open_probability(inst.env, ((x, y), (x, y + 1)), p) for x, y in cells]
    W, H = box.b - box.a, box.d - box.c
    n = len(cells)
    total = 0.0
    for bits in itertools.product((0, 1), repeat=2 * n):
        w = math.prod(q if b else 1 - q for q, b in zip(probs, bits))
        if w == 0:
            continue
        h = [list(bits[x * H:(x + 1) * H]) for x in range(W)]
        v = [list(bits[n + x * H:n + (x + 1) * H]) for x in range(W)]
        rems = []
        for q in inst.queries:
            size = inst.L ** q.k
            a, b = q.I
            R = set()
            for j in sorted({s // size for s in q.sources}):
                lo, hi = j * size, (j + 1) * size
                hs = [col[lo - box.c:hi - box.c] for col in h[a - box.a:b - box.a]]
                vs = [col[lo - box.c:hi - box.c] for col in v[a - box.a:b - box.a]]
                R |= oracles.remainder_by_search(hs, vs, a, b, lo, hi,
                                                 [s for s in q.sources if lo <= s < hi])
            rems.append(R)
        total += w * fails(rems)
    return total


def has_fractal(R, k, H, L, grouped=False):
    n = L ** k
    for F in itertools.combinations(sorted(R), FP.branching ** k):
        if grouped and len({s // n for s in F}) > 1:
            continue
        if oracles.is_fractal(F, k, H, L, FP.branching):
            return True
    return False


def y_labels(inst, K):
    return oracles.labels(inst.env.xi_y.tolist(), inst.L, K)[0]


# ---------------------------------------------------------------------------
# scale 0 and toy instances

def test_exact_scale0_examples():
    assert exact_scale0(0.9, 1)[0] == pytest.approx(0.1)
    for p in (0.3, 0.8):
        assert exact_scale0(p, 1)[1] == pytest.approx(1 - p ** 2)
    assert exact_scale0(1.0, 3)[1] == 0.0


def test_exact_scale0_rejects_bad_input():
    with pytest.raises(ParameterError):
        exact_scale0(1.2, 1)
    with pytest.raises(ParameterError):
        exact_scale0(0.5, 0)


@pytest.mark.parametrize("p", [0.6, 0.9])
def test_scale0_estimates_within_three_se(p):
    u = estimate_u_k(0, p, ScenarioSpec(), 10**5, seed=3)
    assert within3(round(u.mean * u.trials), u.trials, exact_scale0(p, 1)[0])
    for h in (1, 2):
        v = estimate_v_k(0, h, p, ScenarioSpec(defect="left"), 10**5, seed=4)
        assert within3(round(v.mean * v.trials), v.trials, exact_scale0(p, h)[1])


def test_no_failures_at_p_one():
    assert estimate_u_k(1, 1.0, ScenarioSpec(), 2000, seed=1).mean == 0
    assert estimate_v_k(1, 2, 1.0, ScenarioSpec(defect="left"), 2000, seed=1).mean == 0


@pytest.mark.parametrize("start, defect", [("grouped", "none"), ("grouped", "left"), ("spread", "right")])
def test_u1_toy_against_brute_force(start, defect):
    inst = u_instance(ScenarioSpec(1, 0, defect, start, L=2))
    H = y_labels(inst, 1)
    exact = brute_failure(inst, 0.7, lambda rs: not has_fractal(rs[0], 1, H, 2, grouped=True))
    assert exact_failure(inst, 0.7) == pytest.approx(exact, abs=1e-12)
    assert exact_failure_scalar(inst, 0.7) == pytest.approx(exact, abs=1e-12)
    hits, n = mc_failure(inst, 0.7, 10**5, seed=8)
    assert within3(hits, n, exact)


@pytest.mark.parametrize("h, start", [(1, "grouped"), (2, "grouped"), (1, "spread")])
def test_v1_toy_against_brute_force(h, start):
    inst = v_instance(ScenarioSpec(1, h, "left", start, L=2))
    H = y_labels(inst, 1)
    exact = brute_failure(inst, 0.8, lambda rs: not has_fractal(rs[0], 1, H, 2))
    assert exact_failure(inst, 0.8) == pytest.approx(exact, abs=1e-12)
    hits, n = mc_failure(inst, 0.8, 10**5, seed=9)
    assert within3(hits, n, exact)


def test_u_instance_needs_good_column():
    with pytest.raises(PreconditionError):
        u_instance(ScenarioSpec(0, 1))


# ---------------------------------------------------------------------------
# corridors and recovery

def test_unit_corridor_is_a_scale0_crossing():
    inst = corridor_instance(Corridor("horizontal", 0, 0, 0, 0), 4, FP)
    for p in (0.5, 0.85):
        assert exact_failure(inst, p) == pytest.approx(exact_scale0(p, 1)[0])


@pytest.mark.parametrize("orientation", ["horizontal", "vertical"])
def test_two_step_corridor_against_brute_force(orientation):
    inst = corridor_instance(Corridor(orientation, 0, 0, 1, 0), 4, FP)
    H = y_labels(inst, 0)
    exact = brute_failure(inst, 0.7, lambda rs: not has_fractal(rs[0], 0, H, 4))
    assert exact_failure(inst, 0.7) == pytest.approx(exact, abs=1e-12)
    assert exact == pytest.approx(1 - 0.7 ** 2)


def test_corridor_must_be_good():
    env = Environment([5, 0], [0])
    with pytest.raises(PreconditionError):
        corridor_instance(Corridor("horizontal", 0, 0, 1, 0), 4, FP, env=env)


def recovery_fails(rems, k, H, L):
    need = FP.recovery_size(L)
    for R in rems:
        for j in {y // L ** (k + 1) for y in R}:
            part = {y for y in R if y // L ** (k + 1) == j}
            if oracles.max_ordered_fractals(part, k, H, L, FP.branching) >= need:
                return False
    return True


def test_recovery_toy_against_brute_force():
    inst = recovery_instance(0, 3, FP, 1, "same", enforce_length=False)
    H = y_labels(inst, 1)
    exact = brute_failure(inst, 0.6, lambda rs: recovery_fails(rs, 0, H, 3))
    assert exact_failure(inst, 0.6) == pytest.approx(exact, abs=1e-12)
    hits, n = mc_failure(inst, 0.6, 10**5, seed=10)
    assert within3(hits, n, exact)


def test_split_recovery_is_three_independent_slices():
    # each start sits in its own slice, so failure is the cube of one slice failing
    inst = recovery_instance(0, 3, FP, 1, "split", enforce_length=False)
    single = recovery_instance(0, 3, FP, 1, "same", enforce_length=False)
    one = exact_failure(type(single)(single.env, 3, single.queries[:1], single.predicate), 0.6)
    hits, n = mc_failure(inst, 0.6, 10**5, seed=11)
    assert within3(hits, n, one ** 3)


def test_recovery_monotone_in_p():
    inst = recovery_instance(0, 3, FP, 1, enforce_length=False)
    values = [exact_failure(inst, p) for p in (0.3, 0.5, 0.7, 0.9, 1.0)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] == 0


def test_recovery_p_one_and_length_rule():
    assert estimate_recovery(0, 1.0, 4, 500, seed=2).mean == 0
    with pytest.raises(PreconditionError):
        recovery_instance(0, 4, FP, 2)


# ---------------------------------------------------------------------------
# contraction

def test_contraction_p_one_is_zero():
    rows = contraction_report([0], 1.0, 200, seed=1)
    assert rows[0]["u_k1"] == rows[0]["v_k1"] == 0
    assert not rows[0]["u_violation"] and not rows[0]["v_violation"]


def test_contraction_empty_range():
    assert contraction_report([], 0.9, 10, seed=1) == []


def test_contraction_matches_pilot_golden():
    ref = json.loads((GOLDEN / "pilot.json").read_text())
    row = contraction_report([0], 0.98, 20000, rng.derive_seed(ref["seed"], "contraction"), L=4)[0]
    want = ref["contraction_L4_p0.98_trials20000"]
    for key in ("u_k", "v_k", "u_k1", "v_k1", "u_violation", "v_violation"):
        assert row[key] == want[key], key
    assert row["bound"] == pytest.approx(want["bound"])


# ---------------------------------------------------------------------------
# percolation, sharpness, binomial

def test_percolation_at_p_one():
    rec = percolation_probability(Geometric(0.5), Geometric(0.5), 1.0, 6, 50, seed=1)
    assert rec.mean == 1.0


def test_percolation_needs_trials():
    with pytest.raises(ParameterError):
        percolation_probability(Geometric(0.5), Geometric(0.5), 0.5, 3, 0, seed=1)


def test_sharpness_with_no_trials():
    assert sharpness_experiment(Geometric(0.5), Geometric(0.5), 0.9, [2, 3], 1.0, 0, seed=1) == []


def test_sharpness_row_fields():
    rows = sharpness_experiment(PointMass(0), PointMass(0), 1.0, [1, 2], 1.0, 20, seed=1)
    assert [r["conn"] for r in rows] == [1.0, 1.0]
    assert rows[0]["pvalue_decrease"] is None and rows[1]["pvalue_decrease"] == 1.0


def test_binomial_exact_cdf():
    assert float(binomial_cdf_exact(10, 0.9, 5)) == pytest.approx(0.0016349374, abs=1e-10)
    for n in (1, 7, 30):
        assert float(binomial_cdf_exact(n, 0.8, n // 2)) == pytest.approx(stats.binom.cdf(n // 2, n, 0.8))
    assert binomial_cdf_exact(12, 1.0, 6) == 0
    assert float(binomial_cdf_exact(1, 0.7, 0)) == pytest.approx(0.3)


def test_binomial_tail_rows():
    rows = binomial_tail_check(0.9, [1, 10, 40], 10**5, seed=5)
    assert all(r["exact_ok"] and r["bound_ok"] for r in rows)
    assert binomial_tail_check(1.0, [10], 1000, seed=5)[0]["mean"] == 0


# ---------------------------------------------------------------------------
# nested crossings

def zero_env(side):
    return Environment([0] * (side + 1), [0] * (side + 1))


def test_gluing_p_one():
    rec = gluing_diagnostic(0, 2, 1.0, zero_env(16), 200, seed=1)
    assert rec.mean == 1.0


@pytest.mark.parametrize("k0, L", [(0, 4), (1, 2), (1, 3)])
def test_gluing_without_steps_is_an_open_column(k0, L):
    assert gluing_exact(k0, k0, 0.8, zero_env(L ** k0), L=L) == pytest.approx(0.8 ** L ** k0)


def test_gluing_without_steps_at_scale_two():
    rec = gluing_diagnostic(2, 2, 0.95, zero_env(16), 10**5, seed=6, L=4)
    assert within3(round(rec.mean * rec.trials), rec.trials, 0.95 ** 16)


def test_gluing_monotone_and_matches_monte_carlo():
    env = zero_env(4)
    values = [gluing_exact(0, 1, p, env, L=2) for p in (0.4, 0.6, 0.8)]
    assert values[0] <= values[1] <= values[2]
    rec = gluing_diagnostic(0, 1, 0.6, env, 10**5, seed=4, L=2)
    assert within3(round(rec.mean * rec.trials), rec.trials, values[1])


def test_gluing_rejects_bad_origin():
    env = Environment([9] * 5, [0] * 5)
    with pytest.raises(PreconditionError):
        gluing_diagnostic(0, 1, 0.5, env, 10, seed=1, L=4)


# ---------------------------------------------------------------------------
# helpers

@pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.618, 0.7, 0.9, 0.99])
def test_k_of_p_is_smallest_valid_k(p):
    k = k_of_p(p)
    assert p + p ** k < 1
    assert k == 1 or p + p ** (k - 1) >= 1


def test_k_of_p_at_one():
    assert k_of_p(1.0) is None


def test_two_proportion_pvalue():
    z = (0.6 - 0.4) / math.sqrt(0.25 * (2 / 100))
    assert two_proportion_pvalue(60, 100, 40, 100) == pytest.approx(0.5 * math.erfc(z / math.sqrt(2)))
    assert two_proportion_pvalue(50, 100, 50, 100) == pytest.approx(0.5)
    assert two_proportion_pvalue(100, 100, 100, 100) == 1.0


def test_master_seed_derivation_is_stable():
    assert rng.derive_seed(MASTER_SEED, "pilot") == 11328946675395115029
