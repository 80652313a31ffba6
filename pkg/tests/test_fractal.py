import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from stretchperc.env import Environment
from stretchperc.errors import PreconditionError
from stretchperc.fractal import (Corridor, FractalParams, OrderedFamily, branch_corridors,
                                 build_grouped_fractal, count_ordered_fractals, detect_recovery,
                                 is_grouped, is_k_fractal, z_k)
from stretchperc.perc import Rectangle, sample_configuration
from stretchperc.renorm import IntervalIndex, ScaleParams, compute_labels

FP = FractalParams(branching=2)


def table(xi, L=4, K=2):
    return compute_labels(xi, ScaleParams(L, K))


def test_z_k_examples():
    assert z_k({0}, 3, 4) == {IntervalIndex(3, 0)}
    assert z_k({3, 4}, 1, 4) == {(1, 0), (1, 1)}
    assert z_k(set(), 2, 4) == set()


def test_grouped_examples():
    assert is_grouped({0, 1}, 1, 4)
    assert not is_grouped({3, 4}, 1, 4)
    empty = is_grouped(set(), 1, 4)
    assert empty and empty.degenerate


def test_zero_fractals():
    t = table([0, 2] + [0] * 14)
    assert is_k_fractal({0}, 0, t, FP)
    assert not is_k_fractal({1}, 0, t, FP)


def test_one_fractal_examples():
    # children of a 1-fractal are single good points, so any two distinct good heights qualify
    t = table([0] * 16)
    assert is_k_fractal({0, 4}, 1, t, FP)
    assert is_k_fractal({0, 1}, 1, t, FP)
    assert not is_k_fractal({0, 4, 8, 12}, 1, t, FP)
    assert not is_k_fractal({0, 4}, 1, table([0] * 4 + [1, 1, 0, 0] + [0] * 8), FP)


def test_two_fractal_needs_distinct_children():
    t = table([0] * 16)
    assert is_k_fractal({0, 4, 8, 12}, 2, t, FP)
    assert is_k_fractal({0, 1, 4, 5}, 2, t, FP)
    assert not is_k_fractal({0, 1, 2, 3}, 2, t, FP)  # both halves in one 1-interval


@pytest.mark.parametrize("seed", range(6))
def test_fractal_definition_exhaustive_on_16_sites(seed):
    xi = (np.random.default_rng(seed).random(16) < 0.2).astype(int) * (1 + seed % 2)
    t = table(xi)
    H, _ = oracles.labels(xi, 4, 2)
    for k, size in ((1, 2), (2, 4)):
        for S in itertools.combinations(range(16), size):
            assert is_k_fractal(S, k, t, FP) == oracles.is_fractal(S, k, H, 4, 2), (k, S)


def test_build_in_fully_good_window():
    t = table([0] * 16)
    assert build_grouped_fractal(t, IntervalIndex(2, 0), FP) == {0, 1, 4, 5}
    assert build_grouped_fractal(t, IntervalIndex(1, 3), FP) == {12, 13}


def test_build_with_branching_equal_to_L():
    fp = FractalParams(branching=3)
    t = compute_labels([0] * 9, ScaleParams(3, 2))
    assert build_grouped_fractal(t, IntervalIndex(1, 1), fp) == {3, 4, 5}
    t = compute_labels([0, 1, 0] + [0] * 6, ScaleParams(3, 2))
    assert t.is_good(1, 0)
    assert build_grouped_fractal(t, IntervalIndex(1, 0), fp) is None


def test_build_avoids_single_bad_child():
    t = table([1, 0, 0, 0] + [0] * 12)
    assert build_grouped_fractal(t, IntervalIndex(1, 0), FP) == {1, 2}


def test_build_rejects_bad_interval():
    with pytest.raises(PreconditionError):
        build_grouped_fractal(table([1, 1, 0, 0] + [0] * 12), IntervalIndex(1, 0), FP)


def test_count_examples():
    t = table([0] * 16)
    assert count_ordered_fractals(set(), 1, t, FP) == 0
    assert count_ordered_fractals({0, 1}, 1, t, FP) == 1
    assert count_ordered_fractals(range(16), 1, t, FP) == 4


@settings(max_examples=25, deadline=None)
@given(data=st.data(), k=st.integers(0, 2))
def test_count_matches_brute_force(data, k):
    xi = data.draw(st.lists(st.sampled_from([0, 0, 0, 1, 2]), min_size=64, max_size=64))
    T = data.draw(st.sets(st.integers(0, 63), max_size=18))
    t = compute_labels(xi, ScaleParams(4, 3))
    H, _ = oracles.labels(xi, 4, 3)
    assert count_ordered_fractals(T, k, t, FP) == oracles.max_ordered_fractals(T, k, H, 4, 2)


def test_ordered_family_json_round_trip():
    fam = OrderedFamily(({0, 1}, {4, 6}), 1, 4)
    assert OrderedFamily.from_json(fam.to_json(), 4) == fam


def test_branch_corridor_geometry():
    L = 4
    horiz, vert = branch_corridors(0, 0, 4, 0, L)
    assert len(horiz) == 4 and len(vert) == 4
    for h in horiz:
        for v in vert:
            assert len(h.cells() & v.cells()) == 1
    for group in (horiz, vert):
        for a, b in itertools.combinations(group, 2):
            assert not set(a.rect(L).edges()) & set(b.rect(L).edges())


def test_grouped_fractal_in_exactly_one_horizontal_corridor():
    L, k = 4, 1
    horiz, _ = branch_corridors(k, 0, 3, 0, L)
    t = table([0] * 16)
    for i in range(L):
        F = build_grouped_fractal(t, IntervalIndex(k, i), FP)
        owners = [c for c in horiz if all(c.transverse * L ** k <= s < (c.transverse + 1) * L ** k for s in F)]
        assert len(owners) == 1


def test_branch_corridors_needs_long_block():
    with pytest.raises(PreconditionError):
        branch_corridors(0, 0, 1, 0, 4)


def test_corridor_goodness():
    lx = compute_labels([0, 1, 0, 0, 1, 0], ScaleParams(2, 0))
    ly = compute_labels([0, 0], ScaleParams(2, 0))
    assert Corridor("horizontal", 0, 0, 3, 0).is_good(lx, ly)
    assert not Corridor("horizontal", 0, 0, 4, 0).is_good(lx, ly)


def recovery_oracle(sample, S, width, H, L, k):
    """Remainder by graph search in the single (k+1)-slice, then brute-force fractal counting."""
    R = oracles.remainder_by_search(sample.h_open.tolist(), sample.v_open.tolist(), 0, width, 0,
                                    L ** (k + 1), S)
    R = {y for y in R if y < L ** (k + 1)}
    return oracles.max_ordered_fractals(R, k, H, L, 2) >= L - 1


def test_recovery_extremes():
    env = Environment([0] * 4, [0] * 17)
    t = table([0] * 16)
    S = {0, 4}
    r = Rectangle(0, 3, 0, 16)
    assert detect_recovery(sample_configuration(env, 1.0, r, 1), S, (0, 3), t, FP, 1)
    assert not detect_recovery(sample_configuration(env, 0.0, r, 1), S, (0, 3), t, FP, 1)


@pytest.mark.parametrize("seed", range(20))
def test_recovery_against_definition(seed):
    xi = [0] * 16
    xi[(seed * 5) % 16] = seed % 3
    env = Environment([0] * 4, xi + [0])
    t = table(xi)
    H, _ = oracles.labels(xi, 4, 2)
    m = IntervalIndex(1, 1 + seed % 2)
    S = build_grouped_fractal(t, m, FP) if seed % 3 and t.is_good(*m) else None
    if S is None:
        S = frozenset(s for s in (2, 9) if H[0][s] == 0)
        if not is_k_fractal(S, 1, t, FP):
            pytest.skip("no 1-fractal available for this environment")
    s = sample_configuration(env, 0.75, Rectangle(0, 3, 0, 16), seed)
    assert detect_recovery(s, S, (0, 3), t, FP, 1) == recovery_oracle(s, S, 3, H, 4, 1)
