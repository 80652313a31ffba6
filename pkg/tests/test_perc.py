import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from stretchperc.env import Environment, Geometric, sample_environment
from stretchperc.errors import PreconditionError, ResourceError, WindowError
from stretchperc.perc import (PercSample, Rectangle, batch_flood, closure, exact_batch_probability,
                              exact_event_probability, paving, reaches_boundary, remainder,
                              sample_batch, sample_configuration, sliced_remainder)
from stretchperc.renorm import ScaleParams


def flat_env(x0, x1, y0, y1):
    return Environment([0] * (x1 - x0 + 1), [0] * (y1 - y0 + 1), x0, y0)


def test_extreme_p():
    env = flat_env(0, 6, 0, 6)
    r = Rectangle(0, 5, 0, 5)
    assert sample_configuration(env, 1.0, r, 3).h_open.all()
    s = sample_configuration(env, 0.0, r, 3)
    assert not s.h_open.any() and not s.v_open.any()


def test_open_fraction():
    env = flat_env(0, 250, 0, 200)
    s = sample_configuration(env, 0.7, Rectangle(0, 250, 0, 200), seed=9)
    n = s.h_open.size + s.v_open.size
    frac = (s.h_open.sum() + s.v_open.sum()) / n
    assert n == 10**5
    assert abs(frac - 0.7) <= 3 * math.sqrt(0.21 / n)


def test_edge_count_and_faces():
    r = Rectangle(0, 3, 0, 2)
    assert r.n_edges == len(r.edges()) == 12
    # the top-right corner (b, d) has no incident edge of the rectangle
    assert not any((3, 2) in e for e in r.edges())


def test_all_open_remainder_is_right_face_below_corner():
    env = flat_env(0, 4, 0, 4)
    r = Rectangle(0, 3, 0, 3)
    s = sample_configuration(env, 1.0, r, 1)
    assert remainder(s, {0}, r) == frozenset({0, 1, 2})
    assert remainder(sample_configuration(env, 0.0, r, 1), {0, 1, 2, 3}, r) == frozenset()


def test_remainder_requires_left_face():
    s = sample_configuration(flat_env(0, 3, 0, 3), 0.5, Rectangle(0, 2, 0, 2), 1)
    with pytest.raises(PreconditionError):
        remainder(s, {5})


def test_remainder_two_by_two_exhaustive():
    r = Rectangle(0, 2, 0, 2)
    sources = [{0}, {1}, {2}, {0, 2}, {0, 1, 2}]
    for bits in itertools.product((False, True), repeat=8):
        h = np.array(bits[:4]).reshape(2, 2)
        v = np.array(bits[4:]).reshape(2, 2)
        s = PercSample(r, h, v)
        for S in sources:
            assert remainder(s, S) == oracles.remainder_by_paths(h.tolist(), v.tolist(), 0, 2, 0, 2, S)


def test_sliced_remainder_single_slice():
    env = sample_environment(Geometric(0.2), Geometric(0.2), (0, 16), (0, 16), 4)
    s = sample_configuration(env, 0.7, Rectangle(0, 16, 0, 16), 12)
    params = ScaleParams(4, 2)
    S = {4, 5, 7}
    assert sliced_remainder(s, S, (0, 16), 1, params) == remainder(s, S, Rectangle(0, 16, 4, 8))


def test_sliced_remainder_open_slices():
    env = flat_env(0, 8, 0, 8)
    s = sample_configuration(env, 1.0, Rectangle(0, 8, 0, 8), 0)
    got = sliced_remainder(s, {1, 5}, (0, 8), 1, ScaleParams(4, 1))
    assert got == frozenset(range(0, 8))
    assert sliced_remainder(s, {1}, (0, 8), 1, ScaleParams(4, 1)) == frozenset(range(0, 4))


def edge_deletion_oracle(s, S, n):
    """Flood the full rectangle after deleting every edge outside the slice of each source."""
    r = s.rect
    out = set()
    for j in sorted({x // n for x in S}):
        h = s.h_open.copy()
        v = s.v_open.copy()
        keep = np.zeros(r.height, dtype=bool)
        keep[j * n - r.c:(j + 1) * n - r.c] = True
        h[:, ~keep] = False
        v[:, ~keep] = False
        got = oracles.remainder_by_search(h.tolist(), v.tolist(), r.a, r.b, r.c, r.d,
                                          [x for x in S if x // n == j])
        out |= {y for y in got if j * n <= y <= (j + 1) * n}
    return frozenset(out)


@pytest.mark.parametrize("seed", range(20))
def test_sliced_remainder_matches_edge_deletion(seed):
    env = flat_env(0, 8, 0, 8)
    s = sample_configuration(env, 0.65, Rectangle(0, 8, 0, 8), seed)
    S = set(np.random.default_rng(seed).choice(8, size=3, replace=False).tolist())
    assert sliced_remainder(s, S, (0, 8), 1, ScaleParams(4, 1)) == edge_deletion_oracle(s, S, 4)


def test_reaches_boundary_extremes():
    env = flat_env(-3, 3, -3, 3)
    assert reaches_boundary(env, 1.0, 2, 1)
    assert not reaches_boundary(env, 0.0, 2, 1)


@pytest.mark.parametrize("seed", range(10))
def test_reaches_boundary_against_search(seed):
    env = flat_env(-3, 3, -3, 3)
    s = sample_configuration(env, 0.5, Rectangle(-3, 3, -3, 3), seed)
    adj = oracles.open_neighbours(s.h_open.tolist(), s.v_open.tolist(), -3, -3)
    seen = oracles.reachable(adj, [(0, 0)])
    touched = any(abs(x) == 3 or abs(y) == 3 for x, y in seen)
    assert reaches_boundary(env, 0.5, 3, seed) == touched


def test_exact_event_examples():
    env = flat_env(0, 2, 0, 2)
    assert exact_event_probability(env, 0.4, Rectangle(0, 1, 0, 1), lambda s: True) == pytest.approx(1.0)
    bottom = exact_event_probability(env, 0.4, Rectangle(0, 1, 0, 1),
                                     lambda s: 0 in remainder(s, {0}))
    assert bottom == pytest.approx(0.4)


def test_exact_event_too_large():
    env = flat_env(0, 10, 0, 10)
    with pytest.raises(ResourceError):
        exact_event_probability(env, 0.5, Rectangle(0, 4, 0, 4), lambda s: True)


def test_two_by_one_crossing_against_monte_carlo():
    env = flat_env(0, 2, 0, 1)
    r = Rectangle(0, 2, 0, 1)
    exact = exact_event_probability(env, 0.6, r, lambda s: bool(remainder(s, {0, 1})))
    hits = 0
    for start in range(0, 10**6, 10**5):
        h, v = sample_batch(env, 0.6, r, np.arange(start, start + 10**5, dtype=np.uint64))
        hits += int(batch_flood(h, v, np.ones(2, dtype=bool)).any(axis=1).sum())
    assert abs(hits / 10**6 - exact) <= 3 * math.sqrt(exact * (1 - exact) / 10**6)


def test_batch_enumeration_agrees_with_scalar():
    env = Environment([0, 1, 0], [2, 0, 1])
    r = Rectangle(0, 3, 0, 2)

    def scalar(s):
        return 1 in remainder(s, {0})

    def batched(h, v):
        conn = closure(h, v)
        H = r.height + 1
        return conn[:, 0 * H + 0, r.width * H + 1]

    assert exact_batch_probability(env, 0.7, r, batched) == pytest.approx(
        exact_event_probability(env, 0.7, r, scalar), abs=1e-12)


def test_paving_partitions_edges():
    seen = []
    for rect in paving(1, 3, (0, 3), (-1, 2)):
        seen += rect.edges()
    assert len(seen) == len(set(seen)) == Rectangle(0, 9, -3, 6).n_edges


def test_sub_rectangle_outside():
    s = sample_configuration(flat_env(0, 4, 0, 4), 0.5, Rectangle(0, 4, 0, 4), 1)
    with pytest.raises(WindowError):
        s.restrict(Rectangle(2, 6, 0, 2))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**40), a=st.integers(0, 4), w=st.integers(1, 4), c=st.integers(0, 4),
       h=st.integers(1, 4))
def test_sub_rectangle_consistency(seed, a, w, c, h):
    env = sample_environment(Geometric(0.3), Geometric(0.3), (0, 9), (0, 9), seed % 1000)
    big = sample_configuration(env, 0.6, Rectangle(0, 9, 0, 9), seed)
    sub = Rectangle(a, a + w, c, c + h)
    small = sample_configuration(env, 0.6, sub, seed)
    view = big.restrict(sub)
    assert np.array_equal(view.h_open, small.h_open) and np.array_equal(view.v_open, small.v_open)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**40), S=st.sets(st.integers(0, 6), min_size=1))
def test_remainder_monotone_in_p_and_S(seed, S):
    env = sample_environment(Geometric(0.2), Geometric(0.2), (0, 6), (0, 6), 3)
    r = Rectangle(0, 6, 0, 6)
    prev = frozenset()
    for p in (0.2, 0.4, 0.6, 0.8, 1.0):
        s = sample_configuration(env, p, r, seed)
        got = remainder(s, S)
        assert prev <= got
        assert remainder(s, set(list(S)[:1])) <= got
        prev = got
