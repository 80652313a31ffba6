import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stretchperc.env import (BoundedUniform, Environment, Geometric, PointMass, PolynomialTail,
                             edge_open_probability, eta_to_xi, parse_distribution, sample_environment,
                             xi_to_eta)
from stretchperc.errors import InsufficientDataError, ParameterError, WindowError

GOLDEN = Path(__file__).parent / "golden"


def test_geometric_tail_frequency():
    env = sample_environment(Geometric(0.1), Geometric(0.1), (0, 10**6 - 1), (0, 0), seed=1)
    freq = np.mean(env.xi_x >= 3)
    exact = 0.1 ** 3
    assert abs(freq - exact) <= 3 * math.sqrt(exact * (1 - exact) / 10**6)


def test_geometric_zero_is_degenerate():
    env = sample_environment(Geometric(0.0), Geometric(0.0), (-50, 50), (0, 9), seed=7)
    assert not env.xi_x.any() and not env.xi_y.any()


def test_polynomial_tail_golden():
    ref = json.loads((GOLDEN / "polytail_s3_seed42.json").read_text())
    d = PolynomialTail(3.0)
    env = sample_environment(d, d, (0, 99), (0, 99), 42)
    assert env.xi_x.tolist() == ref["xi_x"]
    assert env.xi_y.tolist() == ref["xi_y"]


def test_polynomial_tail_pmf_sums_to_one():
    d = PolynomialTail(3.0, cutoff=1000)
    assert d.pmf(np.arange(1000)).sum() == pytest.approx(1.0)
    assert d.sf(1) == pytest.approx(1 - 1 / 1.2020569031595942)


@pytest.mark.parametrize("eta, xi", [([1, 1, 1, 1], [0, 0, 0]), ([1, 0, 0, 1, 0, 1], [2, 1])])
def test_eta_to_xi_examples(eta, xi):
    assert eta_to_xi(eta).tolist() == xi


def test_eta_round_trip_on_bernoulli_window():
    eta = (np.random.default_rng(3).random(10**4) < 0.3).astype(int)
    ones = np.flatnonzero(eta)
    assert xi_to_eta(eta_to_xi(eta)).tolist() == eta[ones[0]:ones[-1] + 1].tolist()


def test_eta_needs_two_kept_columns():
    with pytest.raises(InsufficientDataError):
        eta_to_xi([0, 1, 0])
    with pytest.raises(ParameterError):
        eta_to_xi([0, 2, 1])


def test_edge_open_probability_examples():
    env = Environment([0, 3], [1, 2])
    assert edge_open_probability(env, ((0, 0), (1, 0)), 0.9) == pytest.approx(0.9)
    assert edge_open_probability(env, ((0, 1), (0, 2)), 0.5) == pytest.approx(0.125)
    for edge in (((0, 0), (1, 0)), ((1, 0), (2, 0)), ((0, 0), (0, 1)), ((1, 1), (1, 2))):
        assert edge_open_probability(env, edge, 1.0) == 1.0


def test_edge_outside_window():
    with pytest.raises(WindowError):
        edge_open_probability(Environment([0], [0]), ((5, 0), (6, 0)), 0.5)


def test_environment_text_round_trip():
    env = sample_environment(Geometric(0.3), BoundedUniform(4), (-3, 8), (2, 6), seed=11)
    assert Environment.from_text(env.to_text()) == env


@pytest.mark.parametrize("text, dist", [("geometric:0.01", Geometric(0.01)), ("point:2", PointMass(2)),
                                        ("uniform:3", BoundedUniform(3)), ("poly:3", PolynomialTail(3.0))])
def test_parse_distribution(text, dist):
    assert parse_distribution(text) == dist


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), lo=st.integers(-100, 100), n=st.integers(1, 60), cut=st.integers(0, 59))
def test_sub_window_draws_agree(seed, lo, n, cut):
    d = Geometric(0.4)
    big = sample_environment(d, d, (lo, lo + n), (0, 0), seed)
    small = sample_environment(d, d, (lo + min(cut, n), lo + n), (0, 0), seed)
    assert small.xi_x.tolist() == big.gaps_x(lo + min(cut, n), lo + n + 1).tolist()
