"""Bernoulli bond percolation on stretched lattices: renormalisation labels,
crossing estimators, exact enumeration oracles and oriented variants."""

__version__ = "0.1.0"
