"""Monte Carlo result records and CSV helpers."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

ESTIMATE_COLUMNS = ("experiment", "params_json", "mean", "stderr", "trials", "seed")


def bernoulli_stderr(mean: float, trials: int) -> float:
    if trials <= 0:
        return float("nan")
    return math.sqrt(max(mean * (1.0 - mean), 0.0) / trials)


def fmt(x) -> str:
    """Stable textual form of a number for CSV output."""
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


@dataclass(frozen=True)
class EstimateRecord:
    """One Monte Carlo (or exact) estimate with its provenance."""

    experiment: str
    params: dict
    mean: float
    stderr: float
    trials: int
    seed: int
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_count(cls, experiment: str, params: dict, hits: int, trials: int,
                   seed: int, **extra) -> "EstimateRecord":
        mean = hits / trials if trials else float("nan")
        return cls(experiment, dict(params), mean, bernoulli_stderr(mean, trials),
                   trials, seed, extra)

    @property
    def params_json(self) -> str:
        return json.dumps({**self.params, **self.extra}, sort_keys=True, default=str)

    def row(self) -> list[str]:
        return [self.experiment, self.params_json, fmt(self.mean), fmt(self.stderr),
                str(self.trials), str(self.seed)]

    def within(self, exact: float, n_se: float = 3.0) -> bool:
        """Is the estimate within ``n_se`` standard errors of an exact value?

        The standard error is that of the exact value, which stays meaningful
        when no event was observed.
        """
        se = bernoulli_stderr(exact, self.trials)
        return abs(self.mean - exact) <= n_se * se + 1e-12


def to_csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()
