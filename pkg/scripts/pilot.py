"""Regenerate tests/golden/pilot.json: pilot frequencies behind the fixed pass marks.

The pilot uses its own seed stream so the acceptance runs are not the data
that chose their thresholds.
"""
import json
import sys
from pathlib import Path

from stretchperc import estimators as est
from stretchperc import oriented as ori
from stretchperc import rng
from stretchperc.acceptance import MASTER_SEED, SHARPNESS_ARMS, SHARPNESS_DELTA
from stretchperc.env import Geometric, PointMass

PILOT_SEED = rng.derive_seed(MASTER_SEED, "pilot")


def main(out: Path) -> None:
    g = Geometric(0.01)
    smoke = {f"p={p}": est.percolation_probability(g, g, p, 256, 500,
                                                   rng.derive_seed(PILOT_SEED, "smoke", str(p))).mean
             for p in (0.95, 0.45)}
    oriented = {
        "homogeneous_0.3": ori.oriented_percolation_probability(PointMass(0), 0.3, 128, 2000,
                                                                rng.derive_seed(PILOT_SEED, "oriented-low")).mean,
        "geometric_0.95": ori.oriented_percolation_probability(g, 0.95, 128, 2000,
                                                               rng.derive_seed(PILOT_SEED, "oriented-high")).mean,
    }
    contraction = est.contraction_report([0], 0.98, 20000, rng.derive_seed(PILOT_SEED, "contraction"))[0]
    sharp = {arm: [{k: r[k] for k in ("n", "conn", "conn_hits", "trials", "pvalue_decrease")}
                   for r in est.sharpness_experiment(cfg["dist_x"], cfg["dist_y"], cfg["p"], [3, 4, 5],
                                                     SHARPNESS_DELTA, 2000,
                                                     rng.derive_seed(PILOT_SEED, "sharpness", arm))]
             for arm, cfg in SHARPNESS_ARMS.items()}
    body = {
        "seed": PILOT_SEED,
        "smoke_n256_trials500": smoke,
        "smoke_thresholds": {"high": 0.5, "low": 0.05},
        "oriented_depth128_trials2000": oriented,
        "oriented_thresholds": {"homogeneous_0.3": 0.02, "geometric_0.95": 0.3},
        "contraction_L4_p0.98_trials20000": contraction,
        "sharpness_trials2000": sharp,
    }
    out.write_text(json.dumps(body, indent=2, sort_keys=True, default=str) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "tests/golden/pilot.json")
