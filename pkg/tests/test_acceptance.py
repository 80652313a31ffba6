"""One test per acceptance criterion.

Every suite is run once directly (timed) and once through the command line;
the second run doubles as the byte-identity check.  A PASS/FAIL line per
criterion is printed in the terminal summary.
"""
import time

import pytest

from stretchperc import acceptance
from stretchperc.cli import main, run_suite, suite_files

TOLERANCE = {
    1: "within 3 SE at 10^5 trials",
    2: "exact equality on 1000 environments per L",
    3: "zero violations",
    4: "within 3 SE at 10^5 trials",
    5: "within 3 SE of exact enumeration, >= 10 instances per estimator",
    6: "all inequalities hold at L=10^6; violation found at L=2",
    7: "reach >= 0.5 at p=0.95, <= 0.05 at p=0.45",
    8: "strict decrease significant at 1%; control not significant",
    9: "bound and exact CDF within 3 SE",
    10: "invariants exhaustive, oracle equality, thresholds within 3 SE",
    11: "byte-identical rerun",
}
SUITE_OF = {1: "unit", 2: "unit", 3: "unit", 4: "unit", 9: "unit", 5: "oracle", 6: "certificate",
            7: "smoke", 8: "sharpness", 10: "oriented"}
BUDGET_S = {"unit": 120, "oracle": 300, "certificate": 60, "smoke": 300, "sharpness": 300,
            "oriented": 300}


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    out = {}
    for name in acceptance.SUITES:
        t0 = time.perf_counter()
        checks, tables = run_suite(name)
        wall = time.perf_counter() - t0
        outdir = tmp_path_factory.mktemp(f"suite_{name}")
        main(["suite", name, "--out", str(outdir)])
        rerun = {f: (outdir / f).read_text() for f in suite_files(name, checks, tables)}
        out[name] = {"checks": checks, "files": suite_files(name, checks, tables),
                     "rerun": rerun, "wall": wall}
    return out


def report(log, criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {TOLERANCE[criterion]} ({detail})"
    log.append(line)
    print(line)


@pytest.mark.parametrize("criterion", sorted(SUITE_OF))
def test_criterion(criterion, runs, acceptance_log):
    checks = [c for c in runs[SUITE_OF[criterion]]["checks"] if c.criterion == criterion]
    failed = [c for c in checks if not c.passed]
    report(acceptance_log, criterion, bool(checks) and not failed,
           f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    assert checks
    assert not failed, "\n".join(c.line() for c in failed)


def test_criterion_11_determinism(runs, acceptance_log):
    differing = [name for name, r in runs.items() if r["files"] != r["rerun"]]
    report(acceptance_log, 11, not differing,
           f"{len(runs) - len(differing)}/{len(runs)} suites identical")
    assert not differing


@pytest.mark.parametrize("suite", sorted(BUDGET_S))
def test_runtime_budget(suite, runs):
    assert runs[suite]["wall"] < BUDGET_S[suite]
