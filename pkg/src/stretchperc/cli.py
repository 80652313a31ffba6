"""Command-line experiment runner.

    stretchperc run <experiment> [key=value ...] [--config path.json] [--out dir]
    stretchperc suite <name> [--out dir]
    stretchperc list

Every experiment has a flat schema of typed defaults.  The resolved
configuration is echoed into ``<experiment>.manifest.json`` next to the
result files; passing that manifest back through ``--config`` reruns the
same experiment.  Result files hold no timestamps, so reruns are
byte-identical.

Exit codes: 0 all asserted checks pass, 1 a check failed, 2 bad input or
unmet precondition, 3 resource or conditioning budget exhausted.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import acceptance
from . import estimators as est
from . import oriented as ori
from . import rng
from .env import parse_distribution
from .errors import ConditioningError, ParameterError, ResourceError, StretchPercError
from .fractal import Corridor, FractalParams
from .records import ESTIMATE_COLUMNS, EstimateRecord, fmt, to_csv
from .renorm import RENORM_COLUMNS, ScaleParams, check_certificate, estimate_pk, estimate_pkhb, renorm_row

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3
SEED = acceptance.MASTER_SEED


class SchemaError(ParameterError):
    pass


@dataclass
class Output:
    header: tuple | None = None
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)  # (name, passed)
    report: dict | None = None


@dataclass(frozen=True)
class Experiment:
    run: Callable[[dict], Output]
    schema: dict
    help: str = ""


def _exact(x: float) -> str:
    # closed-form values: drop float noise such as 0.09999999999999998
    return f"{x:.15g}"


def _int_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(t) for t in text)
    return tuple(int(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _coerce(key: str, value, default):
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            low = str(value).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            number = float(value) if isinstance(value, str) and "e" in value.lower() else value
            if isinstance(number, float) and not number.is_integer():
                raise ValueError(value)
            return int(number)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return _int_list(value)
        return str(value)
    except (TypeError, ValueError):
        raise SchemaError(f"{key}={value!r} is not a valid {type(default).__name__}") from None


def resolve(name: str, overrides: dict) -> dict:
    """Typed configuration from the schema defaults and overrides."""
    if name not in EXPERIMENTS:
        raise SchemaError(f"unknown experiment {name!r}; known: {', '.join(sorted(EXPERIMENTS))}")
    schema = EXPERIMENTS[name].schema
    unknown = sorted(set(overrides) - set(schema))
    if unknown:
        raise SchemaError(f"unknown keys for {name}: {', '.join(unknown)}")
    cfg = {k: _coerce(k, overrides[k], d) if k in overrides else d for k, d in schema.items()}
    if "trials" in cfg and cfg["trials"] < 1:
        raise SchemaError("trials must be at least 1")
    return cfg


def _jsonable(cfg: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.items()}


def _records(recs, header=ESTIMATE_COLUMNS, row=lambda r: r.row()) -> Output:
    return Output(tuple(header), [row(r) for r in recs])


def _dict_rows(rows: list[dict]) -> Output:
    if not rows:
        return Output(("empty",), [])
    header = tuple(rows[0])
    return Output(header, [[fmt(r[h]) for h in header] for r in rows])


def _fparams(c: dict) -> FractalParams:
    return FractalParams(branching=c["branching"], loss_exponent=c["loss_exponent"])


# ---------------------------------------------------------------------------
# experiments

def run_exact_scale0(c):
    u0, v0 = est.exact_scale0(c["p"], c["h"], _fparams(c))
    return Output(("experiment", "p", "h", "u0", "v0"),
                  [["exact_scale0", fmt(c["p"]), str(c["h"]), _exact(u0), _exact(v0)]])


def run_estimate_pk(c):
    recs = estimate_pk(parse_distribution(c["dist"]), ScaleParams(c["L"], c["K_max"]), c["trials"], c["seed"])
    return _records(recs, RENORM_COLUMNS, renorm_row)


def run_estimate_pkhb(c):
    table = estimate_pkhb(parse_distribution(c["dist"]), ScaleParams(c["L"], c["K_max"]),
                          c["trials"], c["seed"], h_max=c["h_max"])
    return _records([table[key] for key in sorted(table)], RENORM_COLUMNS, renorm_row)


def _parse_rho(text: str, L: int):
    """A rational such as ``0.001`` or ``1/1000``, or a power ``L^-16`` of the scale ratio."""
    text = text.replace(" ", "")
    try:
        if text.startswith("L^"):
            return Fraction(L) ** int(text[2:])
        return Fraction(text)
    except ValueError:
        raise SchemaError(f"cannot parse rho={text!r}") from None


def run_check_certificate(c):
    report = check_certificate(c["L"], _parse_rho(c["rho"], c["L"]), r_max=c["r_max"], h_max=c["h_max"],
                               k_max=c["k_max"], b_max=None if c["b_max"] < 0 else c["b_max"])
    body = report.to_json()
    return Output(("experiment", "L", "rho", "violations", "min_margin", "passed"),
                  [["check_certificate", str(c["L"]), c["rho"], str(report.violation_count),
                    fmt(float(report.min_margin)), str(report.passed)]],
                  [("certificate", report.passed)], body)


def _scenario(c, h=0):
    return est.ScenarioSpec(c["k"], h, c["defect"], c["start"], L=c["L"], fparams=_fparams(c))


def run_u_k(c):
    return _records([est.estimate_u_k(c["k"], c["p"], _scenario(c), c["trials"], c["seed"])])


def run_v_k(c):
    return _records([est.estimate_v_k(c["k"], c["h"], c["p"], _scenario(c, c["h"]), c["trials"], c["seed"])])


def run_family_max(c):
    fp = _fparams(c)
    if c["kind"] not in ("u", "v"):
        raise SchemaError("kind must be u or v")
    specs = est.u_family(c["k"], c["L"], fp) if c["kind"] == "u" else est.v_family(c["k"], c["L"], fp, c["hs"])
    recs, top = est.family_max(c["kind"], specs, c["p"], c["trials"], c["seed"])
    return _records(recs + [top])


def run_corridor(c):
    corridor = Corridor(c["orientation"], c["k"], c["i0"], c["i1"], c["transverse"])
    return _records([est.estimate_corridor_crossing(corridor, c["p"], c["start"], c["trials"], c["seed"],
                                                    L=c["L"], fparams=_fparams(c))])


def run_recovery(c):
    rec = est.estimate_recovery(c["k"], c["p"], c["block_len"], c["trials"], c["seed"], L=c["L"],
                                fparams=_fparams(c), placement=c["placement"],
                                block_defect=None if c["block_defect"] < 0 else c["block_defect"],
                                enforce_length=c["enforce_length"])
    return _records([rec])


def run_contraction(c):
    rows = est.contraction_report(range(c["k_min"], c["k_max"] + 1), c["p"], c["trials"], c["seed"],
                                  L=c["L"], fparams=_fparams(c), hs=c["hs"])
    return _dict_rows(rows)


def run_percolation(c):
    return _records([est.percolation_probability(parse_distribution(c["dist_x"]), parse_distribution(c["dist_y"]),
                                                 c["p"], c["n"], c["trials"], c["seed"])])


def run_sharpness(c):
    rows = est.sharpness_experiment(parse_distribution(c["dist_x"]), parse_distribution(c["dist_y"]), c["p"],
                                    list(c["n_list"]), c["delta"], c["trials"], c["seed"],
                                    a=None if c["a"] <= 0 else c["a"],
                                    run_length=None if c["run_length"] < 0 else c["run_length"])
    out = _dict_rows(rows)
    if c["assert_decrease"]:
        ok = all(b["conn"] < a["conn"] and b["pvalue_decrease"] < c["significance"]
                 for a, b in zip(rows, rows[1:]))
        out.checks.append(("connection strictly decreasing", ok))
    return out


def run_binomial(c):
    rows = est.binomial_tail_check(c["alpha"], c["n_list"], c["trials"], c["seed"])
    out = _dict_rows(rows)
    out.checks = [(f"n={r['n']}", r["bound_ok"] and r["exact_ok"]) for r in rows]
    return out


def run_gluing(c):
    env = est.good_origin_environment(parse_distribution(c["dist_x"]), parse_distribution(c["dist_y"]),
                                      max(c["K"], c["k0"]), c["L"], c["env_seed"], budget=c["retry_budget"])
    return _records([est.gluing_diagnostic(c["k0"], c["K"], c["p"], env, c["trials"], c["seed"], L=c["L"])])


def run_oriented(c):
    if c["model"] == "oriented_geom":
        rec = ori.oriented_percolation_probability(parse_distribution(c["dist"]), c["p"], c["depth"],
                                                   c["trials"], c["seed"])
    elif c["model"] == "ksv":
        rec = ori.ksv_percolation_probability(c["rho"], c["p_g"], c["p_b"], c["depth"], c["trials"], c["seed"])
    else:
        raise SchemaError("model must be oriented_geom or ksv")
    return _records([rec], ori.ORIENTED_COLUMNS, ori.oriented_row)


def run_ksv_exploration(c):
    region = ori.exploration_region(c["ell"], c["layers"])
    survived, sizes = 0, np.zeros(c["layers"] + 1)
    for t in range(c["trials"]):
        eta = ori.sample_eta(c["rho"], region.i0, region.i1, rng.derive_seed(c["seed"], "eta", t))
        sample = ori.sample_ksv(eta, c["p_g"], c["p_b"], region, rng.derive_seed(c["seed"], "sites", t))
        res = ori.ksv_block_exploration(sample, c["ell"], c["layers"])
        survived += res.survived
        sizes += res.sizes
    params = {"model": "ksv", "ell": c["ell"], "layers": c["layers"], "rho": c["rho"], "p_g": c["p_g"],
              "p_b": c["p_b"], "mean_sizes": [float(s) for s in sizes / c["trials"]]}
    rec = EstimateRecord.from_count("ksv_exploration", params, survived, c["trials"], c["seed"])
    return _records([rec], ori.ORIENTED_COLUMNS, ori.oriented_row)


_FP = {"branching": 2, "loss_exponent": 1}

EXPERIMENTS: dict[str, Experiment] = {
    "exact_scale0": Experiment(run_exact_scale0, {"p": 0.9, "h": 1, **_FP},
                               "closed-form u_0 and v_0"),
    "estimate_pk": Experiment(run_estimate_pk, {"dist": "geometric:0.1", "L": 10, "K_max": 2,
                                                "trials": 10000, "seed": SEED},
                              "frequency of a bad interval at position 0"),
    "estimate_pkhb": Experiment(run_estimate_pkhb, {"dist": "geometric:0.1", "L": 10, "K_max": 2, "h_max": 32,
                                                    "trials": 10000, "seed": SEED},
                                "joint (H, B) label frequencies at position 0"),
    "check_certificate": Experiment(run_check_certificate, {"L": 10**6, "rho": "L^-16", "r_max": 100,
                                                            "h_max": 10**4, "k_max": 100, "b_max": -1},
                                    "grid check of the decay inequalities"),
    "estimate_u_k": Experiment(run_u_k, {"k": 1, "p": 0.9, "L": 4, "defect": "none", "start": "grouped",
                                         **_FP, "trials": 10000, "seed": SEED},
                               "failure frequency for a good column"),
    "estimate_v_k": Experiment(run_v_k, {"k": 1, "h": 1, "p": 0.9, "L": 4, "defect": "left",
                                         "start": "grouped", **_FP, "trials": 10000, "seed": SEED},
                               "failure frequency for a bad column of intensity h"),
    "family_max": Experiment(run_family_max, {"kind": "u", "k": 1, "p": 0.9, "L": 4, "hs": (1, 2), **_FP,
                                              "trials": 10000, "seed": SEED},
                             "maximum over the scenario family"),
    "corridor_crossing": Experiment(run_corridor, {"orientation": "horizontal", "k": 0, "i0": 0, "i1": 3,
                                                   "transverse": 0, "p": 0.8, "L": 4, "start": "grouped",
                                                   **_FP, "trials": 10000, "seed": SEED},
                                    "failure to carry a fractal across a corridor"),
    "recovery": Experiment(run_recovery, {"k": 0, "p": 0.8, "block_len": 4, "L": 4, "placement": "same",
                                          "block_defect": -1, "enforce_length": True, **_FP,
                                          "trials": 10000, "seed": SEED},
                           "joint non-recovery of three fractals"),
    "contraction": Experiment(run_contraction, {"k_min": 0, "k_max": 0, "p": 0.9, "L": 4, "hs": (1, 2),
                                                **_FP, "trials": 2000, "seed": SEED},
                              "family maxima at k and k+1 against C max(u, v)^2"),
    "percolation_probability": Experiment(run_percolation, {"dist_x": "geometric:0.01",
                                                            "dist_y": "geometric:0.01", "p": 0.95, "n": 64,
                                                            "trials": 200, "seed": SEED},
                                          "origin-to-boundary frequency on [-n, n]^2"),
    "sharpness": Experiment(run_sharpness, {"dist_x": "poly:3", "dist_y": "poly:3", "p": 0.9,
                                            "n_list": (3, 4, 5), "delta": 1.0, "a": -1.0, "run_length": -1,
                                            "significance": 0.01, "assert_decrease": False,
                                            "trials": 2000, "seed": SEED},
                            "connection frequency on growing stretched boxes"),
    "binomial_tail": Experiment(run_binomial, {"alpha": 0.9, "n_list": (1, 10, 100), "trials": 100000,
                                               "seed": SEED},
                                "P(Bin(n, alpha) <= n/2) against 10(1 - alpha) and the exact CDF"),
    "gluing": Experiment(run_gluing, {"k0": 0, "K": 1, "L": 2, "p": 0.8, "dist_x": "geometric:0.1",
                                      "dist_y": "geometric:0.1", "env_seed": 0, "retry_budget": 10**6,
                                      "trials": 10000, "seed": SEED},
                         "nested crossings from the origin"),
    "oriented_percolation": Experiment(run_oriented, {"model": "oriented_geom", "dist": "geometric:0.01",
                                                      "p": 0.95, "depth": 128, "rho": 0.1, "p_g": 0.9,
                                                      "p_b": 0.5, "trials": 2000, "seed": SEED},
                                       "oriented reach to column depth"),
    "ksv_exploration": Experiment(run_ksv_exploration, {"ell": 10, "layers": 4, "rho": 0.1, "p_g": 0.9,
                                                        "p_b": 0.5, "trials": 20, "seed": SEED},
                                  "renormalised exploration survival"),
}


# ---------------------------------------------------------------------------
# file output

def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _manifest(kind: str, name: str, config: dict, outputs: list[str], passed: bool, wall: float) -> str:
    body = {"command": kind, "experiment" if kind == "run" else "suite": name, "config": config,
            "version": __version__, "outputs": outputs, "passed": passed,
            "wall_time_s": round(wall, 3),
            "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _load_config(path: str) -> tuple[str | None, dict]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise SchemaError("config must be a JSON object")
    if "config" in obj and isinstance(obj["config"], dict):  # a manifest
        return obj.get("experiment"), dict(obj["config"])
    obj = dict(obj)
    return obj.pop("experiment", None), obj


def _parse_overrides(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise SchemaError(f"expected key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def cmd_run(args) -> int:
    overrides = {}
    if args.config:
        cfg_name, overrides = _load_config(args.config)
        if cfg_name is not None and cfg_name != args.experiment:
            raise SchemaError(f"config is for {cfg_name!r}, not {args.experiment!r}")
    overrides.update(_parse_overrides(args.params))
    cfg = resolve(args.experiment, overrides)
    t0 = time.perf_counter()
    out = EXPERIMENTS[args.experiment].run(cfg)
    wall = time.perf_counter() - t0
    outdir = Path(args.out)
    written = []
    if out.header is not None:
        _write(outdir / f"{args.experiment}.csv", to_csv(out.rows, out.header))
        written.append(f"{args.experiment}.csv")
        sys.stdout.write(to_csv(out.rows, out.header))
    if out.report is not None:
        _write(outdir / f"{args.experiment}.json", json.dumps(out.report, indent=2, sort_keys=True) + "\n")
        written.append(f"{args.experiment}.json")
    passed = all(ok for _, ok in out.checks)
    for name, ok in out.checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    _write(outdir / f"{args.experiment}.manifest.json",
           _manifest("run", args.experiment, _jsonable(cfg), written, passed, wall))
    return EXIT_OK if passed else EXIT_CHECK


def run_suite(name: str) -> tuple[list, dict | None]:
    if name == "sharpness":
        return acceptance.sharpness_checks()
    return acceptance.SUITES[name](), None


def suite_files(name: str, checks: list, tables: dict | None) -> dict[str, str]:
    """Result file names and contents for one suite run."""
    rows = [[str(c.criterion), c.name, str(c.passed), c.detail] for c in checks]
    files = {f"suite_{name}.csv": to_csv(rows, ("criterion", "name", "passed", "detail"))}
    if tables is not None:
        files[f"suite_{name}.json"] = json.dumps(tables, indent=2, sort_keys=True, default=fmt) + "\n"
    return files


def cmd_suite(args) -> int:
    if args.name not in acceptance.SUITES:
        raise SchemaError(f"unknown suite {args.name!r}; known: {', '.join(acceptance.SUITES)}")
    t0 = time.perf_counter()
    checks, tables = run_suite(args.name)
    wall = time.perf_counter() - t0
    outdir = Path(args.out)
    files = suite_files(args.name, checks, tables)
    for fname, text in files.items():
        _write(outdir / fname, text)
    written = list(files)
    for c in checks:
        print(c.line())
    passed = all(c.passed for c in checks)
    _write(outdir / f"suite_{args.name}.manifest.json",
           _manifest("suite", args.name, {"seed": acceptance.MASTER_SEED}, written, passed, wall))
    print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed in {wall:.1f} s")
    return EXIT_OK if passed else EXIT_CHECK


def cmd_list(args) -> int:
    for name in sorted(EXPERIMENTS):
        e = EXPERIMENTS[name]
        keys = " ".join(f"{k}={list(v) if isinstance(v, tuple) else v}" for k, v in e.schema.items())
        print(f"{name}: {e.help}\n    {keys}")
    print("suites: " + ", ".join(acceptance.SUITES))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stretchperc", description="Stretched-lattice percolation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment")
    run.add_argument("params", nargs="*", help="key=value overrides")
    run.add_argument("--config", help="JSON file of parameters (or a manifest to replay)")
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.set_defaults(func=cmd_run)
    suite = sub.add_parser("suite", help="run an acceptance suite")
    suite.add_argument("name")
    suite.add_argument("--out", default="results")
    suite.set_defaults(func=cmd_suite)
    lst = sub.add_parser("list", help="list experiments and their parameters")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # key=value items that follow an option land in ``extra``
    if extra and (args.command != "run" or any("=" not in e or e.startswith("-") for e in extra)):
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    if extra:
        args.params = list(args.params) + extra
    try:
        return args.func(args)
    except (ResourceError, ConditioningError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except StretchPercError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
