"""Batch front end: problem files in, JSON reports and CSV sample curves out.

Usage::

    lelongkit --problem problem.toml [--task T] [--seed N] [--threads N] [--out PATH] [--csv PATH]
    lelongkit verify <suite> [--seed N] [--threads N] [--out PATH]
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._util import rng_for, set_threads
from .lelong import (
    LelongError,
    RadiiSchedule,
    lelong_generic_line,
    lelong_min_over_branches,
    lelong_number,
    projective_mass,
    vanishing_mult,
)
from .monodromy import strong_local_irreducibility
from .poly import PolyError, PolyParseError, parse_poly
from .pshfun import PshParseError, parse_psh, sheet_values, transform_values
from .variety import ChartError, chart_from_dict, chart_to_dict, multiplicity
from .verify import SUITES, format_rows, run_suite

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
TASKS = ("lelong", "mult", "transform-slope", "irreducible", "pmass", "props", "verify")
OUT_DIR_ENV = "LELONGKIT_OUT_DIR"

DEFAULT_PARAMS = {
    "seed": 0,
    "num_lines": 12,
    "r_max": 0.1,
    "ratio": 0.7,
    "count": 14,
    "transform": "aver",
    "irreducibility_lines": 50,
    "samples": 200,
    "suite": None,
}


class InputError(Exception):
    """Bad problem file or flags; exit code 2."""


@dataclass
class ProblemSpec:
    varieties: list[dict]
    psh: dict
    task: str
    params: dict
    output: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.params["seed"])

    @property
    def schedule(self) -> RadiiSchedule:
        p = self.params
        return RadiiSchedule(float(p["r_max"]), float(p["ratio"]), int(p["count"]))

    def echo(self) -> dict:
        return {"variety": self.varieties if len(self.varieties) != 1 else self.varieties[0],
                "psh": self.psh, "task": self.task, "params": self.params, "output": self.output}


def _decode(text: str, path: str) -> dict:
    if path.endswith(".json") or text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as err:
            raise InputError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise InputError(f"{path}: {err}") from None


def _locate(text: str, needle: str, column: int) -> str:
    """Line/column of an expression error inside the problem file text."""
    idx = text.find(needle) if needle else -1
    if idx < 0:
        return f"column {column + 1} of the expression"
    idx += column
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return f"line {line}, column {col}"


def load_problem(path: str, overrides: dict | None = None) -> tuple[ProblemSpec, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise InputError(f"cannot read problem file: {err}") from None
    raw = _decode(text, path)
    if not isinstance(raw, dict):
        raise InputError("problem file must hold a table at top level")
    overrides = overrides or {}
    unknown = set(raw) - {"variety", "psh", "task", "params", "output"}
    if unknown:
        raise InputError(f"unknown top-level keys: {sorted(unknown)}")
    task = overrides.get("task") or raw.get("task")
    if task is None:
        raise InputError("no task given (set 'task' or pass --task)")
    if task not in TASKS:
        raise InputError(f"unknown task {task!r}; choose from {list(TASKS)}")
    params = dict(DEFAULT_PARAMS)
    given = raw.get("params", {})
    bad = set(given) - set(DEFAULT_PARAMS)
    if bad:
        raise InputError(f"unknown params: {sorted(bad)}")
    params.update(given)
    if overrides.get("seed") is not None:
        params["seed"] = overrides["seed"]
    if not isinstance(params["seed"], int) or params["seed"] < 0:
        raise InputError("seed must be a nonnegative integer")
    variety = raw.get("variety", [])
    varieties = variety if isinstance(variety, list) else [variety]
    psh = raw.get("psh", {})
    if isinstance(psh, str):
        psh = {"expr": psh}
    output = dict(raw.get("output", {}))
    for key in ("out", "csv"):
        if overrides.get(key):
            output[{"out": "report"}.get(key, key)] = overrides[key]
    spec = ProblemSpec(varieties, psh, task, params, output)
    _check_required(spec)
    return spec, text


def _check_required(spec: ProblemSpec):
    t = spec.task
    if t == "verify":
        if spec.params["suite"] not in SUITES:
            raise InputError(f"task verify needs params.suite in {sorted(SUITES)}")
        return
    if not spec.varieties:
        raise InputError(f"task {t} needs a [variety] table")
    if len(spec.varieties) > 1 and t != "lelong":
        raise InputError(f"task {t} takes a single variety; several are only allowed for lelong")
    if t in ("lelong", "transform-slope", "pmass", "props") and "expr" not in spec.psh:
        raise InputError(f"task {t} needs psh.expr")
    if t == "transform-slope" and spec.params["transform"] not in ("aver", "max"):
        raise InputError("params.transform must be 'aver' or 'max'")
    try:
        spec.schedule
    except ValueError as err:
        raise InputError(str(err)) from None


# ---------------------------------------------------------------------------
# tasks

def _charts(spec: ProblemSpec, text: str):
    out = []
    for v in spec.varieties:
        try:
            out.append(chart_from_dict(v, seed=spec.seed))
        except PolyParseError as err:
            raise InputError(f"variety polynomial: {err.message} at {_locate(text, err.text, err.column)}") from None
        except (ChartError, PolyError) as err:
            raise InputError(f"variety: {err}") from None
    return out


def _psh(spec: ProblemSpec, text: str, chart, key: str = "expr"):
    src = spec.psh[key]
    try:
        return parse_psh(src, chart.variable_names)
    except PshParseError as err:
        raise InputError(f"psh.{key}: {err.message} at {_locate(text, src, err.column)}") from None
    except ValueError as err:
        raise InputError(f"psh.{key}: {err}") from None


def _task_lelong(spec, text, csv_rows):
    charts = _charts(spec, text)
    phi = _psh(spec, text, charts[0])
    kw = dict(schedule=spec.schedule, num_lines=spec.params["num_lines"], seed=spec.seed)
    if len(charts) > 1:
        est = lelong_min_over_branches(phi, charts, **kw)
    else:
        est = lelong_number(phi, charts[0], **kw)
    csv_rows.extend(est.csv_rows())
    results = {"lelong": est.to_dict(), "charts": [chart_to_dict(c) for c in charts]}
    if "vanishing" in spec.psh:
        try:
            f = parse_poly(spec.psh["vanishing"], charts[0].variable_names)
        except PolyParseError as err:
            raise InputError(f"psh.vanishing: {err.message} at {_locate(text, err.text, err.column)}") from None
        results["vanishing"] = vanishing_mult(f, charts[0], **kw).to_dict()
    return results, list(est.flags)


def _task_mult(spec, text, csv_rows):
    chart = _charts(spec, text)[0]
    m = multiplicity(chart, randomize=True, seed=spec.seed)
    return {"multiplicity": m, "sheets": chart.sheets, "chart": chart_to_dict(chart)}, []


def _task_transform_slope(spec, text, csv_rows):
    chart = _charts(spec, text)[0]
    phi = _psh(spec, text, chart)
    est = lelong_generic_line(phi, chart, spec.params["transform"], spec.params["num_lines"], spec.seed,
                              spec.schedule)
    csv_rows.extend(est.csv_rows())
    return {"transform_slope": est.to_dict(), "chart": chart_to_dict(chart)}, list(est.flags)


def _task_irreducible(spec, text, csv_rows):
    chart = _charts(spec, text)[0]
    v = strong_local_irreducibility(chart, spec.params["irreducibility_lines"], spec.seed)
    flags = ["inconclusive"] if v.verdict == "inconclusive" else []
    return {"monodromy": v.to_dict(), "chart": chart_to_dict(chart)}, flags


def _task_pmass(spec, text, csv_rows):
    chart = _charts(spec, text)[0]
    phi = _psh(spec, text, chart)
    pm = projective_mass(phi, chart, spec.schedule, spec.params["num_lines"], spec.seed)
    csv_rows.extend(pm.aver_estimate.csv_rows())
    return {"projective_mass": pm.to_dict(), "chart": chart_to_dict(chart)}, list(pm.aver_estimate.flags)


def _task_props(spec, text, csv_rows):
    """Spot checks of the transform invariants on this chart and expression."""
    chart = _charts(spec, text)[0]
    phi = _psh(spec, text, chart)
    n = int(spec.params["samples"])
    rng = rng_for(spec.seed, "props")
    k = len(chart.base_dims)
    dirs = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    B = chart.base_center + dirs * (chart.base_radius * rng.uniform(0.05, 0.9, (n, 1)))
    values, near, escaped = chart.local_fibers(B)
    ok = ~(near | escaped)
    aver, mx, _, _ = transform_values(phi, chart, B[ok])
    fiber_pts = values[ok] - chart.fiber_center
    base_norm = np.linalg.norm(B[ok] - chart.base_center, axis=1)
    bound = chart.properness_constant * base_norm
    checks = {
        "sheet_count": {"checked": int(ok.sum()), "failed": int(np.sum(~np.isfinite(values[ok]).all(axis=1)))},
        "chart_bound": {"checked": int(ok.sum()),
                        "failed": int(np.sum(np.abs(fiber_pts).max(axis=1) > bound * (1 + 1e-9)))},
        "aver_le_max": {"checked": int(ok.sum()), "failed": int(np.sum(aver > mx + 1e-12))},
    }
    # sub-mean value on small circles around sampled base points
    fails = 0
    circles = min(20, int(ok.sum()))
    theta = 2 * np.pi * np.arange(64) / 64
    for i in range(circles):
        b = B[ok][i]
        u = dirs[ok][i]
        radius = 0.25 * float(np.linalg.norm(b - chart.base_center))
        ring = b[None, :] + radius * np.exp(1j * theta)[:, None] * u[None, :]
        sv = sheet_values(phi, chart, np.vstack([b[None, :], ring]))
        for red in (np.mean, np.max):
            c = red(sv, axis=1)
            if c[0] > np.mean(c[1:]) + 1e-6:
                fails += 1
    checks["sub_mean_value"] = {"checked": 2 * circles, "failed": fails}
    flags = [f"property-failed:{name}" for name, c in checks.items() if c["failed"]]
    return {"properties": checks, "chart": chart_to_dict(chart)}, flags


def _task_verify(spec, text, csv_rows):
    rows = run_suite(spec.params["suite"], seed=spec.seed)
    passed = all(r.passed for r in rows)
    return {"suite": spec.params["suite"], "rows": [r.to_dict() for r in rows], "passed": passed}, \
        ([] if passed else ["verification-failed"])


DISPATCH = {
    "lelong": _task_lelong,
    "mult": _task_mult,
    "transform-slope": _task_transform_slope,
    "irreducible": _task_irreducible,
    "pmass": _task_pmass,
    "props": _task_props,
    "verify": _task_verify,
}


# ---------------------------------------------------------------------------
# output

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def versions() -> dict:
    return {"lelongkit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def build_report(task: str, inputs: dict, results: dict, flags: list, seed: int, wall_time: float) -> dict:
    return _jsonable({
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "inputs": inputs,
        "results": results,
        "flags": sorted(set(flags)),
        "versions": versions(),
        "seed": seed,
        "wall_time": wall_time,
    })


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _default_path(name: str) -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / name


def write_csv(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["log_r", "statistic"])
        for x, y in rows:
            w.writerow([repr(float(x)), repr(float(y))])


def _summary(task: str, results: dict) -> str:
    if task == "lelong":
        est = results["lelong"]
        line = f"lelong number: {est['value']} (std error {est['std_error']}, {est['method']})"
        if "vanishing" in results:
            vm = results["vanishing"]
            line += f"\nvanishing multiplicity: {vm['exact'] or vm['raw']}"
        return line
    if task == "mult":
        return f"multiplicity: {results['multiplicity']}"
    if task == "transform-slope":
        est = results["transform_slope"]
        return f"transform slope: {est['value']} (std error {est['std_error']}, {est['method']})"
    if task == "irreducible":
        m = results["monodromy"]
        return f"verdict: {m['verdict']} ({m['num_irreducible']}/{m['num_lines']} lines transitive)"
    if task == "pmass":
        pm = results["projective_mass"]
        return f"projective mass: {pm['value']} (multiplicity {pm['multiplicity']})"
    if task == "props":
        return "\n".join(f"{k}: {v['checked'] - v['failed']}/{v['checked']} pass"
                         for k, v in sorted(results["properties"].items()))
    return ""


def run(path: str, task=None, seed=None, threads=None, out=None, csv_path=None) -> int:
    t0 = time.perf_counter()
    try:
        spec, text = load_problem(path, {"task": task, "seed": seed, "out": out, "csv": csv_path})
        if threads:
            set_threads(threads)
        if spec.task == "verify":
            rows = run_suite(spec.params["suite"], seed=spec.seed)
            print(format_rows(rows))
            results = {"suite": spec.params["suite"], "rows": [r.to_dict() for r in rows],
                       "passed": all(r.passed for r in rows)}
            flags = [] if results["passed"] else ["verification-failed"]
            csv_rows = []
        else:
            csv_rows = []
            results, flags = DISPATCH[spec.task](spec, text, csv_rows)
    except InputError as err:
        print(f"input error: {err}", file=sys.stderr)
        return 2
    except (LelongError, PolyError, RuntimeError, ValueError, np.linalg.LinAlgError) as err:
        print(f"computation error: {err}", file=sys.stderr)
        return 1
    report = build_report(spec.task, spec.echo(), results, flags, spec.seed, time.perf_counter() - t0)
    report_path = Path(spec.output.get("report") or _default_path(f"report-{spec.task}.json"))
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(dumps_report(report))
    if spec.output.get("csv") or csv_rows:
        write_csv(Path(spec.output.get("csv") or _default_path(f"samples-{spec.task}.csv")), csv_rows)
    if spec.task != "verify":
        print(_summary(spec.task, report["results"]))
    if flags:
        print("flags: " + ", ".join(report["flags"]))
    print(f"report written to {report_path}")
    if spec.task == "verify" and not results["passed"]:
        return 1
    return 0


def verify(suite: str, seed: int = 0, threads=None, out=None) -> int:
    if suite not in SUITES:
        print(f"input error: unknown suite {suite!r}; choose from {sorted(SUITES)}", file=sys.stderr)
        return 2
    if threads:
        set_threads(threads)
    t0 = time.perf_counter()
    rows = run_suite(suite, seed=seed)
    print(format_rows(rows))
    passed = all(r.passed for r in rows)
    if out:
        results = {"suite": suite, "rows": [r.to_dict() for r in rows], "passed": passed}
        inputs = {"task": "verify", "params": {**DEFAULT_PARAMS, "seed": seed, "suite": suite}}
        report = build_report("verify", inputs, results, [] if passed else ["verification-failed"], seed,
                              time.perf_counter() - t0)
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(dumps_report(report))
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lelongkit", description=__doc__.splitlines()[0])
    ap.add_argument("--problem", help="problem file (TOML or JSON)")
    ap.add_argument("--task", choices=TASKS)
    ap.add_argument("--seed", type=_nonneg_int)
    ap.add_argument("--threads", type=_nonneg_int, help="cap on worker threads; results do not depend on it")
    ap.add_argument("--out", help=f"report path (default: ${OUT_DIR_ENV} or cwd)")
    ap.add_argument("--csv", help="CSV path for the per-radius samples")
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "verify":
        vp = argparse.ArgumentParser(prog="lelongkit verify")
        vp.add_argument("suite", choices=sorted(SUITES))
        vp.add_argument("--seed", type=_nonneg_int, default=0)
        vp.add_argument("--threads", type=_nonneg_int)
        vp.add_argument("--out")
        try:
            a = vp.parse_args(argv[1:])
        except SystemExit as e:
            return 2 if e.code else 0
        return verify(a.suite, a.seed, a.threads, a.out)
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    if not a.problem:
        ap.print_usage(sys.stderr)
        print("input error: --problem is required", file=sys.stderr)
        return 2
    return run(a.problem, a.task, a.seed, a.threads, a.out, a.csv)


if __name__ == "__main__":
    sys.exit(main())
