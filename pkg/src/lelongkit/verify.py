"""Bundled verification suites: expected vs observed rows with tolerances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lelong import (
    RadiiSchedule,
    check_calculus,
    lelong_circle_max_1d,
    lelong_circle_mean_1d,
    lelong_generic_line,
    lelong_min_over_branches,
    projective_mass,
    vanishing_mult,
)
from .monodromy import strong_local_irreducibility
from .poly import parse_poly
from .pshfun import parse_psh
from .variety import make_chart, multiplicity

COUNTEREXAMPLE_POLY = "x^2 - y^2 + z^3"
COUNTEREXAMPLE_PSH = "log(|(x+y)^2| + |x-y| + |z^2|)"
PARITY_PAIRS = ((2, 2), (2, 4), (4, 6), (3, 3), (3, 4), (5, 6))


@dataclass(frozen=True)
class Row:
    name: str
    expected: object
    observed: object
    tolerance: object
    passed: bool

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, Fraction):
                return str(v)
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        return {"name": self.name, "expected": enc(self.expected), "observed": enc(self.observed),
                "tolerance": enc(self.tolerance), "passed": self.passed}


def _near(name, expected, observed, tol) -> Row:
    ok = observed is not None and math.isfinite(observed) and abs(observed - expected) <= tol
    return Row(name, expected, observed, tol, bool(ok))


def counterexample_chart(seed: int = 0):
    P = parse_poly(COUNTEREXAMPLE_POLY)
    return make_chart(P, [0, 0, 0], ["x", "z"], seed=seed), parse_psh(COUNTEREXAMPLE_PSH, P.names)


def parity_chart(k: int, l: int, seed: int = 0):
    return make_chart(parse_poly(f"xi^2 - z^{k} - w^{l}"), [0, 0, 0], ["z", "w"], seed=seed)


def suite_counterexample(seed: int = 0, num_lines: int = 12) -> list[Row]:
    chart, phi = counterexample_chart(seed)
    nu_max = lelong_generic_line(phi, chart, "max", num_lines, seed).value
    nu_aver = lelong_generic_line(phi, chart, "aver", num_lines, seed).value
    mult = multiplicity(chart, randomize=True, seed=seed)
    mass = projective_mass(phi, chart, num_lines=num_lines, seed=seed).value
    return [
        _near("nu_max", 1.0, nu_max, 0.05),
        _near("nu_aver", 1.5, nu_aver, 0.05),
        Row("multiplicity", 2, mult, 0, mult == 2),
        _near("projective_mass", 3.0, mass, 0.15),
        Row("nu_aver - nu_max", ">= 0.4", nu_aver - nu_max, 0.4, nu_aver - nu_max >= 0.4),
    ]


def suite_theorem_a(seed: int = 0, num_lines: int = 12) -> list[Row]:
    chart = parity_chart(3, 4, seed)
    phi = parse_psh("log|xi|", chart.variable_names)
    nu_max = lelong_generic_line(phi, chart, "max", num_lines, seed).value
    nu_aver = lelong_generic_line(phi, chart, "aver", num_lines, seed).value
    cx, cphi = counterexample_chart(seed)
    gap = (lelong_generic_line(cphi, cx, "aver", num_lines, seed).value
           - lelong_generic_line(cphi, cx, "max", num_lines, seed).value)
    return [
        _near("xi^2=z^3+w^4 nu_max", 1.5, nu_max, 0.05),
        _near("xi^2=z^3+w^4 nu_aver", 1.5, nu_aver, 0.05),
        Row("xi^2=z^3+w^4 |nu_aver - nu_max|", "<= 0.05", abs(nu_aver - nu_max), 0.05, abs(nu_aver - nu_max) <= 0.05),
        Row("counterexample nu_aver - nu_max", ">= 0.4", gap, 0.4, gap >= 0.4),
    ]


def suite_parity(seed: int = 0, num_lines: int = 50) -> list[Row]:
    rows = []
    for k, l in PARITY_PAIRS:
        v = strong_local_irreducibility(parity_chart(k, l, seed), num_lines, seed)
        if k % 2:
            expected = "strong-locally-irreducible"
            ok = v.verdict == expected and v.fraction >= 0.95
        else:
            expected = "not"
            ok = v.verdict == expected and v.fraction <= 0.05
        rows.append(Row(f"(k,l)=({k},{l})", expected, f"{v.verdict} ({v.fraction:.2f})", "0.95/0.05", bool(ok)))
    return rows


def suite_calculus(seed: int = 0, num_lines: int = 12) -> list[Row]:
    P = parse_poly("z3", ["z1", "z2", "z3"])
    chart = make_chart(P, [0, 0, 0], ["z1", "z2"], seed=seed)
    phi = parse_psh("log|z1|", P.names)
    psi = parse_psh("log|z2|", P.names)
    rows = []
    report = None
    for a in (2.0, 1 / 3):
        report = check_calculus(phi, psi, chart, a, num_lines=num_lines, seed=seed)
        rows.append(Row(f"scaling residual a={a:.6g}", 0.0, report.scaling, "bit-exact", report.scaling == 0.0))
    rows.append(Row("additivity residual", "<= 0.05", report.additivity, 0.05, report.additivity <= 0.05))
    rows.append(Row("max-min residual", "<= 0.05", report.max_min, 0.05, report.max_min <= 0.05))

    line = parse_poly("z2", ["z1", "z2"])
    hyper = make_chart(line, [0, 0], ["z1"], seed=seed)
    for d in (1, 2, 3, 5):
        vm = vanishing_mult(parse_poly(f"z1^{d}", ["z1", "z2"]), hyper, num_lines=num_lines, seed=seed)
        rows.append(Row(f"vanishing order z1^{d}", d, vm.exact, "exact", vm.exact == d))
    cusp = parity_chart(3, 4, seed)
    vm = vanishing_mult(parse_poly("xi", cusp.variable_names), cusp, num_lines=num_lines, seed=seed)
    rows.append(Row("vanishing order of xi on xi^2=z^3+w^4", Fraction(3, 2), vm.exact, "exact",
                    vm.exact == Fraction(3, 2)))

    names = ["z1", "z2"]
    branch_a = make_chart(parse_poly("z1", names), [0, 0], ["z2"], seed=seed)
    branch_b = make_chart(parse_poly("z2", names), [0, 0], ["z1"], seed=seed)
    est = lelong_min_over_branches(parse_psh("log|z1|", names), [branch_a, branch_b], num_lines=num_lines, seed=seed)
    rows.append(_near("min over branches of z1*z2=0", 1.0, est.value, 0.02))
    first = est.details["branch_values"][0]
    rows.append(Row("branch {z1=0}", "inf", first, "exact", first == math.inf))
    return rows


def suite_estimators(seed: int = 0) -> list[Row]:
    rows = []
    sched = RadiiSchedule()
    for c in (0.5, 1.0, 1.5, 2.0, 3.0):
        def psi(t, c=c):
            return c * np.log(np.abs(t)) + np.log1p(np.abs(t))

        mean = lelong_circle_mean_1d(psi, sched, seed=seed).value
        mx = lelong_circle_max_1d(psi, sched, seed=seed).value
        rows.append(Row(f"c={c}: |mean - max|", "<= 0.02", abs(mean - mx), 0.02, abs(mean - mx) <= 0.02))
    log_t = lambda t: np.log(np.abs(t))  # noqa: E731
    rows.append(_near("log|t| circle-mean", 1.0, lelong_circle_mean_1d(log_t, sched, seed=seed).value, 1e-10))
    rows.append(_near("log|t| circle-max", 1.0, lelong_circle_max_1d(log_t, sched, seed=seed).value, 1e-10))
    return rows


SUITES = {
    "counterexample": suite_counterexample,
    "theorem-a": suite_theorem_a,
    "parity": suite_parity,
    "calculus": suite_calculus,
    "estimators": suite_estimators,
}


def run_suite(name: str, seed: int = 0) -> list[Row]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](seed=seed)


def format_rows(rows: list[Row]) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)

    table = [("check", "expected", "observed", "tolerance", "result")]
    table += [(r.name, fmt(r.expected), fmt(r.observed), fmt(r.tolerance), "PASS" if r.passed else "FAIL") for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(5)]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table)
