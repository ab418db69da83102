import math
from fractions import Fraction

import numpy as np
import pytest

from lelongkit.lelong import (
    LelongError,
    RadiiSchedule,
    check_calculus,
    fit_slope,
    lelong_circle_max_1d,
    lelong_circle_mean_1d,
    lelong_generic_line,
    lelong_min_over_branches,
    lelong_number,
    lelong_sphere_max,
    projective_mass,
    snap_rational,
    vanishing_mult,
)
from lelongkit.poly import parse_poly
from lelongkit.pshfun import Const, ScalarMul, log_norm, parse_psh, restrict_to_base_line
from lelongkit.variety import make_chart

CE_PSH = "log(|(x+y)^2| + |x-y| + |z^2|)"


@pytest.fixture(scope="module")
def counterexample():
    chart = make_chart(parse_poly("x^2 - y^2 + z^3"), [0, 0, 0], ["x", "z"])
    return chart, parse_psh(CE_PSH, chart.variable_names)


@pytest.fixture(scope="module")
def cusp():
    return make_chart(parse_poly("xi^2 - z^3 - w^4"), [0, 0, 0], ["z", "w"])


def _brute_slope(values_at, r1=1e-4, r2=1e-6):
    return (values_at(r1) - values_at(r2)) / math.log(r1 / r2)


# schedule and regression

def test_schedule_defaults():
    s = RadiiSchedule()
    assert s.radii[0] == 0.1 and s.radii.size == 14
    assert s.tail_start == 7
    assert np.all(np.diff(s.radii) < 0)


@pytest.mark.parametrize("kw", [{"r_max": 0}, {"ratio": 1.0}, {"ratio": 0.0}, {"count": 3}])
def test_schedule_rejects(kw):
    with pytest.raises(ValueError):
        RadiiSchedule(**kw)


def test_fit_identically_minus_inf():
    s = RadiiSchedule()
    est = fit_slope(np.log(s.radii), [-math.inf] * s.count, s, "circle-mean")
    assert est.value == math.inf
    assert "identically-minus-infinity" in est.flags


def test_fit_too_few_samples():
    s = RadiiSchedule()
    stats = [0.0] * 9 + [None] * 5
    with pytest.raises(LelongError):
        fit_slope(np.log(s.radii), stats, s, "circle-mean")


def test_fit_negative_slope_clipped():
    s = RadiiSchedule()
    est = fit_slope(np.log(s.radii), list(-np.log(s.radii)), s, "circle-max")
    assert est.value == 0.0
    assert "negative-slope-clipped" in est.flags


# one-variable estimators

def test_circle_mean_log_abs():
    est = lelong_circle_mean_1d(lambda t: np.log(np.abs(t)))
    assert abs(est.value - 1.0) <= 1e-10
    assert est.method == "circle-mean"
    xs = [x for x, _ in est.samples]
    assert all(a > b for a, b in zip(xs, xs[1:]))


def test_circle_mean_bounded_perturbation():
    psi = lambda t: 1.5 * np.log(np.abs(t)) + np.log1p(np.abs(t))  # noqa: E731
    est = lelong_circle_mean_1d(psi)
    assert abs(est.value - 1.5) <= 1e-3


def test_smooth_part_does_not_bias_slope():
    # circle max of log|1 + t| grows like r; the fit must not read that as slope
    est = lelong_circle_max_1d(lambda t: np.log(np.abs(1 + t)))
    assert abs(est.value) <= 1e-5


def test_circle_mean_pole_on_node():
    # log|t - r_0| has a zero on the first circle; jitter moves nodes off it
    r0 = 0.1
    est = lelong_circle_mean_1d(lambda t: np.log(np.abs(t - r0 * np.exp(1j * np.pi / 64))))
    assert est.value == pytest.approx(0.0, abs=1e-9)


def test_circle_max_log_abs():
    assert abs(lelong_circle_max_1d(lambda t: 2 * np.log(np.abs(t))).value - 2.0) <= 1e-10


def test_aver_restriction_counterexample(counterexample):
    chart, phi = counterexample
    u = np.array([0.3 + 0.8j, -0.5 + 0.1j])
    u /= np.linalg.norm(u)
    est = lelong_circle_mean_1d(restrict_to_base_line(phi, chart, u, "aver"))
    assert est.value == pytest.approx(1.5, abs=0.05)


# chart estimators

def test_sphere_max_smooth():
    chart = make_chart(parse_poly("y", ["x", "y", "z"]), [0, 0, 0], ["x", "z"])
    est = lelong_sphere_max(log_norm(3), chart)
    assert est.value == pytest.approx(1.0, abs=0.02)


def test_sphere_max_counterexample(counterexample):
    chart, phi = counterexample
    assert lelong_sphere_max(phi, chart).value == pytest.approx(1.0, abs=0.05)


def test_sphere_max_cusp(cusp):
    est = lelong_sphere_max(parse_psh("log|xi|", cusp.variable_names), cusp)
    assert est.value == pytest.approx(1.5, abs=0.05)


def test_generic_line_counterexample(counterexample):
    chart, phi = counterexample
    mx = lelong_generic_line(phi, chart, "max")
    av = lelong_generic_line(phi, chart, "aver")
    assert mx.value == pytest.approx(1.0, abs=0.05)
    assert av.value == pytest.approx(1.5, abs=0.05)
    assert mx.lines_used == 12 and mx.method == "generic-line"
    assert av.value >= mx.value - math.hypot(av.std_error, mx.std_error)


def test_generic_line_constant(counterexample):
    chart, _ = counterexample
    for kind in ("aver", "max"):
        assert lelong_generic_line(Const(0.0), chart, kind).value == 0.0


def test_generic_line_needs_three_lines(counterexample):
    chart, phi = counterexample
    with pytest.raises(ValueError):
        lelong_generic_line(phi, chart, num_lines=2)


def test_schedule_larger_than_chart(counterexample):
    chart, phi = counterexample
    with pytest.raises(LelongError):
        lelong_generic_line(phi, chart, schedule=RadiiSchedule(r_max=10 * chart.base_radius))


def test_lelong_number_graph():
    chart = make_chart(parse_poly("y - x^2", ["x", "y"]), [0, 0], ["x"])
    phi = parse_psh("log|y|", chart.variable_names)
    est = lelong_number(phi, chart)
    assert est.value == pytest.approx(2.0, abs=0.05)
    # brute force: on the graph y = x^2, so log|y| = 2 log|x|
    assert _brute_slope(lambda r: math.log(abs((r * (0.6 + 0.8j)) ** 2))) == pytest.approx(2.0)


def test_lelong_number_counterexample(counterexample):
    chart, phi = counterexample
    est = lelong_number(phi, chart)
    assert est.value == pytest.approx(1.0, abs=0.05)
    assert est.details["cross_check"].method == "sphere-max"
    assert "estimator-disagreement" not in est.flags


def test_lelong_number_hyperplane():
    chart = make_chart(parse_poly("z2", ["z1", "z2"]), [0, 0], ["z1"])
    est = lelong_number(parse_psh("log|z1|", ["z1", "z2"]), chart)
    assert est.value == pytest.approx(1.0, abs=0.02)


def _branches():
    names = ["z1", "z2"]
    a = make_chart(parse_poly("z1", names), [0, 0], ["z2"])
    b = make_chart(parse_poly("z2", names), [0, 0], ["z1"])
    return names, a, b


def test_min_over_branches():
    names, a, b = _branches()
    est = lelong_min_over_branches(parse_psh("log|z1|", names), [a, b])
    assert est.value == pytest.approx(1.0, abs=0.02)
    assert est.details["branch_values"][0] == math.inf
    assert est.details["branch"] == 1


def test_min_over_branches_log_norm():
    names, a, b = _branches()
    est = lelong_min_over_branches(log_norm(2, names), [a, b])
    assert est.value == pytest.approx(1.0, abs=0.02)


def test_min_over_single_branch():
    names, a, b = _branches()
    phi = parse_psh("log|z1|", names)
    assert lelong_min_over_branches(phi, [b]).value == lelong_number(phi, b).value


def test_vanishing_mult_monomials():
    chart = make_chart(parse_poly("z2", ["z1", "z2"]), [0, 0], ["z1"])
    for d in (1, 2, 3, 5):
        vm = vanishing_mult(parse_poly(f"z1^{d}", ["z1", "z2"]), chart)
        assert vm.exact == d


def test_vanishing_mult_cusp(cusp):
    vm = vanishing_mult(parse_poly("xi", cusp.variable_names), cusp)
    assert vm.exact == Fraction(3, 2)


def test_vanishing_mult_linear_form(counterexample):
    chart, _ = counterexample
    f = parse_poly("x + y", chart.variable_names)
    vm = vanishing_mult(f, chart)
    assert vm.exact == 1

    # brute force: on the line x = a z the sheets are y = +-sqrt(a^2 z^2 + z^3)
    a = 0.37 + 0.21j

    def stat(r):
        z = r * np.exp(2j * np.pi * np.arange(64) / 64)
        y = np.sqrt(a * a * z * z + z ** 3)
        return np.max(np.log(np.abs(np.stack([a * z + y, a * z - y]))))

    assert _brute_slope(stat) == pytest.approx(1.0, abs=0.01)


def test_vanishing_mult_identically_zero_branch():
    names, a, _ = _branches()
    with pytest.raises(LelongError):
        vanishing_mult(parse_poly("z1", names), a)


def test_snap_rational():
    assert snap_rational(1.49, 2) == Fraction(3, 2)
    assert snap_rational(1.3, 2) is None
    assert snap_rational(math.inf, 2) is None


def test_projective_mass_counterexample(counterexample):
    chart, phi = counterexample
    pm = projective_mass(phi, chart)
    assert pm.multiplicity == 2
    assert pm.value == pytest.approx(3.0, abs=0.15)


def test_projective_mass_cusp(cusp):
    pm = projective_mass(parse_psh("log|xi|", cusp.variable_names), cusp)
    assert pm.value == pytest.approx(3.0, abs=0.15)


def test_projective_mass_constant(counterexample):
    chart, _ = counterexample
    assert projective_mass(Const(0.0), chart).value == 0


@pytest.fixture(scope="module")
def smooth3():
    P = parse_poly("z3", ["z1", "z2", "z3"])
    return make_chart(P, [0, 0, 0], ["z1", "z2"]), parse_psh("log|z1|", P.names), parse_psh("log|z2|", P.names)


def test_calculus_smooth(smooth3):
    chart, phi, psi = smooth3
    rep = check_calculus(phi, psi, chart, 2.0)
    assert rep.scaling == 0.0
    assert rep.additivity <= 0.05
    assert rep.max_min <= 0.05
    assert rep.values["sum"] == pytest.approx(2.0, abs=0.05)
    assert rep.values["max"] == pytest.approx(1.0, abs=0.05)
    assert rep.irreducibility == "strong-locally-irreducible"


def test_calculus_zero_scale(smooth3):
    chart, phi, psi = smooth3
    rep = check_calculus(phi, psi, chart, 0.0)
    assert rep.values["scaled"] == 0.0
    assert rep.scaling == 0.0


def test_calculus_same_function(smooth3):
    chart, phi, _ = smooth3
    rep = check_calculus(phi, phi, chart, 2.0)
    assert rep.additivity <= 1e-9


def test_scaling_exact_any_factor(counterexample):
    chart, phi = counterexample
    base = lelong_generic_line(phi, chart, "aver")
    for a in (2.0, 1 / 3, 0.7, 3.3):
        assert lelong_generic_line(ScalarMul(a, phi), chart, "aver").value == a * base.value


def test_estimate_serialization(counterexample):
    chart, phi = counterexample
    est = lelong_number(phi, chart)
    d = est.to_dict()
    assert d["method"] == "generic-line"
    assert d["cross_check"]["method"] == "sphere-max"
    assert len(est.csv_rows()) == 14


def test_branch_crossover_resolved_below_it(counterexample):
    # on a line t(a, b) the first branch vanishes to order 2*1.75 = 3.5 and the
    # second to order 2 + 5/4 = 3.25, so the max has Lelong number 3.25; the
    # branches cross near |t| ~ 1e-3, inside the default tail
    chart, _ = counterexample
    phi = parse_psh("max(log(|2i*x*y + 2i*z^2|^1.75), log|1i*y*z| + log(|2i*x*y^2*z^2|^0.25))",
                    chart.variable_names)
    deep = RadiiSchedule(r_max=1e-5)
    for kind in ("aver", "max"):
        assert abs(lelong_generic_line(phi, chart, kind, schedule=deep).value - 3.25) <= 1e-3
    # at the default radii the max statistic still sits on the first branch
    assert lelong_generic_line(phi, chart, "max").value > 3.4
