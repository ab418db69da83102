import numpy as np
import pytest

from lelongkit.poly import eval_many, parse_poly
from lelongkit.variety import (
    ChartError,
    chart_from_dict,
    chart_to_dict,
    fiber,
    make_chart,
    multiplicity,
    random_unitary,
    reframe,
)


@pytest.fixture(scope="module")
def counterexample():
    return make_chart(parse_poly("x^2 - y^2 + z^3"), [0, 0, 0], ["x", "z"])


@pytest.fixture(scope="module")
def cusp():
    return make_chart(parse_poly("xi^2 - z^3 - w^4"), [0, 0, 0], ["z", "w"])


def test_counterexample_two_sheets(counterexample):
    assert counterexample.sheets == 2
    assert counterexample.fiber_dim == 1
    assert counterexample.base_dims == (0, 2)


def test_hyperplane_one_sheet():
    chart = make_chart(parse_poly("y", ["x", "y", "z"]), [0, 0, 0], ["x", "z"])
    assert chart.sheets == 1


def test_cusp_two_sheets_by_fiber_counts(cusp):
    assert cusp.sheets == 2
    rng = np.random.default_rng(5)
    r = 0.5 * cusp.base_radius
    B = r * (rng.uniform(-1, 1, (100, 2)) + 1j * rng.uniform(-1, 1, (100, 2))) / np.sqrt(2)
    counts = [sum(m for _, m in fiber(cusp, b).points) for b in B]
    assert counts == [2] * 100


def test_fiber_counterexample_slice(counterexample):
    fs = fiber(counterexample, (0.1, 0))
    got = sorted(v.real for v in fs.values())
    assert np.allclose(got, [-0.1, 0.1], atol=1e-14)
    assert fs.residual_bound < 1e-12


def test_fiber_cusp_closed_form(cusp):
    fs = fiber(cusp, (0.01, 0))
    want = 0.01 ** 1.5
    got = sorted(fs.values(), key=lambda z: z.real)
    assert np.allclose(got, [-want, want], atol=1e-15)


def test_fiber_at_center_contains_center(counterexample, cusp):
    for chart in (counterexample, cusp):
        fs = fiber(chart, chart.base_center)
        assert any(abs(v - chart.fiber_center) < 1e-12 for v in fs.values())
        assert fs.near_discriminant


def test_fiber_off_center():
    P = parse_poly("x^2 - y^2 + z^3")
    chart = make_chart(P, [1, 1, 0], ["x", "z"])
    assert chart.sheets == 1
    fs = fiber(chart, (1.01, 0))
    assert abs(fs.values()[0] - 1.01) < 1e-12


def test_fiber_outside_polydisk(counterexample):
    with pytest.raises(ChartError):
        fiber(counterexample, (10.0, 0))


def test_chart_bound(counterexample):
    rng = np.random.default_rng(0)
    k = 2
    B = counterexample.base_radius * 0.9 * (rng.uniform(-1, 1, (200, k)) + 1j * rng.uniform(-1, 1, (200, k))) / 2
    values, near, escaped = counterexample.local_fibers(B)
    ok = ~(near | escaped)
    assert ok.sum() > 150
    norms = np.linalg.norm(B[ok], axis=1)
    assert np.all(np.abs(values[ok]).max(axis=1) <= counterexample.properness_constant * norms * (1 + 1e-9))


def test_completed_points_on_variety(cusp):
    rng = np.random.default_rng(1)
    B = 0.3 * cusp.base_radius * (rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2)))
    B = np.clip(B.real, -cusp.base_radius / 2, cusp.base_radius / 2) + 1j * np.clip(B.imag, -0.1, 0.1)
    values, _, _ = cusp.local_fibers(B)
    amb = cusp.ambient_points(B, values)
    assert np.max(np.abs(eval_many(cusp.defining, amb.reshape(-1, 3)))) < 1e-12


def test_multiplicity_examples(counterexample):
    assert multiplicity(counterexample) == 2
    assert multiplicity(counterexample, randomize=True, seed=3) == 2
    smooth = make_chart(parse_poly("y - x^2", ["x", "y"]), [0, 0], ["x"])
    assert multiplicity(smooth, randomize=True) == 1


def test_multiplicity_ten_frames():
    chart = make_chart(parse_poly("xi^2 - z^2 - w^4"), [0, 0, 0], ["z", "w"])
    rng = np.random.default_rng(8)
    for _ in range(10):
        assert reframe(chart, random_unitary(3, rng)).sheets == 2


def test_not_proper():
    with pytest.raises(ChartError):
        make_chart(parse_poly("x*y", ["x", "y"]), [0, 0], ["x"])


def test_independent_of_fiber_variable():
    with pytest.raises(ChartError):
        make_chart(parse_poly("x", ["x", "y"]), [0, 0], ["x"])


def test_center_not_on_variety():
    with pytest.raises(ChartError):
        make_chart(parse_poly("x^2 - y^2 + z^3"), [1, 0, 0], ["x", "z"])


def test_dict_round_trip(counterexample):
    d = chart_to_dict(counterexample)
    again = chart_from_dict(d)
    assert again.defining == counterexample.defining
    assert again.sheets == counterexample.sheets
    assert again.base_radius == counterexample.base_radius
