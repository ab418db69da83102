import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from lelongkit.pshfun import Max, ScalarMul, Sum, sheet_values, transform_values
from strategies import base_points, chart, chart_names, psh_exprs, rng_from, seeds


@st.composite
def chart_and_exprs(draw, count=1):
    name = draw(chart_names)
    ch = chart(name)
    return (ch,) + tuple(draw(psh_exprs(ch.variable_names)) for _ in range(count))


@given(chart_and_exprs(), seeds)
def test_aver_le_max(data, seed):
    ch, phi = data
    B, _ = base_points(ch, rng_from(seed), 8)
    aver, mx, _, _ = transform_values(phi, ch, B)
    finite = np.isfinite(mx)
    assert np.all(aver[~finite] == mx[~finite])
    assert np.all(aver[finite] <= mx[finite] + 1e-12 * np.maximum(1, np.abs(mx[finite])))


@given(chart_and_exprs(2), st.floats(0, 3), st.floats(0, 3), seeds)
def test_aver_linear(data, a, b, seed):
    ch, phi, psi = data
    B, _ = base_points(ch, rng_from(seed), 8)
    combo = Sum((ScalarMul(a, phi), ScalarMul(b, psi)))
    lhs = transform_values(combo, ch, B)[0]
    pa = transform_values(phi, ch, B)[0]
    pb = transform_values(psi, ch, B)[0]
    with np.errstate(invalid="ignore"):
        rhs = np.where(a == 0, 0.0, a * pa) + np.where(b == 0, 0.0, b * pb)
    finite = np.isfinite(rhs)
    assert np.array_equal(np.isfinite(lhs), finite)
    assert np.all(np.abs(lhs[finite] - rhs[finite]) <= 1e-10 * (1 + np.abs(rhs[finite])))


@given(chart_and_exprs(2), seeds)
def test_max_rule(data, seed):
    ch, phi, psi = data
    B, _ = base_points(ch, rng_from(seed), 8)
    lhs = transform_values(Max((phi, psi)), ch, B)[1]
    rhs = np.maximum(transform_values(phi, ch, B)[1], transform_values(psi, ch, B)[1])
    assert np.array_equal(lhs, rhs)


@given(chart_and_exprs(), seeds)
def test_sub_mean_value(data, seed):
    ch, phi = data
    rng = rng_from(seed)
    (b,), (u,) = base_points(ch, rng, 1, 0.1, 0.6)
    radius = 0.3 * ch.base_radius * rng.uniform(0.1, 1.0)
    theta = 2 * np.pi * (np.arange(256) + 0.5) / 256
    ring = b[None, :] + radius * np.exp(1j * theta)[:, None] * u[None, :]
    values, near, escaped = ch.local_fibers(np.vstack([b[None, :], ring]))
    if near.any() or escaped.any():
        return
    sv = sheet_values(phi, ch, np.vstack([b[None, :], ring]))
    for red in (np.mean, np.max):
        c = red(sv, axis=1)
        if c[0] == -np.inf:
            continue
        assert c[0] <= np.mean(c[1:]) + 1e-6 * max(1.0, abs(c[0]))
