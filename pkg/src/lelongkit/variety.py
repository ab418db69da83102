"""Hypersurface charts A = {P = 0} near a centre and their ramified covering onto a base polydisk."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from .poly import (
    ROOT_TOL,
    PolyError,
    SparsePoly,
    batch_roots,
    coefficients_in,
    eval_many,
    eval_poly,
    format_poly,
    parse_poly,
    substitute_affine,
    univariate_roots,
)
from ._util import parse_complex, format_complex, rng_for

DISCRIMINANT_GAP = 1e-5


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class HypersurfaceChart:
    """A chart of {P = 0} around ``center`` with fiber coordinate ``fiber_dim``.

    Base points are given in the order of ``base_dims``. Over the base polydisk of
    radius ``base_radius`` exactly ``sheets`` roots of P(base, .) lie within
    ``fiber_radius`` of the centre's fiber coordinate.
    """

    defining: SparsePoly
    base_dims: tuple[int, ...]
    fiber_dim: int
    center: tuple[complex, ...]
    base_radius: float
    fiber_radius: float
    properness_constant: float
    sheets: int
    _fiber_coeffs: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self._fiber_coeffs:
            object.__setattr__(self, "_fiber_coeffs", _fiber_coefficient_polys(self.defining, self.fiber_dim))

    @property
    def ambient_dim(self) -> int:
        return self.defining.num_vars

    @property
    def base_center(self) -> np.ndarray:
        return np.array([self.center[i] for i in self.base_dims], dtype=complex)

    @property
    def fiber_center(self) -> complex:
        return self.center[self.fiber_dim]

    @property
    def variable_names(self) -> tuple[str, ...]:
        return self.defining.names

    def ambient_points(self, base_points: np.ndarray, fiber_values: np.ndarray) -> np.ndarray:
        """Assemble ambient points; ``fiber_values`` has shape (N, m) for (N, k) base points."""
        B = np.atleast_2d(np.asarray(base_points, dtype=complex))
        F = np.asarray(fiber_values, dtype=complex).reshape(B.shape[0], -1)
        out = np.empty((B.shape[0], F.shape[1], self.ambient_dim), dtype=complex)
        for j, d in enumerate(self.base_dims):
            out[:, :, d] = B[:, j : j + 1]
        out[:, :, self.fiber_dim] = F
        return out

    def fiber_coefficients(self, base_points: np.ndarray) -> np.ndarray:
        """Ascending coefficients of P(base, y) in y, shape (N, deg + 1)."""
        B = np.atleast_2d(np.asarray(base_points, dtype=complex))
        amb = self.ambient_points(B, np.zeros((B.shape[0], 1)))[:, 0, :]
        deg = len(self._fiber_coeffs) - 1
        out = np.zeros((B.shape[0], deg + 1), dtype=complex)
        for e, q in enumerate(self._fiber_coeffs):
            if q is not None:
                out[:, e] = eval_many(q, amb)
        return out

    def local_fibers(self, base_points: np.ndarray):
        """Local sheet values over many base points.

        Returns ``(values, near_discriminant, escaped)`` with ``values`` of shape
        (N, sheets), ordered by distance from the fiber centre.
        """
        B = np.atleast_2d(np.asarray(base_points, dtype=complex))
        roots = batch_roots(self.fiber_coefficients(B))
        dist = np.abs(roots - self.fiber_center)
        order = np.argsort(dist, axis=1, kind="stable")
        roots = np.take_along_axis(roots, order, axis=1)
        dist = np.take_along_axis(dist, order, axis=1)
        p = self.sheets
        values = roots[:, :p]
        escaped = ~(dist[:, p - 1] < self.fiber_radius)
        if roots.shape[1] > p:
            escaped |= ~(dist[:, p] > self.fiber_radius)
        near = np.zeros(B.shape[0], dtype=bool)
        if p > 1:
            gaps = np.abs(values[:, :, None] - values[:, None, :])
            gaps[:, np.arange(p), np.arange(p)] = np.inf
            scale = np.max(np.abs(values - self.fiber_center), axis=1)
            near = np.min(gaps, axis=(1, 2)) <= DISCRIMINANT_GAP * scale
        return values, near, escaped


def _fiber_coefficient_polys(P: SparsePoly, fiber_dim: int) -> tuple:
    by_power = coefficients_in(P, fiber_dim)
    deg = max(by_power)
    out = []
    for e in range(deg + 1):
        if e not in by_power:
            out.append(None)
            continue
        terms = {}
        for exp, c in P.terms.items():
            if exp[fiber_dim] == e:
                ex = list(exp)
                ex[fiber_dim] = 0
                terms[tuple(ex)] = c
        out.append(SparsePoly(P.num_vars, terms, P.names))
    return tuple(out)


@dataclass(frozen=True)
class FiberSet:
    base_point: tuple[complex, ...]
    points: tuple[tuple[complex, int], ...]
    residual_bound: float
    near_discriminant: bool

    @property
    def count(self) -> int:
        return sum(m for _, m in self.points)

    def values(self) -> list[complex]:
        return [y for y, m in self.points for _ in range(m)]


def resolve_dims(P: SparsePoly, dims: Sequence) -> tuple[int, ...]:
    out = []
    for d in dims:
        if isinstance(d, str):
            name = {"ξ": "xi"}.get(d, d)
            if name not in P.names:
                raise ChartError(f"unknown base variable {d!r}; variables are {list(P.names)}")
            out.append(P.names.index(name))
        else:
            out.append(int(d))
    if len(set(out)) != len(out) or any(not 0 <= d < P.num_vars for d in out):
        raise ChartError(f"invalid base dimensions {list(dims)}")
    if len(out) != P.num_vars - 1:
        raise ChartError("a hypersurface chart needs exactly num_vars - 1 base variables")
    return tuple(out)


def _sample_polydisk(rng: np.random.Generator, center: np.ndarray, radius: float, n: int) -> np.ndarray:
    k = center.size
    rad = radius * np.sqrt(rng.uniform(size=(n, k)))
    rad[: n // 2] = radius * (1 - 1e-9)
    ang = rng.uniform(0, 2 * np.pi, size=(n, k))
    return center + rad * np.exp(1j * ang)


def _center_multiplicity(P: SparsePoly, fiber_dim: int, center: np.ndarray) -> int:
    coeffs = np.zeros(P.degree_in(fiber_dim) + 1, dtype=complex)
    for e, q in coefficients_in(P, fiber_dim).items():
        pt = [center[i] for i in range(P.num_vars) if i != fiber_dim]
        coeffs[e] = eval_poly(q, pt)
    scale = max(abs(c) for c in P.terms.values())
    if np.all(np.abs(coeffs) <= 1e-13 * scale):
        raise ChartError("projection not proper: P vanishes on the whole fiber line through the centre")
    rs = univariate_roots(coeffs)
    c0 = center[fiber_dim]
    best = min(rs.roots, key=lambda rm: abs(rm[0] - c0), default=None)
    if best is None or abs(best[0] - c0) > 1e-5 * (1 + abs(c0)):
        raise ChartError("centre fiber coordinate is not a root of P over the base centre")
    return best[1]


def make_chart(P: SparsePoly, center: Sequence[complex], base_dims: Sequence, *,
               base_radius: float | None = None, fiber_radius: float | None = None,
               samples: int = 256, seed: int = 0, initial_radius: float = 0.5,
               max_shrinks: int = 30) -> HypersurfaceChart:
    """Build a chart by sampling the covering over shrinking base polydisks.

    With fixed radii the sampling only validates them.
    """
    base = resolve_dims(P, base_dims)
    fiber_dim = next(i for i in range(P.num_vars) if i not in base)
    c = np.asarray([complex(v) for v in center], dtype=complex)
    if c.size != P.num_vars:
        raise ChartError(f"centre has {c.size} coordinates, P has {P.num_vars} variables")
    if not P.depends_on(fiber_dim):
        raise ChartError(f"P does not depend on the fiber variable {P.names[fiber_dim]!r}")
    coef_norm = sum(abs(v) for v in P.terms.values())
    if abs(eval_poly(P, c)) > ROOT_TOL * max(1.0, coef_norm):
        raise ChartError(f"centre is not on the hypersurface: |P(centre)| = {abs(eval_poly(P, c)):.3g}")
    p = _center_multiplicity(P, fiber_dim, c)
    c0 = c[fiber_dim]
    cb = c[list(base)]
    probe = HypersurfaceChart(P, base, fiber_dim, tuple(complex(v) for v in c), 1.0, np.inf, 0.0, p)
    rng = rng_for(seed, "make_chart")
    r_base = initial_radius if base_radius is None else float(base_radius)
    for _ in range(max_shrinks):
        pts = _sample_polydisk(rng, cb, r_base, samples)
        roots = batch_roots(probe.fiber_coefficients(pts))
        dist = np.sort(np.abs(roots - c0), axis=1)
        near_max = float(np.max(dist[:, p - 1]))
        far_min = float(np.min(dist[:, p])) if dist.shape[1] > p else np.inf
        if fiber_radius is not None:
            ok = near_max < fiber_radius < far_min
            r_fib = float(fiber_radius)
        else:
            ok = near_max < 0.25 * far_min
            if np.isfinite(far_min):
                r_fib = float(np.sqrt(max(near_max, 1e-300) * far_min)) if near_max > 0 else 0.5 * far_min
                r_fib = min(r_fib, 0.5 * far_min)
            else:
                r_fib = max(2.0 * near_max, r_base)
            r_fib = max(r_fib, 1.5 * near_max)
        if ok:
            break
        if base_radius is not None:
            raise ChartError("projection not proper over the given polydisk: fibers escape the fiber radius")
        r_base *= 0.5
    else:
        raise ChartError("projection not proper: no base radius found where fibers stay separated")
    norms = np.linalg.norm(pts - cb, axis=1)
    keep = norms > 0
    ratio = np.max(dist[keep, :p] / norms[keep, None]) if np.any(keep) else 0.0
    C = max(1.25 * float(ratio), 1e-6)
    return HypersurfaceChart(P, base, fiber_dim, tuple(complex(v) for v in c), float(r_base), float(r_fib), C, p)


def fiber(chart: HypersurfaceChart, base_point: Sequence[complex]) -> FiberSet:
    """Local fiber over one base point, with multiplicities."""
    b = np.asarray(base_point, dtype=complex).reshape(-1)
    if b.size != len(chart.base_dims):
        raise ChartError("base point has the wrong dimension")
    if np.max(np.abs(b - chart.base_center), initial=0.0) > chart.base_radius * (1 + 1e-12):
        raise ChartError("base point outside the base polydisk")
    coeffs = chart.fiber_coefficients(b[None, :])[0]
    rs = univariate_roots(coeffs)
    local = [(r, m) for r, m in rs.roots if abs(r - chart.fiber_center) < chart.fiber_radius]
    vals = np.array([r for r, _ in local], dtype=complex)
    near = any(m > 1 for _, m in local)
    if vals.size > 1:
        gaps = np.abs(vals[:, None] - vals[None, :]) + np.diag(np.full(vals.size, np.inf))
        near = near or np.min(gaps) <= DISCRIMINANT_GAP * np.max(np.abs(vals - chart.fiber_center))
    amb = chart.ambient_points(b[None, :], vals[None, :] if vals.size else np.zeros((1, 0)))[0]
    residual = float(np.max(np.abs(eval_many(chart.defining, amb)), initial=0.0)) if vals.size else 0.0
    return FiberSet(tuple(complex(v) for v in b), tuple(local), residual, bool(near))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(n, random_state=rng) if n > 1 else np.array([[np.exp(2j * np.pi * rng.uniform())]])


def reframe(chart: HypersurfaceChart, unitary: np.ndarray, **chart_kw) -> HypersurfaceChart:
    """Chart of the same germ in coordinates x = centre + U x~, centred at 0."""
    P = chart.defining
    Q = substitute_affine(P, unitary, chart.center, names=P.names)
    return make_chart(Q, [0.0] * P.num_vars, chart.base_dims, **chart_kw)


def multiplicity(chart: HypersurfaceChart, randomize: bool = False, seed: int = 0,
                 trials: int = 5, budget: int = 20) -> int:
    """Sheet count of the chart, or of generic projections when ``randomize`` is set.

    In random unitary frames the smallest sheet count is returned once it has
    been seen ``trials`` times.
    """
    if not randomize:
        return chart.sheets
    counts: list[int] = []
    for i in range(budget):
        U = random_unitary(chart.ambient_dim, rng_for(seed, "multiplicity", i))
        try:
            counts.append(reframe(chart, U, seed=seed).sheets)
        except ChartError:
            continue
        best = min(counts)
        if counts.count(best) >= trials:
            return best
    raise ChartError(f"sheet count did not stabilise within {budget} random frames: {counts}")


# ---------------------------------------------------------------------------
# problem-file form

def chart_to_dict(chart: HypersurfaceChart) -> dict:
    names = chart.variable_names
    return {
        "polynomial": format_poly(chart.defining),
        "variables": list(names),
        "center": [format_complex(v) for v in chart.center],
        "base": [names[d] for d in chart.base_dims],
        "radii": [chart.base_radius, chart.fiber_radius],
        "sheets": chart.sheets,
        "properness_constant": chart.properness_constant,
    }


def chart_from_dict(d: dict, seed: int = 0) -> HypersurfaceChart:
    """Build a chart from the ``variety`` table of a problem file."""
    if "polynomial" not in d:
        raise ChartError("variety needs a 'polynomial' entry")
    P = parse_poly(d["polynomial"], d.get("variables"))
    center = d.get("center", [0] * P.num_vars)
    center = [parse_complex(v) for v in center]
    base = d.get("base")
    if base is None:
        raise ChartError("variety needs a 'base' list of variable names")
    radii = d.get("radii")
    kw = {}
    if radii is not None:
        kw = {"base_radius": float(radii[0]), "fiber_radius": float(radii[1])}
    return make_chart(P, center, base, seed=seed, **kw)
