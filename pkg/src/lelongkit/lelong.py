"""Lelong-number estimators on hypersurface charts.

All estimators read the Lelong number as the slope of a radial statistic
(sphere max, circle max or circle mean) against log r over the small-radius
tail of a geometric radii schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ._util import pmap, rng_for
from .poly import SparsePoly, eval_many
from .pshfun import Const, LineRestriction, LogAbs, PshExpr, ScalarMul, sheet_values
from .variety import HypersurfaceChart, multiplicity

INF = math.inf


class LelongError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadiiSchedule:
    r_max: float = 0.1
    ratio: float = 0.7
    count: int = 14

    def __post_init__(self):
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if self.count < 4:
            raise ValueError("a schedule needs at least 4 radii")

    @property
    def radii(self) -> np.ndarray:
        return self.r_max * self.ratio ** np.arange(self.count)

    @property
    def tail_start(self) -> int:
        return self.count - math.ceil(self.count / 2)


@dataclass(frozen=True)
class LelongEstimate:
    value: float
    std_error: float
    samples: tuple[tuple[float, float], ...]
    method: str
    lines_used: int | None = None
    flags: tuple[str, ...] = ()
    details: dict = field(default_factory=dict, compare=False)

    def scaled(self, c: float) -> "LelongEstimate":
        if c == 0:
            return replace(self, value=0.0, std_error=0.0,
                           samples=tuple((x, 0.0) for x, _ in self.samples),
                           details={**self.details, "scale": 0.0})
        return replace(self, value=c * self.value, std_error=c * self.std_error,
                       samples=tuple((x, c * y) for x, y in self.samples),
                       details={**self.details, "scale": c})

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method,
            "samples": [list(s) for s in self.samples],
            "flags": list(self.flags),
        }
        if self.lines_used is not None:
            out["lines_used"] = self.lines_used
        for k, v in self.details.items():
            out[k] = v.to_dict() if isinstance(v, LelongEstimate) else v
        return out

    def csv_rows(self) -> list[tuple[float, float]]:
        return list(self.samples)


POWER_FIT_GAIN = 1e-2


def _least_squares(x: np.ndarray, y: np.ndarray, exponents: Sequence[float] = ()) -> tuple[float, float, float]:
    """Fit y ~ a + nu*log r + sum_e b_e r^e; returns (nu, std error of nu, residual rms)."""
    xc = x - x.mean()
    r = np.exp(x) / np.exp(x).max()
    X = np.stack([np.ones_like(x), xc] + [r ** e for e in exponents], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rms = math.sqrt(float(resid @ resid) / x.size)
    dof = x.size - X.shape[1]
    if dof <= 0:
        return float(coef[1]), 0.0, rms
    cov = np.linalg.pinv(X.T @ X) * float(resid @ resid) / dof
    return float(coef[1]), math.sqrt(max(float(cov[1, 1]), 0.0)), rms


def _tail_regression(x: np.ndarray, y: np.ndarray, powers: int = 2, sheets: int = 1) -> tuple[float, float]:
    """Slope of y against log r over the tail, with its standard error.

    A smooth, non-constant part of the function adds b1*r + b2*r^2 + ... to the
    statistic, which a straight line reads as extra slope. When ``powers`` > 0
    and the tail is long enough, r^j columns are added; that fit is kept only
    if it explains the curvature left by the straight line (residual rms at
    most ``POWER_FIT_GAIN`` of it). A branch point inside the tail leaves a
    kink that the power fit cannot model; the straight line is used then, and
    by convexity in log r it can only overestimate.

    On a p-sheeted chart the statistic can also carry r^(j/p) terms, which no
    fit over a short tail separates reliably from the slope. The error
    therefore includes the largest disagreement between the straight line, the
    r^j fit, the same fit one order further, and an r^(j/p) fit.
    """
    slope, err, rms = _least_squares(x, y)
    if powers <= 0 or x.size < 3 + powers:
        return slope, err
    p_slope, p_err, p_rms = _least_squares(x, y, range(1, powers + 1))
    alternatives = [slope, p_slope]
    if x.size >= 5 + powers:
        # one order further estimates the truncation error of the r^j fit
        alternatives.append(_least_squares(x, y, range(1, powers + 2))[0])
    if sheets > 1:
        alternatives.append(_least_squares(x, y, [j / sheets for j in range(1, powers + 1)])[0])
    floor = 1e-12 * (1.0 + float(np.max(np.abs(y))))
    if p_rms <= POWER_FIT_GAIN * rms + floor:
        slope, err = p_slope, p_err
    model = max(abs(a - slope) for a in alternatives)
    return slope, math.hypot(err, model)


def fit_slope(log_r: Sequence[float], stats: Sequence[float], schedule: RadiiSchedule,
              method: str, powers: int = 2, sheets: int = 1, **extra) -> LelongEstimate:
    """Least-squares slope of ``stats`` against ``log_r`` over the schedule tail.

    ``powers`` sets how many r^j nuisance columns join the fit (see
    :func:`_tail_regression`). ``None`` marks a dropped radius. A statistic that is -inf at every radius
    means the function is identically -inf there; the value is then +inf.
    """
    samples = tuple((float(x), float(y)) for x, y in zip(log_r, stats) if y is not None)
    flags = list(extra.pop("flags", ()))
    present = [y for y in stats if y is not None]
    if present and all(y == -INF for y in present):
        return LelongEstimate(INF, 0.0, samples, method, flags=tuple(flags + ["identically-minus-infinity"]), **extra)
    tail = [(x, y) for i, (x, y) in enumerate(zip(log_r, stats))
            if i >= schedule.tail_start and y is not None and np.isfinite(y)]
    if len(tail) < 3:
        raise LelongError(f"too few valid samples ({len(tail)}) in the schedule tail")
    x = np.array([t[0] for t in tail])
    y = np.array([t[1] for t in tail])
    slope, stderr = _tail_regression(x, y, powers, sheets)
    if slope < 0:
        if slope < -1e-6:
            flags.append("negative-slope-clipped")
        slope = 0.0
    return LelongEstimate(slope, stderr, samples, method, flags=tuple(flags), **extra)


def _peel(phi: PshExpr):
    """Split a top-level nonnegative scalar: estimates are positively homogeneous."""
    if isinstance(phi, ScalarMul):
        return phi.c, phi.child
    return None, phi


# ---------------------------------------------------------------------------
# one-variable estimators

def _evaluator(psi) -> Callable:
    if hasattr(psi, "evaluate"):
        return psi.evaluate

    def ev(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.asarray(psi(t), dtype=float)
        return v, np.zeros(v.shape, dtype=bool)

    return ev


def circle_statistic(psi, radius: float, nodes: int, reducer: str, rng: np.random.Generator,
                     center: complex = 0j, attempts: int = 5):
    """Mean or max of ``psi`` on the circle |t - center| = radius.

    Nodes that hit -inf or the discriminant are jittered up to ``attempts``
    times. Returns ``None`` when the circle has to be dropped, or -inf when
    every node stays at -inf.
    """
    ev = _evaluator(psi)
    width = 2 * np.pi / nodes
    theta = width * (np.arange(nodes) + 0.5)
    vals, flagged = ev(center + radius * np.exp(1j * theta))
    vals = np.array(vals, dtype=float)
    bad = flagged | (vals == -INF)
    for _ in range(attempts):
        if not bad.any():
            break
        idx = np.nonzero(bad)[0]
        th = theta[idx] + rng.uniform(-0.25, 0.25, idx.size) * width
        v2, f2 = ev(center + radius * np.exp(1j * th))
        vals[idx] = v2
        bad[idx] = f2 | (np.asarray(v2) == -INF)
    if bad.any():
        if np.all(vals == -INF):
            return -INF
        return None
    return float(np.mean(vals)) if reducer == "mean" else float(np.max(vals))


def _lelong_circle_1d(psi, schedule: RadiiSchedule, nodes: int, seed: int, reducer: str,
                      method: str, sheets: int = 1) -> LelongEstimate:
    radii = schedule.radii
    stats = []
    for j, r in enumerate(radii):
        stats.append(circle_statistic(psi, r, nodes, reducer, rng_for(seed, method, j)))
    return fit_slope(np.log(radii), stats, schedule, method, sheets=sheets)


def lelong_circle_mean_1d(psi, schedule: RadiiSchedule | None = None, nodes: int = 64,
                          seed: int = 0) -> LelongEstimate:
    """Slope of circle means of a one-variable subharmonic function against log r."""
    return _lelong_circle_1d(psi, schedule or RadiiSchedule(), nodes, seed, "mean", "circle-mean")


def lelong_circle_max_1d(psi, schedule: RadiiSchedule | None = None, nodes: int = 64,
                         seed: int = 0) -> LelongEstimate:
    return _lelong_circle_1d(psi, schedule or RadiiSchedule(), nodes, seed, "max", "circle-max")


# ---------------------------------------------------------------------------
# estimators on charts

def random_direction(k: int, rng: np.random.Generator) -> np.ndarray:
    """Unitarily invariant random unit vector in C^k."""
    v = rng.normal(size=k) + 1j * rng.normal(size=k)
    return v / np.linalg.norm(v)


def _check_schedule(chart: HypersurfaceChart, schedule: RadiiSchedule):
    if schedule.r_max > chart.base_radius:
        raise LelongError(f"schedule r_max={schedule.r_max} exceeds the chart base radius {chart.base_radius:.4g}")


def lelong_generic_line(phi: PshExpr, chart: HypersurfaceChart, kind: str = "max", num_lines: int = 12,
                        seed: int = 0, schedule: RadiiSchedule | None = None, nodes: int = 64) -> LelongEstimate:
    """Lelong number of the aver/max transform from restrictions to random lines.

    Restricting to a line can only raise the Lelong number, so the minimum over
    lines is reported. The standard error combines the spread across lines with
    the fit error of the chosen line.
    """
    if kind not in ("aver", "max"):
        raise ValueError("kind must be 'aver' or 'max'")
    if num_lines < 3:
        raise ValueError("need at least 3 lines")
    schedule = schedule or RadiiSchedule()
    c, core = _peel(phi)
    if c is not None:
        est = lelong_generic_line(core, chart, kind, num_lines, seed, schedule, nodes)
        return est.scaled(c)
    _check_schedule(chart, schedule)
    k = len(chart.base_dims)
    reducer = "mean" if kind == "aver" else "max"
    method_1d = "circle-mean" if kind == "aver" else "circle-max"

    def one(i):
        u = random_direction(k, rng_for(seed, "line", i))
        restriction = LineRestriction(phi, chart, u, kind)
        try:
            est = _lelong_circle_1d(restriction, schedule, nodes, seed * 1_000_003 + i, reducer, method_1d,
                                    chart.sheets)
        except LelongError:
            return None
        return u, est

    results = [r for r in pmap(one, range(num_lines)) if r is not None]
    if len(results) < 3:
        raise LelongError(f"only {len(results)} of {num_lines} lines survived discriminant filtering")
    values = np.array([e.value for _, e in results])
    best = int(np.argmin(values))
    finite = values[np.isfinite(values)]
    spread = float(np.std(finite, ddof=1)) if finite.size > 1 else 0.0
    if not np.isfinite(values[best]):
        spread = 0.0
    u, est = results[best]
    flags = list(est.flags)
    if np.isfinite(values[best]):
        spread = math.hypot(spread, est.std_error)
    return LelongEstimate(float(values[best]), spread, est.samples, "generic-line", len(results), tuple(flags),
                          {"transform": kind, "line_values": [float(v) for v in values],
                           "direction": [[float(z.real), float(z.imag)] for z in u]})


def lelong_sphere_max(phi: PshExpr, chart: HypersurfaceChart, schedule: RadiiSchedule | None = None,
                      seed: int = 0, density: int = 64, band: float = 0.02, max_doublings: int = 4) -> LelongEstimate:
    """Slope of max{phi(x) : x in A, ||x - centre|| = r} against log r.

    Variety points come from fibers over base spheres whose radii are spread
    over [r/(1+C), r], using the chart bound ||x'|| <= ||x|| <= (1+C)||x'||;
    points whose ambient norm falls within ``band`` of r are kept.
    """
    schedule = schedule or RadiiSchedule()
    c, core = _peel(phi)
    if c is not None:
        return lelong_sphere_max(core, chart, schedule, seed, density, band, max_doublings).scaled(c)
    _check_schedule(chart, schedule)
    k = len(chart.base_dims)
    C = chart.properness_constant
    shells = max(1, math.ceil(math.log(1 + C) / math.log((1 + band) / (1 - band))))
    centre = np.asarray(chart.center)
    cb = chart.base_center
    stats: list[float | None] = []
    for j, r in enumerate(schedule.radii):
        rng = rng_for(seed, "sphere-max", j)
        lo = math.log(r * (1 - band) / (1 + C))
        hi = math.log(min(r * (1 + band), chart.base_radius))
        best = None
        n = density * k * shells
        for level in range(max_doublings + 1):
            s = np.exp(rng.uniform(lo, hi, n))
            dirs = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            B = cb + s[:, None] * dirs
            values, near, escaped = chart.local_fibers(B)
            amb = chart.ambient_points(B, values)
            norms = np.linalg.norm(amb - centre, axis=2)
            keep = (np.abs(norms / r - 1) <= band) & ~(near | escaped)[:, None]
            if not keep.any():
                new = None
            else:
                pts = amb[keep]
                new = float(np.max(np.atleast_1d(_eval_points(core, pts))))
            prev = best
            if new is not None:
                best = new if best is None else max(best, new)
            if prev is not None and best is not None and (best - prev < 1e-3 or best == -INF):
                break
            n *= 2
        stats.append(best)
    # a sampled maximum is noisy; extra columns would amplify the noise
    return fit_slope(np.log(schedule.radii), stats, schedule, "sphere-max", powers=0)


def _eval_points(phi: PshExpr, pts: np.ndarray):
    from .pshfun import eval_psh

    return eval_psh(phi, pts)


def lelong_number(phi: PshExpr, chart: HypersurfaceChart, schedule: RadiiSchedule | None = None,
                  num_lines: int = 12, seed: int = 0) -> LelongEstimate:
    """Lelong number at the chart centre via the max transform on generic lines.

    The ambient sphere-max estimate is attached as ``details['cross_check']``;
    the flag ``estimator-disagreement`` is set when the two differ by more than
    3 combined standard errors plus 0.05.
    """
    schedule = schedule or RadiiSchedule()
    primary = lelong_generic_line(phi, chart, "max", num_lines, seed, schedule)
    cross = lelong_sphere_max(phi, chart, schedule, seed)
    flags = list(primary.flags)
    if primary.value != cross.value:
        tol = 3 * math.hypot(primary.std_error, cross.std_error) + 0.05
        if not (math.isfinite(primary.value) and math.isfinite(cross.value)) or \
                abs(primary.value - cross.value) > tol:
            flags.append("estimator-disagreement")
    return replace(primary, flags=tuple(flags), details={**primary.details, "cross_check": cross})


def lelong_min_over_branches(phi: PshExpr, charts: Sequence[HypersurfaceChart],
                             schedule: RadiiSchedule | None = None, num_lines: int = 12,
                             seed: int = 0) -> LelongEstimate:
    """Minimum of the per-branch Lelong numbers of a germ split into irreducible branches."""
    if not charts:
        raise ValueError("need at least one branch chart")
    ests = [lelong_number(phi, ch, schedule, num_lines, seed) for ch in charts]
    values = [e.value for e in ests]
    best = int(np.argmin(values))
    chosen = ests[best]
    return replace(chosen, details={**chosen.details, "branch_values": values, "branch": best})


@dataclass(frozen=True)
class VanishingMultiplicity:
    value: float
    exact: Fraction | None
    estimate: LelongEstimate

    @property
    def snapped(self) -> bool:
        return self.exact is not None

    def to_dict(self) -> dict:
        return {
            "value": float(self.exact) if self.exact is not None else self.value,
            "raw": self.value,
            "exact": str(self.exact) if self.exact is not None else None,
            "snapped": self.snapped,
            "estimate": self.estimate.to_dict(),
        }


def snap_rational(v: float, max_den: int, tol: float = 0.05) -> Fraction | None:
    if not math.isfinite(v):
        return None
    best = None
    for q in range(1, max_den + 1):
        cand = Fraction(round(v * q), q)
        if best is None or abs(v - cand) < abs(v - best) - 1e-12:
            best = cand
    return best if abs(v - best) <= tol else None


def vanishing_mult(f: SparsePoly, chart: HypersurfaceChart, schedule: RadiiSchedule | None = None,
                   num_lines: int = 12, seed: int = 0) -> VanishingMultiplicity:
    """Vanishing order of f at the centre, snapped to (1/p)Z when within 0.05."""
    schedule = schedule or RadiiSchedule()
    rng = rng_for(seed, "vanishing-check")
    k = len(chart.base_dims)
    dirs = rng.normal(size=(32, k)) + 1j * rng.normal(size=(32, k))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    B = chart.base_center + schedule.r_max * rng.uniform(0.2, 1.0, (32, 1)) * dirs
    values, _, _ = chart.local_fibers(B)
    amb = chart.ambient_points(B, values)
    fv = np.abs(eval_many(f, amb.reshape(-1, chart.ambient_dim))).reshape(values.shape)
    scale = max(1.0, sum(abs(c) for c in f.terms.values()))
    if f.is_zero() or np.all(np.min(fv, axis=1) <= 1e-13 * scale):
        raise LelongError("f vanishes identically on a branch of the chart")
    est = lelong_number(LogAbs(f), chart, schedule, num_lines, seed)
    return VanishingMultiplicity(est.value, snap_rational(est.value, chart.sheets), est)


@dataclass(frozen=True)
class ProjectiveMass:
    value: float
    multiplicity: int
    aver_estimate: LelongEstimate

    def to_dict(self) -> dict:
        return {"value": self.value, "multiplicity": self.multiplicity,
                "nu_aver": self.aver_estimate.to_dict()}


def projective_mass(phi: PshExpr, chart: HypersurfaceChart, schedule: RadiiSchedule | None = None,
                    num_lines: int = 12, seed: int = 0) -> ProjectiveMass:
    """mult(A, centre) times the Lelong number of the aver transform."""
    mult = multiplicity(chart, randomize=True, seed=seed)
    nu = lelong_generic_line(phi, chart, "aver", num_lines, seed, schedule)
    value = 0.0 if nu.value == 0 else mult * nu.value
    return ProjectiveMass(value, mult, nu)


@dataclass(frozen=True)
class CalculusReport:
    scaling: float
    additivity: float
    max_min: float
    values: dict
    irreducibility: str

    def to_dict(self) -> dict:
        return {"residuals": {"scaling": self.scaling, "additivity": self.additivity, "max_min": self.max_min},
                "values": self.values, "irreducibility": self.irreducibility}


def check_calculus(phi: PshExpr, psi: PshExpr, chart: HypersurfaceChart, a: float = 2.0,
                   schedule: RadiiSchedule | None = None, num_lines: int = 12, seed: int = 0,
                   irreducibility_lines: int = 20) -> CalculusReport:
    """Residuals of the scaling, additivity and max/min rules for Lelong numbers."""
    from .monodromy import strong_local_irreducibility
    from .pshfun import Max, Sum

    if a < 0:
        raise ValueError("a must be nonnegative")
    verdict = strong_local_irreducibility(chart, irreducibility_lines, seed).verdict

    def nu(e):
        return lelong_number(e, chart, schedule, num_lines, seed).value

    n_phi, n_psi = nu(phi), nu(psi)
    n_scaled = nu(ScalarMul(a, phi))
    n_sum = nu(Sum((phi, psi)))
    n_max = nu(Max((phi, psi)))
    values = {"phi": n_phi, "psi": n_psi, "scaled": n_scaled, "sum": n_sum, "max": n_max, "a": a}
    a_nu = 0.0 if a == 0 else a * n_phi
    return CalculusReport(abs(n_scaled - a_nu), abs(n_sum - n_phi - n_psi), abs(n_max - min(n_phi, n_psi)),
                          values, verdict)
