"""Monodromy of the covering restricted to lines through the centre, and the strong local irreducibility sampler."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import pmap, rng_for
from .lelong import random_direction
from .poly import CollisionError, DegreeDropError, batch_roots, specialize, trim_leading, _companion_roots, \
    loop_permutation, track_roots
from .variety import HypersurfaceChart

IRREDUCIBLE_THRESHOLD = 0.95
REDUCIBLE_THRESHOLD = 0.05


class DiscriminantTooClose(RuntimeError):
    """The line meets the discriminant too close to the centre for a usable loop."""


@dataclass(frozen=True)
class MonodromyReport:
    direction: tuple[complex, ...]
    radius: float
    permutation: tuple[int, ...]
    orbits: tuple[tuple[int, ...], ...]
    transitive: bool
    min_gap: float = float("inf")
    steps: int = 0
    refinements: int = 0
    requested_radius: float = 0.0
    resamples: int = 0

    def to_dict(self) -> dict:
        return {
            "direction": [[float(z.real), float(z.imag)] for z in self.direction],
            "radius": self.radius,
            "permutation": list(self.permutation),
            "orbits": [list(o) for o in self.orbits],
            "transitive": self.transitive,
            "min_gap": self.min_gap,
            "steps": self.steps,
            "refinements": self.refinements,
            "resamples": self.resamples,
        }


def orbits_of(perm) -> tuple[tuple[int, ...], ...]:
    seen = set()
    out = []
    for i in range(len(perm)):
        if i in seen:
            continue
        cyc = []
        j = i
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = perm[j]
        out.append(tuple(sorted(cyc)))
    return tuple(sorted(out))


def line_coefficients(chart: HypersurfaceChart, direction) -> np.ndarray:
    """Matrix M with P(centre' + t u, y) = sum_{e, j} M[e, j] y^e t^j."""
    u = np.asarray(direction, dtype=complex)
    assign = {d: (chart.center[d], u[i]) for i, d in enumerate(chart.base_dims)}
    Q = specialize(chart.defining, assign)
    M = np.zeros((Q.degree_in(1) + 1, max(Q.degree_in(0), 0) + 1), dtype=complex)
    for (jt, ey), c in Q.terms.items():
        M[ey, jt] += c
    return M


def _coeffs_at(M: np.ndarray, t: np.ndarray) -> np.ndarray:
    powers = t[:, None] ** np.arange(M.shape[1])[None, :]
    return powers @ M.T


def discriminant_radius(M: np.ndarray, radius: float) -> float:
    """Smallest |t| != 0 where two roots in y of sum M[e, j] y^e t^j collide.

    The discriminant is sampled on |t| = radius as lc^(2d-2) prod (y_i - y_j)^2
    and interpolated by FFT; returns inf when no such point lies inside.
    """
    d = M.shape[0] - 1
    if d < 2:
        return np.inf
    deg = (2 * d - 2) * (M.shape[1] - 1)
    n = 1 << int(np.ceil(np.log2(max(2 * (deg + 1), 8))))
    t = radius * np.exp(2j * np.pi * np.arange(n) / n)
    C = _coeffs_at(M, t)
    roots = batch_roots(C)
    if not np.all(np.isfinite(roots)):
        return 0.0
    diffs = roots[:, :, None] - roots[:, None, :]
    iu = np.triu_indices(d, 1)
    disc = C[:, -1] ** (2 * d - 2) * np.prod(diffs[:, iu[0], iu[1]] ** 2, axis=1)
    scaled = np.fft.fft(disc) / n
    scaled = scaled[: deg + 1]
    big = np.max(np.abs(scaled))
    if big == 0:
        return 0.0
    low = 0
    while low < scaled.size and abs(scaled[low]) <= 1e-9 * big:
        low += 1
    core = scaled[low:]
    core, _ = trim_leading(core, 1e-9)
    if core.size < 2:
        return np.inf
    with np.errstate(all="ignore"):
        finite = bool(np.all(np.isfinite(core[:-1] / core[-1])))
    if not finite:
        # coefficients underflowed: the discriminant vanishes along this line
        return 0.0
    zs = _companion_roots(core) * radius
    inside = np.abs(zs)
    return float(np.min(inside)) if inside.size else np.inf


def monodromy_on_line(chart: HypersurfaceChart, direction, radius: float | None = None, steps: int = 256,
                      winding: int = 1, min_fraction: float = 1e-3) -> MonodromyReport:
    """Permutation of the local sheets after continuing around t = rho e^{i theta} on the line.

    ``winding`` = -1 runs the loop backwards, 2 runs it twice. The radius is
    shrunk below half the distance to the nearest other discriminant point of
    the line; :class:`DiscriminantTooClose` is raised when that leaves less than
    ``min_fraction`` of the requested radius.
    """
    u = np.asarray(direction, dtype=complex).reshape(-1)
    u = u / np.linalg.norm(u)
    requested = min(0.25 * chart.base_radius, 0.05) if radius is None else float(radius)
    p = chart.sheets
    if p == 1:
        return MonodromyReport(tuple(complex(z) for z in u), requested, (0,), ((0,),), True,
                               requested_radius=requested)
    M = line_coefficients(chart, u)
    rho = requested
    dr = discriminant_radius(M, requested)
    if dr < requested * 2:
        rho = 0.5 * dr
    if rho < min_fraction * requested:
        raise DiscriminantTooClose(f"discriminant point at |t|={dr:.3g} on this line")

    def family(s):
        t = rho * np.exp(2j * np.pi * winding * s)
        return _coeffs_at(M, np.array([t]))[0]

    c0 = family(0.0)
    trimmed, _ = trim_leading(c0)
    allr = _companion_roots(trimmed)
    order = np.argsort(np.abs(allr - chart.fiber_center), kind="stable")
    local = allr[order[:p]]
    if np.max(np.abs(local - chart.fiber_center)) >= chart.fiber_radius:
        raise DiscriminantTooClose("local sheets left the fiber polydisk on the loop")
    res = track_roots(family, start_roots=local, steps=steps)
    perm = loop_permutation(res)
    orbits = orbits_of(perm)
    return MonodromyReport(tuple(complex(z) for z in u), float(rho), perm, orbits, len(orbits) == 1,
                           res.min_gap, res.steps, res.refinements, requested)


@dataclass(frozen=True)
class IrreducibilityVerdict:
    num_lines: int
    num_irreducible: int
    fraction: float
    verdict: str
    seed: int
    resamples: int = 0
    failed_lines: int = 0
    reports: tuple[MonodromyReport, ...] = field(default=(), repr=False)

    def to_dict(self, include_lines: bool = True) -> dict:
        out = {
            "num_lines": self.num_lines,
            "num_irreducible": self.num_irreducible,
            "fraction": self.fraction,
            "verdict": self.verdict,
            "seed": self.seed,
            "resamples": self.resamples,
            "failed_lines": self.failed_lines,
        }
        if include_lines:
            out["lines"] = [r.to_dict() for r in self.reports]
        return out


def verdict_for(fraction: float) -> str:
    if fraction >= IRREDUCIBLE_THRESHOLD:
        return "strong-locally-irreducible"
    if fraction <= REDUCIBLE_THRESHOLD:
        return "not"
    return "inconclusive"


def strong_local_irreducibility(chart: HypersurfaceChart, num_lines: int = 50, seed: int = 0,
                                radius: float | None = None, steps: int = 256,
                                max_resamples: int = 10) -> IrreducibilityVerdict:
    """Fraction of random lines through the centre whose preimage germ is irreducible."""
    if num_lines < 20:
        raise ValueError("need at least 20 lines")
    k = len(chart.base_dims)

    def one(i):
        for attempt in range(max_resamples + 1):
            u = random_direction(k, rng_for(seed, "monodromy-line", i, attempt))
            try:
                rep = monodromy_on_line(chart, u, radius, steps)
            except (DiscriminantTooClose, CollisionError, DegreeDropError):
                continue
            return MonodromyReport(**{**rep.__dict__, "resamples": attempt})
        return None

    reports = pmap(one, range(num_lines))
    ok = [r for r in reports if r is not None]
    failed = num_lines - len(ok)
    if failed > num_lines / 2:
        raise RuntimeError(f"tracking failed on {failed} of {num_lines} lines")
    good = sum(r.transitive for r in ok)
    frac = good / len(ok)
    return IrreducibilityVerdict(len(ok), good, frac, verdict_for(frac), seed,
                                 sum(r.resamples for r in ok), failed, tuple(ok))
