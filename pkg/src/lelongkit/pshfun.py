"""Plurisubharmonic expressions, extended-real evaluation and the fiber transforms aver / max."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .poly import PolyParseError, SparsePoly, eval_many, format_poly, parse_poly
from .variety import HypersurfaceChart, fiber

NEG_INF = -np.inf


class PshExpr:
    """Base class of expression nodes. Nodes are immutable."""

    def __call__(self, points):
        return eval_psh(self, points)

    def __add__(self, other: "PshExpr") -> "PshExpr":
        return Sum((self, other))

    def __rmul__(self, c: float) -> "PshExpr":
        return ScalarMul(float(c), self)

    def polys(self) -> list[SparsePoly]:
        return []


@dataclass(frozen=True)
class LogAbs(PshExpr):
    h: SparsePoly

    def polys(self):
        return [self.h]

    def __str__(self):
        return f"log|{format_poly(self.h)}|"


@dataclass(frozen=True)
class LogSumAbsPow(PshExpr):
    """log(sum_i |h_i|^a_i) with every a_i > 0."""

    terms: tuple[tuple[SparsePoly, float], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("LogSumAbsPow needs at least one term")
        if any(a <= 0 for _, a in self.terms):
            raise ValueError("powers in LogSumAbsPow must be positive")

    def polys(self):
        return [h for h, _ in self.terms]

    def __str__(self):
        parts = [f"|{format_poly(h)}|" + ("" if a == 1 else f"^{a!r}") for h, a in self.terms]
        return "log(" + " + ".join(parts) + ")"


@dataclass(frozen=True)
class Sum(PshExpr):
    children: tuple[PshExpr, ...]

    def polys(self):
        return [h for c in self.children for h in c.polys()]

    def __str__(self):
        return " + ".join(_wrap(c) for c in self.children)


@dataclass(frozen=True)
class ScalarMul(PshExpr):
    c: float
    child: PshExpr

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("scalar multipliers must be nonnegative")

    def polys(self):
        return self.child.polys()

    def __str__(self):
        return f"{self.c!r}*{_wrap(self.child)}"


@dataclass(frozen=True)
class Max(PshExpr):
    children: tuple[PshExpr, ...]

    def polys(self):
        return [h for c in self.children for h in c.polys()]

    def __str__(self):
        return "max(" + ", ".join(str(c) for c in self.children) + ")"


@dataclass(frozen=True)
class Const(PshExpr):
    value: float

    def __str__(self):
        return repr(float(self.value))


def _wrap(e: PshExpr) -> str:
    return f"({e})" if isinstance(e, Sum) else str(e)


def log_norm(num_vars: int, names=None) -> PshExpr:
    """log ||z|| = 1/2 log(sum |z_i|^2)."""
    terms = tuple((SparsePoly.variable(num_vars, i, names), 2.0) for i in range(num_vars))
    return ScalarMul(0.5, LogSumAbsPow(terms))


def eval_psh(phi: PshExpr, points) -> np.ndarray | float:
    """Evaluate at one point (1-D input) or many points (..., n); values in [-inf, inf)."""
    pts = np.asarray(points, dtype=complex)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _eval(phi, pts)
    out = np.broadcast_to(out, pts.shape[:-1]).astype(float)
    return float(out[0]) if single else out


def _eval(phi: PshExpr, pts: np.ndarray) -> np.ndarray:
    if isinstance(phi, LogAbs):
        return np.log(np.abs(eval_many(phi.h, pts)))
    if isinstance(phi, LogSumAbsPow):
        acc = np.zeros(pts.shape[:-1])
        for h, a in phi.terms:
            acc = acc + np.abs(eval_many(h, pts)) ** a
        return np.log(acc)
    if isinstance(phi, Sum):
        acc = np.zeros(pts.shape[:-1])
        for c in phi.children:
            acc = acc + _eval(c, pts)
        return acc
    if isinstance(phi, ScalarMul):
        if phi.c == 0:
            # 0 * (-inf) = 0 by convention
            return np.zeros(pts.shape[:-1])
        return phi.c * _eval(phi.child, pts)
    if isinstance(phi, Max):
        acc = np.full(pts.shape[:-1], NEG_INF)
        for c in phi.children:
            acc = np.maximum(acc, _eval(c, pts))
        return acc
    if isinstance(phi, Const):
        return np.full(pts.shape[:-1], float(phi.value))
    raise TypeError(f"unknown expression node {type(phi).__name__}")


# ---------------------------------------------------------------------------
# fiber transforms

@dataclass(frozen=True)
class FiberValue:
    base_point: tuple[complex, ...]
    values: tuple[float, ...]
    aver: float
    max: float
    near_discriminant: bool = False


def fiber_transform(phi: PshExpr, chart: HypersurfaceChart, base_point: Sequence[complex]) -> FiberValue:
    """aver and max of phi over the local fiber above one base point, multiplicity-weighted."""
    fs = fiber(chart, base_point)
    vals = np.array(fs.values(), dtype=complex)
    amb = chart.ambient_points(np.asarray(base_point, dtype=complex)[None, :], vals[None, :])[0]
    phis = np.atleast_1d(eval_psh(phi, amb)) if vals.size else np.zeros(0)
    aver = _aver(phis[None, :])[0] if phis.size else NEG_INF
    mx = float(np.max(phis)) if phis.size else NEG_INF
    return FiberValue(fs.base_point, tuple(float(v) for v in phis), float(aver), mx, fs.near_discriminant)


def _aver(vals: np.ndarray) -> np.ndarray:
    out = np.mean(vals, axis=-1)
    return np.where(np.any(vals == NEG_INF, axis=-1), NEG_INF, out)


def transform_values(phi: PshExpr, chart: HypersurfaceChart, base_points: np.ndarray):
    """Vectorized transforms: returns (aver, max, near_discriminant, escaped) arrays."""
    B = np.atleast_2d(np.asarray(base_points, dtype=complex))
    values, near, escaped = chart.local_fibers(B)
    amb = chart.ambient_points(B, values)
    phis = eval_psh(phi, amb.reshape(-1, chart.ambient_dim)).reshape(values.shape)
    return _aver(phis), np.max(phis, axis=1), near, escaped


def sheet_values(phi: PshExpr, chart: HypersurfaceChart, base_points: np.ndarray) -> np.ndarray:
    B = np.atleast_2d(np.asarray(base_points, dtype=complex))
    values, _, _ = chart.local_fibers(B)
    amb = chart.ambient_points(B, values)
    return eval_psh(phi, amb.reshape(-1, chart.ambient_dim)).reshape(values.shape)


class LineRestriction:
    """t -> transform of phi at centre' + t*u, callable on complex arrays.

    :meth:`evaluate` also reports which nodes were near the discriminant.
    """

    def __init__(self, phi: PshExpr, chart: HypersurfaceChart, direction, kind: str = "aver",
                 origin=None):
        if kind not in ("aver", "max"):
            raise ValueError("kind must be 'aver' or 'max'")
        u = np.asarray(direction, dtype=complex).reshape(-1)
        if u.size != len(chart.base_dims):
            raise ValueError("direction has the wrong dimension")
        norm = np.linalg.norm(u)
        if not np.isclose(norm, 1.0, rtol=1e-9):
            raise ValueError("direction must have unit norm")
        self.phi, self.chart, self.direction, self.kind = phi, chart, u, kind
        self.origin = chart.base_center if origin is None else np.asarray(origin, dtype=complex)

    def evaluate(self, t):
        """Values and a mask of nodes that are near the discriminant or outside the chart."""
        t = np.asarray(t, dtype=complex)
        B = self.origin[None, :] + t.reshape(-1, 1) * self.direction[None, :]
        aver, mx, near, escaped = transform_values(self.phi, self.chart, B)
        out = aver if self.kind == "aver" else mx
        return out.reshape(t.shape), (near | escaped).reshape(t.shape)

    def __call__(self, t):
        vals, _ = self.evaluate(t)
        return vals if np.ndim(vals) else float(vals)


def restrict_to_base_line(phi: PshExpr, chart: HypersurfaceChart, direction, kind: str = "aver") -> LineRestriction:
    return LineRestriction(phi, chart, direction, kind)


# ---------------------------------------------------------------------------
# text form

class PshParseError(PolyParseError):
    pass


class _PshParser:
    """Grammar::

        expr   := term ('+' term)*
        term   := [number ('*' | '/' number)] factor | number
        factor := 'log' '|' poly '|' | 'log' '(' abs ('+' abs)* ')' | 'max' '(' expr (',' expr)* ')'
                | '(' expr ')'
        abs    := '|' poly '|' ['^' number]
    """

    def __init__(self, text: str, variables):
        self.text = text
        self.pos = 0
        self.variables = variables

    def fail(self, msg):
        raise PshParseError(msg, self.text, min(self.pos, len(self.text)))

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def accept(self, s: str) -> bool:
        self.skip()
        if self.text.startswith(s, self.pos):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str):
        if not self.accept(s):
            self.fail(f"expected {s!r}")

    def number(self) -> float | None:
        self.skip()
        m = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?").match(self.text, self.pos)
        if not m:
            return None
        self.pos = m.end()
        return float(m.group())

    def parse(self) -> PshExpr:
        e = self.expr()
        self.skip()
        if self.pos != len(self.text):
            self.fail("unexpected trailing input")
        return e

    def expr(self) -> PshExpr:
        parts = [self.term()]
        while self.accept("+"):
            parts.append(self.term())
        return parts[0] if len(parts) == 1 else Sum(tuple(parts))

    def term(self) -> PshExpr:
        save = self.pos
        c = self.number()
        if c is not None:
            if self.accept("/"):
                d = self.number()
                if d is None:
                    self.fail("expected a number after '/'")
                c = c / d
            if self.accept("*"):
                if c < 0:
                    self.pos = save
                    self.fail("scalar multipliers must be nonnegative")
                return ScalarMul(c, self.factor())
            return Const(c)
        return self.factor()

    def poly_until_bar(self) -> SparsePoly:
        start = self.pos
        end = self.text.find("|", start)
        if end < 0:
            self.fail("unclosed '|'")
        sub = self.text[start:end]
        try:
            h = parse_poly(sub, self.variables)
        except PolyParseError as err:
            raise PshParseError(err.message, self.text, start + err.column) from None
        self.pos = end + 1
        return h

    def factor(self) -> PshExpr:
        if self.accept("log"):
            if self.accept("|"):
                return LogAbs(self.poly_until_bar())
            self.expect("(")
            terms = [self.abs_term()]
            while self.accept("+"):
                terms.append(self.abs_term())
            self.expect(")")
            return LogSumAbsPow(tuple(terms))
        if self.accept("max"):
            self.expect("(")
            kids = [self.expr()]
            while self.accept(","):
                kids.append(self.expr())
            self.expect(")")
            return Max(tuple(kids))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expected log, max, a number or '('")

    def abs_term(self) -> tuple[SparsePoly, float]:
        self.expect("|")
        h = self.poly_until_bar()
        a = 1.0
        if self.accept("^"):
            a = self.number()
            if a is None or a <= 0:
                self.fail("powers must be positive numbers")
        return h, a


def parse_psh(text: str, variables: Sequence[str]) -> PshExpr:
    """Parse e.g. ``log(|(x+y)^2| + |x-y| + |z^2|)`` or ``max(log|x|, 2*log|y|)``."""
    return _PshParser(text, tuple(variables)).parse()
