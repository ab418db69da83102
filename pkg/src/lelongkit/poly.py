"""Sparse multivariate polynomials over C, univariate root solving and root tracking."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

ROOT_TOL = 1e-10
CLUSTER_TOL = 1e-6
LEADING_TOL = 1e-14

DEFAULT_ALIASES = {"ξ": "xi"}
CANONICAL_ORDER = ("x", "y", "z", "w", "xi")


class PolyError(ValueError):
    pass


class PolyParseError(PolyError):
    def __init__(self, message: str, text: str, column: int):
        self.message = message
        self.text = text
        self.column = column
        super().__init__(f"{message} at column {column + 1}: {text!r}")


class DegreeDropError(PolyError):
    pass


class CollisionError(RuntimeError):
    """Root tracking could not certify a step; the path passes too close to the discriminant."""


def _monomial_key(exp: tuple[int, ...]):
    return (-sum(exp), tuple(-e for e in exp))


class SparsePoly:
    """Immutable sparse polynomial with complex coefficients.

    Terms are stored in graded-lex descending order, which fixes the
    summation order of :meth:`eval` and the printed form.
    """

    __slots__ = ("num_vars", "_terms", "names")

    def __init__(self, num_vars: int, terms: Mapping[tuple[int, ...], complex] | Iterable = (),
                 names: Sequence[str] | None = None):
        if num_vars < 0:
            raise PolyError("num_vars must be nonnegative")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple[int, ...], complex] = {}
        for exp, c in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != num_vars:
                raise PolyError(f"exponent {exp} has length {len(exp)}, expected {num_vars}")
            if any(e < 0 for e in exp):
                raise PolyError(f"negative exponent in {exp}")
            acc[exp] = acc.get(exp, 0j) + complex(c)
        ordered = sorted(((e, c) for e, c in acc.items() if c != 0), key=lambda t: _monomial_key(t[0]))
        self.num_vars = num_vars
        self._terms = MappingProxyType(dict(ordered))
        if names is None:
            names = default_names(num_vars)
        if len(names) != num_vars:
            raise PolyError("names length does not match num_vars")
        self.names = tuple(names)

    # construction helpers
    @classmethod
    def zero(cls, num_vars: int, names=None) -> "SparsePoly":
        return cls(num_vars, {}, names)

    @classmethod
    def constant(cls, num_vars: int, c: complex, names=None) -> "SparsePoly":
        return cls(num_vars, {(0,) * num_vars: c}, names)

    @classmethod
    def variable(cls, num_vars: int, index: int, names=None) -> "SparsePoly":
        exp = [0] * num_vars
        exp[index] = 1
        return cls(num_vars, {tuple(exp): 1.0}, names)

    @classmethod
    def from_univariate(cls, coeffs: Sequence[complex], name: str = "t") -> "SparsePoly":
        """Build a one-variable polynomial from ascending coefficients."""
        return cls(1, {(i,): c for i, c in enumerate(coeffs)}, (name,))

    @property
    def terms(self) -> Mapping[tuple[int, ...], complex]:
        return self._terms

    def is_zero(self) -> bool:
        return not self._terms

    def total_degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)

    def degree_in(self, var: int) -> int:
        self._check_var(var)
        return max((e[var] for e in self._terms), default=-1)

    def depends_on(self, var: int) -> bool:
        return self.degree_in(var) > 0

    def _check_var(self, var: int):
        if not 0 <= var < self.num_vars:
            raise PolyError(f"variable index {var} out of range for {self.num_vars} variables")

    def _coerce(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            if other.num_vars != self.num_vars:
                raise PolyError("polynomials live in different numbers of variables")
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return SparsePoly.constant(self.num_vars, complex(other), self.names)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = dict(self._terms)
        for e, c in other._terms.items():
            acc[e] = acc.get(e, 0j) + c
        return SparsePoly(self.num_vars, acc, self.names)

    __radd__ = __add__

    def __neg__(self):
        return SparsePoly(self.num_vars, {e: -c for e, c in self._terms.items()}, self.names)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict[tuple[int, ...], complex] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, 0j) + c1 * c2
        return SparsePoly(self.num_vars, acc, self.names)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise PolyError("only nonnegative integer powers")
        result = SparsePoly.constant(self.num_vars, 1.0, self.names)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.num_vars == other.num_vars and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((self.num_vars, tuple(self._terms.items())))

    def __repr__(self):
        return f"SparsePoly({self.num_vars}, {format_poly(self)!r})"

    def __str__(self):
        return format_poly(self)

    def with_names(self, names: Sequence[str]) -> "SparsePoly":
        return SparsePoly(self.num_vars, self._terms, names)

    def __call__(self, *point):
        return eval_poly(self, point)

    def coefficient_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Exponent matrix (terms x vars) and coefficient vector in canonical order."""
        if not self._terms:
            return np.zeros((0, self.num_vars), dtype=int), np.zeros(0, dtype=complex)
        exps = np.array(list(self._terms.keys()), dtype=int).reshape(len(self._terms), self.num_vars)
        coeffs = np.array(list(self._terms.values()), dtype=complex)
        return exps, coeffs

    def univariate_coeffs(self) -> np.ndarray:
        """Ascending coefficient vector of a one-variable polynomial."""
        if self.num_vars != 1:
            raise PolyError("univariate_coeffs needs a polynomial in one variable")
        deg = max(self.degree_in(0), 0)
        out = np.zeros(deg + 1, dtype=complex)
        for (e,), c in self._terms.items():
            out[e] = c
        return out


def default_names(n: int) -> tuple[str, ...]:
    return tuple(f"z{i + 1}" for i in range(n))


def eval_poly(p: SparsePoly, point) -> complex:
    """Evaluate at a single point, summing terms in canonical order."""
    point = tuple(complex(v) for v in np.ravel(np.asarray(point, dtype=complex)))
    if len(point) != p.num_vars:
        raise PolyError(f"point has {len(point)} coordinates, polynomial has {p.num_vars} variables")
    total = 0j
    for exp, c in p.terms.items():
        term = c
        for v, e in zip(point, exp):
            if e:
                term *= v ** e
        total += term
    return total


def eval_many(p: SparsePoly, points: np.ndarray) -> np.ndarray:
    """Vectorized evaluation over an (N, num_vars) array of points."""
    pts = np.asarray(points, dtype=complex)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != p.num_vars:
        raise PolyError(f"points have {pts.shape[-1]} coordinates, polynomial has {p.num_vars} variables")
    total = np.zeros(pts.shape[:-1], dtype=complex)
    for exp, c in p.terms.items():
        term = np.full(pts.shape[:-1], c, dtype=complex)
        for j, e in enumerate(exp):
            if e:
                term = term * pts[..., j] ** e
        total = total + term
    return total


def substitute_affine(p: SparsePoly, matrix, shift, names: Sequence[str] | None = None) -> SparsePoly:
    """Return q(x) = p(shift + matrix @ x).

    ``matrix`` has shape (p.num_vars, m); the result lives in m variables.
    """
    A = np.asarray(matrix, dtype=complex)
    b = np.asarray(shift, dtype=complex).reshape(-1)
    n, m = A.shape
    if n != p.num_vars or b.shape[0] != n:
        raise PolyError("affine substitution has the wrong shape")
    names = tuple(names) if names is not None else default_names(m)
    forms = []
    for i in range(n):
        terms = {(0,) * m: b[i]}
        for j in range(m):
            e = [0] * m
            e[j] = 1
            terms[tuple(e)] = A[i, j]
        forms.append(SparsePoly(m, terms, names))
    return _compose(p, forms, m, names)


def _compose(p: SparsePoly, forms: Sequence[SparsePoly], m: int, names) -> SparsePoly:
    powers: dict[tuple[int, int], SparsePoly] = {}

    def power(i: int, e: int) -> SparsePoly:
        key = (i, e)
        if key not in powers:
            powers[key] = forms[i] if e == 1 else power(i, e - 1) * forms[i]
        return powers[key]

    acc: dict[tuple[int, ...], complex] = {}
    for exp, c in p.terms.items():
        term = SparsePoly.constant(m, c, names)
        for i, e in enumerate(exp):
            if e:
                term = term * power(i, e)
        for e2, c2 in term.terms.items():
            acc[e2] = acc.get(e2, 0j) + c2
    return SparsePoly(m, acc, names)


def specialize(p: SparsePoly, assignments: Mapping[int, object], t_name: str = "t") -> SparsePoly:
    """Substitute values or affine forms in a new variable ``t``.

    An assignment is a number (fixed value) or a pair ``(a, b)`` meaning
    ``a + b*t``. Unassigned variables keep their order. When any affine
    form is present, ``t`` becomes variable 0 of the result.
    """
    for var in assignments:
        p._check_var(var)
    uses_t = any(isinstance(v, (tuple, list)) for v in assignments.values())
    rest = [i for i in range(p.num_vars) if i not in assignments]
    offset = 1 if uses_t else 0
    m = len(rest) + offset
    names = ((t_name,) if uses_t else ()) + tuple(p.names[i] for i in rest)
    forms = []
    for i in range(p.num_vars):
        if i in assignments:
            v = assignments[i]
            if isinstance(v, (tuple, list)):
                a, b = v
                terms = {(0,) * m: complex(a)}
                e = [0] * m
                e[0] = 1
                terms[tuple(e)] = complex(b)
            else:
                terms = {(0,) * m: complex(v)}
            forms.append(SparsePoly(m, terms, names))
        else:
            forms.append(SparsePoly.variable(m, offset + rest.index(i), names))
    return _compose(p, forms, m, names)


def coefficients_in(p: SparsePoly, var: int) -> dict[int, SparsePoly]:
    """Split p by powers of ``var``: p = sum_e coeff[e] * var^e, coefficients in the other variables."""
    p._check_var(var)
    others = [i for i in range(p.num_vars) if i != var]
    names = tuple(p.names[i] for i in others)
    grouped: dict[int, dict] = {}
    for exp, c in p.terms.items():
        grouped.setdefault(exp[var], {})[tuple(exp[i] for i in others)] = c
    return {e: SparsePoly(len(others), t, names) for e, t in sorted(grouped.items())}


# ---------------------------------------------------------------------------
# text form

def _format_number(c: complex) -> str:
    re_, im = c.real, c.imag

    def f(x: float) -> str:
        return repr(float(x)).replace("inf", "Infinity")

    if im == 0:
        return f(re_)
    if re_ == 0:
        return f"{f(im)}i"
    sign = "+" if im >= 0 else "-"
    return f"({f(re_)}{sign}{f(abs(im))}i)"


def format_poly(p: SparsePoly) -> str:
    """Canonical printed form; parses back to an equal polynomial."""
    if p.is_zero():
        return "0"
    pieces = []
    for exp, c in p.terms.items():
        factors = []
        for name, e in zip(p.names, exp):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        negative = c.imag == 0 and c.real < 0
        mag = -c if negative else c
        if factors and mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([_format_number(mag)] + factors)
        pieces.append(("-" if negative else "+", body))
    first_sign, first = pieces[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>[ij](?![A-Za-z0-9_]))?"
    r"|(?P<name>[A-Za-z_Ͱ-Ͽ][A-Za-z_0-9Ͱ-Ͽ]*)"
    r"|(?P<op>\*\*|[-+*^()])"
    r")"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PolyParseError(f"unexpected character {text[col]!r}", text, col)
        start = m.start(m.lastgroup) if m.lastgroup else pos
        if m.group("num") is not None:
            val = float(m.group("num"))
            tokens.append(("num", complex(0, val) if m.group("imag") else complex(val), start))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            op = m.group("op")
            tokens.append(("op", "^" if op == "**" else op, m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


def _collect_names(tokens, aliases) -> list[str]:
    seen = []
    for kind, val, _ in tokens:
        if kind == "name" and val not in ("i", "j"):
            name = aliases.get(val, val)
            if name not in seen:
                seen.append(name)
    return seen


def infer_variables(names: Iterable[str]) -> tuple[str, ...]:
    """Order variable names: z1..zn by index, or the x, y, z, w, xi convention."""
    names = list(dict.fromkeys(names))
    if not names:
        return ()
    indexed = [re.fullmatch(r"z(\d+)", n) for n in names]
    if all(indexed):
        n = max(int(m.group(1)) for m in indexed)
        return default_names(n)
    if all(n in CANONICAL_ORDER for n in names):
        return tuple(n for n in CANONICAL_ORDER if n in names)
    if len(names) == 1:
        return tuple(names)
    raise PolyError(f"cannot infer variable order from {names}; pass variables explicitly")


class _PolyParser:
    def __init__(self, text, tokens, variables, aliases):
        self.text = text
        self.tokens = tokens
        self.i = 0
        self.variables = tuple(variables)
        self.aliases = aliases
        self.n = len(self.variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise PolyParseError(msg, self.text, tok[2])

    def expect(self, op):
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            self.fail(f"expected {op!r}", tok)

    def parse(self) -> SparsePoly:
        if self.peek()[0] == "end":
            self.fail("empty expression")
        out = self.expr()
        if self.peek()[0] != "end":
            self.fail("unexpected token")
        return out

    def expr(self):
        acc = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self):
        acc = self.unary()
        while True:
            tok = self.peek()
            if tok[0] == "op" and tok[1] == "*":
                self.take()
                acc = acc * self.unary()
            elif tok[0] in ("num", "name") or (tok[0] == "op" and tok[1] == "("):
                acc = acc * self.unary()
            else:
                return acc

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            val = self.unary()
            return -val if tok[1] == "-" else val
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            etok = self.take()
            if etok[0] != "num" or etok[1].imag != 0 or etok[1].real != int(etok[1].real):
                self.fail("exponent must be a nonnegative integer", etok)
            base = base ** int(etok[1].real)
        return base

    def atom(self):
        tok = self.take()
        kind, val, _ = tok
        if kind == "num":
            return SparsePoly.constant(self.n, val, self.variables)
        if kind == "name":
            if val in ("i", "j") and val not in self.variables:
                return SparsePoly.constant(self.n, 1j, self.variables)
            name = self.aliases.get(val, val)
            if name not in self.variables:
                self.fail(f"unknown variable {val!r}", tok)
            return SparsePoly.variable(self.n, self.variables.index(name), self.variables)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        self.fail("unexpected token", tok)


def parse_poly(text: str, variables: Sequence[str] | None = None,
               aliases: Mapping[str, str] | None = None) -> SparsePoly:
    """Parse ``x^2 - y^2 + (1+2i)*z^3`` style text.

    Without ``variables`` the order is inferred (see :func:`infer_variables`).
    """
    aliases = dict(DEFAULT_ALIASES if aliases is None else aliases)
    tokens = _tokenize(text)
    if variables is None:
        variables = infer_variables(_collect_names(tokens, aliases))
    variables = tuple(aliases.get(v, v) for v in variables)
    return _PolyParser(text, tokens, variables, aliases).parse()


# ---------------------------------------------------------------------------
# univariate roots

@dataclass(frozen=True)
class RootSet:
    """Roots with multiplicities; ``residual_bound`` is max |p(root)|."""

    roots: tuple[tuple[complex, int], ...]
    residual_bound: float
    degree: int
    warnings: tuple[str, ...] = ()

    def values(self) -> list[complex]:
        """Roots repeated by multiplicity."""
        return [r for r, m in self.roots for _ in range(m)]

    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.roots)


def root_sort_key(z: complex):
    return (round(z.real, 9), round(z.imag, 9), z.real, z.imag)


def trim_leading(coeffs: np.ndarray, tol: float = LEADING_TOL) -> tuple[np.ndarray, int]:
    """Drop negligible leading coefficients; returns the trimmed vector and the number dropped."""
    c = np.asarray(coeffs, dtype=complex)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0:
        raise PolyError("zero polynomial has no well-defined roots")
    d = c.size - 1
    while d > 0 and abs(c[d]) < tol * scale:
        d -= 1
    return c[: d + 1], c.size - 1 - d


def _horner(c: np.ndarray, z):
    acc = np.zeros_like(z, dtype=complex) + c[-1]
    for a in c[-2::-1]:
        acc = acc * z + a
    return acc


def _companion_roots(c: np.ndarray, polish: bool = True) -> np.ndarray:
    """All roots of the ascending coefficient vector ``c`` (leading nonzero)."""
    d = c.size - 1
    if d == 0:
        return np.zeros(0, dtype=complex)
    nz = 0
    while nz < d and c[nz] == 0:
        nz += 1
    core = c[nz:]
    k = core.size - 1
    roots = np.zeros(nz, dtype=complex)
    if k == 0:
        return roots
    if k == 1:
        return np.concatenate([roots, [-core[0] / core[1]]])
    comp = np.zeros((k, k), dtype=complex)
    comp[1:, :-1] = np.eye(k - 1)
    comp[:, -1] = -core[:-1] / core[-1]
    ev = np.linalg.eigvals(comp)
    if polish:
        ev = _newton_polish(core, ev)
    return np.concatenate([roots, ev])


def _newton_polish(c: np.ndarray, z: np.ndarray, steps: int = 2, mult=1) -> np.ndarray:
    dc = c[1:] * np.arange(1, c.size)
    z = np.array(z, dtype=complex)
    mult = np.broadcast_to(np.asarray(mult, dtype=float), z.shape)
    for _ in range(steps):
        f = _horner(c, z)
        df = _horner(dc, z)
        ok = df != 0
        step = np.zeros_like(z)
        step[ok] = mult[ok] * f[ok] / df[ok]
        cand = z - step
        better = np.abs(_horner(c, cand)) < np.abs(f)
        z = np.where(better, cand, z)
    return z


def batch_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots for many polynomials of the same degree; ``coeffs`` is (N, d+1) ascending.

    Rows whose leading coefficient is negligible are solved one at a time and
    padded with ``inf`` for the roots that escaped.
    """
    C = np.asarray(coeffs, dtype=complex)
    N, d1 = C.shape
    d = d1 - 1
    out = np.full((N, d), np.inf + 0j, dtype=complex)
    if d == 0:
        return out
    scale = np.max(np.abs(C), axis=1)
    good = np.abs(C[:, -1]) >= LEADING_TOL * scale
    idx = np.nonzero(good)[0]
    if idx.size:
        G = C[idx]
        if d == 1:
            out[idx, 0] = -G[:, 0] / G[:, 1]
        else:
            comp = np.zeros((idx.size, d, d), dtype=complex)
            comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
            comp[:, :, -1] = -G[:, :-1] / G[:, -1:]
            ev = np.linalg.eigvals(comp)
            out[idx] = _newton_polish_rows(G, ev)
    for i in np.nonzero(~good)[0]:
        if scale[i] == 0:
            continue
        c, _ = trim_leading(C[i])
        r = _companion_roots(c)
        out[i, : r.size] = r
    return out


def _newton_polish_rows(C: np.ndarray, Z: np.ndarray, steps: int = 2) -> np.ndarray:
    d = C.shape[1] - 1
    dC = C[:, 1:] * np.arange(1, d + 1)

    def horner(c, z):
        acc = np.repeat(c[:, -1:], z.shape[1], axis=1)
        for j in range(c.shape[1] - 2, -1, -1):
            acc = acc * z + c[:, j : j + 1]
        return acc

    Z = Z.copy()
    for _ in range(steps):
        f = horner(C, Z)
        df = horner(dC, Z)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = Z - f / df
        cand = np.where(np.isfinite(cand), cand, Z)
        better = np.abs(horner(C, cand)) < np.abs(f)
        Z = np.where(better, cand, Z)
    return Z


def _cluster(roots: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    n = roots.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(roots[i] - roots[j]) <= tol * (1 + max(abs(roots[i]), abs(roots[j]))):
                parent[find(i)] = find(j)
    groups: dict[int, list[complex]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(complex(roots[i]))
    merged = [(complex(np.mean(g)), len(g)) for g in groups.values()]
    return sorted(merged, key=lambda rm: root_sort_key(rm[0]))


def _merge_multiple(c: np.ndarray, clusters: list[tuple[complex, int]],
                    radius: float = 1e-3, tol: float = 1e-13) -> list[tuple[complex, int]]:
    """Merge clusters that are a split multiple root.

    Eigenvalues of an m-fold root scatter like eps**(1/m), beyond the plain
    clustering radius for m >= 3. A group of nearby clusters is merged when the
    Taylor coefficients of order < m vanish at the group's centroid.
    """
    n = len(clusters)
    if n < 2:
        return clusters
    comp = list(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            a, b = clusters[i][0], clusters[j][0]
            if abs(a - b) <= radius * (1 + max(abs(a), abs(b))):
                ci, cj = comp[i], comp[j]
                comp = [ci if x == cj else x for x in comp]
    norm = float(np.sum(np.abs(c)))
    out = []
    for label in dict.fromkeys(comp):
        members = [clusters[i] for i in range(n) if comp[i] == label]
        if len(members) > 1:
            m = sum(k for _, k in members)
            centre = sum(z * k for z, k in members) / m
            bound = tol * norm * max(1.0, abs(centre)) ** (c.size - 1)
            if _taylor_small(c, centre, m, bound):
                out.append((complex(centre), m))
                continue
        out.extend(members)
    return sorted(out, key=lambda rm: root_sort_key(rm[0]))


def _taylor_small(c: np.ndarray, z: complex, m: int, bound: float) -> bool:
    d = c.astype(complex)
    for j in range(m):
        if d.size == 0:
            return True
        if abs(complex(_horner(d, np.array([z]))[0])) > bound:
            return False
        d = d[1:] * np.arange(1, d.size) / (j + 1)
    return True


def univariate_roots(p, tol: float = ROOT_TOL, cluster_tol: float = CLUSTER_TOL) -> RootSet:
    """All complex roots of a one-variable polynomial, clustered by multiplicity.

    ``p`` is a one-variable :class:`SparsePoly` or an ascending coefficient vector.
    """
    coeffs = p.univariate_coeffs() if isinstance(p, SparsePoly) else np.asarray(p, dtype=complex)
    if coeffs.size == 0 or not np.any(coeffs != 0):
        raise PolyError("zero polynomial has no well-defined roots")
    nominal = coeffs.size - 1
    while nominal > 0 and coeffs[nominal] == 0:
        nominal -= 1
    c, dropped = trim_leading(coeffs[: nominal + 1])
    warnings = []
    if dropped:
        warnings.append(f"degree-drop: leading coefficients below {LEADING_TOL:g} relative dropped "
                        f"(degree {nominal} -> {c.size - 1})")
    raw = _companion_roots(c, polish=False)
    clustered = _merge_multiple(c, _cluster(raw, cluster_tol))
    if clustered:
        # multiplicity-aware Newton; the zero roots split off exactly stay untouched
        z = np.array([r for r, _ in clustered])
        m = np.array([k for _, k in clustered])
        polished = _newton_polish(c, z, mult=m)
        polished = np.where(z == 0, z, polished)
        clustered = sorted(((complex(a), int(k)) for a, k in zip(polished, m)),
                           key=lambda rm: root_sort_key(rm[0]))
    residual = max((abs(complex(_horner(c, np.array([r]))[0])) for r, _ in clustered), default=0.0)
    norm = float(np.sum(np.abs(c)))
    rmax = max((abs(r) for r, _ in clustered), default=0.0)
    if residual > tol * norm * max(1.0, rmax) ** (c.size - 1):
        warnings.append(f"residual {residual:.3g} above tolerance")
    return RootSet(tuple(clustered), float(residual), c.size - 1, tuple(warnings))


# ---------------------------------------------------------------------------
# root tracking

Family = Callable[[float], object]


def _family_coeffs(family: Family, s: float) -> np.ndarray:
    val = family(s)
    if isinstance(val, SparsePoly):
        return val.univariate_coeffs()
    return np.asarray(val, dtype=complex)


@dataclass(frozen=True)
class TrackResult:
    """Outcome of continuing roots along s in [0, 1].

    ``targets[i]`` is the index in ``end_roots`` reached from ``start_roots[i]``.
    ``end_roots`` is the deterministic (sorted) root list at s = 1; for a closed
    loop it coincides with the sorted root list at s = 0.
    """

    start_roots: tuple[complex, ...]
    end_roots: tuple[complex, ...]
    targets: tuple[int, ...]
    final_positions: tuple[complex, ...]
    min_gap: float
    steps: int
    refinements: int
    warnings: tuple[str, ...] = ()


def sorted_roots(coeffs: np.ndarray) -> np.ndarray:
    c, _ = trim_leading(coeffs)
    r = _companion_roots(c)
    return np.array(sorted(r, key=root_sort_key), dtype=complex)


def _match(prev: np.ndarray, cand: np.ndarray) -> np.ndarray:
    cost = np.abs(prev[:, None] - cand[None, :])
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(prev.size, dtype=int)
    out[rows] = cols
    return out


def track_roots(family: Family, start_roots: Sequence[complex] | None = None, steps: int = 256,
                max_refine: int = 40, gap_factor: float = 4.0) -> TrackResult:
    """Continue roots of ``family(s)`` from s = 0 to s = 1.

    ``family`` returns a one-variable polynomial (or ascending coefficients) for
    each s. Steps are bisected until the smallest distance from a tracked root
    to any other root exceeds ``gap_factor`` times the largest movement.
    """
    c0 = _family_coeffs(family, 0.0)
    all0 = sorted_roots(c0)
    degree = all0.size
    if start_roots is None:
        cur = all0.copy()
    else:
        cur = np.asarray(start_roots, dtype=complex).reshape(-1)
        if cur.size > degree:
            raise PolyError("more start roots than the degree of the family")
        cur = all0[_match(cur, all0)]
    start = tuple(complex(z) for z in (all0 if start_roots is None else np.asarray(start_roots, dtype=complex)))
    h0 = 1.0 / steps
    h = h0
    s = 0.0
    taken = 0
    refinements = 0
    min_gap = np.inf
    h_min = h0 / 2 ** max_refine
    while s < 1.0:
        s1 = min(1.0, s + h)
        coeffs = _family_coeffs(family, s1)
        trimmed, dropped = trim_leading(coeffs)
        if trimmed.size - 1 != degree:
            raise DegreeDropError(f"degree changed from {degree} to {trimmed.size - 1} at s={s1:.6g}")
        cand = _companion_roots(trimmed)
        match = _match(cur, cand)
        moved = np.max(np.abs(cand[match] - cur))
        others = np.abs(cand[match][:, None] - cand[None, :])
        others[np.arange(match.size), match] = np.inf
        gap = float(np.min(others)) if degree > 1 else np.inf
        if gap > gap_factor * moved:
            cur = cand[match]
            s = s1
            taken += 1
            min_gap = min(min_gap, gap)
            h = min(h0, 2 * h)
        else:
            h /= 2
            refinements += 1
            if h < h_min:
                raise CollisionError(f"step refinement exhausted near s={s:.6g} (gap {gap:.3g})")
    end_all = sorted_roots(_family_coeffs(family, 1.0))
    targets = _match(cur, end_all)
    return TrackResult(start, tuple(complex(z) for z in end_all), tuple(int(t) for t in targets),
                       tuple(complex(z) for z in cur), float(min_gap), taken, refinements)


def loop_permutation(result: TrackResult) -> tuple[int, ...]:
    """Permutation of the start roots for a closed loop: start i ends at start perm[i]."""
    start = np.asarray(result.start_roots)
    final = np.asarray(result.final_positions)
    return tuple(int(j) for j in _match(final, start))
