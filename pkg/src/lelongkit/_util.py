"""Seeding, complex-number text form and a small ordered parallel map."""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

_THREADS = 1


def set_threads(n: int) -> None:
    """Cap worker threads for parallel maps. Results never depend on this."""
    global _THREADS
    _THREADS = max(1, int(n))


def get_threads() -> int:
    return _THREADS


def pmap(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    items = list(items)
    if _THREADS <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_THREADS) as ex:
        return list(ex.map(fn, items))


def _label(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def rng_for(seed: int, *path) -> np.random.Generator:
    """Generator keyed by (master seed, structural index), independent of call order."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *(_label(p) for p in path)])


def parse_complex(v) -> complex:
    """Accept numbers, [re, im] pairs, or strings such as ``1-2i``."""
    if isinstance(v, (int, float, complex)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        from .poly import parse_poly

        q = parse_poly(v, variables=())
        if q.is_zero():
            return 0j
        return complex(q.terms[()])
    raise ValueError(f"cannot read a complex number from {v!r}")


def format_complex(z: complex):
    z = complex(z)
    if z.imag == 0:
        return float(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"
