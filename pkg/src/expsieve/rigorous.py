"""Outward-rounded interval evaluation on top of ``mpmath.iv``.

Every real quantity in a proof replay is an interval enclosing the exact
value.  An inequality ``A < B`` counts as verified only when ``hi(A) < lo(B)``.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from fractions import Fraction

import mpmath
from mpmath import iv

DEFAULT_PRECISION = 113


@contextmanager
def precision(bits: int = DEFAULT_PRECISION):
    if bits < 80:
        raise ValueError("working precision below 80 bits is not supported")
    saved = iv.prec
    iv.prec = bits
    try:
        yield
    finally:
        iv.prec = saved


def ival(x) -> "iv.mpf":
    """Enclosure of an int, Fraction, decimal string or existing interval."""
    if isinstance(x, iv.mpf):
        return x
    if isinstance(x, Fraction):
        return iv.mpf(x.numerator) / x.denominator
    if isinstance(x, float):
        return iv.mpf(x)
    return iv.mpf(x)


def lo(x) -> mpmath.mpf:
    # raw endpoint, exact; mpmath.mpf(...) would round to the global 53-bit context
    return mpmath.mp.make_mpf(ival(x)._mpi_[0])


def hi(x) -> mpmath.mpf:
    return mpmath.mp.make_mpf(ival(x)._mpi_[1])


def up(x) -> float:
    """A float no smaller than every point of ``x``."""
    h = hi(x)
    f = float(h)
    return math.nextafter(f, math.inf) if mpmath.mpf(f) < h else f


def down(x) -> float:
    """A float no larger than every point of ``x``."""
    l = lo(x)
    f = float(l)
    return math.nextafter(f, -math.inf) if mpmath.mpf(f) > l else f


def imax(*xs):
    xs = [ival(x) for x in xs]
    return iv.mpf([max(lo(x) for x in xs), max(hi(x) for x in xs)])


def certainly_less(a, b) -> bool:
    return hi(a) < lo(b)


def certainly_geq(a, b) -> bool:
    return lo(a) >= hi(b)


def ilog(x):
    return iv.log(ival(x))


def family_mus(N: int):
    """Enclosures of ``mu_x, mu_y, mu_z`` for bases ``N-1, N, N+1`` against ``N+2``."""
    ld = ilog(N + 2)
    return ld / ilog(N - 1), ld / ilog(N), ld / ilog(N + 1)


def show(x, digits: int = 12) -> str:
    x = ival(x)
    return f"[{mpmath.nstr(lo(x), digits)}, {mpmath.nstr(hi(x), digits)}]"
