"""Truncated power series over exact rationals and the tree generating functions.

The only series the library needs are built from

    I(z) = z + 2 I(z)^2                       (tree-structures)
    s(x, y) = (1 - sqrt(1 - 4(x + y^2))) / 2  (the S pattern)

and the pointed-leaf series obtained by differentiating ``s(xz, I(z))`` in x at
x = 1.  With ``u = 1 - 4(z + I^2)`` the i-th derivative divided by i! is

    i = 2:  z^2 u^(-3/2)
    i = 3:  2 z^3 u^(-5/2)
    i = 4:  5 z^4 u^(-7/2)
"""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .combinatorics import b_exact

__all__ = [
    "TruncSeries",
    "dc_counts",
    "marked_gf",
    "pattern_gf_check",
    "series_arith",
    "series_power",
    "tree_structure_gf",
    "write_series_csv",
]


class TruncSeries:
    """Immutable power series truncated after ``z**order``."""

    __slots__ = ("_c",)

    def __init__(self, coefficients: Iterable, order: int | None = None):
        coeffs = [Fraction(c) for c in coefficients]
        if order is None:
            order = len(coeffs) - 1
        if order < 0:
            raise ValueError("order must be >= 0")
        coeffs = coeffs[: order + 1]
        coeffs += [Fraction(0)] * (order + 1 - len(coeffs))
        object.__setattr__(self, "_c", tuple(coeffs))

    def __setattr__(self, name, value):
        raise AttributeError("TruncSeries is immutable")

    @classmethod
    def monomial(cls, degree: int, order: int, coefficient=1) -> "TruncSeries":
        c = [0] * (order + 1)
        if degree <= order:
            c[degree] = coefficient
        return cls(c, order)

    @property
    def order(self) -> int:
        return len(self._c) - 1

    @property
    def coefficients(self) -> tuple[Fraction, ...]:
        return self._c

    def __getitem__(self, n: int) -> Fraction:
        if n < 0 or n > self.order:
            raise IndexError(f"coefficient {n} beyond truncation order {self.order}")
        return self._c[n]

    def __len__(self) -> int:
        return len(self._c)

    def __eq__(self, other) -> bool:
        return isinstance(other, TruncSeries) and self._c == other._c

    def __hash__(self) -> int:
        return hash(self._c)

    def __repr__(self) -> str:
        terms = [f"{c}*z^{i}" for i, c in enumerate(self._c) if c]
        return f"TruncSeries({' + '.join(terms) or '0'}; O(z^{self.order + 1}))"

    def _check(self, other: "TruncSeries") -> None:
        if not isinstance(other, TruncSeries):
            raise TypeError("expected a TruncSeries")
        if other.order != self.order:
            raise ValueError(f"order mismatch: {self.order} vs {other.order}")

    def __add__(self, other: "TruncSeries") -> "TruncSeries":
        self._check(other)
        return TruncSeries([a + b for a, b in zip(self._c, other._c)])

    def __sub__(self, other: "TruncSeries") -> "TruncSeries":
        self._check(other)
        return TruncSeries([a - b for a, b in zip(self._c, other._c)])

    def __neg__(self) -> "TruncSeries":
        return TruncSeries([-a for a in self._c])

    def __mul__(self, other) -> "TruncSeries":
        if isinstance(other, (int, Fraction)):
            return TruncSeries([a * other for a in self._c])
        self._check(other)
        return TruncSeries(_cauchy(self._c, other._c, self.order))

    __rmul__ = __mul__

    def truncate(self, order: int) -> "TruncSeries":
        return TruncSeries(self._c, order)

    def shift(self, k: int) -> "TruncSeries":
        """Multiply by ``z**k`` keeping the order."""
        return TruncSeries([0] * k + list(self._c), self.order)


def _cauchy(a: Sequence[Fraction], b: Sequence[Fraction], order: int) -> list[Fraction]:
    # integer fast path: most series here have integral coefficients
    if all(x.denominator == 1 for x in a) and all(x.denominator == 1 for x in b):
        ai = [x.numerator for x in a]
        bi = [x.numerator for x in b]
        out = [0] * (order + 1)
        for i, x in enumerate(ai):
            if x:
                for j in range(order + 1 - i):
                    out[i + j] += x * bi[j]
        return [Fraction(v) for v in out]
    out = [Fraction(0)] * (order + 1)
    for i, x in enumerate(a):
        if x:
            for j in range(order + 1 - i):
                out[i + j] += x * b[j]
    return out


def series_arith(a: TruncSeries, b: TruncSeries, op: str) -> TruncSeries:
    """``op`` is one of add, sub, mul; orders must agree."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown operation {op!r}")


def _rational_root(c: Fraction, q: int) -> Fraction:
    """Exact positive q-th root of c or ValueError."""
    if c <= 0:
        raise ValueError("constant term must be positive for a rational power")

    def iroot(v: int) -> int:
        r = round(v ** (1.0 / q)) if v < 2**1000 else _int_root(v, q)
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand**q == v:
                return cand
        raise ValueError(f"{c} has no rational {q}-th root")

    return Fraction(iroot(c.numerator), iroot(c.denominator))


def _int_root(v: int, q: int) -> int:
    lo, hi = 0, 1 << (v.bit_length() // q + 1)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid**q <= v:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _int_power(a: TruncSeries, e: int) -> TruncSeries:
    result = TruncSeries.monomial(0, a.order)
    base = a
    while e:
        if e & 1:
            result = result * base
        e >>= 1
        if e:
            base = base * base
    return result


def _inverse_root(a: TruncSeries, q: int) -> TruncSeries:
    """``a**(-1/q)`` by Newton iteration ``y += y (1 - a y^q) / q``.

    Each step doubles the number of correct coefficients, so the working
    order doubles too; no series division is needed.
    """
    y0 = 1 / _rational_root(a[0], q)
    y = TruncSeries([y0], 0)
    prec = 1
    while prec <= a.order:
        prec = min(2 * prec, a.order + 1)
        order = prec - 1
        yk = y.truncate(order)
        ak = a.truncate(order)
        resid = TruncSeries.monomial(0, order) - ak * _int_power(yk, q)
        y = yk + (yk * resid) * Fraction(1, q)
    return y.truncate(a.order)


def series_power(a: TruncSeries, exponent) -> TruncSeries:
    """``a**exponent`` for a rational exponent, exact to the truncation order."""
    r = Fraction(exponent)
    if a[0] == 0:
        if r < 0:
            raise ValueError("negative power of a series with zero constant term")
        if r.denominator != 1:
            raise ValueError("fractional power needs a nonzero constant term")
        return _int_power(a, r.numerator)
    if r.denominator == 1 and r >= 0:
        return _int_power(a, r.numerator)
    p, q = r.numerator, r.denominator
    y = _inverse_root(a, q)  # a^(-1/q)
    if p < 0:
        return _int_power(y, -p)
    m = -(-p // q)  # a^(p/q) = a^m * y^(qm - p)
    return _int_power(a, m) * _int_power(y, q * m - p)


@lru_cache(maxsize=8)
def tree_structure_gf(order: int) -> TruncSeries:
    """``I(z)``, counting connective-labelled plane trees by leaves.

    Built by iterating ``I = z + 2 I^2``; each pass fixes one more coefficient.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    z = TruncSeries.monomial(1, order)
    # coefficient recurrence of I = z + 2 I^2, one new term per step
    c = [0] * (order + 1)
    c[1] = 1
    for n in range(2, order + 1):
        c[n] = 2 * sum(c[i] * c[n - i] for i in range(1, n))
    result = TruncSeries(c, order)
    assert result == z + 2 * (result * result)
    return result


@lru_cache(maxsize=8)
def _u_series(order: int) -> TruncSeries:
    big_i = tree_structure_gf(max(order, 1)).truncate(order)
    z = TruncSeries.monomial(1, order)
    return TruncSeries.monomial(0, order) - 4 * (z + big_i * big_i)


# (prefactor, power of u) for the i-th x-derivative of s(xz, I(z)) over i!
_MARK_FORMS = {2: (1, Fraction(-3, 2)), 3: (2, Fraction(-5, 2)), 4: (5, Fraction(-7, 2))}


@lru_cache(maxsize=16)
def marked_gf(order: int, marks: int) -> TruncSeries:
    """Tree-structures with ``marks`` distinct S-pattern leaves pointed."""
    if marks not in _MARK_FORMS:
        raise ValueError("marks must be 2, 3 or 4")
    if order < marks:
        raise ValueError("order must be >= marks")
    factor, power = _MARK_FORMS[marks]
    inner = series_power(_u_series(order - marks), power)
    return (factor * TruncSeries(inner.coefficients, order)).shift(marks)


def dc_counts(n: int, k: int) -> tuple[Fraction, Fraction, Fraction]:
    """``(DC, DC3, DC4)``: pointed-leaf counts bracketing simple tautologies.

    ``DC - DC3 - DC4 <= ST_n <= DC`` where ST_n counts simple-tautology
    classes of size n with at most k variables.
    """
    if n < 2:
        raise ValueError("dc_counts needs n >= 2")
    if k < 1:
        raise ValueError("variable budget must be >= 1")
    k = min(k, n)
    order = max(n, 4)
    b1 = b_exact(n - 1, k)
    b2 = b_exact(n - 2, k) if n > 2 else Fraction(0)
    dc = 2 ** (n - 1) * marked_gf(order, 2)[n] * b1
    dc3 = 3 * 2 ** (n - 2) * b2 * marked_gf(order, 3)[n]
    dc4 = 6 * 2 ** (n - 2) * b2 * marked_gf(order, 4)[n]
    return dc, dc3, dc4


def _n_closed(x: float, y: float) -> float:
    return 0.5 * (1 - y - math.sqrt((1 - y) ** 2 - 4 * x))


def _s_closed(x: float, y: float) -> float:
    return 0.5 * (1 - math.sqrt(1 - 4 * (x + y * y)))


def pattern_gf_check(sample_points: Iterable[tuple[float, float]], tol: float = 1e-12) -> bool:
    """Check the N and S pattern closed forms against their defining equations.

    ``n = x + n^2 + y n`` and ``s = x + s^2 + y^2`` at every point.
    """
    ok = True
    for x, y in sample_points:
        if x < 0 or y < 0 or (1 - y) ** 2 <= 4 * x or 1 - 4 * (x + y * y) < 0:
            raise ValueError(f"point ({x}, {y}) outside the analyticity domain")
        nv = _n_closed(x, y)
        sv = _s_closed(x, y)
        ok &= abs(nv - (x + nv * nv + y * nv)) <= tol
        ok &= abs(sv - (x + sv * sv + y * y)) <= tol
    return bool(ok)


def write_series_csv(series: TruncSeries, fh, start: int = 0) -> None:
    """Emit ``n,numerator,denominator`` rows."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "numerator", "denominator"])
    for n in range(start, series.order + 1):
        c = series[n]
        w.writerow([n, c.numerator, c.denominator])
