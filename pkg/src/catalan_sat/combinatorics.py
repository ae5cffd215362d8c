"""Exact and log-domain counting for equivalence classes of and/or trees.

Everything here is a pure function of its arguments.  Big naturals are plain
Python ``int``; exact rationals are :class:`fractions.Fraction`; quantities
that overflow doubles are carried as :class:`LogReal`.

Notation used throughout::

    C_n      plane binary trees with n leaves (the (n-1)th Catalan number)
    {n p}    Stirling numbers of the second kind
    a_p(n)   p**n / (p! 2**p)
    B(n, k)  sum_{p<=k} {n p} 2**-p
    T(n, k)  C_n * sum_{p<=k} {n p} 2**(2n-1-p)   (number of classes)
"""

from __future__ import annotations

import math
import os
import warnings
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "LogReal",
    "Schedule",
    "WindowParams",
    "a_term",
    "b_approx",
    "b_exact",
    "b_log",
    "catalan",
    "count_classes",
    "exact_cutoff",
    "m_threshold",
    "parse_schedule",
    "rat",
    "solve_peak_root",
    "stirling2",
    "stirling_row",
    "verify_bonferroni",
    "window_mass",
]

# m_threshold compares huge powers exactly below this n.
THRESHOLD_EXACT_CUTOFF = 10_000
# B(n, k) and rat_n are exact rationals below this n.
DEFAULT_EXACT_CUTOFF = 2_000


def exact_cutoff() -> int:
    """Exactness cutoff for B/rat, overridable by ``CATALAN_SAT_EXACT_CUTOFF``."""
    return int(os.environ.get("CATALAN_SAT_EXACT_CUTOFF", DEFAULT_EXACT_CUTOFF))


# ---------------------------------------------------------------------------
# log-domain reals


@dataclass(frozen=True, order=False)
class LogReal:
    """A non-negative real stored as its natural log."""

    log_value: float
    is_zero: bool = False

    @classmethod
    def from_value(cls, x) -> "LogReal":
        if x < 0:
            raise ValueError("LogReal holds non-negative values only")
        if x == 0:
            return cls(-math.inf, True)
        if isinstance(x, Fraction):
            return cls(_log_fraction(x))
        if isinstance(x, int):
            return cls(_log_int(x))
        return cls(math.log(x))

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(-math.inf, True)

    def exp(self) -> float:
        return 0.0 if self.is_zero else math.exp(self.log_value)

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.is_zero or other.is_zero:
            return LogReal.zero()
        return LogReal(self.log_value + other.log_value)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.is_zero:
            raise ZeroDivisionError("division by LogReal zero")
        if self.is_zero:
            return LogReal.zero()
        return LogReal(self.log_value - other.log_value)

    def __add__(self, other: "LogReal") -> "LogReal":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return LogReal(float(np.logaddexp(self.log_value, other.log_value)))

    def _key(self) -> float:
        return -math.inf if self.is_zero else self.log_value

    def __lt__(self, other: "LogReal") -> bool:
        return self._key() < other._key()

    def __le__(self, other: "LogReal") -> bool:
        return self._key() <= other._key()

    def __gt__(self, other: "LogReal") -> bool:
        return self._key() > other._key()

    def __ge__(self, other: "LogReal") -> bool:
        return self._key() >= other._key()


def _log_int(x: int) -> float:
    # math.log accepts arbitrarily large ints
    return math.log(x)


def _log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


# ---------------------------------------------------------------------------
# exact counts


@lru_cache(maxsize=None)
def catalan(n: int) -> int:
    """Number of plane binary trees with ``n`` leaves."""
    if n < 1:
        raise ValueError(f"catalan needs n >= 1, got {n}")
    return math.comb(2 * n - 2, n - 1) // n


def stirling_row(n: int, kmax: int | None = None) -> list[int]:
    """Row ``[{n 0}, {n 1}, ..., {n kmax}]`` of Stirling numbers.

    Streams the triangular recurrence one row at a time, so memory is
    O(kmax) and time O(n * kmax).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if kmax is None:
        kmax = n
    row = [1] + [0] * kmax
    for m in range(1, n + 1):
        new = [0] * (kmax + 1)
        for p in range(1, min(m, kmax) + 1):
            new[p] = p * row[p] + row[p - 1]
        row = new
    return row


@lru_cache(maxsize=256)
def _cached_row(n: int, kmax: int) -> tuple[int, ...]:
    return tuple(stirling_row(n, kmax))


def stirling2(n: int, p: int) -> int:
    """Stirling number of the second kind; 0 when ``p > n``."""
    if n < 0 or p < 0:
        raise ValueError("stirling2 needs non-negative arguments")
    if p > n:
        return 0
    return _cached_row(n, p)[p]


def _check_nk(n: int, k: int) -> int:
    if n < 1:
        raise ValueError(f"size must be >= 1, got {n}")
    if k < 1:
        raise ValueError(f"variable budget must be >= 1, got {k}")
    # a budget above n never binds
    return min(k, n)


def count_classes(n: int, k: int) -> int:
    """Exact number of classes of size-``n`` trees using at most ``k`` variables."""
    k = _check_nk(n, k)
    row = _cached_row(n, k)
    return catalan(n) * sum(row[p] << (2 * n - 1 - p) for p in range(1, k + 1))


def b_exact(n: int, k: int) -> Fraction:
    """``B(n, k) = sum_{p<=k} {n p} / 2**p`` as an exact rational."""
    if n == 0:
        if k < 1:
            raise ValueError("variable budget must be >= 1")
        return Fraction(0)
    k = _check_nk(n, k)
    row = _cached_row(n, k)
    return Fraction(sum(row[p] << (k - p) for p in range(1, k + 1)), 1 << k)


@lru_cache(maxsize=64)
def _partial_exp_numerators(k: int) -> tuple[int, ...]:
    # e_r = r! 2^r sum_{m<=r} (-1/2)^m / m!, all positive
    e = [1]
    for r in range(1, k + 1):
        e.append(2 * r * e[-1] + (-1) ** r)
    return tuple(e)


def _b_numerator(n: int, k: int) -> int:
    """``B(n, k) * k! * 2**k`` as an integer, in O(k) big-integer steps.

    Uses ``B(n, k) = sum_j a_j(n) * E_{k-j}`` where ``E_r`` is the r-th partial
    sum of ``exp(-1/2)``; every term is positive.
    """
    e = _partial_exp_numerators(k)
    return sum(math.comb(k, j) * e[k - j] * pow(j, n) for j in range(1, k + 1))


def _b_fast_exact(n: int, k: int) -> Fraction:
    if n == 0:
        return Fraction(0)
    k = min(k, n)
    return Fraction(_b_numerator(n, k), math.factorial(k) << k)


def a_term(n: int, p: int) -> LogReal:
    """``log(p**n / (p! 2**p))`` via log-gamma."""
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got p={p}, n={n}")
    return LogReal(n * math.log(p) - math.lgamma(p + 1) - p * math.log(2.0))


def _log_a(n: int, ps: np.ndarray) -> np.ndarray:
    ps = np.asarray(ps, dtype=float)
    return n * np.log(ps) - gammaln(ps + 1) - ps * math.log(2.0)


def b_approx(n: int, k: int) -> LogReal:
    """Log of ``sum_{p<=k} a_p(n)``, which lies in ``[B(n,k), 2 B(n,k)]``."""
    k = _check_nk(n, k)
    return LogReal(float(logsumexp(_log_a(n, np.arange(1, k + 1)))))


def b_log(n: int, k: int) -> LogReal:
    """Accurate log-domain ``B(n, k)`` for any n.

    Evaluates ``sum_j a_j(n) E_{k-j}`` with a stable log-sum-exp; the
    relative error is a few ulps times ``log`` of the largest term.
    """
    if n == 0:
        return LogReal.zero()
    k = _check_nk(n, k)
    js = np.arange(1, k + 1)
    return LogReal(float(logsumexp(_log_a(n, js) + _log_partial_exp(k)[k - js])))


@lru_cache(maxsize=16)
def _log_partial_exp(k: int) -> np.ndarray:
    # log E_r for r = 0..k; E_r -> exp(-1/2) fast, so float partial sums are fine
    terms = np.empty(k + 1)
    acc, t = 0.0, 1.0
    for r in range(k + 1):
        if r:
            t *= -0.5 / r
        acc += t
        terms[r] = math.log(acc)
    return terms


def verify_bonferroni(n: int) -> bool:
    """Check ``p^n/p! - (p-1)^n/(p-1)! <= {n p} <= p^n/p!`` exactly for all p."""
    if n < 1:
        raise ValueError("n must be >= 1")
    row = _cached_row(n, n)
    fact = 1
    for p in range(1, n + 1):
        fact *= p
        upper = p**n
        lower = upper - p * (p - 1) ** n
        # multiplied through by p!
        scaled = fact * row[p]
        if not lower <= scaled <= upper:
            return False
    return True


def _peak_predicate_exact(n: int, p: int) -> bool:
    """True iff a_{p+1} <= a_p, i.e. ``(p+1)**(n-1) <= 2 p**n``."""
    return (p + 1) ** (n - 1) <= 2 * p**n


def _peak_gap(n: int, p: int) -> float:
    return (n - 1) * math.log1p(1.0 / p) - math.log(2.0) - math.log(p)


def m_threshold(n: int, exact_below: int = THRESHOLD_EXACT_CUTOFF, margin: float = 1e-9) -> int:
    """Peak index of ``p -> a_p(n)``: the smallest p with ``a_{p+1} <= a_p``.

    The predicate is monotone in p (log-concavity), so a binary search finds it.
    Below ``exact_below`` each probe is an exact integer comparison; above it
    the log-domain gap is used and only near-ties fall back to integers.
    """
    if n < 2:
        raise ValueError("m_threshold needs n >= 2")

    def falls(p: int) -> bool:
        if n <= exact_below:
            return _peak_predicate_exact(n, p)
        gap = _peak_gap(n, p)
        if abs(gap) <= margin:
            return _peak_predicate_exact(n, p)
        return gap <= 0

    # falls(n-1) always holds for n >= 2
    lo, hi = 1, n - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if falls(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def solve_peak_root(n: int) -> float:
    """Real root x_n of ``((x+1)/x)**n / (2(x+1)) = 1`` (diagnostics only)."""
    from scipy.optimize import brentq

    if n < 2:
        raise ValueError("needs n >= 2")
    f = lambda x: n * math.log1p(1.0 / x) - math.log(2.0 * (x + 1.0))
    lo, hi = 1e-9, float(n)
    if f(hi) > 0:
        return hi
    return brentq(f, lo, hi, xtol=1e-12)


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Schedule:
    """The variable budget ``n -> k_n``.

    ``family`` is one of identity, sqrt, power, n_over_ln, threshold, const,
    table.  Values are clipped into ``[1, n]``.  Schedules that do not grow
    (``const`` or a flat table) are accepted but flagged ``degenerate``.
    """

    family: str
    alpha: float = 1.0
    constant: int = 1
    table: tuple[int, ...] = ()
    spec: str = ""
    degenerate: bool = field(default=False, compare=False)

    def raw(self, n: int) -> int:
        f = self.family
        if f == "identity":
            return n
        if f == "sqrt":
            return math.isqrt(n)
        if f == "power":
            v = int(math.floor(n**self.alpha + 1e-12))
            return v
        if f == "n_over_ln":
            return n if n < 3 else int(n / math.log(n))
        if f == "threshold":
            return 1 if n < 2 else m_threshold(n)
        if f == "const":
            return self.constant
        if f == "table":
            if n > len(self.table):
                raise ValueError(f"schedule table has no entry for n={n}")
            return self.table[n - 1]
        raise ValueError(f"unknown schedule family {f!r}")

    def k(self, n: int) -> int:
        if n < 1:
            raise ValueError("n must be >= 1")
        return max(1, min(n, self.raw(n)))

    __call__ = k

    def check(self, n_max: int) -> list[str]:
        """Problems with this schedule over ``1..n_max`` (empty when fine)."""
        problems = []
        prev = 0
        for n in range(1, n_max + 1):
            raw = self.raw(n)
            if not 1 <= raw <= n:
                problems.append(f"k_{n}={raw} outside [1, {n}]")
            kn = self.k(n)
            if kn < prev:
                problems.append(f"k_{n}={kn} decreases")
            prev = kn
        if n_max >= 4 and self.k(n_max) <= self.k(max(1, n_max // 4)):
            problems.append("k_n does not grow over the queried range")
        return problems

    def __str__(self) -> str:
        return self.spec or self.family


def parse_schedule(text: str) -> Schedule:
    """Parse ``identity | sqrt | power:<a> | n_over_ln | threshold | const:<k> | file:<path>``."""
    text = text.strip()
    name, _, arg = text.partition(":")
    if name in ("identity", "sqrt", "n_over_ln", "threshold") and not arg:
        return Schedule(name, spec=text)
    if name == "power":
        alpha = float(arg)
        if not 0 < alpha <= 1:
            raise ValueError("power schedule needs 0 < alpha <= 1")
        return Schedule("power", alpha=alpha, spec=text)
    if name == "const":
        c = int(arg)
        warnings.warn("constant schedule does not tend to infinity", stacklevel=2)
        return Schedule("const", constant=c, spec=text, degenerate=True)
    if name == "file":
        with open(arg) as fh:
            values = tuple(int(line) for line in fh if line.strip())
        return schedule_from_table(values, spec=text)
    raise ValueError(f"cannot parse schedule {text!r}")


def schedule_from_table(values: Sequence[int], spec: str = "") -> Schedule:
    sched = Schedule("table", table=tuple(values), spec=spec or "table")
    degenerate = bool(sched.check(len(values))) if values else True
    if degenerate:
        warnings.warn("explicit schedule is not a valid growing budget", stacklevel=2)
        sched = Schedule("table", table=tuple(values), spec=sched.spec, degenerate=True)
    return sched


def _resolve_k(sched) -> Callable[[int], int]:
    if isinstance(sched, Schedule):
        return sched.k
    if isinstance(sched, int):
        return lambda n: max(1, min(n, sched))
    if isinstance(sched, str):
        return parse_schedule(sched).k
    return sched


# ---------------------------------------------------------------------------
# rat_n and windows


def rat(n: int, sched, exact_below: int | None = None) -> Fraction | LogReal:
    """``rat_n = B(n-1, k_n) / B(n, k_n)``.

    Exact rational for ``n <= exact_below`` (default :func:`exact_cutoff`),
    :class:`LogReal` above.  ``sched`` may be a :class:`Schedule`, a schedule
    string, a fixed ``int`` budget or any callable ``n -> k_n``.
    """
    if n < 2:
        raise ValueError("rat_n needs n >= 2")
    kn = _resolve_k(sched)(n)
    if exact_below is None:
        exact_below = exact_cutoff()
    if n <= exact_below:
        k = min(kn, n)
        # common denominator k! 2^k cancels
        return Fraction(_b_numerator(n - 1, k), _b_numerator(n, k))
    return b_log(n - 1, kn) / b_log(n, kn)


def rat_float(n: int, sched, exact_below: int | None = None) -> float:
    value = rat(n, sched, exact_below)
    return value.exp() if isinstance(value, LogReal) else float(value)


@dataclass(frozen=True)
class WindowParams:
    delta: int
    eta: int = 0


def window_bounds(n: int, k: int, w: WindowParams) -> tuple[int, int]:
    m = m_threshold(n) if n >= 2 else 1
    if k <= m:
        lo, hi = k - w.delta, k
    else:
        lo, hi = m - w.delta, min(m + w.eta, k)
    return max(lo, 1), hi


def window_mass(n: int, k: int, w: WindowParams) -> float:
    """Share of ``sum_{p<=k} a_p(n)`` carried by the concentration window.

    The window is ``[k - delta, k]`` below the peak and
    ``[M_n - delta, min(M_n + eta, k)]`` above it.  Only ``delta < k`` is
    checked; the asymptotic side conditions are not certified.
    """
    k = _check_nk(n, k)
    if w.delta < 0 or w.eta < 0:
        raise ValueError("window widths must be non-negative")
    if w.delta >= k:
        raise ValueError(f"window delta={w.delta} must be < k={k}")
    lo, hi = window_bounds(n, k, w)
    if lo > hi:
        raise ValueError("empty window")
    logs = _log_a(n, np.arange(1, k + 1))
    total = logsumexp(logs)
    return float(math.exp(logsumexp(logs[lo - 1 : hi]) - total))


def block_count_weights(n: int, k: int) -> list[int]:
    """Integer weights ``{n p} 2**(k-p)`` for p = 1..k (proportional to class counts)."""
    k = _check_nk(n, k)
    row = _cached_row(n, k)
    return [row[p] << (k - p) for p in range(1, k + 1)]


def log_block_count_weights(n: int, k: int) -> np.ndarray:
    """Log of ``{n p} 2**-p`` for p = 1..k without big integers.

    Runs the Stirling recurrence in the log domain, O(n k) float work.
    """
    k = _check_nk(n, k)
    logs = np.full(k, -np.inf)
    row = np.full(k + 1, -np.inf)
    row[0] = 0.0
    ps = np.arange(1, k + 1, dtype=float)
    logp = np.log(ps)
    for m in range(1, n + 1):
        new = np.full(k + 1, -np.inf)
        new[1:] = np.logaddexp(logp + row[1:], row[:-1])
        row = new
    logs[:] = row[1:] - ps * math.log(2.0)
    return logs


def cumulative(weights: Sequence[int]) -> list[int]:
    out, acc = [], 0
    for w in weights:
        acc += w
        out.append(acc)
    return out


def pick(cum: Sequence[int], r: int) -> int:
    """Index i with ``cum[i-1] <= r < cum[i]``."""
    return bisect_left(cum, r + 1)
