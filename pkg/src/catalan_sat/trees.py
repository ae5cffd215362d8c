"""The and/or tree model: structures, canonical classes, truth tables, function keys.

A structure is either the leaf ``LEAF`` or a tuple ``(op, left, right)`` with
``op`` in ``("&", "|")``.  A class is a structure plus a leaf labelling in
normal form: blocks numbered by first occurrence (1-based) and the first leaf
of every block positive.  Renaming variables or flipping one variable's
polarity everywhere never changes the normal form, so classes and normal
forms are in bijection.

Truth tables are Python ints: bit ``a`` holds f at the assignment where
variable j (0-based) takes the value ``(a >> j) & 1``.
"""

from __future__ import annotations

import itertools
import math
import os
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .combinatorics import count_classes

__all__ = [
    "AND",
    "OR",
    "LEAF",
    "NAMED_KEYS",
    "CanonicalClass",
    "CapacityError",
    "ComplexityAtlas",
    "FunctionKey",
    "TruthTable",
    "build_atlas",
    "canonicalize",
    "class_probability_exact",
    "dual",
    "enumerate_classes",
    "enumerate_partitions",
    "enumerate_structures",
    "evaluate",
    "exact_distribution",
    "format_class",
    "function_key",
    "key_name",
    "key_of",
    "parse_class",
    "structure_size",
    "truth_table",
]

AND, OR, LEAF = "&", "|", "."

TABLE_CAP = 20
KEY_CAP = 6
DEFAULT_ENUM_BUDGET = 6


class CapacityError(RuntimeError):
    """A configured size cap (truth table, canonicalization, enumeration) was exceeded."""


def enum_budget() -> int:
    return int(os.environ.get("CATALAN_SAT_ENUM_BUDGET", DEFAULT_ENUM_BUDGET))


def _check_budget(n: int, budget: int | None) -> None:
    budget = enum_budget() if budget is None else budget
    if n > budget:
        raise CapacityError(f"n={n} exceeds the exhaustive enumeration budget {budget}")


# ---------------------------------------------------------------------------
# structures


def structure_size(s) -> int:
    if s == LEAF:
        return 1
    return structure_size(s[1]) + structure_size(s[2])


@lru_cache(maxsize=None)
def _structures(n: int) -> tuple:
    if n == 1:
        return (LEAF,)
    out = []
    for i in range(1, n):
        for op in (AND, OR):
            for left in _structures(i):
                for right in _structures(n - i):
                    out.append((op, left, right))
    return tuple(out)


def enumerate_structures(n: int) -> Iterator:
    """Every connective-labelled plane tree with n leaves, in a fixed order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return iter(_structures(n))


def preorder(s) -> list[int]:
    """Flat preorder code: 0 leaf, 1 AND, 2 OR."""
    out = []
    stack = [s]
    while stack:
        node = stack.pop()
        if node == LEAF:
            out.append(0)
        else:
            out.append(1 if node[0] == AND else 2)
            stack.append(node[2])
            stack.append(node[1])
    return out


def from_preorder(code: Sequence[int]):
    pos = 0

    def build():
        nonlocal pos
        c = code[pos]
        pos += 1
        if c == 0:
            return LEAF
        left = build()
        right = build()
        return (AND if c == 1 else OR, left, right)

    s = build()
    if pos != len(code):
        raise ValueError("trailing symbols in preorder code")
    return s


def swap_connectives(s):
    if s == LEAF:
        return LEAF
    return (OR if s[0] == AND else AND, swap_connectives(s[1]), swap_connectives(s[2]))


# ---------------------------------------------------------------------------
# classes


class CanonicalClass(NamedTuple):
    structure: object
    blocks: tuple[int, ...]
    negated: tuple[bool, ...]

    @property
    def size(self) -> int:
        return len(self.blocks)

    @property
    def num_blocks(self) -> int:
        return max(self.blocks)

    def __str__(self) -> str:
        return format_class(self)


def canonicalize(structure, labels: Sequence[tuple[object, bool]]) -> CanonicalClass:
    """Normal form of a labelled tree; ``labels`` are (variable, negated) per leaf."""
    if len(labels) != structure_size(structure):
        raise ValueError("one label per leaf expected")
    ids: dict = {}
    first_neg: dict = {}
    blocks, neg = [], []
    for var, bar in labels:
        if var not in ids:
            ids[var] = len(ids) + 1
            first_neg[var] = bool(bar)
        blocks.append(ids[var])
        neg.append(bool(bar) != first_neg[var])
    return CanonicalClass(structure, tuple(blocks), tuple(neg))


def is_canonical(c: CanonicalClass) -> bool:
    return canonicalize(c.structure, list(zip(c.blocks, c.negated))) == c


def dual(c: CanonicalClass) -> CanonicalClass:
    """Swap AND/OR and flip every literal; the flip is absorbed by the normal form."""
    return canonicalize(swap_connectives(c.structure), [(b, not x) for b, x in zip(c.blocks, c.negated)])


def _rgs(n: int, kmax: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings (1-based) with at most kmax blocks, lex order."""
    word = [1] * n

    def rec(i: int, top: int):
        if i == n:
            yield tuple(word)
            return
        for b in range(1, min(top + 1, kmax) + 1):
            word[i] = b
            yield from rec(i + 1, max(top, b))

    if n == 0:
        return iter(())
    return rec(1, 1)


def enumerate_partitions(n: int, kmax: int) -> Iterator[tuple[int, ...]]:
    return _rgs(n, kmax)


def _free_leaves(rgs: Sequence[int]) -> list[int]:
    seen, free = set(), []
    for i, b in enumerate(rgs):
        if b in seen:
            free.append(i)
        seen.add(b)
    return free


def _polarities(rgs: Sequence[int]) -> Iterator[tuple[bool, ...]]:
    free = _free_leaves(rgs)
    f = len(free)
    for c in range(1 << f):
        neg = [False] * len(rgs)
        for j, leaf in enumerate(free):
            neg[leaf] = bool((c >> (f - 1 - j)) & 1)
        yield tuple(neg)


@lru_cache(maxsize=64)
def labellings(n: int, k: int) -> tuple[tuple[tuple[int, ...], tuple[bool, ...]], ...]:
    """All normal-form labellings of n leaves with at most k blocks, in order."""
    return tuple((rgs, neg) for rgs in _rgs(n, k) for neg in _polarities(rgs))


def enumerate_classes(n: int, k: int) -> Iterator[CanonicalClass]:
    """Every class of size n with at most k variables, exactly once.

    Order: structures, then partitions (lex), then free polarities (binary).
    """
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    k = min(k, n)
    labs = labellings(n, k)
    for s in _structures(n):
        for rgs, neg in labs:
            yield CanonicalClass(s, rgs, neg)


# ---------------------------------------------------------------------------
# evaluation


def _eval(s, values: Iterator[bool]) -> bool:
    if s == LEAF:
        return next(values)
    # evaluate both children so the leaf iterator stays aligned
    a = _eval(s[1], values)
    b = _eval(s[2], values)
    return (a and b) if s[0] == AND else (a or b)


def evaluate(c: CanonicalClass, assignment: Sequence[bool]) -> bool:
    if len(assignment) != c.num_blocks:
        raise ValueError(f"assignment has {len(assignment)} values, class has {c.num_blocks} blocks")
    lits = (bool(assignment[b - 1]) != x for b, x in zip(c.blocks, c.negated))
    return _eval(c.structure, lits)


class TruthTable(NamedTuple):
    m: int
    bits: int

    def entry(self, a: int) -> bool:
        return bool((self.bits >> a) & 1)

    def entries(self) -> list[bool]:
        return [self.entry(a) for a in range(1 << self.m)]


def _var_mask(j: int, m: int) -> int:
    """Table of variable j over m variables."""
    size = 1 << m
    block = 1 << j
    pattern = ((1 << block) - 1) << block  # one period: block zeros then block ones
    period = 2 * block
    mask = 0
    for start in range(0, size, period):
        mask |= pattern << start
    return mask


@lru_cache(maxsize=64)
def _var_masks(m: int) -> tuple[int, ...]:
    return tuple(_var_mask(j, m) for j in range(m))


def _table_of(s, leaves: Iterator[int], full: int) -> int:
    if s == LEAF:
        return next(leaves)
    a = _table_of(s[1], leaves, full)
    b = _table_of(s[2], leaves, full)
    return a & b if s[0] == AND else a | b


def truth_table(c: CanonicalClass, cap: int = TABLE_CAP) -> TruthTable:
    m = c.num_blocks
    if m > cap:
        raise CapacityError(f"{m} variables exceed the truth-table cap {cap}")
    full = (1 << (1 << m)) - 1
    masks = _var_masks(m)
    leaves = (masks[b - 1] ^ full if x else masks[b - 1] for b, x in zip(c.blocks, c.negated))
    return TruthTable(m, _table_of(c.structure, leaves, full))


# ---------------------------------------------------------------------------
# function keys


class FunctionKey(NamedTuple):
    """``canonical`` packs the minimal table with entry 0 as most significant bit."""

    essential: int
    canonical: int

    @property
    def bits(self) -> str:
        return format(self.canonical, f"0{1 << self.essential}b")

    def __str__(self) -> str:
        return f"{self.essential}:{self.bits}"

    @classmethod
    def parse(cls, text: str) -> "FunctionKey":
        text = text.strip()
        named = NAMED_KEYS.get(text)
        if named is not None:
            return named
        e, _, bits = text.partition(":")
        e = int(e)
        if len(bits) != 1 << e or set(bits) - {"0", "1"}:
            raise ValueError(f"malformed function key {text!r}")
        return cls(e, int(bits, 2))


def essential_variables(t: TruthTable) -> list[int]:
    out = []
    full = (1 << (1 << t.m)) - 1
    for j, mask in enumerate(_var_masks(t.m)):
        hi = t.bits & mask
        lo = t.bits & (full ^ mask)
        if hi >> (1 << j) != lo:
            out.append(j)
    return out


def project(t: TruthTable, keep: Sequence[int]) -> TruthTable:
    """Restrict to variables ``keep`` (others must be inessential; they are set to 0)."""
    e = len(keep)
    bits = 0
    for a in range(1 << e):
        src = 0
        for i, j in enumerate(keep):
            if (a >> i) & 1:
                src |= 1 << j
        if (t.bits >> src) & 1:
            bits |= 1 << a
    return TruthTable(e, bits)


@lru_cache(maxsize=None)
def _orbit_maps(e: int) -> np.ndarray:
    """Index maps of all permutations x flips: row r sends a to its source entry."""
    size = 1 << e
    a = np.arange(size)
    rows = []
    for perm in itertools.permutations(range(e)):
        src = np.zeros(size, dtype=np.int64)
        for i, j in enumerate(perm):
            src |= ((a >> i) & 1) << j
        for flip in range(size):
            rows.append(src ^ flip)
    return np.array(rows, dtype=np.int64)


def _pack_msb(bits: np.ndarray) -> np.ndarray:
    """Rows of 0/1 entries to ints, entry 0 most significant (lex order = int order)."""
    width = bits.shape[-1]
    weights = np.left_shift(np.uint64(1), np.arange(width - 1, -1, -1, dtype=np.uint64))
    return (bits.astype(np.uint64) * weights).sum(axis=-1, dtype=np.uint64)


@lru_cache(maxsize=1 << 16)
def _canonical(e: int, bits: int) -> int:
    size = 1 << e
    entries = np.array([(bits >> a) & 1 for a in range(size)], dtype=np.uint8)
    images = entries[_orbit_maps(e)]
    return int(_pack_msb(images).min())


def function_key(t: TruthTable, cap: int = KEY_CAP) -> FunctionKey:
    """Essential variables only, minimized over renamings and polarity flips."""
    ess = essential_variables(t)
    if len(ess) > cap:
        raise CapacityError(f"{len(ess)} essential variables exceed the key cap {cap}")
    reduced = project(t, ess) if len(ess) < t.m else t
    return FunctionKey(reduced.m, _canonical(reduced.m, reduced.bits))


def key_of(c: CanonicalClass) -> FunctionKey:
    return function_key(truth_table(c))


def _named_keys() -> dict[str, FunctionKey]:
    x = canonicalize(LEAF, [("x", False)])
    conj = canonicalize((AND, LEAF, LEAF), [("x", False), ("y", False)])
    disj = canonicalize((OR, LEAF, LEAF), [("x", False), ("y", False)])
    return {
        "true": FunctionKey(0, 1),
        "false": FunctionKey(0, 0),
        "x": key_of(x),
        "x&y": key_of(conj),
        "x|y": key_of(disj),
    }


NAMED_KEYS: dict[str, FunctionKey] = {}
NAMED_KEYS.update(_named_keys())


def key_name(key: FunctionKey) -> str:
    for name, k in NAMED_KEYS.items():
        if k == key:
            return name
    return str(key)


# ---------------------------------------------------------------------------
# formatting


def format_class(c: CanonicalClass) -> str:
    """Single-line form such as ``((1:+ & 1:-) | 2:+)``."""
    labels = iter(zip(c.blocks, c.negated))

    def rec(s) -> str:
        if s == LEAF:
            b, x = next(labels)
            return f"{b}:{'-' if x else '+'}"
        left = rec(s[1])
        right = rec(s[2])
        return f"({left} {s[0]} {right})"

    return rec(c.structure)


def parse_class(text: str) -> CanonicalClass:
    """Inverse of :func:`format_class`; the result is re-canonicalized."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0
    labels: list[tuple[int, bool]] = []

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError(f"unexpected end of class text {text!r}")
        tok = tokens[pos]
        pos += 1
        return tok

    def rec():
        tok = take()
        if tok == "(":
            left = rec()
            op = take()
            if op not in (AND, OR):
                raise ValueError(f"bad connective {op!r}")
            right = rec()
            if take() != ")":
                raise ValueError("missing ')'")
            return (op, left, right)
        var, sep, sign = tok.partition(":")
        if not sep or sign not in "+-" or not sign:
            raise ValueError(f"bad leaf {tok!r}")
        labels.append((int(var), sign == "-"))
        return LEAF

    s = rec()
    if pos != len(tokens):
        raise ValueError(f"trailing text in {text!r}")
    return canonicalize(s, labels)


# ---------------------------------------------------------------------------
# vectorized tables for exhaustive passes


@lru_cache(maxsize=32)
def labelling_arrays(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(blocks, negated)`` arrays of shape (L, n) matching :func:`labellings` order."""
    labs = labellings(n, min(k, n))
    blocks = np.array([r for r, _ in labs], dtype=np.int64).reshape(len(labs), n)
    neg = np.array([x for _, x in labs], dtype=bool).reshape(len(labs), n)
    return blocks, neg


def _leaf_tables(blocks: np.ndarray, neg: np.ndarray, m: int) -> np.ndarray:
    if m > 6:
        raise CapacityError("vectorized tables support at most 6 variables")
    width = 1 << m
    full = np.uint64((1 << width) - 1)
    masks = np.array((0,) + _var_masks(m), dtype=np.uint64)
    lit = masks[blocks]
    return np.where(neg, lit ^ full, lit)


def _eval_tables(s, leaf_tables: np.ndarray) -> np.ndarray:
    pos = 0

    def rec(node):
        nonlocal pos
        if node == LEAF:
            col = leaf_tables[:, pos]
            pos += 1
            return col
        a = rec(node[1])
        b = rec(node[2])
        return a & b if node[0] == AND else a | b

    return rec(s)


def structure_tables(s, n: int, k: int) -> np.ndarray:
    """Truth tables (over min(n, k) variables, as uint64) of every labelling of ``s``."""
    blocks, neg = labelling_arrays(n, k)
    m = min(n, k)
    return _eval_tables(s, _leaf_tables(blocks, neg, m))


def all_true(m: int) -> int:
    return (1 << (1 << m)) - 1


# ---------------------------------------------------------------------------
# atlas and exact probabilities


class AtlasEntry(NamedTuple):
    size: int
    witness: CanonicalClass | None

    @property
    def L(self) -> int:
        return self.size


class ComplexityAtlas(NamedTuple):
    entries: dict
    exhausted_up_to: int

    def complexity(self, key: FunctionKey) -> int:
        return self.entries[key].size

    def multiplicity(self, key: FunctionKey) -> int:
        return self.entries[key].size - key.essential

    def rows(self) -> Iterator[tuple[FunctionKey, int, int, int, CanonicalClass | None]]:
        for key, entry in sorted(self.entries.items(), key=lambda kv: (kv[1].size, kv[0])):
            yield key, entry.size, key.essential, entry.size - key.essential, entry.witness


def _keys_for_tables(tables: np.ndarray, m: int, cap: int) -> list[FunctionKey]:
    uniq, inverse = np.unique(tables, return_inverse=True)
    keys = [function_key(TruthTable(m, int(t)), cap) for t in uniq]
    return [keys[i] for i in inverse.ravel()]


def build_atlas(max_size: int, budget: int | None = None) -> ComplexityAtlas:
    """Minimal size and first witness for every function realized up to ``max_size``.

    Constants are seeded with size 0 and no witness.
    """
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    _check_budget(max_size, budget)
    entries = {
        FunctionKey(0, 1): AtlasEntry(0, None),
        FunctionKey(0, 0): AtlasEntry(0, None),
    }
    for n in range(1, max_size + 1):
        blocks, neg = labelling_arrays(n, n)
        for s in _structures(n):
            tables = structure_tables(s, n, n)
            uniq, first = np.unique(tables, return_index=True)
            for t, idx in zip(uniq, first):
                key = function_key(TruthTable(n, int(t)))
                if key not in entries:
                    labs = labellings(n, n)[idx]
                    entries[key] = AtlasEntry(n, CanonicalClass(s, labs[0], labs[1]))
    return ComplexityAtlas(entries, max_size)


def _popcount_classes(key: FunctionKey) -> tuple[int, int]:
    return key.essential, bin(key.canonical).count("1")


def class_probability_exact(n: int, k: int, key: FunctionKey, budget: int | None = None) -> Fraction:
    """``P_n<f>``: share of the size-n classes (at most k variables) computing ``key``."""
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    _check_budget(n, budget)
    k = min(k, n)
    m = k
    e, ones = _popcount_classes(key)
    if e > m:
        return Fraction(0)
    want = ones << (m - e)  # each inessential variable doubles the ones count
    hits = 0
    for s in _structures(n):
        tables = structure_tables(s, n, k)
        uniq, counts = np.unique(tables, return_counts=True)
        for t, cnt in zip(uniq, counts):
            tt = TruthTable(m, int(t))
            if bin(tt.bits).count("1") != want:
                continue
            if function_key(tt) == key:
                hits += int(cnt)
    return Fraction(hits, count_classes(n, k))


def exact_distribution(n: int, k: int, budget: int | None = None) -> dict[FunctionKey, int]:
    """Class counts per function key at size n."""
    _check_budget(n, budget)
    k = min(k, n)
    dist: dict[FunctionKey, int] = {}
    for s in _structures(n):
        tables = structure_tables(s, n, k)
        uniq, counts = np.unique(tables, return_counts=True)
        for t, cnt in zip(uniq, counts):
            key = function_key(TruthTable(k, int(t)))
            dist[key] = dist.get(key, 0) + int(cnt)
    return dist


def iter_labelled(classes: Iterable[CanonicalClass]) -> Iterator[tuple[CanonicalClass, TruthTable]]:
    for c in classes:
        yield c, truth_table(c)
