"""Pattern languages on and/or trees, simple tautologies and simple-x shapes.

A pattern language is given by productions, one per connective it allows::

    N = . | N or N | N and []
    P = . | P and P | P or []       (the and/or dual of N)
    S = . | S or S | [] and []

``.`` is a pattern leaf and ``[]`` a placeholder.  Decomposing a tree reads the
productions top-down; everything hanging below a placeholder belongs to the
placeholder.  Compositions ``L[M]`` decompose each placeholder subtree with M.

Node positions are preorder indices; leaf indices are 0-based left to right.
"""

from __future__ import annotations

import csv
import re
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .combinatorics import count_classes, stirling2
from .trees import (
    AND,
    LEAF,
    OR,
    CanonicalClass,
    CapacityError,
    _check_budget,
    _structures,
    canonicalize,
    enumerate_structures,
    key_of,
    labelling_arrays,
    labellings,
)

__all__ = [
    "PatternDecomposition",
    "PatternLang",
    "builtin",
    "census",
    "classify_simple_x",
    "compose",
    "decompose",
    "generate_expansions",
    "is_simple_contradiction",
    "is_simple_tautology",
    "random_expansion",
    "repetitions",
    "restrictions",
    "st_count_exact",
    "union",
    "write_census_csv",
]

REC, HOLE = "rec", "hole"


class AmbiguityError(RuntimeError):
    """A grammar produced zero or several parses of a tree."""


# ---------------------------------------------------------------------------
# indexed trees


class Node(NamedTuple):
    op: str
    left: int
    right: int
    leaf: int  # leaf index, -1 for internal nodes
    lo: int  # leaves below are lo..hi-1
    hi: int


@lru_cache(maxsize=1 << 14)
def index_structure(s) -> tuple[Node, ...]:
    nodes: list = []

    def rec(t, first_leaf: int) -> tuple[int, int]:
        me = len(nodes)
        if t == LEAF:
            nodes.append(Node(LEAF, -1, -1, first_leaf, first_leaf, first_leaf + 1))
            return me, first_leaf + 1
        nodes.append(None)
        left, mid = rec(t[1], first_leaf)
        right, end = rec(t[2], mid)
        nodes[me] = Node(t[0], left, right, -1, first_leaf, end)
        return me, end

    rec(s, 0)
    return tuple(nodes)


def _structure_of(t):
    return t.structure if isinstance(t, CanonicalClass) else t


# ---------------------------------------------------------------------------
# languages


class PatternDecomposition(NamedTuple):
    pattern_leaves: frozenset
    placeholder_roots: frozenset


class PatternLang:
    """A pattern language; subclasses implement ``_parse`` on indexed trees."""

    name = "?"

    def _parse(self, nodes: tuple[Node, ...], root: int) -> PatternDecomposition:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"PatternLang({self.name})"


class GrammarLang(PatternLang):
    """Productions ``op -> (left_role, right_role)``; several per op are allowed
    but then every tree must still have exactly one parse."""

    def __init__(self, name: str, productions: Sequence[tuple[str, str, str]]):
        self.name = name
        self.productions = tuple(productions)
        for op, a, b in self.productions:
            if op not in (AND, OR) or a not in (REC, HOLE) or b not in (REC, HOLE):
                raise ValueError(f"bad production {(op, a, b)!r}")

    def _parses(self, nodes, at: int) -> list[tuple[frozenset, frozenset]]:
        node = nodes[at]
        if node.op == LEAF:
            return [(frozenset([node.leaf]), frozenset())]
        out = []
        for op, a, b in self.productions:
            if op != node.op:
                continue
            sides = []
            for role, child in ((a, node.left), (b, node.right)):
                if role == HOLE:
                    sides.append([(frozenset(), frozenset([child]))])
                else:
                    sides.append(self._parses(nodes, child))
            for la, ha in sides[0]:
                for lb, hb in sides[1]:
                    out.append((la | lb, ha | hb))
        return out

    def _parse(self, nodes, root):
        found = self._parses(nodes, root)
        if len(found) != 1:
            raise AmbiguityError(f"{self.name}: {len(found)} parses")
        return PatternDecomposition(*found[0])


class ComposedLang(PatternLang):
    """``outer[inner]``: every outer placeholder subtree is parsed by inner."""

    def __init__(self, outer: PatternLang, inner: PatternLang, name: str | None = None):
        self.outer, self.inner = outer, inner
        self.name = name or f"{outer.name}[{inner.name}]"

    def _parse(self, nodes, root):
        top = self.outer._parse(nodes, root)
        leaves, holes = set(top.pattern_leaves), set()
        for h in top.placeholder_roots:
            sub = self.inner._parse(nodes, h)
            leaves |= sub.pattern_leaves
            holes |= sub.placeholder_roots
        return PatternDecomposition(frozenset(leaves), frozenset(holes))


class UnionLang(PatternLang):
    """Pattern leaves of either language; each uncovered leaf hangs below the
    deeper of its two placeholder roots."""

    def __init__(self, a: PatternLang, b: PatternLang, name: str | None = None):
        self.a, self.b = a, b
        self.name = name or f"{a.name}+{b.name}"

    def _parse(self, nodes, root):
        da = self.a._parse(nodes, root)
        db = self.b._parse(nodes, root)
        leaves = da.pattern_leaves | db.pattern_leaves
        owner_a = _leaf_owner(nodes, da.placeholder_roots)
        owner_b = _leaf_owner(nodes, db.placeholder_roots)
        holes = set()
        for leaf in range(nodes[root].lo, nodes[root].hi):
            if leaf in leaves:
                continue
            # both roots are ancestors of the leaf; in preorder the deeper one is larger
            holes.add(max(owner_a[leaf], owner_b[leaf]))
        return PatternDecomposition(frozenset(leaves), frozenset(holes))


def _leaf_owner(nodes, roots) -> dict[int, int]:
    owner = {}
    for r in roots:
        for leaf in range(nodes[r].lo, nodes[r].hi):
            owner[leaf] = r
    return owner


_N = GrammarLang("N", [(OR, REC, REC), (AND, REC, HOLE)])
_P = GrammarLang("P", [(AND, REC, REC), (OR, REC, HOLE)])
_S = GrammarLang("S", [(OR, REC, REC), (AND, HOLE, HOLE)])


def compose(outer: PatternLang, inner: PatternLang) -> PatternLang:
    return ComposedLang(outer, inner)


def union(a: PatternLang, b: PatternLang) -> PatternLang:
    return UnionLang(a, b)


def n_pow(j: int) -> PatternLang:
    if j < 1:
        raise ValueError("N_pow needs j >= 1")
    if j == 1:
        return _N
    lang: PatternLang = _N
    for i in range(2, j + 1):
        lang = ComposedLang(lang, _N, name=f"N_pow({i})")
    return lang


def builtin(name: str) -> PatternLang:
    """N, P, S, N_pow(j), N_oplus_P, or R(r) = N_pow(r+1)[N_oplus_P]."""
    name = name.strip()
    if name in ("N", "P", "S"):
        return {"N": _N, "P": _P, "S": _S}[name]
    if name == "N_oplus_P":
        return UnionLang(_N, _P, name="N_oplus_P")
    m = re.fullmatch(r"N_pow\((\d+)\)", name)
    if m:
        return n_pow(int(m.group(1)))
    m = re.fullmatch(r"R\((\d+)\)", name)
    if m:
        r = int(m.group(1))
        return ComposedLang(n_pow(r + 1), builtin("N_oplus_P"), name=name)
    raise ValueError(f"unknown pattern language {name!r}")


def decompose(lang: PatternLang, t) -> PatternDecomposition:
    nodes = index_structure(_structure_of(t))
    return lang._parse(nodes, 0)


def repetitions(lang: PatternLang, c: CanonicalClass) -> int:
    d = decompose(lang, c)
    blocks = {c.blocks[i] for i in d.pattern_leaves}
    return len(d.pattern_leaves) - len(blocks)


def restrictions(lang: PatternLang, c: CanonicalClass, gamma) -> int:
    d = decompose(lang, c)
    gamma = set(gamma)
    in_gamma = sum(1 for i in d.pattern_leaves if c.blocks[i] in gamma)
    return in_gamma + len(d.pattern_leaves) - len({c.blocks[i] for i in d.pattern_leaves})


# ---------------------------------------------------------------------------
# simple tautologies and simple-x


def path_leaves(nodes, root: int, op: str) -> list[int]:
    """Leaves joined to ``root`` by a path whose internal nodes are all ``op``."""
    out, stack = [], [root]
    while stack:
        at = stack.pop()
        node = nodes[at]
        if node.op == LEAF:
            out.append(node.leaf)
        elif node.op == op:
            stack.append(node.right)
            stack.append(node.left)
    return out


def _has_clash(c: CanonicalClass, leaves) -> bool:
    seen: dict[int, bool] = {}
    for i in leaves:
        b, x = c.blocks[i], c.negated[i]
        if seen.get(b, x) != x:
            return True
        seen[b] = x
    return False


def _simple_at(c: CanonicalClass, nodes, root: int, op: str) -> bool:
    return _has_clash(c, path_leaves(nodes, root, op))


def is_simple_tautology(c: CanonicalClass) -> bool:
    """Some variable occurs with both polarities among the or-path leaves."""
    return _simple_at(c, index_structure(c.structure), 0, OR)


def is_simple_contradiction(c: CanonicalClass) -> bool:
    return _simple_at(c, index_structure(c.structure), 0, AND)


def classify_simple_x(c: CanonicalClass) -> str:
    """``typeT``, ``typeX`` or ``none``; type T wins when both apply."""
    nodes = index_structure(c.structure)
    root = nodes[0]
    if root.op == LEAF:
        return "none"
    inner = OR if root.op == AND else AND  # path connective inside the sibling
    found_x = False
    for leaf_side, sib in ((root.left, root.right), (root.right, root.left)):
        node = nodes[leaf_side]
        if node.op != LEAF:
            continue
        if _simple_at(c, nodes, sib, inner):
            return "typeT"
        lit = (c.blocks[node.leaf], c.negated[node.leaf])
        for i in path_leaves(nodes, sib, inner):
            if (c.blocks[i], c.negated[i]) == lit:
                found_x = True
                break
    return "typeX" if found_x else "none"


# ---------------------------------------------------------------------------
# exact censuses


def census(n: int, k: int, lang: PatternLang, r: int, budget: int | None = None) -> tuple[int, int]:
    """Classes with exactly / at least r repetitions of ``lang``.

    Repetitions ignore polarities, so every partition carries weight 2^(n-p).
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    _check_budget(n, budget)
    hist = repetition_histogram(n, k, lang, budget)
    exact = hist.get(r, 0)
    at_least = sum(v for rr, v in hist.items() if rr >= r)
    return exact, at_least


def repetition_histogram(n: int, k: int, lang: PatternLang, budget: int | None = None) -> dict[int, int]:
    _check_budget(n, budget)
    k = min(k, n)
    parts = [(rgs, max(rgs)) for rgs in _partitions(n, k)]
    hist: dict[int, int] = {}
    by_leafset: dict[frozenset, int] = {}
    for s in _structures(n):
        leaves = decompose(lang, s).pattern_leaves
        by_leafset[leaves] = by_leafset.get(leaves, 0) + 1
    for leaves, mult in by_leafset.items():
        idx = sorted(leaves)
        for rgs, p in parts:
            reps = len(idx) - len({rgs[i] for i in idx})
            hist[reps] = hist.get(reps, 0) + mult * (1 << (n - p))
    return hist


@lru_cache(maxsize=32)
def _partitions(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    from .trees import enumerate_partitions

    return tuple(enumerate_partitions(n, k))


def _clash_mask(blocks: np.ndarray, neg: np.ndarray, leaves: Sequence[int], k: int) -> np.ndarray:
    if not leaves:
        return np.zeros(blocks.shape[0], dtype=bool)
    b = blocks[:, leaves]
    x = neg[:, leaves]
    hit = np.zeros(blocks.shape[0], dtype=bool)
    for v in range(1, k + 1):
        here = b == v
        hit |= (here & x).any(axis=1) & (here & ~x).any(axis=1)
    return hit


def st_count_exact(n: int, k: int, budget: int | None = None, by_blocks: bool = False):
    """Number of simple-tautology classes of size n with at most k variables.

    With ``by_blocks`` a dict ``p -> count`` is returned instead.
    """
    _check_budget(n, budget)
    k = min(k, n)
    blocks, neg = labelling_arrays(n, k)
    p_of = blocks.max(axis=1)
    groups: dict[tuple[int, ...], int] = {}
    for s in _structures(n):
        leaves = tuple(path_leaves(index_structure(s), 0, OR))
        groups[leaves] = groups.get(leaves, 0) + 1
    per_p = {p: 0 for p in range(1, k + 1)}
    for leaves, mult in groups.items():
        hit = _clash_mask(blocks, neg, list(leaves), k)
        counts = np.bincount(p_of[hit], minlength=k + 1)
        for p in range(1, k + 1):
            per_p[p] += mult * int(counts[p])
    return per_p if by_blocks else sum(per_p.values())


def simple_x_counts(n: int, k: int, budget: int | None = None) -> dict[str, int]:
    """Classes of each simple-x type, by running the recognizer on every class."""
    from .trees import enumerate_classes

    _check_budget(n, budget)
    out = {"typeT": 0, "typeX": 0, "none": 0}
    for c in enumerate_classes(n, k):
        out[classify_simple_x(c)] += 1
    return out


def write_census_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "k", "lang", "r", "count_exact", "count_ge", "total"])
    for row in rows:
        w.writerow(row)


# ---------------------------------------------------------------------------
# expansions


def _graft(base_struct, site: int, te_struct, op: str, te_left: bool):
    """Replace the subtree at preorder ``site`` by ``te op s`` or ``s op te``."""
    counter = -1

    def rec(t):
        nonlocal counter
        counter += 1
        me = counter
        if t == LEAF:
            new = t
        else:
            new = (t[0], rec(t[1]), rec(t[2]))
        if me == site:
            return (op, te_struct, new) if te_left else (op, new, te_struct)
        return new

    return rec(base_struct)


def _te_labellings(m: int, q: int, k: int) -> Iterator[tuple[tuple[int, bool], ...]]:
    """Labels for an expansion tree: base literals (any polarity) or new blocks
    numbered q+1.. by first occurrence with positive first occurrence."""
    labels: list = [None] * m

    def rec(i: int, top: int):
        if i == m:
            yield tuple(labels)
            return
        for b in range(1, q + 1):
            for x in (False, True):
                labels[i] = (b, x)
                yield from rec(i + 1, top)
        for b in range(q + 1, top + 1):
            for x in (False, True):
                labels[i] = (b, x)
                yield from rec(i + 1, top)
        if top < k:
            labels[i] = (top + 1, False)
            yield from rec(i + 1, top + 1)

    return rec(0, q)


def _expansion_ok(kind: str, op: str, te_nodes, te_labels, s_literals: set) -> bool:
    if kind == "T":
        path_op = OR if op == AND else AND
        seen: dict[int, bool] = {}
        for i in path_leaves(te_nodes, 0, path_op):
            b, x = te_labels[i]
            if seen.get(b, x) != x:
                return True
            seen[b] = x
        return False
    # X: te implies a literal that implies s (op = or), or dually (op = and)
    path_op = AND if op == OR else OR
    return any(te_labels[i] in s_literals for i in path_leaves(te_nodes, 0, path_op))


def _site_literals(base: CanonicalClass, nodes, site: int, op: str) -> set:
    # s or te = s needs te => l => s, so l sits on an or-path of s (dually for and)
    return {(base.blocks[i], base.negated[i]) for i in path_leaves(nodes, site, op)}


def generate_expansions(base: CanonicalClass, kind: str, target_n: int, k: int) -> Iterator[CanonicalClass]:
    """Distinct classes of size ``target_n`` obtained by one T- or X-expansion of ``base``.

    The stream is lazy and never repeats a class.
    """
    if kind not in ("T", "X"):
        raise ValueError("kind must be 'T' or 'X'")
    q = base.num_blocks
    if q > k:
        raise ValueError("base uses more blocks than the budget allows")
    m = target_n - base.size
    if m < 1:
        return
    nodes = index_structure(base.structure)
    seen: set = set()
    for op in (AND, OR):
        if kind == "T":
            sites = [(site, None) for site in range(len(nodes))]
        else:
            # X-expansions at s need s to carry a literal on the matching path
            sites = [(site, _site_literals(base, nodes, site, op)) for site in range(len(nodes))]
        for te in enumerate_structures(m):
            te_nodes = index_structure(te)
            for te_labels in _te_labellings(m, q, k):
                for site, lits in sites:
                    if not _expansion_ok(kind, op, te_nodes, te_labels, lits or set()):
                        continue
                    for te_left in (True, False):
                        c = _assemble(base, nodes, site, te, te_labels, op, te_left)
                        if c not in seen:
                            seen.add(c)
                            yield c


def _assemble(base, nodes, site, te, te_labels, op, te_left) -> CanonicalClass:
    struct = _graft(base.structure, site, te, op, te_left)
    lo = nodes[site].lo if te_left else nodes[site].hi
    base_labels = list(zip(base.blocks, base.negated))
    labels = base_labels[:lo] + list(te_labels) + base_labels[lo:]
    return canonicalize(struct, labels)


def random_expansion(base: CanonicalClass, kind: str, target_n: int, k: int, rng) -> CanonicalClass | None:
    """One random T- or X-expansion built directly (no rejection).

    Returns None when no expansion of this kind exists at the drawn site.
    """
    from .sampler import random_structure

    q = base.num_blocks
    m = target_n - base.size
    if m < 1 or q > k:
        return None
    nodes = index_structure(base.structure)
    op = AND if rng.random() < 0.5 else OR
    site = int(rng.integers(len(nodes)))
    te = random_structure(m, rng)
    te_nodes = index_structure(te)
    # random labels over base literals and up to k - q fresh blocks
    labels = []
    top = q
    for _ in range(m):
        if top < k and rng.random() < 0.3:
            top += 1
            labels.append((top, False))
        else:
            labels.append((int(rng.integers(1, top + 1)), bool(rng.integers(2))))
    if kind == "T":
        path = path_leaves(te_nodes, 0, OR if op == AND else AND)
        if len(path) < 2:
            return None
        i, j = rng.choice(len(path), size=2, replace=False)
        b = labels[path[i]][0]
        labels[path[i]] = (b, False)
        labels[path[j]] = (b, True)
    else:
        path = path_leaves(te_nodes, 0, AND if op == OR else OR)
        lits = sorted(_site_literals(base, nodes, site, op))
        if not lits or not path:
            return None
        labels[path[int(rng.integers(len(path)))]] = lits[int(rng.integers(len(lits)))]
    if not _expansion_ok(kind, op, te_nodes, labels, _site_literals(base, nodes, site, op)):
        return None
    return _assemble(base, nodes, site, te, tuple(labels), op, bool(rng.integers(2)))


def expansion_preserves_key(base: CanonicalClass, expanded: CanonicalClass) -> bool:
    return key_of(base) == key_of(expanded)
