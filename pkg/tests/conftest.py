"""Shared oracles for the test suite.

The oracles here are written from the definitions, independently of the
package: plain nested tuples, explicit variable names, brute-force loops.
"""

from __future__ import annotations

import itertools
from math import comb

import pytest

# results of tests/test_acceptance.py, reported in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


# ---------------------------------------------------------------------------
# trees as nested tuples: "." is a leaf, ("&", a, b) / ("|", a, b)


def shapes(n: int):
    """All connective-labelled plane binary trees with n leaves."""
    if n == 1:
        yield "."
        return
    for i in range(1, n):
        for a in shapes(i):
            for b in shapes(n - i):
                yield ("&", a, b)
                yield ("|", a, b)


def leaves_on_path(t, op):
    """Leaf indices joined to the root by op-only internal nodes."""
    out = []
    counter = [0]

    def walk(u, ok):
        if u == ".":
            if ok:
                out.append(counter[0])
            counter[0] += 1
            return
        walk(u[1], ok and u[0] == op)
        walk(u[2], ok and u[0] == op)

    walk(t, True)
    return out


def evaluate(t, labels, env):
    """labels: list of (var, negated) per leaf; env: dict var -> bool."""
    it = iter(labels)

    def rec(u):
        if u == ".":
            v, neg = next(it)
            return env[v] != neg
        a = rec(u[1])
        b = rec(u[2])
        return (a and b) if u[0] == "&" else (a or b)

    return rec(t)


def normal_form(t, labels):
    """Rename variables by first occurrence, flip so first occurrences are positive."""
    names: dict = {}
    flips: dict = {}
    out = []
    for v, neg in labels:
        if v not in names:
            names[v] = len(names) + 1
            flips[v] = neg
        out.append((names[v], neg != flips[v]))
    return t, tuple(out)


def brute_classes(n: int, k: int) -> set:
    """Every class of size n over at most k variables, by labelling with k names."""
    out = set()
    lits = [(v, s) for v in range(k) for s in (False, True)]
    for t in shapes(n):
        for labels in itertools.product(lits, repeat=n):
            out.add(normal_form(t, labels))
    return out


def truth_vector(t, labels):
    vars_ = sorted({v for v, _ in labels})
    rows = []
    for bits in itertools.product((False, True), repeat=len(vars_)):
        rows.append(evaluate(t, labels, dict(zip(vars_, bits))))
    return vars_, rows


def is_simple_taut(t, labels, op="|"):
    path = leaves_on_path(t, op)
    lits = {labels[i] for i in path}
    return any((v, not s) in lits for v, s in lits)


def pointed_counts(n: int, marks: int) -> int:
    """Structures with `marks` pointed leaves among those on or-only paths."""
    return sum(comb(len(leaves_on_path(t, "|")), marks) for t in shapes(n))


@pytest.fixture(scope="session")
def classes_small():
    return {(n, k): brute_classes(n, k) for n in range(1, 5) for k in range(1, n + 1)}


def as_pair(c):
    """A package class as (structure, labels) for the oracles above."""
    return c.structure, tuple(zip(c.blocks, c.negated))
