"""Exact decisions on large and/or trees stored as flat preorder arrays.

A tree of n leaves is ``ops`` (length 2n-1; 0 leaf, 1 AND, 2 OR), ``blk``
(block of each leaf, 1-based) and ``neg`` (leaf polarity).  Satisfiability is
decided by a CDCL solver on a gate encoding of the tree.  A small compiled DPLL
(three-valued evaluation, forcing along and-paths for ``true`` and or-paths
for ``false``, chronological backtracking) is kept as an independent engine
for cross-checks.  Every search has a budget; running out is reported, never
guessed.
"""

from __future__ import annotations

from typing import NamedTuple

import numba as nb
import numpy as np

from .trees import KEY_CAP, FunctionKey, TruthTable, function_key

FOUND, NONE, BUDGET = 1, 0, -1
DEFAULT_BUDGET = 100_000
# step budget of the compiled search tried before the CDCL solver
QUICK_STEPS = 2_000


class Flat(NamedTuple):
    ops: np.ndarray
    right: np.ndarray
    end: np.ndarray
    node_leaf: np.ndarray
    blk: np.ndarray
    neg: np.ndarray
    num_blocks: int


@nb.njit(cache=True)
def _layout(ops):
    m = ops.shape[0]
    right = np.full(m, -1, np.int64)
    end = np.zeros(m, np.int64)
    node_leaf = np.full(m, -1, np.int64)
    for i in range(m - 1, -1, -1):
        if ops[i] == 0:
            end[i] = i + 1
        else:
            right[i] = end[i + 1]
            end[i] = end[right[i]]
    leaf = 0
    for i in range(m):
        if ops[i] == 0:
            node_leaf[i] = leaf
            leaf += 1
    return right, end, node_leaf


def flatten(ops, blk, neg) -> Flat:
    ops = np.ascontiguousarray(ops, dtype=np.int8)
    blk = np.ascontiguousarray(blk, dtype=np.int64)
    neg = np.ascontiguousarray(neg, dtype=np.bool_)
    right, end, node_leaf = _layout(ops)
    return Flat(ops, right, end, node_leaf, blk, neg, int(blk.max()))


def flat_from_class(c) -> Flat:
    from .trees import preorder

    return flatten(np.array(preorder(c.structure)), np.array(c.blocks), np.array(c.negated))


@nb.njit(cache=True)
def _eval3(ops, right, node_leaf, blk, neg, val, out):
    for i in range(ops.shape[0] - 1, -1, -1):
        op = ops[i]
        if op == 0:
            leaf = node_leaf[i]
            v = val[blk[leaf]]
            if v == 2:
                out[i] = 2
            else:
                out[i] = v ^ (1 if neg[leaf] else 0)
        else:
            a = out[i + 1]
            b = out[right[i]]
            if op == 1:
                if a == 0 or b == 0:
                    out[i] = 0
                elif a == 1 and b == 1:
                    out[i] = 1
                else:
                    out[i] = 2
            else:
                if a == 1 or b == 1:
                    out[i] = 1
                elif a == 0 and b == 0:
                    out[i] = 0
                else:
                    out[i] = 2
    return out[0]


@nb.njit(cache=True)
def _search(ops, right, end, node_leaf, blk, neg, val, target, budget):
    """Extend ``val`` (0/1, 2 = free) until the tree evaluates to ``target``.

    Returns FOUND (val holds the assignment), NONE or BUDGET.  Variables fixed
    on entry are never changed.
    """
    m = ops.shape[0]
    nvar = val.shape[0]
    out = np.empty(m, np.int8)
    trail = np.empty(nvar, np.int64)
    ntrail = 0
    dec_var = np.empty(nvar, np.int64)
    dec_pos = np.empty(nvar, np.int64)
    dec_flipped = np.zeros(nvar, np.bool_)
    ndec = 0
    stack_node = np.empty(m, np.int64)
    stack_want = np.empty(m, np.int8)
    steps = 0
    while True:
        steps += 1
        if steps > budget:
            return BUDGET
        conflict = False
        r = _eval3(ops, right, node_leaf, blk, neg, val, out)
        if r == target:
            return FOUND
        if r != 2:
            conflict = True
        branch = -1
        assigned = 0
        if not conflict:
            top = 0
            stack_node[0] = 0
            stack_want[0] = target
            top = 1
            while top > 0 and not conflict:
                top -= 1
                i = stack_node[top]
                w = stack_want[top]
                op = ops[i]
                if op == 0:
                    leaf = node_leaf[i]
                    b = blk[leaf]
                    want_var = w ^ (1 if neg[leaf] else 0)
                    if val[b] == 2:
                        val[b] = want_var
                        trail[ntrail] = b
                        ntrail += 1
                        assigned += 1
                    elif val[b] != want_var:
                        conflict = True
                    continue
                v = out[i]
                if v == w:
                    continue
                if v != 2:
                    conflict = True
                    continue
                if (op == 1 and w == 1) or (op == 2 and w == 0):
                    stack_node[top] = i + 1
                    stack_want[top] = w
                    stack_node[top + 1] = right[i]
                    stack_want[top + 1] = w
                    top += 2
                else:
                    a = out[i + 1]
                    c = out[right[i]]
                    absorbing = 1 if op == 1 else 0  # AND needs 0 from one side
                    if a == 1 - absorbing:
                        stack_node[top] = right[i]
                        stack_want[top] = w
                        top += 1
                    elif c == 1 - absorbing:
                        stack_node[top] = i + 1
                        stack_want[top] = w
                        top += 1
                    elif branch < 0:
                        branch = i
        if not conflict and assigned > 0:
            continue
        if not conflict:
            if branch < 0:
                # nothing forced and no choice point: cannot happen unless r == target
                conflict = True
            else:
                # decide the first free leaf below the choice point
                want_leaf = 1 if ops[branch] == 2 else 0
                chosen = -1
                chosen_val = 0
                for j in range(branch, end[branch]):
                    if ops[j] == 0:
                        leaf = node_leaf[j]
                        if val[blk[leaf]] == 2:
                            chosen = blk[leaf]
                            chosen_val = want_leaf ^ (1 if neg[leaf] else 0)
                            break
                dec_var[ndec] = chosen
                dec_pos[ndec] = ntrail
                dec_flipped[ndec] = False
                ndec += 1
                val[chosen] = chosen_val
                trail[ntrail] = chosen
                ntrail += 1
                continue
        # backtrack
        while ndec > 0 and dec_flipped[ndec - 1]:
            ndec -= 1
        if ndec == 0:
            for t in range(ntrail):
                val[trail[t]] = 2
            return NONE
        d = ndec - 1
        pos = dec_pos[d]
        var = dec_var[d]
        old = val[var]
        for t in range(pos, ntrail):
            val[trail[t]] = 2
        ntrail = pos
        val[var] = 1 - old
        trail[ntrail] = var
        ntrail += 1
        dec_flipped[d] = True


@nb.njit(cache=True)
def _eval2(ops, right, node_leaf, blk, neg, bits, out):
    for i in range(ops.shape[0] - 1, -1, -1):
        op = ops[i]
        if op == 0:
            leaf = node_leaf[i]
            out[i] = bits[blk[leaf]] ^ (1 if neg[leaf] else 0)
        elif op == 1:
            out[i] = out[i + 1] & out[right[i]]
        else:
            out[i] = out[i + 1] | out[right[i]]
    return out[0]


def _clauses(f: Flat, target: int) -> list[list[int]]:
    """Clauses satisfiable exactly when some assignment gives the tree ``target``.

    Plaisted-Greenbaum encoding: the tree is monotone in its gates, so one
    implication per gate suffices.  Blocks are variables 1..B; node i gets
    variable B+1+i.  For target 0 the dual tree (swapped connectives, flipped
    leaves) is encoded instead.
    """
    ops = f.ops.astype(np.int64)
    m = ops.shape[0]
    base = f.num_blocks + 1
    flip = target == 0
    lit = base + np.arange(m, dtype=np.int64)
    leaves = np.nonzero(ops == 0)[0]
    li = f.node_leaf[leaves]
    sign = np.where(f.neg[li] != flip, -1, 1)
    lit[leaves] = sign * f.blk[li]
    and_op, or_op = (2, 1) if flip else (1, 2)
    out = [[int(lit[0])]]
    for op, wide in ((and_op, False), (or_op, True)):
        g = np.nonzero(ops == op)[0]
        a = lit[g + 1]
        b = lit[f.right[g]]
        if wide:
            out += np.stack([-lit[g], a, b], axis=1).tolist()
        else:
            out += np.stack([-lit[g], a], axis=1).tolist()
            out += np.stack([-lit[g], b], axis=1).tolist()
    return out


class SatOracle:
    """Incremental solver pair for one tree: one instance per target value."""

    def __init__(self, f: Flat):
        self.f = f
        self._solvers: dict[int, object] = {}

    def _solver(self, target: int):
        if target not in self._solvers:
            from pysat.solvers import Glucose4

            self._solvers[target] = Glucose4(bootstrap_with=_clauses(self.f, target))
        return self._solvers[target]

    def find(self, target: int, fixed: dict | None = None, budget: int = DEFAULT_BUDGET):
        # most trees are settled by a short compiled search; its answers are exact
        f = self.f
        val = _fresh(f, fixed)
        status = _search(f.ops, f.right, f.end, f.node_leaf, f.blk, f.neg, val, np.int8(target), QUICK_STEPS)
        if status != BUDGET:
            return status, val
        sol = self._solver(target)
        assumptions = [b if v else -b for b, v in (fixed or {}).items()]
        sol.conf_budget(budget)
        res = sol.solve_limited(assumptions=assumptions)
        val = _fresh(self.f, fixed)
        if res is None:
            return BUDGET, val
        if not res:
            return NONE, val
        model = sol.get_model()
        nb_ = self.f.num_blocks
        for x in model[:nb_]:
            if val[abs(x)] == 2:
                val[abs(x)] = 1 if x > 0 else 0
        return FOUND, val

    def close(self):
        for sol in self._solvers.values():
            sol.delete()
        self._solvers.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fresh(f: Flat, fixed: dict | None = None) -> np.ndarray:
    val = np.full(f.num_blocks + 1, 2, dtype=np.int8)
    val[0] = 0
    if fixed:
        for b, v in fixed.items():
            val[b] = v
    return val


def find(f: Flat, target: int, fixed: dict | None = None, budget: int = DEFAULT_BUDGET, engine: str = "sat"):
    """(status, assignment) with the tree equal to ``target`` under ``fixed``.

    ``engine`` is "sat" (CDCL solver, budget in conflicts) or "dpll" (the
    compiled search above, budget in steps).
    """
    if engine == "sat":
        with SatOracle(f) as o:
            return o.find(target, fixed, budget)
    val = _fresh(f, fixed)
    status = _search(f.ops, f.right, f.end, f.node_leaf, f.blk, f.neg, val, np.int8(target), budget)
    return status, val


def is_satisfiable(f: Flat, fixed: dict | None = None, budget: int = DEFAULT_BUDGET, engine: str = "sat") -> int:
    """1 satisfiable, 0 not, -1 budget exhausted."""
    status, _ = find(f, 1, fixed, budget, engine)
    return {FOUND: 1, NONE: 0, BUDGET: -1}[status]


def is_tautology(f: Flat, fixed: dict | None = None, budget: int = DEFAULT_BUDGET, engine: str = "sat") -> int:
    status, _ = find(f, 0, fixed, budget, engine)
    return {FOUND: 0, NONE: 1, BUDGET: -1}[status]


def value(f: Flat, bits: np.ndarray) -> int:
    out = np.empty(f.ops.shape[0], np.int8)
    return int(_eval2(f.ops, f.right, f.node_leaf, f.blk, f.neg, bits.astype(np.int8), out))


class KeyUndecided(Exception):
    pass


def essential_closure(f: Flat, cap: int, budget: int = DEFAULT_BUDGET):
    """Essential variables and the table over them, or None if more than ``cap``.

    Grows a set S of proven-essential variables.  When some restriction to S
    is not constant, a true point and a false point of that restriction are
    joined by flipping one differing variable at a time; the variable whose
    flip changes the value is essential.
    """
    with SatOracle(f) as o:
        return _closure(f, o, cap, budget)


def _closure(f: Flat, o: SatOracle, cap: int, budget: int):
    S: list[int] = []
    while True:
        grown = False
        bits_tab = 0
        for a in range(1 << len(S)):
            fixed = {b: (a >> i) & 1 for i, b in enumerate(S)}
            s1, v1 = o.find(1, fixed, budget)
            s0, v0 = o.find(0, fixed, budget)
            if BUDGET in (s0, s1):
                raise KeyUndecided("search budget exhausted")
            if s1 == FOUND and s0 == FOUND:
                x = np.where(v1 == 2, 0, v1).astype(np.int8)
                y = np.where(v0 == 2, 0, v0).astype(np.int8)
                cur = value(f, x)
                for b in np.nonzero(x != y)[0]:
                    x[b] = y[b]
                    nxt = value(f, x)
                    if nxt != cur:
                        S.append(int(b))
                        break
                    cur = nxt
                else:  # pragma: no cover - the walk must end at the false point
                    raise AssertionError("sensitivity walk failed")
                grown = True
                break
            if s1 == FOUND:
                bits_tab |= 1 << a
        if not grown:
            return S, bits_tab
        if len(S) > cap:
            return None


def key_of_flat(f: Flat, cap: int = KEY_CAP, budget: int = DEFAULT_BUDGET) -> FunctionKey | None:
    """Function key, or None when more than ``cap`` variables are essential."""
    res = essential_closure(f, cap, budget)
    if res is None:
        return None
    S, bits = res
    return function_key(TruthTable(len(S), bits), cap)


def matches_key(f: Flat, key: FunctionKey, budget: int = DEFAULT_BUDGET) -> bool:
    res = essential_closure(f, key.essential, budget)
    if res is None:
        return False
    S, bits = res
    return function_key(TruthTable(len(S), bits)) == key
