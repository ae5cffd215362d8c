"""Compiled batch sampler: draws classes and computes cheap per-sample flags.

Randomness comes from xoshiro256** seeded per chunk, so a chunk's output
depends only on its seed.  The split and partition tables are built in
Python (see ``sampler._tables``) from exact integers.
"""

from __future__ import annotations

import numba as nb
import numpy as np

# flag bits
F_SAT = 1  # some probe satisfies the tree (certain)
F_ST = 2  # simple tautology
F_SC = 4  # simple contradiction
F_SXT = 8  # simple-x of type T
F_SXX = 16  # simple-x of type X
F_ALL1 = 32  # every probe is true
F_ALL0 = 64  # every probe is false
F_CAND_X = 128  # probes agree with some literal
F_CAND_AND = 256  # probes agree with a conjunction of two literals
F_CAND_OR = 512  # probes agree with a disjunction of two literals


@nb.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def _next(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(cache=True)
def _uniform(s):
    return np.float64(_next(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def _below(s, m):
    # m is small; the float bias is below 2^-40
    return min(int(_uniform(s) * m), m - 1)


@nb.njit(cache=True)
def _search_cdf(cdf, lo, hi, u):
    """Smallest index i in [lo, hi) with cdf[i] > u (hi - 1 if rounding leaves none)."""
    hi -= 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@nb.njit(cache=True)
def _draw_structure(s, n, split_cdf, ops, sizes):
    """Preorder ops of a uniform connective-labelled tree with n leaves."""
    top = 0
    sizes[0] = n
    top = 1
    pos = 0
    while top > 0:
        top -= 1
        m = sizes[top]
        if m == 1:
            ops[pos] = 0
        else:
            u = _uniform(s)
            # split_cdf[m, i] = P(left size <= i), i = 1..m-1
            row = split_cdf[m]
            lo = 1
            hi = m - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if row[mid] > u:
                    hi = mid
                else:
                    lo = mid + 1
            i = lo
            ops[pos] = 1 if (_next(s) >> np.uint64(63)) == np.uint64(0) else 2
            sizes[top] = m - i
            sizes[top + 1] = i
            top += 2
        pos += 1


@nb.njit(cache=True)
def _draw_partition(s, n, p, rho, blk, new, join):
    """Uniform set partition of n leaves into exactly p blocks, as an RGS."""
    q = p
    for m in range(n, 0, -1):
        if _uniform(s) < rho[m, q]:
            new[m - 1] = False
            join[m - 1] = 1 + _below(s, q)
        else:
            new[m - 1] = True
            q -= 1
    top = 0
    for m in range(n):
        if new[m]:
            top += 1
            blk[m] = top
        else:
            blk[m] = join[m]


@nb.njit(cache=True)
def _layout(ops, m, right, end, node_leaf):
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
        else:
            node_leaf[i] = -1


@nb.njit(cache=True)
def _path_clash(ops, right, node_leaf, blk, neg, start, path_op, stack, stamp_pos, stamp_neg, epoch):
    """Does some block occur with both polarities among path_op-only leaves below start?"""
    top = 1
    stack[0] = start
    while top > 0:
        top -= 1
        i = stack[top]
        op = ops[i]
        if op == 0:
            leaf = node_leaf[i]
            b = blk[leaf]
            if neg[leaf]:
                if stamp_pos[b] == epoch:
                    return True
                stamp_neg[b] = epoch
            else:
                if stamp_neg[b] == epoch:
                    return True
                stamp_pos[b] = epoch
        elif op == path_op:
            stack[top] = right[i]
            stack[top + 1] = i + 1
            top += 2
    return False


@nb.njit(cache=True)
def _path_has(ops, right, node_leaf, blk, neg, start, path_op, stack, b0, x0):
    top = 1
    stack[0] = start
    while top > 0:
        top -= 1
        i = stack[top]
        op = ops[i]
        if op == 0:
            leaf = node_leaf[i]
            if blk[leaf] == b0 and neg[leaf] == x0:
                return True
        elif op == path_op:
            stack[top] = right[i]
            stack[top + 1] = i + 1
            top += 2
    return False


@nb.njit(cache=True)
def _probe(ops, right, node_leaf, blk, neg, words, out):
    full = ~np.uint64(0)
    for i in range(ops.shape[0] - 1, -1, -1):
        op = ops[i]
        if op == 0:
            leaf = node_leaf[i]
            w = words[blk[leaf]]
            out[i] = (w ^ full) if neg[leaf] else w
        elif op == 1:
            out[i] = out[i + 1] & out[right[i]]
        else:
            out[i] = out[i + 1] | out[right[i]]
    return out[0]


@nb.njit(cache=True)
def sample_batch(seed_state, count, n, k, p_cdf, split_cdf, rho, want_pairs, ops_out, blk_out, neg_out, p_out, flags_out):
    """Draw ``count`` classes; fill the per-sample arrays and flag words."""
    s = seed_state.copy()
    m = 2 * n - 1
    sizes = np.empty(m + 1, np.int64)
    right = np.full(m, -1, np.int64)
    end = np.empty(m, np.int64)
    node_leaf = np.empty(m, np.int64)
    new = np.empty(n, np.bool_)
    join = np.empty(n, np.int64)
    stack = np.empty(m + 1, np.int64)
    stamp_pos = np.zeros(k + 1, np.int64)
    stamp_neg = np.zeros(k + 1, np.int64)
    epoch = 0
    words = np.empty(k + 1, np.uint64)
    probe_out = np.empty(m, np.uint64)
    lits = np.empty(2 * k + 2, np.uint64)
    lit_blk = np.empty(2 * k + 2, np.int64)
    full = ~np.uint64(0)
    first = np.zeros(k + 1, np.bool_)
    for t in range(count):
        ops = ops_out[t]
        blk = blk_out[t]
        neg = neg_out[t]
        u = _uniform(s)
        p = _search_cdf(p_cdf, 0, k, u) + 1
        p_out[t] = p
        _draw_structure(s, n, split_cdf, ops, sizes)
        _draw_partition(s, n, p, rho, blk, new, join)
        for b in range(p + 1):
            first[b] = True
        for leaf in range(n):
            b = blk[leaf]
            if first[b]:
                neg[leaf] = False
                first[b] = False
            else:
                neg[leaf] = (_next(s) >> np.uint64(63)) == np.uint64(1)
        _layout(ops, m, right, end, node_leaf)
        for b in range(1, p + 1):
            words[b] = _next(s)
        f = _probe(ops, right, node_leaf, blk, neg, words, probe_out)
        fl = 0
        if f != np.uint64(0):
            fl |= F_SAT
        if f == full:
            fl |= F_ALL1
        if f == np.uint64(0):
            fl |= F_ALL0
        epoch += 1
        if _path_clash(ops, right, node_leaf, blk, neg, 0, 2, stack, stamp_pos, stamp_neg, epoch):
            fl |= F_ST
        epoch += 1
        if _path_clash(ops, right, node_leaf, blk, neg, 0, 1, stack, stamp_pos, stamp_neg, epoch):
            fl |= F_SC
        if n >= 2:
            root = ops[0]
            inner = 2 if root == 1 else 1
            lchild = 1
            rchild = right[0]
            typ = 0
            for side in range(2):
                leafnode = lchild if side == 0 else rchild
                sib = rchild if side == 0 else lchild
                if ops[leafnode] != 0:
                    continue
                epoch += 1
                if _path_clash(ops, right, node_leaf, blk, neg, sib, inner, stack, stamp_pos, stamp_neg, epoch):
                    typ = 2
                    break
                leaf = node_leaf[leafnode]
                if _path_has(ops, right, node_leaf, blk, neg, sib, inner, stack, blk[leaf], neg[leaf]):
                    typ = 1
            if typ == 2:
                fl |= F_SXT
            elif typ == 1:
                fl |= F_SXX
        # literal probe words: lits[2b] = x_b, lits[2b+1] = not x_b
        for b in range(1, p + 1):
            if words[b] == f or (words[b] ^ full) == f:
                fl |= F_CAND_X
        if want_pairs:
            nl = 0
            for b in range(1, p + 1):
                w = words[b]
                if (f & ~w) == np.uint64(0):
                    lits[nl] = w
                    lit_blk[nl] = b
                    nl += 1
                if (f & w) == np.uint64(0):
                    lits[nl] = w ^ full
                    lit_blk[nl] = b
                    nl += 1
            done = False
            for a in range(nl):
                for c in range(a + 1, nl):
                    if lit_blk[a] != lit_blk[c] and (lits[a] & lits[c]) == f:
                        fl |= F_CAND_AND
                        done = True
                        break
                if done:
                    break
            g = f ^ full
            nl = 0
            for b in range(1, p + 1):
                w = words[b]
                if (g & ~w) == np.uint64(0):
                    lits[nl] = w
                    lit_blk[nl] = b
                    nl += 1
                if (g & w) == np.uint64(0):
                    lits[nl] = w ^ full
                    lit_blk[nl] = b
                    nl += 1
            done = False
            for a in range(nl):
                for c in range(a + 1, nl):
                    if lit_blk[a] != lit_blk[c] and (lits[a] & lits[c]) == g:
                        fl |= F_CAND_OR
                        done = True
                        break
                if done:
                    break
        flags_out[t] = fl
    return s
