"""Uniform sampling of classes and Monte-Carlo estimates of event probabilities.

Two samplers share one distribution:

* the reference path (``sample_structure``, ``sample_partition``,
  ``sample_class``) inverts exact integer counts with big-integer uniforms;
* the batch path runs a compiled kernel on precomputed float tables and is
  used for estimates.  Each chunk of ``CHUNK`` samples is seeded from
  ``(seed, stream_id, n, k, chunk index)``, so results do not depend on how
  chunks are spread over worker processes.

Events are decided exactly.  Cheap certificates (simple tautologies, probe
assignments that satisfy the tree, simple-x shapes) settle most samples; the
rest go to the solver in :mod:`decide`.  Samples whose search exhausts its
budget are counted as unclassified, never as hits or misses.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels as K
from .combinatorics import (
    _resolve_k,
    block_count_weights,
    catalan,
    cumulative,
    exact_cutoff,
    log_block_count_weights,
    m_threshold,
    pick,
    rat_float,
    stirling2,
)
from .decide import DEFAULT_BUDGET, KeyUndecided, flatten, is_satisfiable, is_tautology, matches_key
from .trees import AND, LEAF, NAMED_KEYS, OR, CanonicalClass, FunctionKey, format_class, from_preorder

__all__ = [
    "CHUNK",
    "Estimate",
    "SamplerState",
    "batch_classes",
    "dump_samples",
    "estimate",
    "event_holds",
    "parse_event",
    "random_structure",
    "sample_block_count",
    "sample_class",
    "sample_partition",
    "sample_structure",
    "sweep",
    "write_estimates_csv",
]

CHUNK = 4096
# the batch kernel keeps O(n * max(n, k)) float tables
KERNEL_MAX_N = 6000

BASIC_EVENTS = (
    "satisfiable",
    "is_true",
    "is_false",
    "is_simple_tautology",
    "is_simple_contradiction",
    "is_simple_x",
    "is_simple_x_T",
    "is_simple_x_X",
)


# ---------------------------------------------------------------------------
# state


@dataclass
class SamplerState:
    """Seed plus substream id; the reference samplers draw from one generator
    per state, so the same request sequence replays exactly."""

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def chunk_seed(self, n: int, k: int, chunk: int) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, n, k, chunk))
        state = ss.generate_state(4, np.uint64)
        if not state.any():  # xoshiro must not start at zero
            state[0] = 1
        return state


def _rng(state) -> np.random.Generator:
    if isinstance(state, np.random.Generator):
        return state
    if isinstance(state, SamplerState):
        return state.generator()
    raise TypeError("expected a SamplerState or numpy Generator")


def _uniform_below(bound: int, rng: np.random.Generator) -> int:
    """Uniform integer in [0, bound) for arbitrarily large bound (rejection)."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    if bound < 1 << 62:
        return int(rng.integers(bound))
    bits = bound.bit_length()
    nbytes = (bits + 7) // 8
    excess = nbytes * 8 - bits
    while True:
        r = int.from_bytes(rng.bytes(nbytes), "little") >> excess
        if r < bound:
            return r


# ---------------------------------------------------------------------------
# reference samplers


def random_structure(n: int, rng: np.random.Generator):
    """Uniform connective-labelled tree with n leaves (recursive method)."""
    if n < 1:
        raise ValueError("n must be >= 1")

    def rec(m: int):
        if m == 1:
            return LEAF
        r = _uniform_below(catalan(m), rng)
        acc = 0
        for i in range(1, m):
            acc += catalan(i) * catalan(m - i)
            if r < acc:
                break
        op = AND if rng.integers(2) == 0 else OR
        return (op, rec(i), rec(m - i))

    return rec(n)


def sample_structure(n: int, state):
    return random_structure(n, _rng(state))


def sample_partition(n: int, p: int, state) -> tuple[int, ...]:
    """Uniform partition of n leaves into exactly p blocks, as a restricted growth string.

    Walks the recurrence {m q} = q {m-1 q} + {m-1 q-1} from the last leaf down:
    leaf m opens a block with probability {m-1 q-1}/{m q}, otherwise it joins
    one of the q blocks of the first m-1 leaves uniformly.
    """
    if not 1 <= p <= n:
        raise ValueError("need 1 <= p <= n")
    rng = _rng(state)
    q = p
    opens = [False] * n
    joins = [0] * n
    for m in range(n, 0, -1):
        total = stirling2(m, q)
        r = _uniform_below(total, rng)
        if r < stirling2(m - 1, q - 1):
            opens[m - 1] = True
            q -= 1
        else:
            joins[m - 1] = 1 + int(rng.integers(q))
    rgs, top = [], 0
    for m in range(n):
        if opens[m]:
            top += 1
            rgs.append(top)
        else:
            rgs.append(joins[m])
    return tuple(rgs)


class _Alias:
    """Walker/Vose alias table over indices 0..len(probs)-1."""

    def __init__(self, probs: np.ndarray):
        m = len(probs)
        scaled = np.asarray(probs, dtype=float) * m / probs.sum()
        self.prob = np.zeros(m)
        self.alias = np.zeros(m, dtype=np.int64)
        small = [i for i in range(m) if scaled[i] < 1]
        large = [i for i in range(m) if scaled[i] >= 1]
        while small and large:
            s, l = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] -= 1 - scaled[s]
            (small if scaled[l] < 1 else large).append(l)
        for i in small + large:
            self.prob[i] = 1.0

    def draw(self, rng: np.random.Generator) -> int:
        i = int(rng.integers(len(self.prob)))
        return i if rng.random() < self.prob[i] else int(self.alias[i])


@lru_cache(maxsize=32)
def _block_count_law(n: int, k: int):
    k = min(k, n)
    if n <= exact_cutoff():
        return "exact", cumulative(block_count_weights(n, k))
    logs = log_block_count_weights(n, k)
    return "alias", _Alias(np.exp(logs - logs.max()))


def sample_block_count(n: int, k: int, state) -> int:
    """p with probability {n p} 2^-p / B(n, k)."""
    rng = _rng(state)
    mode, law = _block_count_law(n, k)
    if mode == "exact":
        return pick(law, _uniform_below(law[-1], rng)) + 1
    return law.draw(rng) + 1


def sample_class(n: int, k: int, state) -> CanonicalClass:
    """Uniform over the classes of size n with at most k variables."""
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    k = min(k, n)
    rng = _rng(state)
    p = sample_block_count(n, k, rng)
    s = random_structure(n, rng)
    rgs = sample_partition(n, p, rng)
    seen, neg = set(), []
    for b in rgs:
        if b in seen:
            neg.append(bool(rng.integers(2)))
        else:
            neg.append(False)
            seen.add(b)
    return CanonicalClass(s, rgs, tuple(neg))


# ---------------------------------------------------------------------------
# batch kernel tables


@lru_cache(maxsize=8)
def _split_cdf(n: int) -> np.ndarray:
    """Row m: P(left subtree has <= i leaves), i = 1..m-1."""
    cdf = np.zeros((n + 1, max(n, 2)))
    exact = n <= 1024
    for m in range(2, n + 1):
        if exact:
            cm = catalan(m)
            acc = 0
            for i in range(1, m):
                acc += catalan(i) * catalan(m - i)
                cdf[m, i] = acc / cm
        else:
            i = np.arange(1, m)
            logw = _log_catalan(i) + _log_catalan(m - i) - _log_catalan(np.array([m]))[0]
            w = np.exp(logw)
            cdf[m, 1:m] = np.cumsum(w) / w.sum()
        cdf[m, m - 1] = 1.0
    return cdf


def _log_catalan(n) -> np.ndarray:
    # C_n = (2n-2)! / (n! (n-1)!) counts plane trees with n leaves
    n = np.asarray(n, dtype=float)
    return gammaln(2 * n - 1) - gammaln(n + 1) - gammaln(n)


@lru_cache(maxsize=8)
def _rho(n: int, k: int) -> np.ndarray:
    """rho[m, q] = q {m-1 q} / {m q}: chance that leaf m joins an earlier block."""
    rho = np.zeros((n + 1, k + 1))
    if n <= exact_cutoff():
        prev = [1] + [0] * k
        for m in range(1, n + 1):
            cur = [0] * (k + 1)
            for q in range(1, min(m, k) + 1):
                cur[q] = q * prev[q] + prev[q - 1]
                rho[m, q] = q * prev[q] / cur[q]
            prev = cur
    else:
        prev = np.full(k + 1, -np.inf)
        prev[0] = 0.0
        logq = np.log(np.arange(1, k + 1))
        for m in range(1, n + 1):
            cur = np.full(k + 1, -np.inf)
            cur[1:] = np.logaddexp(logq + prev[1:], prev[:-1])
            with np.errstate(invalid="ignore"):
                r = np.exp(logq + prev[1:] - cur[1:])
            rho[m, 1:] = np.nan_to_num(r, nan=0.0)
            prev = cur
    return rho


@lru_cache(maxsize=8)
def _p_cdf(n: int, k: int) -> np.ndarray:
    if n <= exact_cutoff():
        cum = cumulative(block_count_weights(n, k))
        return np.array([c / cum[-1] for c in cum])
    logs = log_block_count_weights(n, k)
    w = np.exp(logs - logs.max())
    return np.cumsum(w) / w.sum()


class Batch:
    """Arrays for one chunk of sampled classes."""

    def __init__(self, n: int, k: int, count: int):
        self.n, self.k, self.count = n, k, count
        self.ops = np.zeros((count, 2 * n - 1), np.int8)
        self.blk = np.zeros((count, n), np.int64)
        self.neg = np.zeros((count, n), np.bool_)
        self.p = np.zeros(count, np.int64)
        self.flags = np.zeros(count, np.int64)

    def flat(self, i: int):
        return flatten(self.ops[i], self.blk[i], self.neg[i])

    def canonical(self, i: int) -> CanonicalClass:
        s = from_preorder(self.ops[i].tolist())
        return CanonicalClass(s, tuple(int(b) for b in self.blk[i]), tuple(bool(x) for x in self.neg[i]))


def batch_classes(n: int, k: int, count: int, seed_state: np.ndarray, want_pairs: bool = True) -> Batch:
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    if n > KERNEL_MAX_N:
        raise ValueError(f"batch sampler supports n <= {KERNEL_MAX_N}")
    k = min(k, n)
    b = Batch(n, k, count)
    if n == 1:
        b.blk[:] = 1
        b.p[:] = 1
        b.flags[:] = K.F_SAT | K.F_CAND_X
        return b
    K.sample_batch(
        np.asarray(seed_state, dtype=np.uint64),
        count,
        n,
        k,
        _p_cdf(n, k),
        _split_cdf(n),
        _rho(n, k),
        want_pairs,
        b.ops,
        b.blk,
        b.neg,
        b.p,
        b.flags,
    )
    return b


# ---------------------------------------------------------------------------
# events


def parse_event(name: str):
    """Normalize an event name; returns (kind, argument)."""
    name = name.strip()
    if name in BASIC_EVENTS:
        return name, None
    if name.startswith("matches_key:"):
        key_text = name.split(":", 1)[1]
        return "matches_key", FunctionKey.parse(key_text)
    if name.startswith("has_repetitions:"):
        parts = name.split(":")
        if len(parts) != 3:
            raise ValueError("has_repetitions needs :<lang>:<r>")
        from .patterns import builtin

        return "has_repetitions", (builtin(parts[1]), int(parts[2]))
    raise ValueError(f"unknown event {name!r}")


def event_holds(c: CanonicalClass, event: str) -> bool:
    """Exact event predicate on one class, by truth table (small classes only)."""
    from .patterns import classify_simple_x, is_simple_contradiction, is_simple_tautology, repetitions
    from .trees import key_of, truth_table

    kind, arg = parse_event(event)
    if kind in ("satisfiable", "is_true", "is_false"):
        t = truth_table(c)
        if kind == "satisfiable":
            return t.bits != 0
        if kind == "is_true":
            return t.bits == (1 << (1 << t.m)) - 1
        return t.bits == 0
    if kind == "is_simple_tautology":
        return is_simple_tautology(c)
    if kind == "is_simple_contradiction":
        return is_simple_contradiction(c)
    if kind.startswith("is_simple_x"):
        typ = classify_simple_x(c)
        want = {"is_simple_x": ("typeT", "typeX"), "is_simple_x_T": ("typeT",), "is_simple_x_X": ("typeX",)}[kind]
        return typ in want
    if kind == "matches_key":
        return key_of(c) == arg
    lang, r = arg
    return repetitions(lang, c) >= r


def _decide(batch: Batch, i: int, kind: str, arg, budget: int) -> int:
    """1 hit, 0 miss, -1 unclassified, for sample i."""
    fl = int(batch.flags[i])
    if kind == "satisfiable":
        if fl & K.F_SAT:
            return 1
        if fl & K.F_SC:
            return 0
        return is_satisfiable(batch.flat(i), budget=budget)
    if kind == "is_true":
        if fl & K.F_ST:
            return 1
        if not fl & K.F_ALL1:
            return 0
        return is_tautology(batch.flat(i), budget=budget)
    if kind == "is_false":
        if fl & K.F_SC:
            return 1
        if not fl & K.F_ALL0:
            return 0
        s = is_satisfiable(batch.flat(i), budget=budget)
        return -1 if s < 0 else 1 - s
    if kind == "is_simple_tautology":
        return int(bool(fl & K.F_ST))
    if kind == "is_simple_contradiction":
        return int(bool(fl & K.F_SC))
    if kind == "is_simple_x":
        return int(bool(fl & (K.F_SXT | K.F_SXX)))
    if kind == "is_simple_x_T":
        return int(bool(fl & K.F_SXT))
    if kind == "is_simple_x_X":
        return int(bool(fl & K.F_SXX))
    if kind == "matches_key":
        key: FunctionKey = arg
        if key == NAMED_KEYS["true"]:
            return _decide(batch, i, "is_true", None, budget)
        if key == NAMED_KEYS["false"]:
            return _decide(batch, i, "is_false", None, budget)
        if key == NAMED_KEYS["x"]:
            if fl & (K.F_SXT | K.F_SXX):
                return 1
            if not fl & K.F_CAND_X:
                return 0
        elif key == NAMED_KEYS["x&y"]:
            if not fl & K.F_CAND_AND:
                return 0
        elif key == NAMED_KEYS["x|y"]:
            if not fl & K.F_CAND_OR:
                return 0
        try:
            return int(matches_key(batch.flat(i), key, budget=budget))
        except KeyUndecided:
            return -1
    if kind == "has_repetitions":
        from .patterns import repetitions

        lang, r = arg
        return int(repetitions(lang, batch.canonical(i)) >= r)
    raise ValueError(f"unknown event kind {kind!r}")


def _screen(flags: np.ndarray, kind: str, arg) -> tuple[np.ndarray, np.ndarray]:
    """Masks of samples settled as hits by flags alone, and of samples needing a search.

    Must agree with :func:`_decide` on every sample it settles.
    """
    def has(bit):
        return (flags & bit) != 0

    none = np.zeros(flags.shape, dtype=bool)
    if kind == "satisfiable":
        return has(K.F_SAT), ~has(K.F_SAT) & ~has(K.F_SC)
    if kind == "is_true" or (kind == "matches_key" and arg == NAMED_KEYS["true"]):
        return has(K.F_ST), ~has(K.F_ST) & has(K.F_ALL1)
    if kind == "is_false" or (kind == "matches_key" and arg == NAMED_KEYS["false"]):
        return has(K.F_SC), ~has(K.F_SC) & has(K.F_ALL0)
    if kind == "is_simple_tautology":
        return has(K.F_ST), none
    if kind == "is_simple_contradiction":
        return has(K.F_SC), none
    if kind == "is_simple_x":
        return has(K.F_SXT | K.F_SXX), none
    if kind == "is_simple_x_T":
        return has(K.F_SXT), none
    if kind == "is_simple_x_X":
        return has(K.F_SXX), none
    if kind == "matches_key":
        if arg == NAMED_KEYS["x"]:
            sx = has(K.F_SXT | K.F_SXX)
            return sx, ~sx & has(K.F_CAND_X)
        if arg == NAMED_KEYS["x&y"]:
            return none, has(K.F_CAND_AND)
        if arg == NAMED_KEYS["x|y"]:
            return none, has(K.F_CAND_OR)
    return none, ~none


def _run_chunk(task):
    n, k, seed, stream, chunk, count, events, budget = task
    state = SamplerState(seed, stream)
    batch = batch_classes(n, k, count, state.chunk_seed(n, k, chunk))
    parsed = [parse_event(e) for e in events]
    hits = [0] * len(events)
    unclassified = [0] * len(events)
    for j, (kind, arg) in enumerate(parsed):
        sure, open_ = _screen(batch.flags, kind, arg)
        hits[j] = int(sure.sum())
        for i in np.nonzero(open_)[0]:
            r = _decide(batch, int(i), kind, arg, budget)
            if r < 0:
                unclassified[j] += 1
            else:
                hits[j] += r
    return hits, unclassified


# ---------------------------------------------------------------------------
# estimates


@dataclass
class Estimate:
    event: str
    n: int
    k_n: int
    sample_count: int
    hit_count: int
    point: float
    stderr: float
    ci95: tuple[float, float]
    unclassified: int = 0
    m_n: int = 0
    rat_n: float = float("nan")

    def row(self) -> list:
        return [
            self.event,
            self.n,
            self.k_n,
            self.m_n,
            f"{self.rat_n:.10g}",
            self.sample_count,
            self.hit_count,
            f"{self.point:.10g}",
            f"{self.stderr:.6g}",
            f"{self.ci95[0]:.10g}",
            f"{self.ci95[1]:.10g}",
            self.unclassified,
        ]


CSV_HEADER = ["event", "n", "k_n", "M_n", "rat_n", "samples", "hits", "point", "stderr", "ci_lo", "ci_hi", "unclassified"]


def _interval(hits: int, samples: int) -> tuple[float, float, tuple[float, float]]:
    z = 1.959963984540054
    p = hits / samples
    se = math.sqrt(p * (1 - p) / samples)
    if hits < 30:
        # Wilson score interval: stays sensible for rare events
        denom = 1 + z * z / samples
        centre = (p + z * z / (2 * samples)) / denom
        half = z * math.sqrt(p * (1 - p) / samples + z * z / (4 * samples * samples)) / denom
        lo, hi = centre - half, centre + half
    else:
        lo, hi = p - z * se, p + z * se
    return p, se, (max(0.0, lo), min(1.0, hi))


def _default_workers() -> int:
    return int(os.environ.get("CATALAN_SAT_WORKERS", 1))


def sweep(
    n_values: Iterable[int],
    sched,
    events: Sequence[str],
    samples_per_point: int,
    state: SamplerState,
    workers: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> list[Estimate]:
    """One estimate per (n, event); every event is scored on the same samples."""
    events = list(events)
    for e in events:
        parse_event(e)
    if samples_per_point < 1:
        raise ValueError("samples_per_point must be >= 1")
    workers = workers or _default_workers()
    k_of = _resolve_k(sched)
    out: list[Estimate] = []
    for n in n_values:
        k = min(k_of(n), n)
        tasks = []
        nchunks = -(-samples_per_point // CHUNK)
        for c in range(nchunks):
            count = min(CHUNK, samples_per_point - c * CHUNK)
            tasks.append((n, k, state.seed, state.stream_id, c, count, tuple(events), budget))
        hits = np.zeros(len(events), dtype=np.int64)
        unc = np.zeros(len(events), dtype=np.int64)
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_chunk, tasks))
        else:
            results = [_run_chunk(t) for t in tasks]
        for h, u in results:
            hits += h
            unc += u
        m_n = m_threshold(n) if n >= 2 else 1
        r_n = rat_float(n, k_of) if n >= 2 else float("nan")
        for j, e in enumerate(events):
            p, se, ci = _interval(int(hits[j]), samples_per_point)
            out.append(Estimate(e, n, k, samples_per_point, int(hits[j]), p, se, ci, int(unc[j]), m_n, r_n))
    return out


def estimate(n: int, sched, event: str, samples: int, state: SamplerState, workers: int | None = None) -> Estimate:
    return sweep([n], sched, [event], samples, state, workers)[0]


def write_estimates_csv(rows: Iterable[Estimate], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for e in rows:
        w.writerow(e.row())


def dump_samples(n: int, k: int, count: int, state: SamplerState, fh) -> None:
    """One class per line: ``n,k,seed,stream,index,<class>``."""
    k = min(k, n)
    done = 0
    chunk = 0
    while done < count:
        m = min(CHUNK, count - done)
        batch = batch_classes(n, k, m, state.chunk_seed(n, k, chunk), want_pairs=False)
        for i in range(m):
            fh.write(f"{n},{k},{state.seed},{state.stream_id},{done + i},{format_class(batch.canonical(i))}\n")
        done += m
        chunk += 1
