"""Command-line entry point: ``catalan-sat <command> [options]``.

Every output begins with ``#`` metadata lines (command line, seed, version,
resolved configuration) so a table can be reproduced from its own header.
JSON output carries the same metadata under ``"meta"``.

Exit codes: 0 success, 1 verification failure, 2 domain error, 64 usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import shlex
import sys
import warnings
from fractions import Fraction

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2, 64

ENV_KEYS = {
    "exact_cutoff": "CATALAN_SAT_EXACT_CUTOFF",
    "enum_budget": "CATALAN_SAT_ENUM_BUDGET",
    "workers": "CATALAN_SAT_WORKERS",
}
SUITES = ("bonferroni", "unimodal", "series", "dc-brackets", "census", "duality")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    """``8,16,32`` or ``8..64`` (inclusive) or ``8..512*2`` (geometric)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, _, rest = part.partition("..")
            hi, _, step = rest.partition("*")
            lo_i, hi_i = int(lo), int(hi)
            if step:
                v = lo_i
                while v <= hi_i:
                    out.append(v)
                    v *= int(step)
            else:
                out.extend(range(lo_i, hi_i + 1))
        elif part:
            out.append(int(part))
    return out


def _fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


# ---------------------------------------------------------------------------
# output


class Output:
    """Collects rows and writes them as CSV or JSON behind a metadata header."""

    def __init__(self, args, argv: list[str]):
        self.args = args
        self.format = args.format
        self.meta = {
            "command": "catalan-sat " + " ".join(shlex.quote(a) for a in argv),
            "version": __version__,
        }
        self.header: list[str] | None = None
        self.rows: list[list] = []
        self.notes: list[str] = []

    def table(self, header: list[str]) -> None:
        self.header = header

    def row(self, values) -> None:
        self.rows.append(list(values))

    def note(self, text: str) -> None:
        self.notes.append(text)

    def render(self) -> str:
        self.meta["seed"] = getattr(self.args, "seed", None)
        self.meta["config"] = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        if self.format == "json":
            doc = {"meta": self.meta, "columns": self.header, "rows": self.rows, "notes": self.notes}
            return json.dumps(doc, indent=1, default=str) + "\n"
        buf = io.StringIO()
        buf.write(f"# command: {self.meta['command']}\n")
        buf.write(f"# version: {self.meta['version']}\n")
        buf.write(f"# seed: {self.meta['seed']}\n")
        for k, v in self.meta["config"].items():
            buf.write(f"# config.{k}: {v}\n")
        if self.header is not None:
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.header)
            w.writerows(self.rows)
        for line in self.notes:
            buf.write(f"# {line}\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_count(args, out: Output) -> int:
    from .combinatorics import b_exact, count_classes, rat

    if args.n < 1 or args.k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    k = min(args.k, args.n)
    out.table(["n", "k", "T", "B", "rat"])
    r = _fraction_str(rat(args.n, k)) if args.n >= 2 else ""
    out.row([args.n, k, count_classes(args.n, k), _fraction_str(b_exact(args.n, k)), r])
    return EXIT_OK


def cmd_threshold(args, out: Output) -> int:
    from .combinatorics import m_threshold

    out.table(["n", "M_n", "M_ln_M_over_n"])
    for n in _int_list(args.n):
        m = m_threshold(n)
        out.row([n, m, m * math.log(m) / n])
    return EXIT_OK


def cmd_enumerate(args, out: Output) -> int:
    from .combinatorics import count_classes
    from .sampler import event_holds
    from .trees import enumerate_classes, format_class

    out.table(["index", "class"])
    hits = total = 0
    for c in enumerate_classes(args.n, args.k):
        total += 1
        if args.filter and not event_holds(c, args.filter):
            continue
        out.row([hits, format_class(c)])
        hits += 1
    out.note(f"census: {hits} of {total} classes (count_classes = {count_classes(args.n, min(args.k, args.n))})")
    return EXIT_OK


def cmd_atlas(args, out: Output) -> int:
    from .trees import build_atlas, format_class, key_name

    atlas = build_atlas(args.max_size)
    out.table(["key", "name", "L", "E", "R", "witness"])
    for key, size, e, r, witness in atlas.rows():
        out.row([str(key), key_name(key), size, e, r, format_class(witness) if witness is not None else ""])
    out.note(f"exhausted up to size {atlas.exhausted_up_to}")
    return EXIT_OK


def _state(args):
    from .sampler import SamplerState

    if args.seed is None:
        args.seed = secrets.randbits(63)
    return SamplerState(args.seed, args.stream)


def cmd_sweep(args, out: Output) -> int:
    from .combinatorics import parse_schedule
    from .sampler import CSV_HEADER, sweep

    state = _state(args)
    sched = parse_schedule(args.schedule) if args.k is None else args.k
    events = [e for e in args.events.split(",") if e]
    n_values = _int_list(args.n)
    rows = sweep(n_values, sched, events, args.samples, state, workers=args.workers)
    out.table(CSV_HEADER)
    for e in rows:
        out.row(e.row())
    return EXIT_OK


def cmd_sample(args, out: Output) -> int:
    from .sampler import dump_samples

    state = _state(args)
    buf = io.StringIO()
    dump_samples(args.n, args.k, args.count, state, buf)
    out.table(["n", "k", "seed", "stream", "index", "class"])
    for line in buf.getvalue().splitlines():
        head = line.split(",", 5)
        out.row(head)
    return EXIT_OK


def cmd_series(args, out: Output) -> int:
    from .series import marked_gf, tree_structure_gf

    s = tree_structure_gf(args.order) if args.marks == 1 else marked_gf(args.order, args.marks)
    out.table(["n", "numerator", "denominator"])
    for n, c in enumerate(s.coefficients):
        c = Fraction(c)
        out.row([n, c.numerator, c.denominator])
    return EXIT_OK


def cmd_census(args, out: Output) -> int:
    from .combinatorics import count_classes
    from .patterns import builtin, repetition_histogram

    lang = builtin(args.lang)
    hist = repetition_histogram(args.n, args.k, lang)
    total = count_classes(args.n, min(args.k, args.n))
    out.table(["n", "k", "lang", "r", "count_exact", "count_ge", "total"])
    top = max(hist) if hist else 0
    rs = _int_list(args.r) if args.r else range(top + 1)
    for r in rs:
        exact = hist.get(r, 0)
        ge = sum(v for q, v in hist.items() if q >= r)
        out.row([args.n, args.k, args.lang, r, exact, ge, total])
    return EXIT_OK


# verification suites return (passed, detail)


def _suite_bonferroni(args):
    from .combinatorics import verify_bonferroni

    bad = [n for n in range(1, args.max_n + 1) if not verify_bonferroni(n)]
    return not bad, f"n <= {args.max_n}, failures {bad[:5]}"


def _suite_unimodal(args):
    from fractions import Fraction as F

    from .combinatorics import m_threshold

    bad = []
    top = min(args.max_n, 100)
    for n in range(2, top + 1):
        a = [F(p**n, math.factorial(p) * 2**p) for p in range(1, n + 1)]
        diffs = [a[i + 1] > a[i] for i in range(n - 1)]
        changes = sum(1 for i in range(len(diffs) - 1) if diffs[i] != diffs[i + 1])
        peak = next((i + 1 for i in range(n - 1) if not diffs[i]), n)
        if changes > 1 or peak != m_threshold(n):
            bad.append(n)
    return not bad, f"exact check for n <= {top}, failures {bad[:5]}"


def _suite_series(args):
    from .combinatorics import catalan
    from .series import marked_gf, tree_structure_gf

    i_s = tree_structure_gf(args.order)
    ok = all(i_s[n] == 2 ** (n - 1) * catalan(n) for n in range(1, args.order + 1))
    it = marked_gf(args.order, 2)
    ratio = float(Fraction(it[args.order]) / Fraction(i_s[args.order]))
    within = abs(ratio - 3) <= 0.15
    return ok and within, f"I_n = 2^(n-1) C_n: {ok}; tilde-I/I at {args.order} = {ratio:.4f} (target 3 +- 5%)"


def _suite_dc(args):
    from .patterns import st_count_exact
    from .series import dc_counts

    bad = []
    top = min(args.max_n, 6)
    for n in range(2, top + 1):
        for k in range(1, n + 1):
            dc, dc3, dc4 = dc_counts(n, k)
            st = st_count_exact(n, k)
            if not dc - dc3 - dc4 <= st <= dc:
                bad.append((n, k))
    return not bad, f"n <= {top}, failures {bad}"


def _suite_census(args):
    from .combinatorics import count_classes
    from .patterns import builtin, repetition_histogram

    top = min(args.max_n, 5)
    bad = []
    for name in ("N", "P", "S"):
        lang = builtin(name)
        for n in range(1, top + 1):
            for k in range(1, n + 1):
                if sum(repetition_histogram(n, k, lang).values()) != count_classes(n, k):
                    bad.append((name, n, k))
    return not bad, f"histograms sum to T(n,k) for n <= {top}, failures {bad}"


def _suite_duality(args):
    from .trees import dual, enumerate_classes, truth_table

    top = min(args.max_n, 5)
    bad = 0
    for n in range(1, top + 1):
        seen = set()
        for c in enumerate_classes(n, n):
            d = dual(c)
            t, u = truth_table(c), truth_table(d)
            full = (1 << (1 << t.m)) - 1
            if dual(d) != c or (t.bits == full) != (u.bits == 0):
                bad += 1
            seen.add(d)
        if len(seen) != sum(1 for _ in enumerate_classes(n, n)):
            bad += 1
    return not bad, f"involution and true/false exchange for n <= {top}, failures {bad}"


_SUITES = {
    "bonferroni": _suite_bonferroni,
    "unimodal": _suite_unimodal,
    "series": _suite_series,
    "dc-brackets": _suite_dc,
    "census": _suite_census,
    "duality": _suite_duality,
}


def cmd_verify(args, out: Output) -> int:
    suites = [s for part in args.suite or [] for s in part.split(",") if s]
    if not suites:
        raise UsageError("verify needs at least one --suite")
    unknown = [s for s in suites if s not in _SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s): {', '.join(unknown)}")
    out.table(["suite", "result", "detail"])
    failed = False
    for name in suites:
        ok, detail = _SUITES[name](args)
        failed |= not ok
        out.row([name, "pass" if ok else "FAIL", detail])
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="catalan-sat", description="Counting, sampling and probing classes of random and/or trees.")
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="file of key=value defaults (flags win)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", "-o", help="output file (default stdout)")
    common.add_argument("--exact-cutoff", type=int, help="exact-rational cutoff for B and rat")
    common.add_argument("--enum-budget", type=int, help="largest n for exhaustive enumeration")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("count", cmd_count, "T_n, B_{n,k} and rat_n")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)

    sp = add("threshold", cmd_threshold, "peak index M_n")
    sp.add_argument("--n", required=True, help="list: 4,10 or 2..20 or 1000..1000000*10")

    sp = add("enumerate", cmd_enumerate, "stream all classes, optionally filtered")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int)
    sp.add_argument("--filter", help="event name, as for estimate")

    sp = add("atlas", cmd_atlas, "minimal sizes of functions")
    sp.add_argument("--max-size", type=int, default=4)

    for name, help_ in (("estimate", "one Monte-Carlo estimate"), ("sweep", "estimates over a grid of n")):
        sp = add(name, cmd_sweep, help_)
        sp.add_argument("--n", required=True)
        sp.add_argument("--schedule", default="identity")
        sp.add_argument("--k", type=int, help="fixed budget instead of a schedule")
        if name == "estimate":
            sp.add_argument("--event", dest="events", required=True)
        else:
            sp.add_argument("--events", required=True, help="comma separated")
        sp.add_argument("--samples", type=int, default=100_000)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--stream", type=int, default=0)
        sp.add_argument("--workers", type=int)

    sp = add("sample", cmd_sample, "dump sampled classes")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--stream", type=int, default=0)

    sp = add("series", cmd_series, "coefficients of I (marks=1) or the marked series")
    sp.add_argument("--order", type=int, default=20)
    sp.add_argument("--marks", type=int, choices=(1, 2, 3, 4), default=1)

    sp = add("census", cmd_census, "repetition census by enumeration")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--lang", default="N")
    sp.add_argument("--r", help="list of r values (default all)")

    sp = add("verify", cmd_verify, "exact invariant suites")
    sp.add_argument("--suite", action="append", help=f"one of {', '.join(SUITES)} (repeatable)")
    sp.add_argument("--max-n", type=int, default=200)
    sp.add_argument("--order", type=int, default=200)
    return p


def _read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"bad config line {line!r}")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _config_argv(argv: list[str]) -> list[str]:
    """Append ``--key value`` for every config entry the command line leaves unset."""
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    if path is None:
        return argv
    given = {a.split("=", 1)[0][2:].replace("-", "_") for a in argv if a.startswith("--")}
    extra = []
    for key, value in _read_config(path).items():
        if key not in given:
            extra += ["--" + key.replace("_", "-"), value]
    return argv + extra


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_config_argv(argv))
        if not args.command:
            raise UsageError("no command given")
        if getattr(args, "k", 0) is None and args.command == "enumerate":
            args.k = args.n
        if args.exact_cutoff is not None:
            os.environ[ENV_KEYS["exact_cutoff"]] = str(args.exact_cutoff)
        if args.enum_budget is not None:
            os.environ[ENV_KEYS["enum_budget"]] = str(args.enum_budget)
        out = Output(args, argv)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = args.func(args, out)
        for w in caught:
            out.note(f"warning: {w.message}")
    except UsageError as exc:
        print(f"catalan-sat: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"catalan-sat: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    text = out.render()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
