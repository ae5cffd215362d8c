# Pattern languages, simple tautologies, expansions and the marked series.
#
# Run with:  python3 demos/patterns.py

import numpy as np

from catalan_sat.patterns import (
    builtin,
    classify_simple_x,
    generate_expansions,
    is_simple_tautology,
    random_expansion,
    repetition_histogram,
    repetitions,
    st_count_exact,
)
from catalan_sat.series import dc_counts, marked_gf, tree_structure_gf
from catalan_sat.trees import format_class, key_of, parse_class

t = parse_class("(((1:+ | (1:- | 2:+)) | 3:+) | (4:+ & 1:+))")
print(format_class(t), "simple tautology:", is_simple_tautology(t), "N-repetitions:", repetitions(builtin("N"), t))

# Which trees compute a single variable with few leaves?
for text in ("(1:+ & (2:+ | 2:-))", "(1:+ | (1:+ & 2:+))", "(1:+ | 2:+)"):
    print(text, classify_simple_x(parse_class(text)))

# Simple tautologies sit between DC - DC3 - DC4 and DC.
for n in (4, 5, 6):
    dc, dc3, dc4 = dc_counts(n, n)
    print(f"n={n}: {dc - dc3 - dc4} <= ST = {st_count_exact(n, n)} <= {dc}")

# Repetition census of the N language at n = k = 5.
print("N census at n=k=5:", dict(sorted(repetition_histogram(5, 5, builtin("N")).items())))

# Expansions graft a piece that leaves the function unchanged.
base = parse_class("(1:+ & 2:+)")
made = list(generate_expansions(base, "X", 4, 4))
print(len(made), "X-expansions of", format_class(base), "at size 4, e.g.", format_class(made[0]))
rng = np.random.default_rng(7)
big = next(c for c in (random_expansion(base, "T", 9, 9, rng) for _ in range(100)) if c is not None)
print("random T-expansion:", format_class(big), "same function:", key_of(big) == key_of(base))

# The structure series and its two-pointed companion.
i_s, it = tree_structure_gf(200), marked_gf(200, 2)
for n in (10, 50, 100, 200):
    print(f"n={n:3d}  marked / plain = {float(it[n] / i_s[n]):.4f}")
