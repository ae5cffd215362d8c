# Uniform random classes and Monte-Carlo estimates, checked against exact values.
#
# Run with:  python3 demos/sampling.py

from fractions import Fraction

from catalan_sat.combinatorics import count_classes
from catalan_sat.sampler import SamplerState, batch_classes, event_holds, sweep
from catalan_sat.trees import enumerate_classes, format_class

state = SamplerState(2026)

# A few classes with 30 leaves over at most 6 variables.
batch = batch_classes(30, 6, 3, state.chunk_seed(30, 6, 0))
for i in range(3):
    print(format_class(batch.canonical(i)))

# At n = k = 4 every class can be listed, so estimates can be checked exactly.
events = ["satisfiable", "is_true", "matches_key:x"]
classes = list(enumerate_classes(4, 4))
rows = sweep([4], "identity", events, 200_000, state)
for e in rows:
    exact = Fraction(sum(event_holds(c, e.event) for c in classes), count_classes(4, 4))
    z = (e.point - float(exact)) / e.stderr
    print(f"{e.event:16s} exact {float(exact):.5f}  estimate {e.point:.5f} +- {e.stderr:.5f}  z = {z:+.2f}")

# Larger sizes: satisfiability climbs toward 1, projections shrink like rat_n.
for e in sweep([32, 128], "sqrt", ["satisfiable", "matches_key:x"], 20_000, state):
    print(f"n={e.n:4d} k={e.k_n:3d} {e.event:14s} p = {e.point:.4f}  p / rat = {e.point / e.rat_n:.3f}")
