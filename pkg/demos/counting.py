# Counting classes of and/or trees, and the ratio rat_n.
#
# Run with:  python3 demos/counting.py

import math

from catalan_sat.combinatorics import b_exact, count_classes, m_threshold, rat_float, verify_bonferroni
from catalan_sat.trees import enumerate_classes, format_class

# The six classes of size 2 with at most two variables.
for c in enumerate_classes(2, 2):
    print(format_class(c))

# Class counts grow fast.  T(n, k) counts classes with n leaves over at most k variables.
for n in (2, 3, 4, 5, 6):
    print(n, [count_classes(n, k) for k in range(1, n + 1)])

# B(n, k) is the labelling weight, rat_n = B(n-1, k) / B(n, k).
print("B(2,2) =", b_exact(2, 2))
for n in (10, 100, 1000, 10_000):
    r_sq = rat_float(n, "sqrt")
    r_id = rat_float(n, "identity")
    print(f"n={n:6d}  sqrt: rat*k = {r_sq * math.isqrt(n):.4f}   identity: rat*n/ln n = {r_id * n / math.log(n):.4f}")

# M_n is the peak of p -> p^n / (p! 2^p); M_n ln M_n / n creeps toward 1.
for n in (10**3, 10**4, 10**5, 10**6):
    m = m_threshold(n)
    print(f"M_{n} = {m}, M ln M / n = {m * math.log(m) / n:.4f}")

# The truncated sums bracket B exactly.
print("Bonferroni bracket holds for n <= 60:", all(verify_bonferroni(n) for n in range(1, 61)))
