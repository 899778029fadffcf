"""
Mixed full-adder trees
======================

An adder tree built from two full-adder designs placed in a checkerboard
gives the same sums as a uniform tree while using fewer transistors.
"""

import numpy as np

from pimsim import FaKind, Pattern, build_tree, tally
from pimsim.trait import reduce_array, transistor_reduction, uniform_tree

spec = build_tree(64, Pattern.ALTERNATING, leaf_bits=8)
t = tally(spec)
print(f"64-leaf tree: {spec.fa_count} full adders, {t.per_kind_counts}")
print(f"total transistors {t.total_transistors}, mean {t.mean_transistors_per_fa:.2f} per adder")
print(f"reduction vs all-PG26T: {transistor_reduction(spec):.2f}%")

baseline = tally(uniform_tree(64, FaKind.FA28T, leaf_bits=8))
print(f"uniform FA28T tree: {baseline.total_transistors} transistors")

# the pattern never changes the arithmetic
x = np.random.default_rng(1).integers(0, 256, (1000, 64))
for p in (Pattern.ALTERNATING, Pattern.ALL_ACCURATE, Pattern.ALL_REDUCED):
    ok = np.array_equal(reduce_array(x, build_tree(64, p, leaf_bits=8)), x.sum(axis=1))
    print(f"{p.value:13s} sums correct: {ok}")
