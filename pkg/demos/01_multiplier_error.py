"""
Approximate multiplication by leading-one decomposition
========================================================

Walk through one multiplication cycle by cycle, then sweep every 8-bit
operand pair to see how the cycle budget trades accuracy.
"""

from pimsim import CiaMode, cia2m_multiply, exhaustive_stats, histogram

# one product, cycle by cycle
t = cia2m_multiply(255, 255, CiaMode.approximate())
for i, step in enumerate(t.steps, 1):
    print(f"cycle {i}: ka={step.ka} kb={step.kb} term={step.term:6d} running={step.partial_sum}")
print(f"approximate 255*255 = {t.final_product}, residual {t.residual_error}")

# every budget over all 65536 pairs
print("\nbudget  exact_cases  max_err  mean_err")
for n in range(1, 9):
    s = exhaustive_stats(8, CiaMode.custom(n))
    print(f"{n:6d}  {s.exact_cases:11d}  {s.max_abs_error:7d}  {s.mean_abs_error:8.3f}")

# the error distribution of the 3-cycle mode is concentrated at zero
h = histogram(8, CiaMode.approximate())
print("\nfirst histogram bins (approximate mode):")
for lo, hi, c in list(zip(h.bin_edges, h.bin_edges[1:], h.counts))[:5]:
    print(f"  [{lo:4d}, {hi:4d})  {c}")
