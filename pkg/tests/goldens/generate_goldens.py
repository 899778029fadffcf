"""Brute-force generator for the frozen 8-bit error goldens.

    python3 tests/goldens/generate_goldens.py > tests/goldens/error_goldens.json

Pure Python, independent of pimsim: each cycle peels the leading one of
both operands with int.bit_length.  Run once; the JSON is committed and
the tests compare against it, so any drift in the library shows up as a
failure rather than a silently regenerated golden.
"""

import hashlib
import json

WIDTH = 8
BINS = 64


def peel(a, b, cycles):
    p = 0
    for _ in range(cycles):
        if a == 0 or b == 0:
            break
        ka, kb = a.bit_length() - 1, b.bit_length() - 1
        ar, br = a - (1 << ka), b - (1 << kb)
        p += (1 << (ka + kb)) + (ar << kb) + (br << ka)
        a, b = ar, br
    return p


def golden(cycles):
    n = 1 << WIDTH
    errs, rel = [], 0.0
    for a in range(n):
        for b in range(n):
            e = a * b - peel(a, b, cycles)
            errs.append(e)
            if a * b:
                rel = max(rel, e / (a * b))
    top = max(errs)
    size = max(1, -(-(top + 1) // BINS))
    counts = [0] * BINS
    for e in errs:
        counts[e // size] += 1
    csv = "error_bin_low,error_bin_high,count\n" + "".join(
        f"{i * size},{(i + 1) * size},{c}\n" for i, c in enumerate(counts))
    return {
        "cycle_budget": cycles,
        "max_abs_error": top,
        "sum_abs_error": sum(errs),
        "mean_abs_error": sum(errs) / len(errs),
        "exact_cases": errs.count(0),
        "max_rel_error": rel,
        "histogram_bins": BINS,
        "histogram_counts": counts,
        "histogram_csv_sha256": hashlib.sha256(csv.encode("ascii")).hexdigest(),
    }


if __name__ == "__main__":
    out = {"width": WIDTH, "approximate": golden(3), "accurate": golden(4)}
    print(json.dumps(out, indent=1, sort_keys=True))
