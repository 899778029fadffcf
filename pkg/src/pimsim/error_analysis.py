"""Error characterization of CIA2M against exact multiplication.

Exhaustive sweeps enumerate every operand pair for widths up to 8; wider
operands are characterized by seeded sampling.  Enumeration is split into
chunks of the first operand, and chunk results merge with integer sums and
maxima, so the output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .cia2m import MAX_WIDTH, CiaMode, cia2m_products
from .exceptions import WidthTooLarge

MAX_EXHAUSTIVE_WIDTH = 8

HISTOGRAM_HEADER = ("error_bin_low", "error_bin_high", "count")


@dataclass(frozen=True)
class ErrorStats:
    mode: str
    cycle_budget: int
    width: int
    total_cases: int
    exact_cases: int
    sum_abs_error: int
    max_abs_error: int
    max_rel_error: float

    @property
    def mean_abs_error(self) -> float:
        return self.sum_abs_error / self.total_cases if self.total_cases else 0.0

    @property
    def nmed(self) -> float:
        """Mean absolute error normalized by the largest exact product."""
        top = ((1 << self.width) - 1) ** 2
        return self.mean_abs_error / top

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_abs_error"] = self.mean_abs_error
        d["nmed"] = self.nmed
        return d


@dataclass(frozen=True)
class ErrorHistogram:
    """Integer-aligned bins; bin ``i`` covers ``[edges[i], edges[i+1])``."""

    bin_edges: tuple[int, ...]
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def rows(self):
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            yield lo, hi, c

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTOGRAM_HEADER)
        for row in self.rows():
            w.writerow(row)
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="ascii") as fh:
            fh.write(self.to_csv())


def _default_workers() -> int:
    env = os.environ.get("PIMSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _errors(a, b, cycles, width):
    approx, residual = cia2m_products(a, b, cycles, width)
    return a * b, approx, residual


def _chunk_stats(a_vals, b_vals, cycles, width):
    exact, _, err = _errors(a_vals, b_vals, cycles, width)
    nz = exact > 0
    rel = float((err[nz] / exact[nz]).max()) if nz.any() else 0.0
    return (int(err.size), int((err == 0).sum()), int(err.sum()),
            int(err.max()) if err.size else 0, rel)


def _merge(parts):
    total = exact = sabs = mabs = 0
    mrel = 0.0
    for t, e, s, m, r in parts:
        total += t
        exact += e
        sabs += s
        mabs = max(mabs, m)
        mrel = max(mrel, r)
    return total, exact, sabs, mabs, mrel


def _exhaustive_chunks(width):
    n = 1 << width
    b = np.arange(n, dtype=np.int64)
    step = max(1, (1 << 16) // n)
    for lo in range(0, n, step):
        a = np.arange(lo, min(lo + step, n), dtype=np.int64)
        yield np.repeat(a, n), np.tile(b, a.size)


def _map(fn, chunks, workers):
    if workers <= 1:
        return [fn(*c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def exhaustive_errors(width: int, mode: CiaMode) -> np.ndarray:
    """Absolute error of every pair, indexed ``[a, b]``."""
    _check_exhaustive(width)
    n = 1 << width
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    _, _, err = _errors(a, b, mode.budget(width), width)
    return err


def _check_exhaustive(width):
    if not 1 <= width <= MAX_EXHAUSTIVE_WIDTH:
        raise WidthTooLarge(
            f"exhaustive analysis supports widths 1..{MAX_EXHAUSTIVE_WIDTH}, got {width}; "
            "use sampled_stats for wider operands")


def exhaustive_stats(width: int, mode: CiaMode, workers: int | None = None) -> ErrorStats:
    _check_exhaustive(width)
    cycles = mode.budget(width)
    workers = workers or _default_workers()
    fn = lambda a, b: _chunk_stats(a, b, cycles, width)  # noqa: E731
    merged = _merge(_map(fn, list(_exhaustive_chunks(width)), workers))
    return ErrorStats(mode.label, cycles, width, *merged)


def sampled_stats(width: int, mode: CiaMode, samples: int, seed: int,
                  workers: int | None = None) -> ErrorStats:
    """Stats over ``samples`` distinct operand pairs drawn with ``seed``.

    When ``samples`` covers the whole pair space every pair is used, which
    makes the result identical to :func:`exhaustive_stats`.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 1 <= width <= MAX_WIDTH:
        raise ValueError(f"width must be in [1, {MAX_WIDTH}]")
    space = 1 << (2 * width)
    rng = np.random.default_rng(seed)
    if samples >= space:
        idx = np.arange(space, dtype=np.int64)
    else:
        idx = np.sort(rng.choice(space, size=samples, replace=False)).astype(np.int64)
    a, b = idx >> width, idx & ((1 << width) - 1)
    cycles = mode.budget(width)
    chunk = 1 << 16
    chunks = [(a[i:i + chunk], b[i:i + chunk]) for i in range(0, idx.size, chunk)]
    fn = lambda x, y: _chunk_stats(x, y, cycles, width)  # noqa: E731
    merged = _merge(_map(fn, chunks, workers or _default_workers()))
    return ErrorStats(mode.label, cycles, width, *merged)


DEFAULT_BINS = 64


def histogram(width: int, mode: CiaMode, bins: int | None = None) -> ErrorHistogram:
    """Bin the absolute errors of all pairs into ``bins`` equal integer bins
    spanning ``[0, max_error]``.

    ``bins=None`` uses ``min(64, max_error + 1)``, so an error-free mode
    gives the single bin ``[0, 1)``.
    """
    if bins is not None and bins < 1:
        raise ValueError("bins must be >= 1")
    err = exhaustive_errors(width, mode).ravel()
    top = int(err.max())
    if bins is None:
        bins = min(DEFAULT_BINS, top + 1)
    size = max(1, math.ceil((top + 1) / bins))
    edges = tuple(i * size for i in range(bins + 1))
    counts = np.bincount(err // size, minlength=bins)
    return ErrorHistogram(edges, tuple(int(c) for c in counts))


def popcount_exact_count(width: int, cycles: int) -> int:
    """Pairs whose smaller popcount is at most ``cycles``.

    Counted from popcount frequencies only, without running the multiplier.
    """
    freq = [0] * (width + 1)
    for x in range(1 << width):
        freq[bin(x).count("1")] += 1
    return sum(freq[p] * freq[q] for p in range(width + 1) for q in range(width + 1)
               if min(p, q) <= cycles)
