"""Transistor-reduced interspersed adder tree (TRAIT).

The tree is a binary reduction of ripple-carry adders.  Level ``l`` adds
operands that are ``leaf_bits + l`` bits wide, so each adder node is a
chain of that many full adders.  Every full adder is assigned a circuit
kind; kinds differ in transistor count, area and electrical behavior but
are all logically exact, so the reduction result never depends on the
assignment.

Gate-level evaluation works on bit planes: operand bit ``j`` is an integer
array whose elements are either independent 0/1 values (``ones=1``) or 64
bit-sliced lanes packed into a uint64 (``ones=2**64-1``).
"""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


class FaKind(enum.Enum):
    FA7T = ("FA7T", 7, 4.2)
    PG26T = ("PG26T", 26, 15.63)
    FA28T = ("FA28T", 28, 22.5)
    FA14T = ("FA14T", 14, None)
    IFA16T = ("IFA16T", 16, None)
    FA12T = ("FA12T", 12, None)

    def __init__(self, label, transistors, area_um2):
        self.label = label
        self.transistor_count = transistors
        self.area_um2 = area_um2

    @classmethod
    def from_label(cls, label: str) -> FaKind:
        for k in cls:
            if k.label == label.upper():
                return k
        raise ValueError(f"unknown full-adder kind {label!r}")


# Logically exact full adders written the way each circuit computes them.
# ``ones`` is the all-ones word used for inversion.

def _fa28t(a, b, c, ones):
    # Mirror adder: carry from majority, sum from the inverted carry.
    co = (a & b) | (c & (a | b))
    s = ((a | b | c) & (co ^ ones)) | (a & b & c)
    return s, co


def _pg26t(a, b, c, ones):
    # Propagate/generate form.
    p = a ^ b
    g = a & b
    return p ^ c, g | (p & c)


def _fa7t(a, b, c, ones):
    # XOR-XOR sum, carry through a 2:1 mux selected by a^b.
    x = a ^ b
    return x ^ c, (x & c) | ((x ^ ones) & a)


def _fa14t(a, b, c, ones):
    # XNOR-based.
    xn = (a ^ b) ^ ones
    s = (xn ^ c) ^ ones
    return s, (xn & a) | ((xn ^ ones) & c)


def _ifa16t(a, b, c, ones):
    # Inverted-carry formulation.
    nco = ((a ^ ones) & (b ^ ones)) | ((c ^ ones) & ((a ^ ones) | (b ^ ones)))
    return a ^ b ^ c, nco ^ ones


def _fa12t(a, b, c, ones):
    # Carry as a mux on a^b selecting b or c.
    x = a ^ b
    return (x & (c ^ ones)) | ((x ^ ones) & c), (x & c) | ((x ^ ones) & b)


FULL_ADDERS = {
    FaKind.FA28T: _fa28t,
    FaKind.PG26T: _pg26t,
    FaKind.FA7T: _fa7t,
    FaKind.FA14T: _fa14t,
    FaKind.IFA16T: _ifa16t,
    FaKind.FA12T: _fa12t,
}


class Pattern(str, enum.Enum):
    ALTERNATING = "alternating"
    ALL_ACCURATE = "all_accurate"
    ALL_REDUCED = "all_reduced"
    CUSTOM = "custom"


# Reported constants for the adder tree alone (accumulator excluded).
REPORTED_TRANSISTOR_REDUCTION_PCT = 21.35
REPORTED_IMPROVEMENT_PCT = {
    # baseline: (power %, delay %)
    "FA28T_RCA": (58.8, 35.7),
    "PG26T_tree": (34.0, 8.4),
    "FA7T_FA28T_interspersed": (24.3, 48.0),
}


@dataclass(frozen=True)
class AdderTreeSpec:
    """Binary ripple-carry reduction tree with a kind per full adder.

    ``kinds`` lists kinds in canonical order: level by level, node by node
    within a level, LSB to MSB along each carry chain.
    """

    leaf_count: int
    leaf_bits: int
    pattern: Pattern
    kinds: tuple[FaKind, ...]

    @property
    def levels(self) -> tuple[tuple[int, ...], ...]:
        """Chain length of every node, grouped by level."""
        return _layout(self.leaf_count, self.leaf_bits)

    @property
    def node_count(self) -> int:
        return sum(len(level) for level in self.levels)

    @property
    def fa_count(self) -> int:
        return len(self.kinds)

    @property
    def output_bits(self) -> int:
        return self.leaf_bits + len(self.levels)

    def node_kinds(self):
        """Yield ``(level, node, kinds)`` for every adder node."""
        pos = 0
        for lvl, widths in enumerate(self.levels):
            for node, w in enumerate(widths):
                yield lvl, node, self.kinds[pos:pos + w]
                pos += w

    def to_dict(self) -> dict:
        return {
            "leaf_count": self.leaf_count,
            "leaf_bits": self.leaf_bits,
            "pattern": self.pattern.value,
            "kinds": [k.label for k in self.kinds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> AdderTreeSpec:
        kinds = [FaKind.from_label(k) for k in d["kinds"]]
        spec = build_tree(int(d["leaf_count"]), Pattern.CUSTOM,
                          leaf_bits=int(d.get("leaf_bits", 1)), mask=kinds)
        return cls(spec.leaf_count, spec.leaf_bits, Pattern(d["pattern"]), spec.kinds)

    @classmethod
    def from_json(cls, text: str) -> AdderTreeSpec:
        return cls.from_dict(json.loads(text))


@lru_cache(maxsize=None)
def _layout(leaf_count, leaf_bits):
    levels = []
    n, lvl = leaf_count, 0
    while n > 1:
        levels.append((leaf_bits + lvl,) * (n // 2))
        n = (n + 1) // 2
        lvl += 1
    return tuple(levels)


def _pattern_kind(pattern, level, position):
    if pattern is Pattern.ALL_ACCURATE:
        return FaKind.PG26T
    if pattern is Pattern.ALL_REDUCED:
        return FaKind.FA7T
    # 2-D checkerboard: alternate along each chain and between levels, so a
    # reduced FA always feeds an accurate one in both directions.
    return FaKind.PG26T if (level + position) % 2 == 0 else FaKind.FA7T


def _coerce_kind(k):
    if isinstance(k, FaKind):
        return k
    if isinstance(k, str):
        return FaKind.from_label(k)
    return FaKind.FA7T if k else FaKind.PG26T


@lru_cache(maxsize=256)
def _build_cached(leaf_count, pattern, leaf_bits):
    kinds = []
    for lvl, widths in enumerate(_layout(leaf_count, leaf_bits)):
        for w in widths:
            kinds.extend(_pattern_kind(pattern, lvl, j) for j in range(w))
    return AdderTreeSpec(leaf_count, leaf_bits, pattern, tuple(kinds))


def build_tree(leaf_count: int, pattern: Pattern | str = Pattern.ALTERNATING,
               leaf_bits: int = 1, mask: Sequence | None = None) -> AdderTreeSpec:
    """Build a reduction tree for ``leaf_count`` operands of ``leaf_bits``.

    ``mask`` is required for ``Pattern.CUSTOM``: one entry per full adder in
    canonical order, each a :class:`FaKind`, a kind label, or a bool
    (True selects FA7T, False PG26T).
    """
    if leaf_count < 2:
        raise ValueError("an adder tree needs at least 2 leaves")
    if leaf_bits < 1:
        raise ValueError("leaf_bits must be >= 1")
    pattern = Pattern(pattern)
    if pattern is not Pattern.CUSTOM:
        if mask is not None:
            raise ValueError("mask only applies to the custom pattern")
        return _build_cached(leaf_count, pattern, leaf_bits)
    if mask is None:
        raise ValueError("custom pattern needs a kind mask")
    kinds = tuple(_coerce_kind(k) for k in mask)
    expected = sum(sum(w) for w in _layout(leaf_count, leaf_bits))
    if len(kinds) != expected:
        raise ValueError(f"mask has {len(kinds)} entries, tree has {expected} full adders")
    return AdderTreeSpec(leaf_count, leaf_bits, pattern, kinds)


def uniform_tree(leaf_count: int, kind: FaKind, leaf_bits: int = 1) -> AdderTreeSpec:
    n = sum(sum(w) for w in _layout(leaf_count, leaf_bits))
    return build_tree(leaf_count, Pattern.CUSTOM, leaf_bits, [kind] * n)


@dataclass(frozen=True)
class TreeTally:
    per_kind_counts: dict
    total_transistors: int
    estimated_area_um2: float
    unknown_area_fas: int = 0

    @property
    def fa_count(self) -> int:
        return sum(self.per_kind_counts.values())

    @property
    def mean_transistors_per_fa(self) -> float:
        return self.total_transistors / self.fa_count if self.fa_count else 0.0

    def __add__(self, other: TreeTally) -> TreeTally:
        counts = Counter(self.per_kind_counts)
        counts.update(other.per_kind_counts)
        return TreeTally(dict(counts), self.total_transistors + other.total_transistors,
                         self.estimated_area_um2 + other.estimated_area_um2,
                         self.unknown_area_fas + other.unknown_area_fas)


def tally(spec: AdderTreeSpec) -> TreeTally:
    counts = Counter(k.label for k in spec.kinds)
    transistors = 0
    area = 0.0
    unknown = 0
    for label, n in counts.items():
        k = FaKind.from_label(label)
        transistors += n * k.transistor_count
        if k.area_um2 is None:
            unknown += n
        else:
            area += n * k.area_um2
    return TreeTally(dict(counts), transistors, area, unknown)


def transistor_reduction(spec: AdderTreeSpec, baseline: FaKind = FaKind.PG26T) -> float:
    """Percent fewer transistors than the same tree built only from ``baseline``."""
    t = tally(spec)
    base = spec.fa_count * baseline.transistor_count
    return 100.0 * (base - t.total_transistors) / base


# -- gate-level evaluation ---------------------------------------------------

def _ripple(kinds, x, y, ones):
    """Ripple-carry add two operands given as LSB-first bit-plane lists.

    ``kinds[j]`` is the circuit at chain position ``j``; the chain length is
    ``len(kinds)`` and the carry-out becomes the top output bit.
    """
    zero = np.zeros_like(x[0])
    carry = zero
    out = []
    for j, kind in enumerate(kinds):
        a = x[j] if j < len(x) else zero
        b = y[j] if j < len(y) else zero
        s, carry = FULL_ADDERS[kind](a, b, carry, ones)
        out.append(s)
    out.append(carry)
    return out


def reduce_planes(leaf_planes: Sequence[Sequence[np.ndarray]], spec: AdderTreeSpec,
                  ones: int) -> list[np.ndarray]:
    """Reduce ``spec.leaf_count`` operands given as bit planes.

    ``leaf_planes[i][j]`` is bit ``j`` of leaf ``i``; every plane has the
    same shape.  Returns the bit planes of the sum, LSB first.
    """
    if len(leaf_planes) != spec.leaf_count:
        raise ValueError(f"tree expects {spec.leaf_count} leaves, got {len(leaf_planes)}")
    ops = [list(planes) for planes in leaf_planes]
    nodes = spec.node_kinds()
    for widths in spec.levels:
        reduced = []
        for i in range(len(widths)):
            _, _, kinds = next(nodes)
            reduced.append(_ripple(kinds, ops[2 * i], ops[2 * i + 1], ones))
        if len(ops) % 2:
            reduced.append(ops[-1])
        ops = reduced
    return ops[0]


def reduce_array(leaves, spec: AdderTreeSpec) -> np.ndarray:
    """Gate-level reduction over the last axis of an integer array.

    ``leaves`` has shape ``(..., leaf_count)`` with values in
    ``[0, 2**leaf_bits)``.
    """
    leaves = np.asarray(leaves, dtype=np.uint64)
    if leaves.shape[-1] != spec.leaf_count:
        raise ValueError(f"tree expects {spec.leaf_count} leaves, got {leaves.shape[-1]}")
    if leaves.size and int(leaves.max()) >= (1 << spec.leaf_bits):
        raise ValueError(f"leaf value does not fit in {spec.leaf_bits} bits")
    one = np.uint64(1)
    planes = [[(leaves[..., i] >> np.uint64(j)) & one for j in range(spec.leaf_bits)]
              for i in range(spec.leaf_count)]
    out = reduce_planes(planes, spec, ones=1)
    total = np.zeros(leaves.shape[:-1], dtype=np.uint64)
    for j, p in enumerate(out):
        total |= p.astype(np.uint64) << np.uint64(j)
    return total.astype(np.int64)


def reduce(partials: Iterable[int], spec: AdderTreeSpec | None = None,
           pattern: Pattern | str = Pattern.ALTERNATING) -> int:
    """Sum non-negative weighted partials through a gate-level adder tree.

    Without ``spec`` a tree of ``pattern`` sized to the inputs is built.  A
    single partial passes through untouched.
    """
    values = [int(v) for v in partials]
    if not values:
        raise ValueError("reduce needs at least one partial")
    if any(v < 0 for v in values):
        raise ValueError("partials must be non-negative")
    if len(values) == 1:
        return values[0]
    if spec is None:
        bits = max(1, max(v.bit_length() for v in values))
        spec = build_tree(len(values), pattern, leaf_bits=bits)
    if spec.output_bits > 64:
        raise ValueError("tree output wider than 64 bits")
    return int(reduce_array(np.array(values, dtype=np.uint64), spec))


# -- exhaustive bit-sliced sweep -----------------------------------------------

_LANE_PATTERNS = [
    0xAAAAAAAAAAAAAAAA, 0xCCCCCCCCCCCCCCCC, 0xF0F0F0F0F0F0F0F0,
    0xFF00FF00FF00FF00, 0xFFFF0000FFFF0000, 0xFFFFFFFF00000000,
]
_ONES64 = 0xFFFFFFFFFFFFFFFF


def _index_planes(word_index: np.ndarray, n_bits: int):
    """Bit planes of the enumeration index ``64 * word + lane``."""
    planes = []
    for t in range(n_bits):
        if t < 6:
            planes.append(np.full(word_index.shape, _LANE_PATTERNS[t], dtype=np.uint64))
        else:
            bit = (word_index >> np.uint64(t - 6)) & np.uint64(1)
            planes.append(bit * np.uint64(_ONES64))
    return planes


def exhaustive_pattern_sweep(specs: Sequence[AdderTreeSpec], chunk_words: int = 1 << 18,
                             progress=None) -> dict:
    """Evaluate every leaf-value vector through each tree and compare.

    All specs must share ``leaf_count`` and ``leaf_bits``.  Vector ``i``
    assigns leaf ``k`` the bits ``i[k*leaf_bits:(k+1)*leaf_bits]``; 64
    vectors are packed per uint64 lane word.  Returns the number of vectors
    checked and the number of lane positions where any two trees
    disagreed.
    """
    first = specs[0]
    for s in specs[1:]:
        if (s.leaf_count, s.leaf_bits) != (first.leaf_count, first.leaf_bits):
            raise ValueError("specs must share leaf geometry")
    n_bits = first.leaf_count * first.leaf_bits
    if n_bits < 6:
        raise ValueError("sweep needs at least 64 vectors")
    n_words = 1 << (n_bits - 6)
    mismatches = 0
    for start in range(0, n_words, chunk_words):
        words = np.arange(start, min(start + chunk_words, n_words), dtype=np.uint64)
        idx = _index_planes(words, n_bits)
        lb = first.leaf_bits
        leaves = [idx[k * lb:(k + 1) * lb] for k in range(first.leaf_count)]
        ref = reduce_planes(leaves, specs[0], _ONES64)
        for s in specs[1:]:
            out = reduce_planes(leaves, s, _ONES64)
            diff = np.zeros_like(ref[0])
            for p, q in zip(ref, out):
                diff |= p ^ q
            mismatches += int(sum(bin(int(d)).count("1") for d in diff[diff != 0]))
        if progress:
            progress(start + words.size, n_words)
    return {"vectors": n_words * 64, "mismatches": mismatches}
