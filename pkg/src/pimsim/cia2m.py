"""Cycle-controlled iterative approximate/accurate multiplication (CIA2M).

Each cycle splits both operands at their leading one,

    A = 2**ka + a_r,  B = 2**kb + b_r
    A * B = 2**(ka+kb) + a_r * 2**kb + b_r * 2**ka + a_r * b_r

accumulates everything except the ``a_r * b_r`` tail, and continues on the
residues.  After ``n`` cycles the running sum underestimates the product by
exactly the product of the remaining residues.

The scalar path (:func:`cia2m_multiply`) records a per-cycle trace; the
array path (:func:`cia2m_products`) evaluates the same recurrence on numpy
arrays for exhaustive sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import OperandError, ZeroOperand

MAX_WIDTH = 16

APPROXIMATE_CYCLES = 3
ACCURATE_CYCLES = 4


@dataclass(frozen=True)
class Operand:
    """Unsigned operand of a fixed bit width."""

    value: int
    width: int = 8

    def __post_init__(self):
        if not 1 <= self.width <= MAX_WIDTH:
            raise OperandError(f"width {self.width} outside [1, {MAX_WIDTH}]")
        if not 0 <= self.value < (1 << self.width):
            raise OperandError(
                f"value {self.value} does not fit in {self.width} unsigned bits")

    def __int__(self):
        return self.value


@dataclass(frozen=True)
class Decomposition:
    k: int
    residue: int


@dataclass(frozen=True)
class CiaMode:
    """Cycle budget selector.

    ``kind`` is one of ``approximate`` (3 cycles), ``accurate`` (4),
    ``exact`` (operand width, which bounds the number of set bits) or
    ``custom`` with an explicit ``cycles`` count.
    """

    kind: str
    cycles: int | None = None

    _KINDS = ("approximate", "accurate", "exact", "custom")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown CIA2M mode {self.kind!r}")
        fixed = {"approximate": APPROXIMATE_CYCLES, "accurate": ACCURATE_CYCLES}
        if self.kind in fixed:
            if self.cycles not in (None, fixed[self.kind]):
                raise ValueError(f"{self.kind} mode is fixed at {fixed[self.kind]} cycles")
            object.__setattr__(self, "cycles", fixed[self.kind])
        elif self.kind == "custom":
            if self.cycles is None or self.cycles < 1:
                raise ValueError("custom mode needs cycles >= 1")
        elif self.cycles is not None:
            raise ValueError("exact mode takes its budget from the operand width")

    @classmethod
    def approximate(cls) -> CiaMode:
        return cls("approximate")

    @classmethod
    def accurate(cls) -> CiaMode:
        return cls("accurate")

    @classmethod
    def exact(cls) -> CiaMode:
        return cls("exact")

    @classmethod
    def custom(cls, cycles: int) -> CiaMode:
        return cls("custom", int(cycles))

    @classmethod
    def parse(cls, text: str) -> CiaMode:
        """Parse ``approx``/``approximate``, ``accurate``, ``exact``,
        ``custom:N`` or a bare cycle count ``N``."""
        t = str(text).strip().lower()
        aliases = {"approx": "approximate", "acc": "accurate"}
        t = aliases.get(t, t)
        if t in ("approximate", "accurate", "exact"):
            return cls(t)
        if t.startswith("custom:"):
            t = t.split(":", 1)[1]
        try:
            return cls.custom(int(t))
        except ValueError:
            raise ValueError(f"cannot parse CIA2M mode {text!r}") from None

    def budget(self, width: int) -> int:
        """Cycle budget for operands of ``width`` bits."""
        if self.kind == "exact":
            return width
        return self.cycles

    @property
    def label(self) -> str:
        return f"custom:{self.cycles}" if self.kind == "custom" else self.kind

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class CycleRecord:
    ka: int
    kb: int
    a_residue: int
    b_residue: int
    term: int
    partial_sum: int


@dataclass(frozen=True)
class MultiplyTrace:
    """Result of one CIA2M multiplication.

    ``final_product`` and ``residual_error`` are magnitudes; ``sign`` is
    +1/-1 and only differs from +1 for signed multiplication.
    """

    a: int
    b: int
    mode: CiaMode
    steps: tuple[CycleRecord, ...] = field(default=())
    final_product: int = 0
    residual_error: int = 0
    sign: int = 1

    @property
    def cycles_used(self) -> int:
        return len(self.steps)

    @property
    def value(self) -> int:
        """Signed approximate product."""
        return self.sign * self.final_product

    @property
    def exact(self) -> int:
        return self.sign * (self.final_product + self.residual_error)


def _operand(x, width: int) -> Operand:
    if isinstance(x, Operand):
        return x
    return Operand(int(x), width)


def leading_one(x: Operand | int, width: int = MAX_WIDTH) -> Decomposition:
    """Split ``x`` into ``2**k + residue`` with ``residue < 2**k``."""
    op = _operand(x, width)
    if op.value == 0:
        raise ZeroOperand("zero has no leading one; short-circuit zero products")
    k = op.value.bit_length() - 1
    return Decomposition(k, op.value - (1 << k))


def exact_multiply(a: Operand | int, b: Operand | int, width: int = 8) -> int:
    return _operand(a, width).value * _operand(b, width).value


def cia2m_multiply(a: Operand | int, b: Operand | int, mode: CiaMode,
                   width: int = 8) -> MultiplyTrace:
    """Multiply two unsigned operands under a CIA2M cycle budget.

    Plain ints are validated against ``width``.  Iteration ends when the
    budget is spent or either residue reaches zero, so ``cycles_used`` can
    be smaller than the budget.
    """
    a, b = _operand(a, width), _operand(b, width)
    budget = mode.budget(max(a.width, b.width))
    if budget < 1:
        raise ValueError("cycle budget must be >= 1")
    if a.value == 0 or b.value == 0:
        return MultiplyTrace(a.value, b.value, mode)

    x, y = a.value, b.value
    total = 0
    steps = []
    for _ in range(budget):
        ka = x.bit_length() - 1
        kb = y.bit_length() - 1
        xr = x - (1 << ka)
        yr = y - (1 << kb)
        term = (1 << (ka + kb)) + (xr << kb) + (yr << ka)
        total += term
        steps.append(CycleRecord(ka, kb, xr, yr, term, total))
        x, y = xr, yr
        if x == 0 or y == 0:
            break
    return MultiplyTrace(a.value, b.value, mode, tuple(steps), total, x * y)


def signed_multiply(a: int, b: int, mode: CiaMode, width: int = 8) -> MultiplyTrace:
    """Sign-magnitude CIA2M: magnitudes go through :func:`cia2m_multiply`,
    the sign is the XOR of the operand signs (zero is positive).

    ``width`` includes the sign bit, so ``|a|, |b| < 2**(width-1)``.
    """
    a, b = int(a), int(b)
    limit = 1 << (width - 1)
    for v in (a, b):
        if abs(v) >= limit:
            raise OperandError(f"|{v}| does not fit in {width}-bit sign-magnitude")
    mag_width = max(width - 1, 1)
    t = cia2m_multiply(Operand(abs(a), mag_width), Operand(abs(b), mag_width), mode)
    sign = -1 if (a < 0) != (b < 0) and a != 0 and b != 0 else 1
    return MultiplyTrace(a, b, mode, t.steps, t.final_product, t.residual_error, sign)


def leading_one_index(x: np.ndarray, width: int = MAX_WIDTH) -> np.ndarray:
    """Elementwise leading-one position; -1 where ``x == 0``."""
    x = np.asarray(x, dtype=np.int64)
    k = np.full(x.shape, -1, dtype=np.int64)
    for bit in range(width):
        k += (x >> bit) > 0
    return k


def cia2m_products(a, b, cycles: int, width: int = MAX_WIDTH):
    """Vectorized CIA2M: return ``(approx, residual)`` int64 arrays.

    Same recurrence as :func:`cia2m_multiply` with budget ``cycles``;
    zero operands yield ``(0, 0)``.
    """
    x = np.array(a, dtype=np.int64, copy=True)
    y = np.array(b, dtype=np.int64, copy=True)
    x, y = np.broadcast_arrays(x, y)
    x, y = x.copy(), y.copy()
    total = np.zeros(x.shape, dtype=np.int64)
    for _ in range(cycles):
        live = (x > 0) & (y > 0)
        if not live.any():
            break
        ka = np.where(live, leading_one_index(x, width), 0)
        kb = np.where(live, leading_one_index(y, width), 0)
        xr = np.where(live, x - (np.int64(1) << ka), x)
        yr = np.where(live, y - (np.int64(1) << kb), y)
        term = (np.int64(1) << (ka + kb)) + (xr << kb) + (yr << ka)
        total += np.where(live, term, 0)
        x, y = xr, yr
    return total, x * y
