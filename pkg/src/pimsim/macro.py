"""Bit-level functional model of the PIM macro.

Geometry (defaults): 256 rows x 64 columns of storage cells.  A Res-DPU is
eight cells stacked in one column sharing a single AND gate; a sub-bank
(SBNK) is an 8 x 4 grid of DPUs, i.e. 64 rows x 4 columns.  Addresses are
flat and row-major: DPU ``i`` is DPU-row ``i // cols``, column ``i % cols``;
SBNK ``j`` likewise over the SBNK grid.

A weight word of ``p`` bits occupies one row across ``p`` adjacent columns,
least significant bit in the lowest column.  Signed words are stored
sign-magnitude with the sign in the highest column of the group.
"""

from __future__ import annotations

import contextlib
import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .cia2m import CiaMode, CycleRecord, MultiplyTrace, leading_one_index
from .exceptions import (AddressOutOfRange, FileFormatError, LengthMismatch,
                         OperandError, PrecisionMismatch, WriteDuringCompute)
from .trait import Pattern, build_tree, reduce_array

MIN_PRECISION, MAX_PRECISION = 1, 16


@dataclass(frozen=True)
class MacroConfig:
    rows: int = 256
    cols: int = 64
    dpu_cells: int = 8
    sbnk_dpu_rows: int = 8
    sbnk_dpu_cols: int = 4
    active_rows: int = 32        # activation rows driven per cycle
    weight_lanes: int = 16       # weight values consumed per cycle
    clock_mhz: float = 333.0
    weight_precision: int = 8
    input_precision: int = 8
    signed: bool = False
    tree_pattern: str = "alternating"

    def __post_init__(self):
        for name in ("rows", "cols", "dpu_cells", "sbnk_dpu_rows", "sbnk_dpu_cols",
                     "active_rows", "weight_lanes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.rows % (self.dpu_cells * self.sbnk_dpu_rows):
            raise ValueError("rows must be a multiple of the SBNK height")
        if self.cols % self.sbnk_dpu_cols:
            raise ValueError("cols must be a multiple of the SBNK width")
        if self.active_rows > self.rows:
            raise ValueError("active_rows exceeds rows")
        for name in ("weight_precision", "input_precision"):
            p = getattr(self, name)
            if not MIN_PRECISION <= p <= MAX_PRECISION:
                raise ValueError(f"{name} {p} outside [{MIN_PRECISION}, {MAX_PRECISION}]")
            if self.signed and p < 2:
                raise ValueError("signed operation needs precision >= 2")
        if self.weight_precision > self.cols:
            raise ValueError("weight word wider than the array")
        if not self.clock_mhz > 0:
            raise ValueError("clock_mhz must be positive")
        Pattern(self.tree_pattern)

    @property
    def capacity_bits(self) -> int:
        return self.rows * self.cols

    @property
    def dot_products_per_cycle(self) -> int:
        return self.active_rows * self.weight_lanes

    @property
    def sbnk_rows(self) -> int:
        """Cell rows per SBNK."""
        return self.dpu_cells * self.sbnk_dpu_rows

    @property
    def sbnk_grid(self) -> tuple[int, int]:
        return self.rows // self.sbnk_rows, self.cols // self.sbnk_dpu_cols

    @property
    def dpu_count(self) -> int:
        return self.capacity_bits // self.dpu_cells

    @property
    def column_groups(self) -> int:
        return self.cols // self.weight_precision

    @property
    def weight_magnitude_bits(self) -> int:
        return self.weight_precision - 1 if self.signed else self.weight_precision

    @property
    def input_magnitude_bits(self) -> int:
        return self.input_precision - 1 if self.signed else self.input_precision

    def sbnk_of(self, row: int, col: int) -> int:
        r, c = row // self.sbnk_rows, col // self.sbnk_dpu_cols
        return r * self.sbnk_grid[1] + c

    def with_overrides(self, **kw) -> MacroConfig:
        return replace(self, **kw)


@dataclass(frozen=True)
class ResDpu:
    """Snapshot of one DPU: eight cells in one column sharing an AND gate."""

    index: int
    row: int            # first cell row
    column: int
    bits: int           # cell at ``row`` is bit 0


@dataclass(frozen=True)
class SubBank:
    index: int
    row: int
    column: int
    dpus: tuple[tuple[ResDpu, ...], ...]   # [dpu_row][dpu_col]


@dataclass
class CyclePartials:
    """AND outputs for one bit-serial cycle: ``bits[r, c]`` is the product of
    the input on row ``row_offset + r`` with the cell in column ``c``."""

    row_offset: int
    bits: np.ndarray

    @property
    def columns(self) -> int:
        return self.bits.shape[1]


def and_compute(input_bit, weight_bit, pim_en):
    """Shared 2T AND: ``input & weight`` when enabled, else 0.

    Works elementwise on numpy arrays; ``pim_en`` may be a per-column mask.
    """
    if np.ndim(input_bit) == 0 and np.ndim(weight_bit) == 0 and np.ndim(pim_en) == 0:
        return int(input_bit) & int(weight_bit) if pim_en else 0
    return np.where(pim_en, np.bitwise_and(input_bit, weight_bit), 0)


@dataclass
class MacroState:
    config: MacroConfig = field(default_factory=MacroConfig)
    pim_en: bool = False
    cells: np.ndarray = None

    def __post_init__(self):
        shape = (self.config.rows, self.config.cols)
        if self.cells is None:
            self.cells = np.zeros(shape, dtype=np.uint8)
        elif self.cells.shape != shape:
            raise LengthMismatch(f"cell array {self.cells.shape} != geometry {shape}")

    # -- mode control -------------------------------------------------------

    @contextlib.contextmanager
    def compute(self):
        """Assert PIM_en for the duration of the block."""
        prev = self.pim_en
        self.pim_en = True
        try:
            yield self
        finally:
            self.pim_en = prev

    def _check_storage_mode(self):
        if self.pim_en:
            raise WriteDuringCompute("deassert PIM_en before writing weights")

    def _check_cell(self, row, col):
        if not (0 <= row < self.config.rows and 0 <= col < self.config.cols):
            raise AddressOutOfRange(f"cell ({row}, {col}) outside "
                                    f"{self.config.rows}x{self.config.cols} array")

    # -- storage ------------------------------------------------------------

    def write_weights(self, column: int, bits, start_row: int = 0) -> None:
        """Latch a bit vector down ``column`` starting at ``start_row``."""
        self._check_storage_mode()
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if bits.size == 0:
            return
        self._check_cell(start_row, column)
        self._check_cell(start_row + bits.size - 1, column)
        if bits.max() > 1:
            raise ValueError("weight bits must be 0 or 1")
        self.cells[start_row:start_row + bits.size, column] = bits

    def read_column(self, column: int, start_row: int = 0, length: int | None = None) -> np.ndarray:
        length = self.config.rows - start_row if length is None else length
        self._check_cell(start_row, column)
        if length:
            self._check_cell(start_row + length - 1, column)
        return self.cells[start_row:start_row + length, column].copy()

    def write_word(self, row: int, col: int, value: int) -> None:
        """Store one weight word of ``weight_precision`` bits at ``(row, col)``."""
        self._check_storage_mode()
        cfg = self.config
        p = cfg.weight_precision
        self._check_cell(row, col)
        self._check_cell(row, col + p - 1)
        mag = abs(int(value))
        if mag >= (1 << cfg.weight_magnitude_bits) or (value < 0 and not cfg.signed):
            raise OperandError(f"weight {value} does not fit {p}-bit "
                               f"{'sign-magnitude' if cfg.signed else 'unsigned'}")
        bits = [(mag >> j) & 1 for j in range(cfg.weight_magnitude_bits)]
        if cfg.signed:
            bits.append(1 if value < 0 else 0)
        self.cells[row, col:col + p] = bits

    def read_word(self, row: int, col: int) -> int:
        cfg = self.config
        p = cfg.weight_precision
        self._check_cell(row, col)
        self._check_cell(row, col + p - 1)
        bits = self.cells[row, col:col + p]
        mag = sum(int(b) << j for j, b in enumerate(bits[:cfg.weight_magnitude_bits]))
        if cfg.signed and bits[p - 1] and mag:
            return -mag
        return mag

    def dpu_origin(self, index: int) -> tuple[int, int]:
        cfg = self.config
        if not 0 <= index < cfg.dpu_count:
            raise AddressOutOfRange(f"DPU {index} outside [0, {cfg.dpu_count})")
        return (index // cfg.cols) * cfg.dpu_cells, index % cfg.cols

    def write_dpu(self, index: int, value: int) -> None:
        """Write the eight cells of DPU ``index``; bit 0 goes to the top cell."""
        cells = self.config.dpu_cells
        if not 0 <= value < (1 << cells):
            raise OperandError(f"DPU value {value} needs more than {cells} bits")
        row, col = self.dpu_origin(index)
        self.write_weights(col, [(value >> j) & 1 for j in range(cells)], start_row=row)

    def read_dpu(self, index: int) -> ResDpu:
        row, col = self.dpu_origin(index)
        bits = self.cells[row:row + self.config.dpu_cells, col]
        return ResDpu(index, row, col, sum(int(b) << j for j, b in enumerate(bits)))

    def sub_bank(self, index: int) -> SubBank:
        cfg = self.config
        grid_r, grid_c = cfg.sbnk_grid
        if not 0 <= index < grid_r * grid_c:
            raise AddressOutOfRange(f"SBNK {index} outside [0, {grid_r * grid_c})")
        row = (index // grid_c) * cfg.sbnk_rows
        col = (index % grid_c) * cfg.sbnk_dpu_cols
        dpus = []
        for dr in range(cfg.sbnk_dpu_rows):
            r = row + dr * cfg.dpu_cells
            dpus.append(tuple(self.read_dpu((r // cfg.dpu_cells) * cfg.cols + col + dc)
                              for dc in range(cfg.sbnk_dpu_cols)))
        return SubBank(index, row, col, tuple(dpus))

    def stored_bits(self) -> int:
        return int(self.cells.sum())

    # -- weight image files ---------------------------------------------------

    def save_image(self, path) -> None:
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.cells:
                w.writerow(int(b) for b in row)

    def load_image(self, path) -> None:
        self._check_storage_mode()
        self.cells = read_weight_image(path, self.config)


def read_weight_image(path, config: MacroConfig) -> np.ndarray:
    """Parse a weight-image CSV (one line per macro row, 0/1 entries)."""
    rows = []
    with open(path, newline="", encoding="ascii") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if len(rec) != config.cols:
                raise FileFormatError(f"expected {config.cols} bits, got {len(rec)}",
                                      line=lineno, path=path)
            try:
                bits = [int(x) for x in rec]
            except ValueError:
                raise FileFormatError("non-integer cell value", line=lineno, path=path) from None
            if any(b not in (0, 1) for b in bits):
                raise FileFormatError("cell values must be 0 or 1", line=lineno, path=path)
            rows.append(bits)
    if len(rows) != config.rows:
        raise FileFormatError(f"expected {config.rows} rows, got {len(rows)}", path=path)
    return np.array(rows, dtype=np.uint8)


def cycle_step(macro: MacroState, input_bits, row_offset: int = 0) -> CyclePartials:
    """Drive ``active_rows`` input bits onto the word lines and collect the
    AND products of every column.  All zeros while PIM_en is low."""
    cfg = macro.config
    x = np.asarray(input_bits, dtype=np.uint8).ravel()
    if x.size != cfg.active_rows:
        raise LengthMismatch(f"expected {cfg.active_rows} input bits, got {x.size}")
    if not 0 <= row_offset <= cfg.rows - cfg.active_rows:
        raise AddressOutOfRange(f"row offset {row_offset} out of range")
    stored = macro.cells[row_offset:row_offset + cfg.active_rows]
    bits = and_compute(x[:, None], stored, macro.pim_en).astype(np.uint8)
    return CyclePartials(row_offset, bits)


def place_weights(macro: MacroState, weights, start_slot: int = 0) -> list[tuple[int, int]]:
    """Write weights to consecutive word slots, filling each column group
    top to bottom before moving right.  Returns the ``(row, col)`` slots."""
    cfg = macro.config
    slots = []
    for i, w in enumerate(weights, start=start_slot):
        group, row = divmod(i, cfg.rows)
        if group >= cfg.column_groups:
            raise AddressOutOfRange("weights exceed macro capacity")
        slot = (row, group * cfg.weight_precision)
        macro.write_word(*slot, int(w))
        slots.append(slot)
    return slots


def bit_serial_mac(macro: MacroState, activations, weight_slots, mode: CiaMode) -> list[MultiplyTrace]:
    """Run CIA2M for each (activation, stored weight) pair on the datapath.

    ``weight_slots`` are the ``(row, col)`` word addresses written earlier.
    Per cycle and pair the activation driver strobes the activation's
    leading one against every still-enabled weight column and streams the
    activation residue against the weight's leading-one column; the AND
    outputs, shifted to their significance, are summed by the adder tree
    and accumulated.  The weight's leading-one column is then disabled,
    which is how the weight residue advances without rewriting storage.
    All pairs advance in lockstep, as parallel columns do.
    """
    cfg = macro.config
    acts = [int(a) for a in activations]
    slots = [tuple(int(v) for v in s) for s in weight_slots]
    if len(acts) != len(slots):
        raise LengthMismatch(f"{len(acts)} activations for {len(slots)} weights")
    if not acts:
        return []
    wa, wb = cfg.input_magnitude_bits, cfg.weight_magnitude_bits
    for a in acts:
        if abs(a) >= (1 << wa) or (a < 0 and not cfg.signed):
            raise PrecisionMismatch(f"activation {a} exceeds {cfg.input_precision}-bit input precision")
    for r, c in slots:
        macro._check_cell(r, c)
        macro._check_cell(r, c + cfg.weight_precision - 1)

    rows = np.array([s[0] for s in slots])
    cols = np.array([s[1] for s in slots])
    wbits = macro.cells[rows[:, None], cols[:, None] + np.arange(wb)].astype(np.int64)
    if cfg.signed:
        wneg = macro.cells[rows, cols + cfg.weight_precision - 1].astype(bool)
    else:
        wneg = np.zeros(len(slots), dtype=bool)

    n = len(acts)
    a_cur = np.abs(np.array(acts, dtype=np.int64))
    live = np.ones((n, wb), dtype=bool)
    weights_mag = (wbits << np.arange(wb)).sum(axis=1)
    budget = mode.budget(max(wa, wb))
    tree = build_tree(wa + wb, cfg.tree_pattern, leaf_bits=max(1, wa + wb - 1))
    acc = np.zeros(n, dtype=np.int64)
    steps = [[] for _ in range(n)]
    pos_b = np.arange(wb)
    pos_a = np.arange(wa)

    with macro.compute():
        for _ in range(budget):
            b_cur = ((wbits & live) << pos_b).sum(axis=1)
            active = (a_cur > 0) & (b_cur > 0)
            if not active.any():
                break
            ka = np.where(active, leading_one_index(a_cur, wa), 0)
            kb = np.where(active, leading_one_index(b_cur, wb), 0)
            a_r = np.where(active, a_cur - (np.int64(1) << ka), a_cur)

            # leading-one strobe of A against the enabled weight columns
            strobe = active.astype(np.int64)[:, None]
            en_w = live & active[:, None] & macro.pim_en
            w_side = and_compute(strobe, wbits, en_w) << (pos_b[None, :] + ka[:, None])
            # residue bits of A against the weight's leading-one column
            lead_bit = wbits[np.arange(n), kb][:, None]
            en_a = (live[np.arange(n), kb] & active)[:, None] & macro.pim_en
            a_bits = (a_r[:, None] >> pos_a[None, :]) & 1
            a_side = and_compute(a_bits, lead_bit, en_a) << (pos_a[None, :] + kb[:, None])

            term = reduce_array(np.concatenate([w_side, a_side], axis=1), tree)
            acc += term
            b_r = b_cur - np.where(active, np.int64(1) << kb, 0)
            for i in np.flatnonzero(active):
                steps[i].append(CycleRecord(int(ka[i]), int(kb[i]), int(a_r[i]),
                                            int(b_r[i]), int(term[i]), int(acc[i])))
            live[np.flatnonzero(active), kb[active]] = False
            a_cur = a_r

    b_final = ((wbits & live) << pos_b).sum(axis=1)
    traces = []
    for i in range(n):
        mag_w = int(weights_mag[i])
        w_val = -mag_w if wneg[i] else mag_w
        neg = (acts[i] < 0) != bool(wneg[i])
        sign = -1 if neg and acts[i] != 0 and mag_w != 0 else 1
        residual = int(a_cur[i] * b_final[i]) if steps[i] else 0
        traces.append(MultiplyTrace(acts[i], w_val, mode, tuple(steps[i]),
                                    int(acc[i]), residual, sign))
    return traces
