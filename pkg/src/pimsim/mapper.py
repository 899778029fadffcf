"""Layer-to-macro mapping, pruning-aware scheduling and trace replay.

A filter of ``W*W*K`` weights is stored top to bottom in one column group
(``weight_precision`` adjacent columns), one weight per row.  Filters
shorter than the array are stacked in the same group; filters taller than
the array can be split into row segments when ``tile=True``.  Groups are
filled lowest index first, then the next pass (weight reload) begins.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction

import numpy as np

from .cia2m import CiaMode, cia2m_multiply, signed_multiply
from .exceptions import (MaskShapeMismatch, OverCapacityFilter,
                         PlanGeometryError)
from .macro import MacroConfig, MacroState, bit_serial_mac

TRACE_HEADER = ("phase", "op", "bank", "column", "cycles")


@dataclass(frozen=True)
class LayerSpec:
    """Conv or FC layer.  FC layers use ``filter_width=1`` and take a
    ``depth``-long input vector; ``batch`` multiplies the output positions."""

    kind: str
    filter_width: int
    depth: int
    filter_count: int
    input_height: int = 1
    input_width: int = 1
    padding: int = 0
    weight_bits: int = 8
    activation_bits: int = 8
    batch: int = 1
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("conv", "fc"):
            raise ValueError(f"layer kind must be 'conv' or 'fc', got {self.kind!r}")
        for f in ("filter_width", "depth", "filter_count", "input_height", "input_width", "batch"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")
        for f in ("weight_bits", "activation_bits"):
            if not 1 <= getattr(self, f) <= 16:
                raise ValueError(f"{f} must be in [1, 16]")
        if self.kind == "fc" and self.filter_width != 1:
            raise ValueError("fc layers have filter_width 1")
        if self.kind == "conv":
            for d in (self.input_height, self.input_width):
                if d + 2 * self.padding < self.filter_width:
                    raise ValueError("filter larger than padded input")

    @classmethod
    def fc(cls, inputs: int, outputs: int, **kw) -> LayerSpec:
        return cls("fc", 1, inputs, outputs, **kw)

    @property
    def filter_len(self) -> int:
        return self.filter_width ** 2 * self.depth

    @property
    def output_hw(self) -> tuple[int, int]:
        if self.kind == "fc":
            return 1, 1
        w, p = self.filter_width, self.padding
        return self.input_height + 2 * p - w + 1, self.input_width + 2 * p - w + 1

    @property
    def output_positions(self) -> int:
        h, w = self.output_hw
        return self.batch * h * w

    @property
    def weight_count(self) -> int:
        return self.filter_count * self.filter_len

    @property
    def mac_count(self) -> int:
        return self.weight_count * self.output_positions

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> LayerSpec:
        return cls(**d)


@dataclass(frozen=True)
class Placement:
    filter: int
    segment: int
    offset: int          # first weight index of the segment within its filter
    length: int
    pass_index: int
    row: int
    column: int
    bank: int            # SBNK index of the first row


@dataclass(frozen=True)
class MappingPlan:
    layer: LayerSpec
    rows: int
    cols: int
    weight_precision: int
    mode: str
    cycles_per_mac: int
    placements: tuple[Placement, ...]
    passes: int
    banks_required: int
    cycles_total: int
    base_cycles: int
    reload_cycles: int
    pruned_fraction: float = 0.0
    pruned_weights: int = 0
    pruned: tuple[int, ...] | None = ()   # flat weight indices; None = count only
    granularity: str = "sbnk"
    sbnk_rows: int = 64

    @property
    def total_weights(self) -> int:
        return self.layer.weight_count

    @property
    def degenerate(self) -> bool:
        """True when pruning leaves no work."""
        return self.pruned_weights == self.total_weights

    @property
    def surviving_macs(self) -> int:
        return (self.total_weights - self.pruned_weights) * self.layer.output_positions

    def column_assignments(self) -> dict[int, list[tuple[int, int, int]]]:
        """filter -> [(pass, row, column), ...] for each of its segments."""
        out: dict[int, list] = {}
        for p in self.placements:
            out.setdefault(p.filter, []).append((p.pass_index, p.row, p.column))
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layer"] = self.layer.to_dict()
        d["placements"] = [asdict(p) for p in self.placements]
        d["pruned"] = None if self.pruned is None else list(self.pruned)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> MappingPlan:
        d = dict(d)
        d["layer"] = LayerSpec.from_dict(d["layer"])
        d["placements"] = tuple(Placement(**p) for p in d["placements"])
        pruned = d.get("pruned", ())
        d["pruned"] = None if pruned is None else tuple(pruned)
        return cls(**d)


def _cycles_per_mac(mode: CiaMode, layer: LayerSpec, config: MacroConfig) -> int:
    width = layer.activation_bits - 1 if config.signed else layer.activation_bits
    return mode.budget(max(width, 1))


def map_layer(layer: LayerSpec, config: MacroConfig | None = None,
              mode: CiaMode | None = None, tile: bool = False) -> MappingPlan:
    """Assign every filter (segment) a column group and row range.

    Raises :class:`OverCapacityFilter` when a filter is taller than the
    array and ``tile`` is off.
    """
    config = config or MacroConfig()
    mode = mode or CiaMode.accurate()
    if layer.weight_bits != config.weight_precision:
        config = config.with_overrides(weight_precision=layer.weight_bits)
    rows, p = config.rows, config.weight_precision
    groups = config.cols // p
    if groups < 1:
        raise OverCapacityFilter(f"{p}-bit weights do not fit {config.cols} columns")
    seg_count = math.ceil(layer.filter_len / rows)
    if seg_count > 1 and not tile:
        raise OverCapacityFilter(
            f"filter of {layer.filter_len} weights x {p} bits exceeds a column group of "
            f"{rows} rows; pass tile=True to split it")

    placements = []
    pass_index, group, cursor = 0, 0, 0
    for f in range(layer.filter_count):
        for s in range(seg_count):
            offset = s * rows
            length = min(rows, layer.filter_len - offset)
            if cursor + length > rows:
                group, cursor = group + 1, 0
            if group >= groups:
                pass_index, group, cursor = pass_index + 1, 0, 0
            col = group * p
            placements.append(Placement(f, s, offset, length, pass_index, cursor, col,
                                        config.sbnk_of(cursor, col)))
            cursor += length
    passes = pass_index + 1
    budget = _cycles_per_mac(mode, layer, config)
    base = passes * layer.output_positions * budget
    rows_written = sum(pl.length for pl in placements)
    return MappingPlan(
        layer=layer, rows=rows, cols=config.cols, weight_precision=p, mode=mode.label,
        cycles_per_mac=budget, placements=tuple(placements), passes=passes,
        banks_required=passes, cycles_total=base, base_cycles=base,
        # one row write per cycle: the write delay is below a clock period
        reload_cycles=rows_written, sbnk_rows=min(config.sbnk_rows, rows),
    )


def _mask_indices(plan: MappingPlan, mask) -> np.ndarray:
    m = np.asarray(mask, dtype=bool)
    layer = plan.layer
    shapes = {(layer.weight_count,), (layer.filter_count, layer.filter_len),
              (layer.filter_count, layer.filter_width, layer.filter_width, layer.depth)}
    if m.shape not in shapes:
        raise MaskShapeMismatch(f"mask shape {m.shape} does not match layer weights "
                                f"({layer.filter_count}, {layer.filter_len})")
    return m.reshape(layer.filter_count, layer.filter_len)


def prune_by_count(plan: MappingPlan, fraction: float) -> MappingPlan:
    """Idealized per-weight pruning of ``round(fraction * weights)`` weights
    without tracking which ones; enough for cost estimates, not for replay."""
    if not 0 <= fraction < 1:
        raise ValueError("pruning fraction must be in [0, 1)")
    k = round(fraction * plan.total_weights)
    if k == 0:
        return plan
    surviving = Fraction(plan.total_weights - k, plan.total_weights)
    return replace(plan, cycles_total=math.ceil(plan.base_cycles * surviving),
                   pruned_fraction=k / plan.total_weights, pruned_weights=k,
                   pruned=None, granularity="weight")


def apply_pruning(plan: MappingPlan, mask, granularity: str = "sbnk") -> MappingPlan:
    """Record pruned weights (``mask`` True = weight is zero/pruned).

    ``granularity='sbnk'`` only skips a placement's rows inside one SBNK when
    all of them are pruned; ``'weight'`` is the idealized per-weight skip.
    ``cycles_total`` scales by the fraction of work that survives.
    """
    if granularity not in ("sbnk", "weight"):
        raise ValueError("granularity must be 'sbnk' or 'weight'")
    m = _mask_indices(plan, mask)
    pruned = int(m.sum())
    if pruned == 0:
        return plan
    total = plan.total_weights
    if granularity == "weight":
        surviving = Fraction(total - pruned, total)
    else:
        band = plan.sbnk_rows
        kept = rows_all = 0
        for pl in plan.placements:
            seg = m[pl.filter, pl.offset:pl.offset + pl.length]
            r = pl.row
            while r < pl.row + pl.length:
                end = min((r // band + 1) * band, pl.row + pl.length)
                block = seg[r - pl.row:end - pl.row]
                rows_all += block.size
                if not block.all():
                    kept += block.size
                r = end
        surviving = Fraction(kept, rows_all)
    cycles = math.ceil(plan.base_cycles * surviving)
    return replace(plan, cycles_total=cycles, pruned_fraction=pruned / total,
                   pruned_weights=pruned, pruned=tuple(int(i) for i in np.flatnonzero(m.ravel())),
                   granularity=granularity)


@dataclass(frozen=True)
class TraceStep:
    phase: int
    op: str                 # "write_weights" or "bit_serial_mac"
    bank: int
    column: int
    cycles: int
    placement: int          # index into plan.placements
    position: int = -1      # output position for compute steps
    macs: int = 0


def schedule(plan: MappingPlan, macro: MacroState | MacroConfig) -> list[TraceStep]:
    """Expand a plan into alternating write/compute phases, one pair per pass.

    A plan with no surviving work yields an empty trace.
    """
    cfg = macro.config if isinstance(macro, MacroState) else macro
    if (cfg.rows, cfg.cols, cfg.weight_precision) != (plan.rows, plan.cols, plan.weight_precision):
        raise PlanGeometryError(
            f"plan built for {plan.rows}x{plan.cols}/{plan.weight_precision}b, macro is "
            f"{cfg.rows}x{cfg.cols}/{cfg.weight_precision}b")
    if plan.degenerate:
        return []
    if plan.pruned is None:
        raise PlanGeometryError("count-only pruned plan cannot be scheduled")
    pruned = np.zeros(plan.total_weights, dtype=bool)
    pruned[list(plan.pruned)] = True
    pruned = pruned.reshape(plan.layer.filter_count, plan.layer.filter_len)

    trace = []
    for pi in range(plan.passes):
        members = [(i, pl) for i, pl in enumerate(plan.placements) if pl.pass_index == pi]
        for i, pl in members:
            trace.append(TraceStep(2 * pi, "write_weights", pl.bank, pl.column, pl.length, i))
        for pos in range(plan.layer.output_positions):
            for i, pl in members:
                live = int((~pruned[pl.filter, pl.offset:pl.offset + pl.length]).sum())
                if live:
                    trace.append(TraceStep(2 * pi + 1, "bit_serial_mac", pl.bank, pl.column,
                                           plan.cycles_per_mac, i, pos, live))
    return trace


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for s in trace:
        w.writerow((s.phase, s.op, s.bank, s.column, s.cycles))
    return buf.getvalue()


def im2col(layer: LayerSpec, inputs) -> np.ndarray:
    """Input patches, one row per output position, in filter weight order.

    FC inputs are ``(batch, depth)``; conv inputs are ``(batch, H, W, K)``
    and patches follow the ``(row, col, channel)`` order of a
    ``(n, W, W, K)`` filter.
    """
    x = np.asarray(inputs)
    if layer.kind == "fc":
        x = x.reshape(layer.batch, layer.depth)
        return x
    x = x.reshape(layer.batch, layer.input_height, layer.input_width, layer.depth)
    p, w = layer.padding, layer.filter_width
    if p:
        x = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    oh, ow = layer.output_hw
    patches = [x[b, i:i + w, j:j + w, :].ravel()
               for b in range(layer.batch) for i in range(oh) for j in range(ow)]
    return np.array(patches, dtype=x.dtype)


def execute_trace(trace, plan: MappingPlan, weights, patches, macro: MacroState,
                  mode: CiaMode) -> tuple[np.ndarray, int]:
    """Replay a trace on the macro.

    ``weights`` is ``(filter_count, filter_len)`` (or the 4-D filter shape),
    ``patches`` is ``(output_positions, filter_len)``.  Returns the
    ``(output_positions, filter_count)`` accumulator values and the number
    of multiplications issued to the array.
    """
    layer = plan.layer
    wm = np.asarray(weights, dtype=np.int64).reshape(layer.filter_count, layer.filter_len)
    xs = np.asarray(patches, dtype=np.int64).reshape(layer.output_positions, layer.filter_len)
    pruned = np.zeros(plan.total_weights, dtype=bool)
    pruned[list(plan.pruned)] = True
    pruned = pruned.reshape(wm.shape)
    out = np.zeros((layer.output_positions, layer.filter_count), dtype=np.int64)
    macs = 0

    phases: dict[int, list[TraceStep]] = {}
    for step in trace:
        phases.setdefault(step.phase, []).append(step)
    for phase in sorted(phases):
        steps = phases[phase]
        if steps[0].op == "write_weights":
            for st in steps:
                pl = plan.placements[st.placement]
                for r in range(pl.length):
                    macro.write_word(pl.row + r, pl.column, int(wm[pl.filter, pl.offset + r]))
            continue
        acts, slots, dest = [], [], []
        for st in steps:
            pl = plan.placements[st.placement]
            for r in range(pl.length):
                k = pl.offset + r
                if pruned[pl.filter, k]:
                    continue
                acts.append(int(xs[st.position, k]))
                slots.append((pl.row + r, pl.column))
                dest.append((st.position, pl.filter))
        traces = bit_serial_mac(macro, acts, slots, mode)
        macs += len(traces)
        for (pos, f), t in zip(dest, traces):
            out[pos, f] += t.value
    return out, macs


def direct_layer(weights, patches, mode: CiaMode, pruned_mask=None, signed: bool = True,
                 width: int = 8) -> np.ndarray:
    """Reference layer computation straight from cia2m-core, no macro."""
    wm = np.asarray(weights, dtype=np.int64)
    wm = wm.reshape(wm.shape[0], -1)
    xs = np.asarray(patches, dtype=np.int64).reshape(-1, wm.shape[1])
    skip = (np.zeros(wm.shape, dtype=bool) if pruned_mask is None
            else np.asarray(pruned_mask, dtype=bool).reshape(wm.shape))
    out = np.zeros((xs.shape[0], wm.shape[0]), dtype=np.int64)
    for pos in range(xs.shape[0]):
        for f in range(wm.shape[0]):
            acc = 0
            for k in range(wm.shape[1]):
                if skip[f, k]:
                    continue
                if signed:
                    acc += signed_multiply(int(xs[pos, k]), int(wm[f, k]), mode, width).value
                else:
                    acc += cia2m_multiply(int(xs[pos, k]), int(wm[f, k]), mode, width).value
            out[pos, f] = acc
    return out


def run_layer(plan: MappingPlan, weights, patches, mode: CiaMode,
              config: MacroConfig | None = None) -> tuple[np.ndarray, int, list[TraceStep]]:
    """Schedule and replay ``plan`` on a fresh macro."""
    config = config or MacroConfig()
    if config.weight_precision != plan.weight_precision:
        config = config.with_overrides(weight_precision=plan.weight_precision)
    macro = MacroState(config)
    trace = schedule(plan, macro)
    out, macs = execute_trace(trace, plan, weights, patches, macro, mode)
    return out, macs, trace


# VGG-16 for 32x32 inputs; 'M' marks 2x2 max-pooling.
_VGG16_CFG = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M",
              512, 512, 512, "M"]


def vgg16_cifar10_layers(weight_bits: int = 8, activation_bits: int = 8) -> list[LayerSpec]:
    """Layer list of the CIFAR-10 VGG-16 workload (3x3 same-padded convs,
    512-512-10 classifier)."""
    layers = []
    size, channels = 32, 3
    for i, v in enumerate(_VGG16_CFG):
        if v == "M":
            size //= 2
            continue
        layers.append(LayerSpec("conv", 3, channels, v, size, size, padding=1,
                                weight_bits=weight_bits, activation_bits=activation_bits,
                                name=f"conv{len(layers) + 1}"))
        channels = v
    for n_in, n_out in ((512, 512), (512, 512), (512, 10)):
        layers.append(LayerSpec.fc(n_in, n_out, weight_bits=weight_bits,
                                   activation_bits=activation_bits, name=f"fc{len(layers) - 12}"))
    return layers


def map_network(layers, config: MacroConfig | None = None, mode: CiaMode | None = None,
                pruning: float = 0.0) -> list[MappingPlan]:
    """Map a layer list with depth tiling and idealized count-based pruning."""
    plans = []
    for layer in layers:
        plan = map_layer(layer, config, mode, tile=True)
        if pruning > 0:
            plan = prune_by_count(plan, pruning)
        plans.append(plan)
    return plans
