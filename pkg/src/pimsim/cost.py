"""Area / power / throughput / energy estimates for the macro.

Every metric in a :class:`CostReport` carries a provenance label:
``derived_formula`` when it is computed here from the configuration, or
``paper_calibrated`` when it is a reported silicon figure that the model
does not reconstruct.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .cia2m import CiaMode
from .exceptions import UnknownCorner
from .macro import MacroConfig

DERIVED = "derived_formula"
CALIBRATED = "paper_calibrated"
PROVENANCES = (DERIVED, CALIBRATED)

OPS_PER_MAC = 2


@dataclass(frozen=True)
class CellConstants:
    """Proposed 5T latch + shared AND bit-cell, 65 nm, 1.2 V."""

    transistors_per_mult: float = 5.25
    area_um2: float = 2.02
    power_nw: float = 18.84
    read_delay_ps: float = 105.2
    write_delay_ps: float = 157.8


# Transistors per 1-b multiplication of earlier bit-cells, and the savings
# reported against each of them.
BASELINE_CELLS = {
    "shared_and_8.75T": (8.75, 40.0),
    "xnor_10T": (10.0, 48.5),
    "nor_12T": (12.0, 56.0),
}

# Share of total power drawn by the adder tree (static).
ADDER_TREE_POWER_SHARE = 0.136


class Corner(enum.Enum):
    FF = ("FF", -10, 1.296)
    TT = ("TT", 27, 1.968)
    SS = ("SS", 80, 2.928)

    def __init__(self, label, temp_c, delay_ns):
        self.label = label
        self.temperature_c = temp_c
        self.compute_delay_ns = delay_ns


def corner_delay(corner: Corner | str) -> float:
    """Compute delay (ns) of a Res-DPU at a process/temperature corner."""
    if isinstance(corner, Corner):
        return corner.compute_delay_ns
    try:
        return Corner[str(corner).upper()].compute_delay_ns
    except KeyError:
        raise UnknownCorner(f"unknown corner {corner!r}; expected FF, TT or SS") from None


# Reported operating points of the macro on the pruned VGG-16 / CIFAR-10
# workload.  The starred variants are the second column of the comparison
# table.
REPORTED_THROUGHPUT_TOPS = 0.43
REPORTED_THROUGHPUT_TOPS_STAR = 1.72
REPORTED_ENERGY_EFF_TOPS_W = 87.22
REPORTED_ENERGY_EFF_TOPS_W_STAR = 348.86
REPORTED_PEAK_LABELS = {1: "341 TOPS", 4: "85.25 TOPS"}
REPORTED_PRUNING = 0.30
REFERENCE_ACCURACY = {
    "resnet18_cifar10": 90.1, "vgg16_cifar10": 89.72,
    "resnet18_fp32": 93.2, "vgg16_fp32": 92.64, "qor_pct": 96.85,
}


@dataclass(frozen=True)
class Metric:
    value: object
    unit: str
    provenance: str
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")


@dataclass
class CostReport:
    metrics: dict[str, Metric] = field(default_factory=dict)
    flags: dict[str, object] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def add(self, name, value, unit, provenance, note=""):
        self.metrics[name] = Metric(value, unit, provenance, note)

    def __getitem__(self, name):
        return self.metrics[name].value

    def provenance(self, name) -> str:
        return self.metrics[name].provenance

    @property
    def throughput_ops_per_s(self) -> float:
        return self["throughput_ops_per_s"]

    @property
    def cycles_per_op(self) -> int:
        return self["cycles_per_op"]

    def validate(self) -> None:
        for name, m in self.metrics.items():
            if m.provenance not in PROVENANCES:
                raise ValueError(f"metric {name} has no valid provenance")

    def to_dict(self) -> dict:
        self.validate()
        return {
            "metrics": {k: {"value": m.value, "unit": m.unit, "provenance": m.provenance,
                            **({"note": m.note} if m.note else {})}
                        for k, m in sorted(self.metrics.items())},
            "flags": dict(sorted(self.flags.items())),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def transistor_savings(proposed: float, baseline: float) -> float:
    """Percent fewer transistors than ``baseline``."""
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    # (b - p) / b keeps 40.0 exact for (5.25, 8.75)
    return 100.0 * (baseline - proposed) / baseline


def cycles_per_op(mode: CiaMode | int, config: MacroConfig) -> int:
    if isinstance(mode, CiaMode):
        return mode.budget(config.input_magnitude_bits)
    if int(mode) < 1:
        raise ValueError("cycles per op must be >= 1")
    return int(mode)


def peak_ops_per_s(config: MacroConfig, cycles: int) -> float:
    """2 ops per MAC x dot products per cycle x clock / cycles per op."""
    return OPS_PER_MAC * config.dot_products_per_cycle * config.clock_mhz * 1e6 / cycles


def array_area_um2(config: MacroConfig, cell: CellConstants = CellConstants()) -> float:
    return config.capacity_bits * cell.area_um2


def bottom_up_power_w(config: MacroConfig, cell: CellConstants = CellConstants()) -> float:
    """Array cell power scaled up so the adder tree takes its reported
    share of the total."""
    array_w = config.capacity_bits * cell.power_nw * 1e-9
    return array_w / (1.0 - ADDER_TREE_POWER_SHARE)


def throughput(config: MacroConfig | None = None, mode: CiaMode | int = 1,
               cell: CellConstants = CellConstants()) -> CostReport:
    """Peak throughput report; ``mode`` is a CIA2M mode or a cycle count
    (1 for 1A1W)."""
    config = config or MacroConfig()
    cycles = cycles_per_op(mode, config)
    ops = peak_ops_per_s(config, cycles)
    rep = CostReport()
    rep.add("cycles_per_op", cycles, "cycles", DERIVED)
    rep.add("dot_products_per_cycle", config.dot_products_per_cycle, "MAC/cycle", DERIVED)
    rep.add("clock_mhz", config.clock_mhz, "MHz", DERIVED, "configuration input")
    rep.add("throughput_ops_per_s", ops, "ops/s", DERIVED)
    rep.add("area_um2", array_area_um2(config, cell), "um^2", DERIVED, "bit-cell array only")
    power = bottom_up_power_w(config, cell)
    rep.add("power_bottom_up_w", power, "W", DERIVED)
    rep.add("energy_eff_tops_per_w", ops / power / 1e12, "TOPS/W", DERIVED,
            "bottom-up: cell power plus adder-tree share")
    if cycles in REPORTED_PEAK_LABELS and config == MacroConfig():
        label = REPORTED_PEAK_LABELS[cycles]
        rep.add("throughput_reported_label", label, "as printed", CALIBRATED,
                "printed unit is TOPS; the arithmetic gives ops/s of order 1e11 (GOPS)")
        msg = (f"reported peak '{label}' is dimensionally GOPS: "
               f"computed {ops:.6g} ops/s = {ops / 1e9:.6g} GOPS")
        rep.warnings.append(msg)
    return rep


def peak_report(config: MacroConfig | None = None, cell: CellConstants = CellConstants()) -> CostReport:
    """Configuration-only report: 1A1W and accurate-mode peaks, corner
    delays, bit-cell constants and transistor savings."""
    config = config or MacroConfig()
    rep = CostReport()
    for tag, mode in (("1a1w", 1), ("accurate", CiaMode.accurate())):
        sub = throughput(config, mode, cell)
        rep.add(f"throughput_{tag}_ops_per_s", sub["throughput_ops_per_s"], "ops/s", DERIVED,
                f"{sub['cycles_per_op']} cycle(s) per op")
        rep.add(f"energy_eff_{tag}_tops_per_w", sub["energy_eff_tops_per_w"], "TOPS/W", DERIVED,
                "bottom-up: cell power plus adder-tree share")
        if "throughput_reported_label" in sub.metrics:
            rep.metrics[f"throughput_{tag}_reported_label"] = sub.metrics["throughput_reported_label"]
        rep.warnings.extend(sub.warnings)
    rep.add("dot_products_per_cycle", config.dot_products_per_cycle, "MAC/cycle", DERIVED)
    rep.add("clock_mhz", config.clock_mhz, "MHz", DERIVED, "configuration input")
    rep.add("area_um2", array_area_um2(config, cell), "um^2", DERIVED, "bit-cell array only")
    rep.add("power_bottom_up_w", bottom_up_power_w(config, cell), "W", DERIVED)
    for c in Corner:
        rep.add(f"compute_delay_{c.label}_ns", c.compute_delay_ns, "ns", CALIBRATED,
                f"{c.temperature_c} C")
    rep.add("cell_transistors_per_mult", cell.transistors_per_mult, "T", CALIBRATED)
    rep.add("cell_area_um2", cell.area_um2, "um^2", CALIBRATED)
    rep.add("cell_power_nw", cell.power_nw, "nW", CALIBRATED)
    for name, (base, reported) in BASELINE_CELLS.items():
        got = transistor_savings(cell.transistors_per_mult, base)
        rep.add(f"transistor_savings_vs_{name}_pct", got, "%", DERIVED,
                f"reported {reported}%")
    return rep


def macro_summary(config: MacroConfig | None = None, plans=(), workload: str = "",
                  cell: CellConstants = CellConstants()) -> CostReport:
    """Combine peak arithmetic, the workload's mapped cycles and the
    reported calibration points into one report.

    Calibrated throughput/efficiency fields are attached only for the
    pruned VGG-16 / CIFAR-10 workload they were reported for.
    """
    config = config or MacroConfig()
    plans = list(plans)
    rep = CostReport()
    rep.flags["workload"] = workload
    rep.flags["empty_plan"] = not plans
    cycles_total = sum(p.cycles_total for p in plans)
    macs = sum(p.surviving_macs for p in plans)
    analytic = sum(p.layer.mac_count for p in plans)
    cpm = plans[0].cycles_per_mac if plans else 1

    ops = peak_ops_per_s(config, cpm)
    rep.add("cycles_per_op", cpm, "cycles", DERIVED)
    rep.add("throughput_ops_per_s", ops, "ops/s", DERIVED, "peak for the workload's mode")
    rep.add("area_um2", array_area_um2(config, cell), "um^2", DERIVED, "bit-cell array only")
    rep.add("utilized_cycles", cycles_total, "cycles", DERIVED)
    rep.add("reload_cycles", sum(p.reload_cycles for p in plans), "cycles", DERIVED)
    rep.add("macs_executed", macs, "MAC", DERIVED)
    pruned = 1.0 - macs / analytic if analytic else 0.0
    rep.add("pruned_fraction", pruned, "fraction", DERIVED)
    speedup = 1.0 / (1.0 - pruned) if pruned < 1 else 0.0
    rep.add("pruning_speedup", speedup, "x", DERIVED, "peak scaled by skipped work")
    rep.add("effective_ops_per_s", ops * speedup, "ops/s", DERIVED)
    runtime = cycles_total / (config.clock_mhz * 1e6)
    rep.add("runtime_s", runtime, "s", DERIVED)
    rep.add("workload_ops_per_s", OPS_PER_MAC * macs / runtime if runtime else 0.0, "ops/s",
            DERIVED, "mapped cycles, row batching not modeled")
    power = bottom_up_power_w(config, cell)
    bottom_up = ops * speedup / power / 1e12
    rep.add("energy_eff_bottom_up_tops_per_w", bottom_up, "TOPS/W", DERIVED)

    calibrated = (workload == "vgg16_cifar10" and config == MacroConfig()
                  and abs(pruned - REPORTED_PRUNING) < 0.01)
    rep.flags["calibrated_workload"] = calibrated
    if calibrated:
        rep.add("throughput_tops", REPORTED_THROUGHPUT_TOPS, "TOPS", CALIBRATED,
                "reported; not reproducible from the peak arithmetic")
        rep.add("throughput_tops_star", REPORTED_THROUGHPUT_TOPS_STAR, "TOPS", CALIBRATED)
        rep.add("energy_eff_tops_per_w", REPORTED_ENERGY_EFF_TOPS_W, "TOPS/W", CALIBRATED)
        rep.add("energy_eff_tops_per_w_star", REPORTED_ENERGY_EFF_TOPS_W_STAR, "TOPS/W", CALIBRATED)
        rep.add("throughput_calibrated_over_derived",
                REPORTED_THROUGHPUT_TOPS * 1e12 / (ops * speedup), "x", DERIVED,
                "gap between the reported endpoint and the scaling chain")
    else:
        rep.add("throughput_tops", ops * speedup / 1e12, "TOPS", DERIVED)
        rep.add("energy_eff_tops_per_w", bottom_up, "TOPS/W", DERIVED)
    return rep
