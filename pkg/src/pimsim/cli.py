"""``pimsim`` command-line front end.

Every command writes its artifacts into the ``--out`` directory, or sends
the primary artifact to stdout when ``--out`` is omitted.  Diagnostics go
to stderr only.  Exit codes: 0 success, 1 runtime or I/O failure, 2 usage
or malformed input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cost as cost_mod
from .cia2m import CiaMode, cia2m_multiply, signed_multiply
from .error_analysis import exhaustive_stats, histogram, sampled_stats
from .exceptions import FileFormatError, PimSimError
from .macro import MacroConfig, MacroState, bit_serial_mac, place_weights
from .mapper import (LayerSpec, MappingPlan, apply_pruning, map_layer, map_network,
                     schedule, trace_to_csv, vgg16_cifar10_layers)
from .runtime import load_weights_csv, outputs_to_csv, read_inputs_csv, run_network

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

_MACRO_KEYS = tuple(f.name for f in dataclasses.fields(MacroConfig))
_RUN_KEYS = ("mode", "seed", "out")


class UsageError(PimSimError, ValueError):
    pass


@dataclass
class RunConfig:
    """Options shared by all commands.

    ``--config`` JSON may hold any :class:`MacroConfig` field (flat or under
    a ``"macro"`` key) plus ``mode``, ``seed`` and ``out``.  Unknown keys
    are rejected.  Command-line flags override the file.
    """

    macro: MacroConfig = field(default_factory=MacroConfig)
    mode: str | None = None
    seed: int = 0
    out: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        if not isinstance(d, dict):
            raise UsageError("config must be a JSON object")
        d = dict(d)
        macro_kw = d.pop("macro", {})
        if not isinstance(macro_kw, dict):
            raise UsageError("config 'macro' must be an object")
        macro_kw = dict(macro_kw)
        for k in list(d):
            if k in _MACRO_KEYS:
                macro_kw[k] = d.pop(k)
        unknown = sorted(set(d) - set(_RUN_KEYS)) + sorted(set(macro_kw) - set(_MACRO_KEYS))
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        types = {f.name: f.type for f in dataclasses.fields(MacroConfig)}
        for k, v in macro_kw.items():
            want = types[k]
            ok = {"int": isinstance(v, int) and not isinstance(v, bool),
                  "float": isinstance(v, (int, float)) and not isinstance(v, bool),
                  "bool": isinstance(v, bool),
                  "str": isinstance(v, str)}[want]
            if not ok:
                raise UsageError(f"config key {k!r} must be {want}, got {v!r}")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise UsageError("config 'seed' must be an integer")
        return cls(MacroConfig(**macro_kw), d.get("mode"), seed, d.get("out"))

    @classmethod
    def load(cls, text: str | None) -> RunConfig:
        if text is None:
            return cls()
        if text.lstrip().startswith("{"):
            raw = text
        else:
            raw = Path(text).read_text(encoding="utf-8")
        try:
            return cls.from_dict(json.loads(raw))
        except json.JSONDecodeError as e:
            raise UsageError(f"config is not valid JSON: {e}") from None


# -- output helpers ------------------------------------------------------------

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class _Sink:
    """Writes named artifacts to ``out`` or the primary one to stdout."""

    def __init__(self, out: str | None, stdout):
        self.dir = Path(out) if out else None
        self.stdout = stdout
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str, primary: bool = False) -> None:
        if self.dir is not None:
            with open(self.dir / name, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        elif primary:
            self.stdout.write(text)


def _mode(args, run: RunConfig, default: str) -> CiaMode:
    text = args.mode or run.mode or default
    try:
        return CiaMode.parse(text)
    except ValueError as e:
        raise UsageError(str(e)) from None


# -- analyze-mult --------------------------------------------------------------

def cmd_analyze_mult(args, run: RunConfig, sink: _Sink) -> int:
    mode = _mode(args, run, "approx")
    if args.samples is not None:
        stats = sampled_stats(args.width, mode, args.samples, run.seed)
        sink.emit("error_stats.json", _dump_json(stats.to_dict()), primary=True)
        return EXIT_OK
    stats = exhaustive_stats(args.width, mode)
    hist = histogram(args.width, mode, args.bins)
    sink.emit("error_stats.json", _dump_json(stats.to_dict()))
    sink.emit("error_histogram.csv", hist.to_csv(), primary=True)
    return EXIT_OK


# -- simulate-macro ------------------------------------------------------------

SIM_HEADER = ("a,b,mode,cycles,product,residual,terms,"
              "ref_cycles,ref_product,ref_residual,equal")


def read_pairs(path, default_mode: CiaMode) -> list[tuple[int, int, CiaMode]]:
    """``a,b`` or ``a,b,mode`` per line; ``#`` comments and an ``a,b...``
    header line are skipped."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if not pairs and fields[:2] == ["a", "b"]:
                continue
            if len(fields) not in (2, 3):
                raise FileFormatError(f"expected 'a,b[,mode]', got {line!r}", line=lineno, path=path)
            try:
                a, b = int(fields[0]), int(fields[1])
                mode = CiaMode.parse(fields[2]) if len(fields) == 3 else default_mode
            except ValueError as e:
                raise FileFormatError(f"corrupt row {line!r}: {e}", line=lineno, path=path) from None
            pairs.append((a, b, mode))
    return pairs


def random_pairs(n: int, config: MacroConfig, rng: np.random.Generator, modes=None):
    wa, wb = config.input_magnitude_bits, config.weight_magnitude_bits
    modes = modes or [CiaMode.approximate(), CiaMode.accurate(), CiaMode.exact()]
    out = []
    for _ in range(n):
        a = int(rng.integers(0, 1 << wa))
        b = int(rng.integers(0, 1 << wb))
        if config.signed:
            a *= int(rng.choice((-1, 1)))
            b *= int(rng.choice((-1, 1)))
        out.append((a, b, modes[int(rng.integers(len(modes)))]))
    return out


def simulate_pairs(pairs, config: MacroConfig):
    """Run pairs through the macro datapath; returns ``(trace, reference,
    equal)`` per pair in input order, the reference from cia2m-core."""
    results = [None] * len(pairs)
    capacity = config.rows * config.column_groups
    by_mode: dict[CiaMode, list[int]] = {}
    for i, (_, _, m) in enumerate(pairs):
        by_mode.setdefault(m, []).append(i)
    wmax = 1 << config.weight_magnitude_bits
    for mode, idx in by_mode.items():
        for start in range(0, len(idx), capacity):
            chunk = idx[start:start + capacity]
            for i in chunk:
                b = pairs[i][1]
                if abs(b) >= wmax or (b < 0 and not config.signed):
                    raise UsageError(f"pair {i + 1}: weight {b} out of "
                                     f"{config.weight_precision}-bit range")
            macro = MacroState(config)
            slots = place_weights(macro, [pairs[i][1] for i in chunk])
            traces = bit_serial_mac(macro, [pairs[i][0] for i in chunk], slots, mode)
            for i, tr in zip(chunk, traces):
                a, b, _ = pairs[i]
                if config.signed:
                    ref = signed_multiply(a, b, mode, config.weight_precision)
                else:
                    ref = cia2m_multiply(a, b, mode, config.weight_precision)
                equal = (tr.value == ref.value and tr.residual_error == ref.residual_error
                         and tr.steps == ref.steps)
                results[i] = (tr, ref, equal)
    return results


def cmd_simulate(args, run: RunConfig, sink: _Sink) -> int:
    cfg = run.macro
    default_mode = _mode(args, run, "accurate")
    if (args.pairs is None) == (args.random is None):
        raise UsageError("give exactly one of --pairs FILE or --random N")
    if args.pairs is not None:
        if not Path(args.pairs).exists():
            raise FileNotFoundError(f"pairs file not found: {args.pairs}")
        pairs = read_pairs(args.pairs, default_mode)
    else:
        if args.random < 0:
            raise UsageError("--random must be >= 0")
        modes = [default_mode] if args.mode else None
        pairs = random_pairs(args.random, cfg, np.random.default_rng(run.seed), modes)
    if not pairs:
        sink.emit("macro_trace.csv", "", primary=True)
        return EXIT_OK
    rows = [SIM_HEADER]
    mismatches = 0
    for (a, b, mode), (tr, ref, equal) in zip(pairs, simulate_pairs(pairs, cfg)):
        mismatches += not equal
        terms = ";".join(str(s.term) for s in tr.steps)
        rows.append(f"{a},{b},{mode.label},{tr.cycles_used},{tr.value},{tr.residual_error},"
                    f"{terms},{ref.cycles_used},{ref.value},{ref.residual_error},"
                    f"{'true' if equal else 'false'}")
    sink.emit("macro_trace.csv", "\n".join(rows) + "\n", primary=True)
    if mismatches:
        print(f"error: {mismatches} pair(s) differ from cia2m-core", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# -- map -----------------------------------------------------------------------

def _layer_from_args(args) -> LayerSpec:
    if args.fc:
        return LayerSpec.fc(args.fc[0], args.fc[1], batch=args.batch, name="fc")
    fw, depth, filters, h, w = args.conv
    return LayerSpec("conv", fw, depth, filters, h, w, padding=args.padding,
                     batch=args.batch, name="conv")


def _plan_summary(plan: MappingPlan) -> dict:
    return {"name": plan.layer.name, "kind": plan.layer.kind, "passes": plan.passes,
            "banks_required": plan.banks_required, "cycles_total": plan.cycles_total,
            "base_cycles": plan.base_cycles, "reload_cycles": plan.reload_cycles,
            "weights": plan.total_weights, "mac_count": plan.layer.mac_count,
            "surviving_macs": plan.surviving_macs, "pruned_fraction": plan.pruned_fraction}


def network_summary(plans) -> dict:
    layers = [_plan_summary(p) for p in plans]
    totals = {k: sum(d[k] for d in layers) for k in
              ("passes", "cycles_total", "base_cycles", "reload_cycles", "weights",
               "mac_count", "surviving_macs")}
    return {"layers": layers, "totals": totals}


def cmd_map(args, run: RunConfig, sink: _Sink) -> int:
    cfg = run.macro
    mode = _mode(args, run, "accurate")
    if not 0 <= args.pruning < 1:
        raise UsageError("--pruning must be in [0, 1)")
    if args.network:
        plans = map_network(vgg16_cifar10_layers(cfg.weight_precision, cfg.input_precision),
                            cfg, mode, args.pruning)
        sink.emit("network_plan.json", _dump_json(network_summary(plans)), primary=True)
        return EXIT_OK
    if not (args.fc or args.conv):
        raise UsageError("give --fc IN OUT, --conv FW DEPTH FILTERS H W, or --network vgg16")
    layer = _layer_from_args(args)
    plan = map_layer(layer, cfg, mode, tile=args.tile)
    if args.pruning > 0:
        rng = np.random.default_rng(run.seed)
        k = round(args.pruning * plan.total_weights)
        mask = np.zeros(plan.total_weights, dtype=bool)
        mask[rng.choice(plan.total_weights, size=k, replace=False)] = True
        plan = apply_pruning(plan, mask, granularity=args.granularity)
    sink.emit("plan.json", plan.to_json() + "\n", primary=True)
    sink.emit("trace.csv", trace_to_csv(schedule(plan, cfg)))
    return EXIT_OK


# -- cost ----------------------------------------------------------------------

def _load_plans(path) -> list[MappingPlan]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    items = data if isinstance(data, list) else [data]
    try:
        return [MappingPlan.from_dict(d) for d in items]
    except (KeyError, TypeError) as e:
        raise UsageError(f"{path}: not a mapping plan ({e})") from None


def cmd_cost(args, run: RunConfig, sink: _Sink) -> int:
    cfg = run.macro
    rep = cost_mod.peak_report(cfg)
    if args.mode or run.mode:
        sub = cost_mod.throughput(cfg, _mode(args, run, "accurate"))
        rep.metrics["throughput_mode_ops_per_s"] = sub.metrics["throughput_ops_per_s"]
        rep.metrics["cycles_per_op"] = sub.metrics["cycles_per_op"]
    if args.corner:
        rep.add("compute_delay_ns", cost_mod.corner_delay(args.corner), "ns",
                cost_mod.CALIBRATED, args.corner.upper())
    if args.plan:
        mode = _mode(args, run, "accurate")
        if args.plan == "vgg16":
            pruning = cost_mod.REPORTED_PRUNING if args.pruning is None else args.pruning
            plans = map_network(vgg16_cifar10_layers(cfg.weight_precision, cfg.input_precision),
                                cfg, mode, pruning)
            workload = args.workload or "vgg16_cifar10"
        else:
            plans = _load_plans(args.plan)
            workload = args.workload or ""
        summary = cost_mod.macro_summary(cfg, plans, workload)
        rep.metrics.update(summary.metrics)
        rep.flags.update(summary.flags)
        rep.warnings.extend(summary.warnings)
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    sink.emit("cost_report.json", rep.to_json(), primary=True)
    return EXIT_OK


# -- infer ---------------------------------------------------------------------

def cmd_infer(args, run: RunConfig, sink: _Sink) -> int:
    if not Path(args.weights).exists():
        raise FileNotFoundError(f"weights file not found: {args.weights}")
    tensors = load_weights_csv(args.weights)
    mode = _mode(args, run, "approx")
    if args.inputs:
        if not Path(args.inputs).exists():
            raise FileNotFoundError(f"inputs file not found: {args.inputs}")
        x = read_inputs_csv(args.inputs)
    else:
        first = tensors[0]
        if first.kind != "fc":
            raise UsageError("random inputs need an fc first layer; pass --inputs")
        x = np.random.default_rng(run.seed).normal(size=(args.samples, first.shape[1]))
    cfg = run.macro if run.macro.signed else run.macro.with_overrides(signed=True)
    out, report = run_network(tensors, x, mode, args.pruning, cfg)
    sink.emit("outputs.csv", outputs_to_csv(out))
    sink.emit("qor.json", report.to_json(), primary=True)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="RNG seed (default 0)")
    p.add_argument("--out", default=d, help="output directory (default: primary artifact to stdout)")
    p.add_argument("--config", default=d, help="JSON object or path to a JSON file")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pimsim", description="CIA2M / PIM macro simulator")
    _add_globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("analyze-mult", help="exhaustive or sampled multiplier error analysis")
    _add_globals(s, suppress=True)
    s.add_argument("--width", type=int, default=8)
    s.add_argument("--mode", default=None, help="approx|accurate|exact|custom:N (default approx)")
    s.add_argument("--bins", type=int, default=None, help="histogram bins (default min(64, max+1))")
    s.add_argument("--samples", type=int, default=None, help="seeded sampling instead of exhaustive")
    s.set_defaults(func=cmd_analyze_mult)

    s = sub.add_parser("simulate-macro", help="run operand pairs through the bit-level macro")
    _add_globals(s, suppress=True)
    s.add_argument("--pairs", default=None, help="CSV of a,b[,mode] rows")
    s.add_argument("--random", type=int, default=None, help="N seeded random pairs")
    s.add_argument("--mode", default=None, help="mode for rows without one (default accurate)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("map", help="map a layer or network onto the macro")
    _add_globals(s, suppress=True)
    s.add_argument("--fc", type=int, nargs=2, metavar=("IN", "OUT"))
    s.add_argument("--conv", type=int, nargs=5, metavar=("FW", "DEPTH", "FILTERS", "H", "W"))
    s.add_argument("--network", choices=["vgg16"])
    s.add_argument("--padding", type=int, default=0)
    s.add_argument("--batch", type=int, default=1)
    s.add_argument("--tile", action="store_true", help="split filters taller than a column group")
    s.add_argument("--pruning", type=float, default=0.0)
    s.add_argument("--granularity", choices=["sbnk", "weight"], default="sbnk")
    s.add_argument("--mode", default=None)
    s.set_defaults(func=cmd_map)

    s = sub.add_parser("cost", help="area/power/throughput report")
    _add_globals(s, suppress=True)
    s.add_argument("--plan", default=None, help="'vgg16' or a plan JSON written by 'map'")
    s.add_argument("--pruning", type=float, default=None,
                   help="pruning for --plan vgg16 (default 0.30)")
    s.add_argument("--workload", default=None)
    s.add_argument("--corner", default=None, help="FF|TT|SS")
    s.add_argument("--mode", default=None)
    s.set_defaults(func=cmd_cost)

    s = sub.add_parser("infer", help="quantized inference through the macro with QoR report")
    _add_globals(s, suppress=True)
    s.add_argument("--weights", required=True)
    s.add_argument("--inputs", default=None, help="CSV, one flattened sample per row")
    s.add_argument("--samples", type=int, default=16, help="random inputs when --inputs is absent")
    s.add_argument("--mode", default=None)
    s.add_argument("--pruning", type=float, default=0.0)
    s.set_defaults(func=cmd_infer)
    return p


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        run = RunConfig.load(args.config)
        if args.seed is not None:
            run.seed = args.seed
        if args.out is not None:
            run.out = args.out
        sink = _Sink(run.out, stdout)
        return args.func(args, run, sink)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OverflowError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (PimSimError, ValueError, KeyError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
