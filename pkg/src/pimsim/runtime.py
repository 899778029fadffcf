"""Desk-scale quantized inference through the PIM macro model.

Weights arrive as CSV exported from a training flow, activations are
quantized to 8 bits per tensor, and every multiplication of every layer is
mapped onto the macro and executed by :func:`pimsim.macro.bit_serial_mac`.
Quality of result is reported against exact INT8 execution of the same
quantized network (not an FP32 baseline).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cia2m import CiaMode
from .exceptions import FileFormatError, LengthMismatch
from .macro import MacroConfig
from .mapper import LayerSpec, apply_pruning, im2col, map_layer, run_layer

ACC_BITS = 32
BASELINE = "exact_int8"


@dataclass
class QuantTensor:
    """Symmetric per-tensor quantized tensor (zero point is always 0)."""

    data: np.ndarray
    scale: float
    precision: int = 8
    name: str = ""
    kind: str = "fc"
    zero_point: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int64)
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        lim = (1 << (self.precision - 1)) - 1
        if self.data.size and np.abs(self.data).max() > lim:
            raise ValueError(f"values exceed {self.precision}-bit symmetric range")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def dequantize(self) -> np.ndarray:
        return self.data * self.scale


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(data, precision: int = 8, name: str = "", kind: str = "fc") -> QuantTensor:
    """scale = max|x| / (2**(p-1) - 1); all-zero tensors get scale 1."""
    x = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    qmax = (1 << (precision - 1)) - 1
    top = float(np.abs(x).max()) if x.size else 0.0
    scale = top / qmax if top > 0 else 1.0
    q = np.clip(_round_half_away(x / scale), -qmax, qmax).astype(np.int64)
    return QuantTensor(q, scale, precision, name, kind)


# -- weight CSV ----------------------------------------------------------------

def _parse_shape(text, lineno, path):
    try:
        dims = tuple(int(t) for t in text.lower().split("x"))
    except ValueError:
        raise FileFormatError(f"bad shape {text!r}", line=lineno, path=path) from None
    if not dims or any(d < 1 for d in dims):
        raise FileFormatError(f"bad shape {text!r}", line=lineno, path=path)
    return dims


def load_weights_csv(path) -> list[QuantTensor]:
    """Read ``#layer,<name>,<kind>,<shape>,<scale>`` blocks.

    ``shape`` is ``x``-separated (``8x16``); data rows hold integers in
    row-major order with ``prod(shape[1:])`` values each and ``shape[0]``
    rows (a 1-D shape is a single row).
    """
    tensors = []
    current = None

    def finish():
        if current is None:
            return
        name, kind, shape, scale, rows, header_line = current
        want_rows = shape[0] if len(shape) > 1 else 1
        if len(rows) != want_rows:
            raise FileFormatError(f"layer {name!r} declares {want_rows} rows, found {len(rows)}",
                                  line=header_line, path=path)
        try:
            data = np.array(rows, dtype=np.int64).reshape(shape)
            tensors.append(QuantTensor(data, scale, name=name, kind=kind))
        except ValueError as e:
            raise FileFormatError(f"layer {name!r}: {e}", line=header_line, path=path) from None

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if fields[0].startswith("#"):
                if fields[0] != "#layer" or len(fields) != 5:
                    raise FileFormatError("header must be #layer,<name>,<kind>,<shape>,<scale>",
                                          line=lineno, path=path)
                finish()
                _, name, kind, shape_txt, scale_txt = fields
                if kind not in ("fc", "conv", "bias"):
                    raise FileFormatError(f"unknown layer kind {kind!r}", line=lineno, path=path)
                shape = _parse_shape(shape_txt, lineno, path)
                try:
                    scale = float(scale_txt)
                except ValueError:
                    raise FileFormatError(f"bad scale {scale_txt!r}", line=lineno, path=path) from None
                if not (scale > 0 and math.isfinite(scale)):
                    raise FileFormatError(f"scale must be positive, got {scale_txt}",
                                          line=lineno, path=path)
                current = (name, kind, shape, scale, [], lineno)
                continue
            if current is None:
                raise FileFormatError("data row before any #layer header", line=lineno, path=path)
            shape = current[2]
            width = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
            if len(fields) != width:
                raise FileFormatError(f"malformed row: expected {width} values, got {len(fields)}",
                                      line=lineno, path=path)
            try:
                current[4].append([int(f) for f in fields])
            except ValueError:
                raise FileFormatError("malformed row: non-integer value", line=lineno, path=path) from None
    finish()
    if not tensors:
        raise FileFormatError("no layers found", path=path)
    return tensors


def save_weights_csv(path, tensors) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tensors:
            shape = "x".join(str(d) for d in t.shape)
            fh.write(f"#layer,{t.name},{t.kind},{shape},{t.scale!r}\n")
            rows = t.data.reshape(t.shape[0], -1) if t.data.ndim > 1 else t.data.reshape(1, -1)
            for r in rows:
                fh.write(",".join(str(int(v)) for v in r) + "\n")


# -- network execution ---------------------------------------------------------

@dataclass
class QorReport:
    mode: str
    top1_agreement_vs_exact_int8: float
    output_mse_vs_exact_int8: float
    pruned_fraction: float
    samples: int
    macs_executed: int
    baseline: str = BASELINE
    reference: dict = field(default_factory=lambda: {
        "note": "reported CIFAR-10 figures, not reproduced at desk scale",
        "resnet18_top1_pct": 90.1, "vgg16_top1_pct": 89.72, "qor_vs_fp32_pct": 96.85,
    })

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "mode", "baseline", "top1_agreement_vs_exact_int8", "output_mse_vs_exact_int8",
            "pruned_fraction", "samples", "macs_executed", "reference")}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


@dataclass
class _Layer:
    weight: QuantTensor
    bias: QuantTensor | None


def _layers(tensors) -> list[_Layer]:
    layers = []
    for t in tensors:
        if t.kind == "bias":
            if not layers or layers[-1].bias is not None:
                raise LengthMismatch(f"bias {t.name!r} does not follow a weight tensor")
            out = layers[-1].weight.shape[0]
            if t.data.size != out:
                raise LengthMismatch(f"bias {t.name!r} has {t.data.size} values for {out} outputs")
            layers[-1].bias = t
        else:
            layers.append(_Layer(t, None))
    if not layers:
        raise LengthMismatch("network has no weight layers")
    return layers


def pruning_mask(tensors, fraction: float) -> list[np.ndarray]:
    """Global magnitude pruning: the ``round(fraction * total)`` weights of
    smallest dequantized magnitude (stable order on ties) are removed."""
    weights = [t for t in tensors if t.kind != "bias"]
    if not 0 <= fraction < 1:
        raise ValueError("pruning fraction must be in [0, 1)")
    mags = np.concatenate([np.abs(t.dequantize()).ravel() for t in weights])
    k = round(fraction * mags.size)
    flat = np.zeros(mags.size, dtype=bool)
    flat[np.argsort(mags, kind="stable")[:k]] = True
    masks, pos = [], 0
    for t in weights:
        masks.append(flat[pos:pos + t.data.size].reshape(t.shape))
        pos += t.data.size
    return masks


def _forward(layers, masks, x_float, mode, config):
    """Run the network; returns float outputs of the last layer and MACs."""
    batch = x_float.shape[0]
    act = quantize(x_float, 8)
    x = act.data
    macs = 0
    for i, (layer, mask) in enumerate(zip(layers, masks)):
        w = layer.weight
        if w.kind == "fc":
            x = x.reshape(batch, -1)
            if x.shape[1] != w.shape[1]:
                raise LengthMismatch(f"layer {w.name!r} expects {w.shape[1]} inputs, got {x.shape[1]}")
            spec = LayerSpec.fc(w.shape[1], w.shape[0], batch=batch, name=w.name)
        else:
            n, fw, _, k = w.shape
            if x.ndim == 2 and x.shape[1] % k == 0:
                side = math.isqrt(x.shape[1] // k)
                if side * side * k == x.shape[1]:
                    x = x.reshape(batch, side, side, k)
            if x.ndim != 4 or x.shape[3] != k:
                raise LengthMismatch(f"layer {w.name!r} expects NHWC input with {k} channels")
            spec = LayerSpec("conv", fw, k, n, x.shape[1], x.shape[2], batch=batch, name=w.name)
        plan = map_layer(spec, config, mode)
        if mask.any():
            plan = apply_pruning(plan, mask, granularity="weight")
        acc, m, _ = run_layer(plan, w.data, im2col(spec, x), mode, config)
        macs += m
        if np.abs(acc).max(initial=0) >= (1 << (ACC_BITS - 1)):
            raise OverflowError(f"layer {w.name!r} overflows the {ACC_BITS}-bit accumulator")
        y = acc * (w.scale * act.scale)
        if layer.bias is not None:
            y = y + layer.bias.dequantize().ravel()
        if w.kind == "conv":
            oh, ow = spec.output_hw
            y = y.reshape(batch, oh, ow, spec.filter_count)
        if i == len(layers) - 1:
            return y.reshape(batch, -1), macs
        y = np.maximum(y, 0.0)      # ReLU runs off-array
        act = quantize(y, 8)
        x = act.data
    raise AssertionError("unreachable")


def run_network(tensors, inputs, mode: CiaMode, pruning: float = 0.0,
                config: MacroConfig | None = None):
    """Run ``inputs`` (batch-first floats) through the network in ``mode``
    and compare with exact INT8 execution under the same pruning.

    Returns ``(outputs, QorReport)``.
    """
    config = config or MacroConfig(signed=True)
    if not config.signed:
        config = config.with_overrides(signed=True)
    layers = _layers(tensors)
    masks = pruning_mask(tensors, pruning)
    x = np.asarray(inputs, dtype=np.float64)
    out, macs = _forward(layers, masks, x, mode, config)
    if mode.kind == "exact":
        ref = out
    else:
        ref, _ = _forward(layers, masks, x, CiaMode.exact(), config)
    agree = float(np.mean(np.argmax(out, axis=1) == np.argmax(ref, axis=1)))
    mse = float(np.mean((out - ref) ** 2))
    total = sum(m.size for m in masks)
    pruned = sum(int(m.sum()) for m in masks) / total
    return out, QorReport(mode.label, agree, mse, pruned, int(x.shape[0]), macs)


def outputs_to_csv(outputs) -> str:
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in np.asarray(outputs))


def write_outputs_csv(path, outputs) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(outputs_to_csv(outputs))


def read_inputs_csv(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise FileFormatError("non-numeric input value", line=lineno, path=Path(path)) from None
            if len(rows[-1]) != len(rows[0]):
                raise FileFormatError("ragged input row", line=lineno, path=Path(path))
    if not rows:
        raise FileFormatError("no input rows", path=Path(path))
    return np.array(rows)
