"""
Bit-serial multiplication inside the SRAM macro
================================================

Weights are written into the 256x64 array as 8-bit words.  Inputs are
streamed in and every product is built from AND partials that an adder
tree reduces.  The result must equal the arithmetic core bit for bit.
"""

import numpy as np

from pimsim import CiaMode, MacroConfig, MacroState, bit_serial_mac, cia2m_multiply, place_weights

cfg = MacroConfig()
print(f"array {cfg.rows}x{cfg.cols}, {cfg.capacity_bits} bits, "
      f"{cfg.dot_products_per_cycle} dot products per cycle")

rng = np.random.default_rng(0)
# dense operands such as 255 need all eight cycles to come out exact
weights = [255, 200] + [int(v) for v in rng.integers(0, 256, 6)]
inputs = [255, 239] + [int(v) for v in rng.integers(0, 256, 6)]

macro = MacroState(cfg)
slots = place_weights(macro, weights)
print("weight slots (row, column):", slots[:4], "...")

for mode in (CiaMode.approximate(), CiaMode.accurate(), CiaMode.exact()):
    traces = bit_serial_mac(macro, inputs, slots, mode)
    same = all(tr.value == cia2m_multiply(a, w, mode).value
               for tr, a, w in zip(traces, inputs, weights))
    print(f"{mode.label:12s} products {[tr.value for tr in traces][:4]} ... matches core: {same}")

# storage is read-only during compute
assert [macro.read_word(*s) for s in slots] == weights
