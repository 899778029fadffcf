"""
Mapping layers and estimating cost
==================================

Map a convolution onto the macro, replay the schedule and compare with a
direct computation.  Then map the VGG-16 workload with pruning and read
the cost report, where every number carries its provenance.
"""

import numpy as np

from pimsim import CiaMode, LayerSpec, MacroConfig, map_layer, peak_report
from pimsim.cost import macro_summary
from pimsim.mapper import apply_pruning, direct_layer, map_network, run_layer, vgg16_cifar10_layers

cfg = MacroConfig(signed=True)
mode = CiaMode.accurate()
layer = LayerSpec("conv", 3, 16, 24, 6, 6, padding=1)
plan = map_layer(layer, cfg, mode)
print(f"conv 3x3x16, 24 filters: {plan.passes} passes, {plan.cycles_total} cycles")

rng = np.random.default_rng(2)
w = rng.integers(-127, 128, (layer.filter_count, layer.filter_len))
x = rng.integers(-127, 128, (layer.output_positions, layer.filter_len))
mask = rng.random(w.shape) < 0.3
pruned = apply_pruning(plan, mask, granularity="weight")
out, macs, trace = run_layer(pruned, w, x, mode, cfg)
print(f"pruned {pruned.pruned_fraction:.3f}: {macs} of {layer.mac_count} MACs, "
      f"{pruned.cycles_total} cycles, {len(trace)} trace steps")
print("replay equals direct:", np.array_equal(out, direct_layer(w, x, mode, mask)))

rep = peak_report()
for k in ("throughput_1a1w_ops_per_s", "throughput_accurate_ops_per_s"):
    print(f"{k}: {rep[k]:.6g} [{rep.provenance(k)}]")
for w_ in rep.warnings:
    print("warning:", w_)

plans = map_network(vgg16_cifar10_layers(), MacroConfig(), mode, 0.30)
vgg = macro_summary(MacroConfig(), plans, "vgg16_cifar10")
for k in ("throughput_tops", "energy_eff_tops_per_w", "energy_eff_bottom_up_tops_per_w"):
    print(f"{k}: {vgg[k]:.4g} [{vgg.provenance(k)}]")
