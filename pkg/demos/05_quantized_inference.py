"""
Quantized inference with a quality report
=========================================

Run the committed 16-8-4 MLP fixture through the macro in each mode and
compare against exact INT8 execution of the same quantized network.
"""

from pathlib import Path

from pimsim import CiaMode
from pimsim.runtime import load_weights_csv, read_inputs_csv, run_network

fixtures = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
tensors = load_weights_csv(fixtures / "mlp_16_8_4.csv")
x = read_inputs_csv(fixtures / "mlp_inputs.csv")
print("layers:", [(t.name, t.shape) for t in tensors], "inputs:", x.shape)

for mode in ("exact", "accurate", "approx"):
    for pruning in (0.0, 0.3):
        _, rep = run_network(tensors, x, CiaMode.parse(mode), pruning=pruning)
        print(f"{mode:8s} pruning {pruning:.1f}: agreement {rep.top1_agreement_vs_exact_int8:.3f} "
              f"mse {rep.output_mse_vs_exact_int8:.3g} macs {rep.macs_executed}")
