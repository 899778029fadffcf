"""Functional simulator for a CIA2M-based digital PIM macro."""

from .cia2m import (CiaMode, CycleRecord, Decomposition, MultiplyTrace, Operand,
                    cia2m_multiply, cia2m_products, exact_multiply, leading_one,
                    signed_multiply)
from .cost import (Corner, CostReport, Metric, corner_delay, macro_summary, peak_report,
                   throughput, transistor_savings)
from .error_analysis import (ErrorHistogram, ErrorStats, exhaustive_stats, histogram,
                             popcount_exact_count, sampled_stats)
from .exceptions import *  # noqa: F401,F403
from .macro import MacroConfig, MacroState, bit_serial_mac, cycle_step, place_weights
from .mapper import (LayerSpec, MappingPlan, apply_pruning, direct_layer, execute_trace,
                     map_layer, map_network, prune_by_count, run_layer, schedule)
from .runtime import QorReport, QuantTensor, load_weights_csv, quantize, run_network
from .trait import AdderTreeSpec, FaKind, Pattern, build_tree, reduce, tally

__version__ = "0.1.0"
