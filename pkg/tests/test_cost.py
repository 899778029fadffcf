import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pimsim.cia2m import CiaMode
from pimsim.cost import (CALIBRATED, DERIVED, CellConstants, Corner, CostReport, Metric,
                         corner_delay, macro_summary, peak_report, throughput,
                         transistor_savings)
from pimsim.exceptions import UnknownCorner
from pimsim.macro import MacroConfig
from pimsim.mapper import LayerSpec, map_layer, map_network, vgg16_cifar10_layers

pos = st.floats(0.01, 1e3, allow_nan=False)


# -- throughput ---------------------------------------------------------------------

def test_peak_arithmetic_default():
    # 2 * 512 * 333e6 = 340.992e9; the printed 341 is this value rounded
    assert throughput(mode=1)["throughput_ops_per_s"] == 340_992_000_000.0
    assert throughput(mode=CiaMode.accurate())["throughput_ops_per_s"] == 85_248_000_000.0


def test_peak_rounds_to_reported_labels():
    assert round(throughput(mode=1)["throughput_ops_per_s"] / 1e9) == 341
    assert round(throughput(mode=4)["throughput_ops_per_s"] / 1e9, 2) == 85.25


def test_half_clock_is_half_throughput():
    half = throughput(MacroConfig(clock_mhz=166.5), 1)["throughput_ops_per_s"]
    assert half == throughput(mode=1)["throughput_ops_per_s"] / 2
    assert half == pytest.approx(170.5e9, rel=1e-3)


@given(st.integers(1, 16))
def test_cycles_scale_inverse(cycles):
    one = throughput(mode=1)["throughput_ops_per_s"]
    assert throughput(mode=cycles)["throughput_ops_per_s"] == pytest.approx(one / cycles)
    assert throughput(mode=2 * cycles)["throughput_ops_per_s"] == pytest.approx(
        throughput(mode=cycles)["throughput_ops_per_s"] / 2)


def test_mode_budgets_drive_cycles():
    assert throughput(mode=CiaMode.approximate())["cycles_per_op"] == 3
    assert throughput(mode=CiaMode.exact())["cycles_per_op"] == 8


def test_unit_warning_and_label():
    rep = throughput(mode=1)
    assert rep["throughput_reported_label"] == "341 TOPS"
    assert rep.provenance("throughput_reported_label") == CALIBRATED
    assert any("GOPS" in w for w in rep.warnings)
    assert "throughput_reported_label" not in throughput(MacroConfig(clock_mhz=300), 1).metrics


def test_bad_cycle_count():
    with pytest.raises(ValueError):
        throughput(mode=0)


# -- savings -------------------------------------------------------------------------

def test_savings_examples():
    assert transistor_savings(5.25, 8.75) == 40.0
    assert transistor_savings(5.25, 12) == 56.25
    assert transistor_savings(5.25, 10) == 47.5


def test_savings_vs_reported_xnor_within_two_points():
    assert abs(transistor_savings(5.25, 10) - 48.5) <= 2


@given(pos, pos)
def test_savings_definition_and_swap(a, b):
    s = transistor_savings(a, b)
    assert s == pytest.approx(100 * (1 - a / b), abs=1e-9)
    assert s == pytest.approx(-transistor_savings(b, a) * a / b, abs=1e-9)


def test_savings_rejects_bad_baseline():
    with pytest.raises(ValueError):
        transistor_savings(5.25, 0)


# -- corners / constants ------------------------------------------------------------

def test_corner_delays():
    assert corner_delay("FF") == 1.296
    assert corner_delay(Corner.TT) == 1.968
    assert corner_delay("ss") == 2.928
    assert Corner.FF.compute_delay_ns < Corner.TT.compute_delay_ns < Corner.SS.compute_delay_ns
    assert [c.temperature_c for c in Corner] == [-10, 27, 80]


def test_unknown_corner():
    with pytest.raises(UnknownCorner):
        corner_delay("XX")


def test_cell_constants_positive():
    c = CellConstants()
    assert (c.transistors_per_mult, c.area_um2, c.power_nw, c.read_delay_ps,
            c.write_delay_ps) == (5.25, 2.02, 18.84, 105.2, 157.8)


# -- reports -------------------------------------------------------------------------

def test_metric_requires_provenance():
    with pytest.raises(ValueError):
        Metric(1.0, "x", "guess")


def test_report_validation_catches_unlabeled():
    rep = CostReport()
    rep.add("a", 1, "x", DERIVED)
    object.__setattr__(rep.metrics["a"], "provenance", "")
    with pytest.raises(ValueError):
        rep.to_dict()


def test_peak_report_contents():
    rep = peak_report()
    d = json.loads(rep.to_json())
    assert d["metrics"]["throughput_1a1w_ops_per_s"]["value"] == 340992000000.0
    assert d["metrics"]["throughput_accurate_ops_per_s"]["value"] == 85248000000.0
    assert all(m["provenance"] in (DERIVED, CALIBRATED) for m in d["metrics"].values())
    assert d["metrics"]["transistor_savings_vs_shared_and_8.75T_pct"]["value"] == 40.0
    assert rep.to_json() == peak_report().to_json()


def test_summary_empty_plan():
    rep = macro_summary(MacroConfig(), [], "")
    assert rep.flags["empty_plan"] is True
    assert rep["utilized_cycles"] == 0
    assert rep["macs_executed"] == 0


@pytest.fixture(scope="module")
def vgg_plans():
    return map_network(vgg16_cifar10_layers(), MacroConfig(), CiaMode.accurate(), 0.30)


def test_summary_vgg_calibrated(vgg_plans):
    rep = macro_summary(MacroConfig(), vgg_plans, "vgg16_cifar10")
    assert rep.flags["calibrated_workload"]
    assert rep["throughput_tops"] == 0.43
    assert rep.provenance("throughput_tops") == CALIBRATED
    assert rep["energy_eff_tops_per_w"] == 87.22
    assert rep.provenance("energy_eff_tops_per_w") == CALIBRATED
    assert rep["throughput_tops_star"] == 1.72
    assert rep["energy_eff_tops_per_w_star"] == 348.86
    assert rep["pruned_fraction"] == pytest.approx(0.30, abs=1e-3)
    assert rep.provenance("energy_eff_bottom_up_tops_per_w") == DERIVED


def test_summary_other_workload_is_derived():
    plan = map_layer(LayerSpec.fc(16, 16), MacroConfig(), CiaMode.accurate())
    rep = macro_summary(MacroConfig(), [plan], "mlp")
    assert not rep.flags["calibrated_workload"]
    assert rep.provenance("throughput_tops") == DERIVED
    assert rep["utilized_cycles"] == plan.cycles_total
    assert rep["macs_executed"] == 256


def test_summary_unpruned_vgg_not_calibrated():
    plans = map_network(vgg16_cifar10_layers(), MacroConfig(), CiaMode.accurate(), 0.0)
    rep = macro_summary(MacroConfig(), plans, "vgg16_cifar10")
    assert not rep.flags["calibrated_workload"]
    assert rep.provenance("energy_eff_tops_per_w") == DERIVED
