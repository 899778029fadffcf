import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pimsim.cia2m import CiaMode, cia2m_multiply, signed_multiply
from pimsim.exceptions import (AddressOutOfRange, FileFormatError, LengthMismatch,
                               OperandError, PrecisionMismatch, WriteDuringCompute)
from pimsim.macro import (MacroConfig, MacroState, and_compute, bit_serial_mac, cycle_step,
                          place_weights, read_weight_image)

MODES = [CiaMode.approximate(), CiaMode.accurate(), CiaMode.exact(), CiaMode.custom(1),
         CiaMode.custom(2)]


# -- geometry --------------------------------------------------------------------

def test_default_geometry():
    cfg = MacroConfig()
    assert cfg.capacity_bits == 16384
    assert cfg.dot_products_per_cycle == 512
    assert cfg.sbnk_rows == 64
    assert cfg.sbnk_grid == (4, 16)
    assert cfg.dpu_count == 2048


@pytest.mark.parametrize("kw", [dict(clock_mhz=-1), dict(weight_precision=17),
                                dict(input_precision=0), dict(rows=100), dict(cols=62),
                                dict(tree_pattern="zigzag"), dict(active_rows=512)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        MacroConfig(**kw)


def test_sub_bank_is_eight_by_four_dpus():
    m = MacroState()
    sb = m.sub_bank(17)
    assert len(sb.dpus) == 8 and all(len(r) == 4 for r in sb.dpus)
    assert (sb.row, sb.column) == (64, 4)
    assert sb.dpus[0][0].row == 64 and sb.dpus[7][3].column == 7
    assert m.config.sbnk_of(sb.row, sb.column) == 17


def test_dpu_address_row_major():
    m = MacroState()
    assert m.dpu_origin(0) == (0, 0)
    assert m.dpu_origin(63) == (0, 63)
    assert m.dpu_origin(64) == (8, 0)
    with pytest.raises(AddressOutOfRange):
        m.dpu_origin(2048)


# -- storage ----------------------------------------------------------------------

def test_write_read_all_ones_column():
    m = MacroState()
    m.write_weights(5, np.ones(256, dtype=np.uint8))
    assert (m.read_column(5) == 1).all()
    assert m.stored_bits() == 256


def test_dpu_pattern_roundtrip():
    m = MacroState()
    m.write_dpu(70, 0b10110001)
    assert m.read_dpu(70).bits == 0b10110001
    assert m.stored_bits() == 4


def test_write_during_compute_rejected():
    m = MacroState()
    with m.compute():
        with pytest.raises(WriteDuringCompute):
            m.write_weights(0, [1, 0, 1])
        with pytest.raises(WriteDuringCompute):
            m.write_word(0, 0, 3)
    m.write_weights(0, [1, 0, 1])


@pytest.mark.parametrize("col,start,n", [(64, 0, 1), (0, 250, 8), (-1, 0, 1)])
def test_write_out_of_range(col, start, n):
    with pytest.raises(AddressOutOfRange):
        MacroState().write_weights(col, np.ones(n), start_row=start)


def test_word_little_endian_across_columns():
    m = MacroState()
    m.write_word(3, 8, 0b00000110)
    assert list(m.cells[3, 8:16]) == [0, 1, 1, 0, 0, 0, 0, 0]
    assert m.read_word(3, 8) == 6


def test_signed_word_sign_magnitude():
    m = MacroState(MacroConfig(signed=True))
    m.write_word(0, 0, -5)
    assert list(m.cells[0, 0:8]) == [1, 0, 1, 0, 0, 0, 0, 1]
    assert m.read_word(0, 0) == -5
    with pytest.raises(OperandError):
        m.write_word(0, 0, 128)


def test_unsigned_word_range():
    m = MacroState()
    with pytest.raises(OperandError):
        m.write_word(0, 0, 256)
    with pytest.raises(OperandError):
        m.write_word(0, 0, -1)


def test_weight_image_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    m = MacroState()
    m.cells[:] = rng.integers(0, 2, m.cells.shape)
    m.save_image(tmp_path / "img.csv")
    m2 = MacroState()
    m2.load_image(tmp_path / "img.csv")
    assert np.array_equal(m.cells, m2.cells)


def test_weight_image_validation(tmp_path):
    p = tmp_path / "bad.csv"
    lines = ["0," * 63 + "0"] * 256
    lines[9] = "0," * 63 + "2"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(FileFormatError, match="line 10"):
        read_weight_image(p, MacroConfig())
    p.write_text("\n".join(["0," * 63 + "0"] * 255) + "\n")
    with pytest.raises(FileFormatError, match="256 rows"):
        read_weight_image(p, MacroConfig())


# -- and / cycle_step -----------------------------------------------------------------

@pytest.mark.parametrize("i,w,en,out", [(1, 1, True, 1), (1, 0, True, 0), (0, 1, True, 0),
                                        (1, 1, False, 0), (0, 0, False, 0)])
def test_and_truth_table(i, w, en, out):
    assert and_compute(i, w, en) == out


def test_cycle_step_zero_inputs():
    m = MacroState()
    m.cells[:] = 1
    with m.compute():
        p = cycle_step(m, np.zeros(32))
    assert not p.bits.any() and p.columns == 64


def test_cycle_step_one_hot_reads_row():
    rng = np.random.default_rng(1)
    m = MacroState()
    m.cells[:] = rng.integers(0, 2, m.cells.shape)
    x = np.zeros(32, dtype=np.uint8)
    x[11] = 1
    with m.compute():
        p = cycle_step(m, x, row_offset=64)
    assert np.array_equal(p.bits[11], m.cells[75])
    assert p.bits.sum() == m.cells[75].sum()


def test_cycle_step_random_matches_bitwise_oracle():
    rng = np.random.default_rng(2)
    m = MacroState()
    m.cells[:] = rng.integers(0, 2, m.cells.shape)
    x = rng.integers(0, 2, 32)
    with m.compute():
        p = cycle_step(m, x, row_offset=32)
    for r in range(32):
        for c in range(64):
            assert p.bits[r, c] == (int(x[r]) & int(m.cells[32 + r, c]))


def test_cycle_step_disabled_yields_zeros():
    m = MacroState()
    m.cells[:] = 1
    assert not cycle_step(m, np.ones(32)).bits.any()


def test_cycle_step_length_mismatch():
    with pytest.raises(LengthMismatch):
        cycle_step(MacroState(), np.ones(31))


# -- bit_serial_mac ---------------------------------------------------------------------

def _run(pairs, mode, cfg=None):
    m = MacroState(cfg or MacroConfig())
    slots = place_weights(m, [b for _, b in pairs])
    return m, slots, bit_serial_mac(m, [a for a, _ in pairs], slots, mode)


def test_single_pair_exact():
    _, _, (t,) = _run([(8, 5)], CiaMode.exact())
    assert t.value == 40


def test_single_pair_255_approximate():
    _, _, (t,) = _run([(255, 255)], CiaMode.approximate())
    assert (t.value, t.residual_error) == (64064, 961)


@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.label)
def test_random_pairs_match_core(mode):
    rng = np.random.default_rng(sum(map(ord, mode.label)))
    pairs = [(int(a), int(b)) for a, b in rng.integers(0, 256, (300, 2))]
    _, _, traces = _run(pairs, mode)
    for (a, b), t in zip(pairs, traces):
        ref = cia2m_multiply(a, b, mode)
        assert t.value == ref.value
        assert t.residual_error == ref.residual_error
        assert t.steps == ref.steps


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 16), st.integers(1, 16), st.data())
def test_precisions_match_core(wp, ip, data):
    cfg = MacroConfig(weight_precision=wp, input_precision=ip)
    n = data.draw(st.integers(1, 8))
    pairs = [(data.draw(st.integers(0, (1 << ip) - 1)), data.draw(st.integers(0, (1 << wp) - 1)))
             for _ in range(n)]
    mode = data.draw(st.sampled_from(MODES))
    _, _, traces = _run(pairs, mode, cfg)
    width = max(wp, ip)
    for (a, b), t in zip(pairs, traces):
        ref = cia2m_multiply(a, b, mode, width=width)
        assert (t.value, t.residual_error) == (ref.value, ref.residual_error)


def test_signed_pairs_match_signed_core():
    cfg = MacroConfig(signed=True)
    rng = np.random.default_rng(5)
    pairs = [(int(a), int(b)) for a, b in rng.integers(-127, 128, (200, 2))]
    for mode in MODES:
        _, _, traces = _run(pairs, mode, cfg)
        for (a, b), t in zip(pairs, traces):
            assert t.value == signed_multiply(a, b, mode).value


def test_compute_leaves_storage_untouched():
    rng = np.random.default_rng(3)
    pairs = [(int(a), int(b)) for a, b in rng.integers(0, 256, (500, 2))]
    m, slots, _ = _run(pairs, CiaMode.accurate())
    before = m.cells.copy()
    bit_serial_mac(m, [a for a, _ in pairs], slots, CiaMode.exact())
    assert np.array_equal(before, m.cells)
    assert [m.read_word(*s) for s in slots] == [b for _, b in pairs]
    assert not m.pim_en


def test_capacity_bound():
    m = MacroState()
    slots = place_weights(m, [255] * 2048)
    assert len(set(slots)) == 2048
    assert m.stored_bits() == 16384
    with pytest.raises(AddressOutOfRange):
        place_weights(m, [1], start_slot=2048)


def test_precision_mismatch():
    m = MacroState()
    slots = place_weights(m, [3])
    with pytest.raises(PrecisionMismatch):
        bit_serial_mac(m, [256], slots, CiaMode.exact())
    with pytest.raises(PrecisionMismatch):
        bit_serial_mac(m, [-1], slots, CiaMode.exact())


def test_length_mismatch():
    m = MacroState()
    slots = place_weights(m, [3, 4])
    with pytest.raises(LengthMismatch):
        bit_serial_mac(m, [1], slots, CiaMode.exact())


def test_pattern_does_not_change_products():
    pairs = [(255, 255), (170, 85), (1, 1), (0, 9), (200, 33)]
    results = []
    for pattern in ("alternating", "all_accurate", "all_reduced"):
        _, _, traces = _run(pairs, CiaMode.accurate(), MacroConfig(tree_pattern=pattern))
        results.append([t.value for t in traces])
    assert results[0] == results[1] == results[2]
