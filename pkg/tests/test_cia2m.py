import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pimsim.cia2m import (CiaMode, Operand, cia2m_multiply, cia2m_products, exact_multiply,
                          leading_one, leading_one_index, signed_multiply)
from pimsim.exceptions import OperandError, ZeroOperand

u8 = st.integers(0, 255)
budgets = st.integers(1, 8)


def popcount(x):
    return bin(x).count("1")


def peel_oracle(a, b, n):
    """Independent recurrence using int.bit_length."""
    p = 0
    for _ in range(n):
        if not a or not b:
            break
        ka, kb = a.bit_length() - 1, b.bit_length() - 1
        ar, br = a - (1 << ka), b - (1 << kb)
        p += (1 << (ka + kb)) + (ar << kb) + (br << ka)
        a, b = ar, br
    return p, a * b


# -- leading_one ----------------------------------------------------------------

@pytest.mark.parametrize("x,k,r", [(1, 0, 0), (255, 7, 127), (40, 5, 8)])
def test_leading_one_examples(x, k, r):
    d = leading_one(x)
    assert (d.k, d.residue) == (k, r)


def test_leading_one_zero_raises():
    with pytest.raises(ZeroOperand):
        leading_one(0)


@given(st.integers(1, (1 << 16) - 1))
def test_leading_one_decomposes(x):
    d = leading_one(x)
    assert x == (1 << d.k) + d.residue
    assert d.residue < (1 << d.k)


def test_leading_one_index_vectorized():
    xs = np.arange(1 << 12)
    got = leading_one_index(xs, 12)
    want = np.array([int(x).bit_length() - 1 for x in xs])
    assert np.array_equal(got, want)
    assert got[0] == -1


# -- operands and modes ---------------------------------------------------------

@pytest.mark.parametrize("value,width", [(256, 8), (-1, 8), (1, 0), (1, 17)])
def test_operand_validation(value, width):
    with pytest.raises(OperandError):
        Operand(value, width)


def test_mode_budgets():
    assert CiaMode.approximate().budget(8) == 3
    assert CiaMode.accurate().budget(8) == 4
    assert CiaMode.exact().budget(8) == 8
    assert CiaMode.exact().budget(16) == 16
    assert CiaMode.custom(2).budget(8) == 2


@pytest.mark.parametrize("text,label", [("approx", "approximate"), ("accurate", "accurate"),
                                        ("exact", "exact"), ("custom:5", "custom:5"),
                                        ("2", "custom:2")])
def test_mode_parse(text, label):
    assert CiaMode.parse(text).label == label


@pytest.mark.parametrize("bad", ["fast", "custom:0", "custom:x", ""])
def test_mode_parse_rejects(bad):
    with pytest.raises(ValueError):
        CiaMode.parse(bad)


def test_mode_fixed_budgets_cannot_be_overridden():
    with pytest.raises(ValueError):
        CiaMode("approximate", 5)
    with pytest.raises(ValueError):
        CiaMode("exact", 3)


# -- cia2m_multiply examples ---------------------------------------------------------

def test_zero_operand_short_circuits():
    t = cia2m_multiply(0, 173, CiaMode.approximate())
    assert (t.final_product, t.cycles_used, t.residual_error) == (0, 0, 0)


def test_power_of_two_one_cycle():
    t = cia2m_multiply(8, 5, CiaMode.custom(1))
    assert (t.final_product, t.residual_error, t.cycles_used) == (40, 0, 1)


def test_three_by_three_one_cycle():
    t = cia2m_multiply(3, 3, CiaMode.custom(1))
    assert (t.final_product, t.residual_error) == (8, 1)


def test_255_squared_approximate():
    t = cia2m_multiply(255, 255, CiaMode.approximate())
    assert (t.final_product, t.residual_error) == (64064, 961)
    assert t.final_product + t.residual_error == 65025


def test_255_squared_accurate():
    t = cia2m_multiply(255, 255, CiaMode.accurate())
    assert (t.final_product, t.residual_error) == (64800, 225)


def test_step_records_match_recurrence():
    t = cia2m_multiply(255, 255, CiaMode.approximate())
    assert [(s.ka, s.kb) for s in t.steps] == [(7, 7), (6, 6), (5, 5)]
    assert [s.a_residue for s in t.steps] == [127, 63, 31]
    assert t.steps[-1].partial_sum == t.final_product
    assert sum(s.term for s in t.steps) == t.final_product


def test_operand_out_of_width_rejected():
    with pytest.raises(OperandError):
        cia2m_multiply(256, 1, CiaMode.exact(), width=8)


@pytest.mark.parametrize("a,b,n", [(255, 255, 3), (3, 3, 1), (200, 77, 4), (1, 255, 1)])
def test_matches_peel_oracle(a, b, n):
    t = cia2m_multiply(a, b, CiaMode.custom(n))
    assert (t.final_product, t.residual_error) == peel_oracle(a, b, n)


# -- exact_multiply -----------------------------------------------------------------

def test_exact_multiply_examples():
    assert exact_multiply(255, 255) == 65025
    assert exact_multiply(0, 77) == 0
    for k in range(8):
        for m in range(8):
            assert exact_multiply(1 << k, 1 << m) == 1 << (k + m)


# -- signed -------------------------------------------------------------------------

def test_signed_examples():
    assert signed_multiply(-3, 3, CiaMode.exact()).value == -9
    assert signed_multiply(-3, -3, CiaMode.exact()).value == 9
    assert signed_multiply(-255, 255, CiaMode.approximate(), width=9).value == -64064


def test_signed_zero_is_positive():
    t = signed_multiply(0, -5, CiaMode.exact())
    assert t.value == 0 and t.sign == 1


def test_signed_magnitude_overflow():
    with pytest.raises(OperandError):
        signed_multiply(128, 1, CiaMode.exact(), width=8)


@given(st.integers(-127, 127), st.integers(-127, 127), budgets)
def test_signed_is_sign_times_magnitude(a, b, n):
    t = signed_multiply(a, b, CiaMode.custom(n))
    mag = cia2m_multiply(abs(a), abs(b), CiaMode.custom(n), width=7).final_product
    sign = -1 if (a < 0) != (b < 0) else 1
    assert t.value == sign * mag


# -- invariants (property-based) ---------------------------------------------------

@given(u8, u8, budgets)
def test_reconstruction(a, b, n):
    t = cia2m_multiply(a, b, CiaMode.custom(n))
    assert t.final_product + t.residual_error == a * b
    assert t.final_product <= a * b


@given(u8, u8, budgets)
def test_partial_sum_non_decreasing(a, b, n):
    sums = [s.partial_sum for s in cia2m_multiply(a, b, CiaMode.custom(n)).steps]
    assert sums == sorted(sums)


@given(u8, u8, st.integers(1, 7))
def test_monotone_in_budget(a, b, n):
    lo = cia2m_multiply(a, b, CiaMode.custom(n)).final_product
    hi = cia2m_multiply(a, b, CiaMode.custom(n + 1)).final_product
    assert lo <= hi


@given(u8, u8, budgets)
def test_exactness_condition(a, b, n):
    t = cia2m_multiply(a, b, CiaMode.custom(n))
    assert (t.residual_error == 0) == (min(popcount(a), popcount(b)) <= n)


@given(st.integers(0, 7), u8)
def test_power_of_two_exact_in_one_cycle(k, b):
    t = cia2m_multiply(1 << k, b, CiaMode.custom(1))
    assert t.final_product == (1 << k) * b


@given(u8, u8, budgets)
def test_commutative(a, b, n):
    m = CiaMode.custom(n)
    assert cia2m_multiply(a, b, m).final_product == cia2m_multiply(b, a, m).final_product


@settings(max_examples=50)
@given(st.integers(1, 16), st.data())
def test_wide_operands(width, data):
    a = data.draw(st.integers(0, (1 << width) - 1))
    b = data.draw(st.integers(0, (1 << width) - 1))
    n = data.draw(st.integers(1, 16))
    t = cia2m_multiply(a, b, CiaMode.custom(n), width=width)
    assert (t.final_product, t.residual_error) == peel_oracle(a, b, n)
    assert cia2m_multiply(a, b, CiaMode.exact(), width=width).final_product == a * b


def test_exact_mode_all_width8_pairs():
    a, b = np.meshgrid(np.arange(256), np.arange(256), indexing="ij")
    approx, residual = cia2m_products(a.ravel(), b.ravel(), 8, 8)
    assert np.array_equal(approx, (a * b).ravel())
    assert not residual.any()


@pytest.mark.parametrize("n", [1, 3, 4])
def test_vectorized_matches_scalar(n):
    rng = np.random.default_rng(n)
    a = rng.integers(0, 256, 500)
    b = rng.integers(0, 256, 500)
    approx, residual = cia2m_products(a, b, n, 8)
    for x, y, p, r in zip(a, b, approx, residual):
        t = cia2m_multiply(int(x), int(y), CiaMode.custom(n))
        assert (t.final_product, t.residual_error) == (p, r)
