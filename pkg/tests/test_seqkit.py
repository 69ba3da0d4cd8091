"""Windowed sequences: convolution certificates, tail sums, CSV round trip."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rrl.seqkit import TailModel, WindowSeq, convolve, direct_convolve, tail_sum, write_csv


def _mk(lo, values, **kw):
    v = np.asarray(values, dtype=np.float64)
    return WindowSeq(lo, lo + v.size - 1, v, **kw)


# -- window basics -----------------------------------------------------------


def test_window_validation():
    with pytest.raises(ValueError):
        WindowSeq(3, 2, np.array([]))
    with pytest.raises(ValueError):
        WindowSeq(0, 2, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        WindowSeq(0, 0, np.array([np.inf]))


def test_edge_model_validation():
    # |a_hi| <= 1.1 * constant * hi^{-exponent} enforced
    vals = np.array([1.0, 0.5, 0.25])
    WindowSeq(1, 3, vals, right_model=TailModel(2.0, 3.0))
    with pytest.raises(ValueError):
        WindowSeq(1, 3, vals, right_model=TailModel(2.0, 0.5))


def test_getitem_and_slice():
    a = _mk(-2, [1.0, 2.0, 3.0])
    assert a[-2] == 1.0 and a[0] == 3.0 and a[5] == 0.0
    np.testing.assert_array_equal(a.slice(-3, 1), [0.0, 1.0, 2.0, 3.0, 0.0])


# -- convolution -------------------------------------------------------------


def test_convolve_small_exact():
    a = _mk(0, [1.0, 2.0])          # 1 + 2x
    b = _mk(0, [3.0, 4.0])          # 3 + 4x
    c = convolve(a, b, 0, 2)        # 3 + 10x + 8x^2
    np.testing.assert_allclose(c.values, [3.0, 10.0, 8.0], atol=1e-14)
    assert c.err_budget < 1e-12


def test_convolve_matches_direct_oracle():
    rng = np.random.default_rng(0)
    a = _mk(-4, rng.standard_normal(37))
    b = _mk(2, rng.standard_normal(23))
    c1 = convolve(a, b, -10, 40)
    c2 = direct_convolve(a, b, -10, 40)
    np.testing.assert_allclose(c1.values, c2.values, atol=1e-12)
    # true error of the fast path is far below its budget
    assert np.max(np.abs(c1.values - c2.values)) <= c1.err_budget


def test_convolve_budget_bilinear():
    a = _mk(0, [0.5, 0.5], err_budget=1e-9)
    b = _mk(0, [0.25, 0.75], err_budget=1e-10)
    c = convolve(a, b, 0, 2)
    assert c.err_budget >= 1e-9 * 1.0 + 1e-10 * 1.0
    assert c.err_budget < 1e-8


def test_convolve_off_window_zero_when_unreachable():
    # b vanishes below 0, so a's right-of-window mass cannot reach n <= hi
    a = _mk(0, np.full(50, 0.01), right_model=TailModel(2.4, 200.0))
    b = _mk(0, [0.6, 0.4])
    c = convolve(a, b, 0, 40)
    assert c.err_budget < 1e-12


def test_convolve_off_window_counted_when_reachable():
    a = _mk(0, np.full(50, 0.01), right_model=TailModel(2.4, 200.0))
    b = _mk(0, [0.6, 0.4])
    c = convolve(a, b, 0, 80)       # n = 80 reachable from m = 79, 80 > a.hi
    assert c.err_budget > 1e-6      # envelope contribution present


def test_convolve_probability_masses():
    p = np.array([0.5, 0.5])
    a = _mk(1, p)
    c = a
    for _ in range(5):
        c = convolve(c, a, 2, 64)
    assert c.values.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    hnp.arrays(np.float64, st.integers(1, 30),
               elements=st.floats(-5, 5, allow_nan=False)),
    hnp.arrays(np.float64, st.integers(1, 30),
               elements=st.floats(-5, 5, allow_nan=False)),
    st.integers(-10, 0), st.integers(-12, -2),
)
def test_convolve_property_vs_numpy(av, bv, alo, blo):
    a = _mk(alo, av)
    b = _mk(blo, bv)
    lo = alo + blo
    hi = a.hi + b.hi
    c = convolve(a, b, lo, hi)
    ref = np.convolve(av, bv)
    np.testing.assert_allclose(c.values, ref, atol=1e-10)
    assert np.max(np.abs(c.values - ref)) <= c.err_budget + 1e-13


# -- tail_sum ----------------------------------------------------------------


def test_tail_sum_stored_only():
    a = _mk(0, [0.1, 0.2, 0.3, 0.4])
    v, b = tail_sum(a, 1, side="right")
    assert v == pytest.approx(0.7, abs=1e-15)
    assert b < 1e-12
    v, b = tail_sum(a, 2, side="left")
    assert v == pytest.approx(0.3, abs=1e-15)


def test_tail_sum_spec_example():
    # a_n = n^{-2.5} stored to 1e5 with model (2.5, 1.0): bracket holds vs brute
    n = np.arange(1, 100001)
    a = WindowSeq(1, 100000, n.astype(np.float64) ** -2.5,
                  right_model=TailModel(2.5, 1.0))
    v, b = tail_sum(a, 1000, side="right")
    brute = math.fsum(float(k) ** -2.5 for k in range(1001, 3_000_000))
    assert abs(v - brute) <= b


def test_tail_sum_missing_model_errors():
    a = _mk(0, [1.0, 2.0])
    with pytest.raises(ValueError):
        tail_sum(a, 5, side="right")
    with pytest.raises(ValueError):
        tail_sum(a, -3, side="left")


def test_tail_sum_beyond_window_uses_model():
    a = _mk(1, [1.0, 0.25], right_model=TailModel(2.0, 1.0))
    v, b = tail_sum(a, 10, side="right")
    assert v == 0.0
    assert 0.0 < b < 0.12          # sum_{r >= 11} r^-2 ~ 0.095


def test_tail_sum_non_summable_model_errors():
    a = _mk(1, [1.0, 0.5], right_model=TailModel(0.9, 1.0))
    with pytest.raises(ValueError):
        tail_sum(a, 0, side="right")


# -- CSV ---------------------------------------------------------------------


def test_write_csv_deterministic(tmp_path):
    rows = [(1, 0.1 + 0.2), (2, 1e-17)]
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    write_csv(p1, ["n", "value"], rows, meta={"tag": "x", "tol": 1e-9})
    write_csv(p2, ["n", "value"], rows, meta={"tag": "x", "tol": 1e-9})
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert text.startswith("#meta tag=x\n#meta tol=1e-09\n")
    assert "0.30000000000000004" in text  # repr round-trip, no formatting loss
