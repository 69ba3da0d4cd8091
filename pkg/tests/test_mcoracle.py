"""Counter-based streams, alias sampling, and the visit-count estimator."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrl import steplaw as sl
from rrl.mcoracle import build_alias, estimate_u, philox4x32
from rrl.renewal import u_by_doubling


@pytest.fixture(scope="module")
def law15():
    return sl.build_power_law(1.5, 0.95, "atoms:(-1:0.05)")


@pytest.fixture(scope="module")
def law_hh():
    return sl.build_finite_law({1: 0.5, 2: 0.5})


# -- counter-based generator known answers -----------------------------------


def test_philox_kat_zero():
    out = philox4x32((0, 0, 0, 0), (0, 0))
    assert out == (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)


def test_philox_kat_ones():
    ones = 0xFFFFFFFF
    out = philox4x32((ones,) * 4, (ones,) * 2)
    assert out == (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)


def test_philox_kat_pi_digits():
    out = philox4x32((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
                     (0xA4093822, 0x299F31D0))
    assert out == (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)


def test_philox_distinct_counters_distinct_blocks():
    a = philox4x32((1, 0, 0, 0), (7, 9))
    b = philox4x32((2, 0, 0, 0), (7, 9))
    assert a != b


# -- alias tables ------------------------------------------------------------


def _alias_implied_probs(w):
    J, q = build_alias(w)
    K = len(w)
    p = np.array(q, dtype=np.float64)
    for j in range(K):
        p[J[j]] += 1.0 - q[j]
    return p / K


def test_alias_reconstructs_weights():
    w = np.array([0.5, 0.25, 0.125, 0.0625, 0.0625])
    assert _alias_implied_probs(w) == pytest.approx(w, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=40))
def test_alias_reconstruction_property(raw):
    w = np.asarray(raw, dtype=np.float64)
    w /= w.sum()
    assert _alias_implied_probs(w) == pytest.approx(w, abs=1e-12)


# -- estimator ---------------------------------------------------------------


def test_unit_step_is_deterministic():
    law = sl.build_finite_law({1: 1.0})
    est = estimate_u(law, range(0, 11), replicas=500, master_seed=3)
    assert np.all(est.u_hat == 1.0)
    assert np.all(est.se == 0.0)


def test_closed_form_coverage(law_hh):
    targets = list(range(0, 21))
    est = estimate_u(law_hh, targets, replicas=200_000, master_seed=1)
    exact = 2.0 / 3.0 + (1.0 / 3.0) * (-0.5) ** np.asarray(targets)
    inside = np.abs(est.u_hat - exact) <= 3.0 * np.maximum(est.se, 1e-12)
    assert inside.sum() >= 19
    assert est.bias_bound < np.min(est.se[est.se > 0]) / 2.0


def test_concordance_with_doubling(law15):
    targets = [10, 40, 160, 640]
    est = estimate_u(law15, targets, replicas=150_000, master_seed=2)
    table = u_by_doubling(law15, (0, 640), tol=1e-9)
    z = np.abs(est.u_hat - table.values(targets)) / est.se
    assert np.max(z) < 4.0


def test_thread_count_invariance(law15):
    a = estimate_u(law15, [5, 50], replicas=30_000, master_seed=11, threads=1)
    b = estimate_u(law15, [5, 50], replicas=30_000, master_seed=11, threads=4)
    assert np.array_equal(a.u_hat, b.u_hat)
    assert np.array_equal(a.se, b.se)
    assert a.stop_level == b.stop_level


def test_seed_changes_stream(law15):
    a = estimate_u(law15, [50], replicas=20_000, master_seed=0)
    b = estimate_u(law15, [50], replicas=20_000, master_seed=1)
    assert a.u_hat[0] != b.u_hat[0]


def test_estimator_validation(law15):
    with pytest.raises(ValueError):
        estimate_u(law15, [], replicas=1000)
