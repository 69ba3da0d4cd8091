"""Certified tail summation kernels.

Everything downstream that claims a "certified" error bound ultimately rests
on the two primitives in this module:

* ``zeta_tail(s, a)`` — the power tail sum ``sum_{k>=0} (a+k)^{-s}`` for
  ``s > 1``, evaluated by an explicit head plus an Euler-Maclaurin tail whose
  correction series (for this completely monotone integrand) alternates in
  envelope, giving a two-sided bracket of width twice the first omitted term.

* ``integrated_tail_weight(alpha, m)`` — the doubly-iterated power tail
  ``sum_{r>m} sum_{j>r} j^{-(1+alpha)}``, reduced in closed form to a
  combination of two ``zeta_tail`` calls.

Both are vectorised over their lattice argument and return ``(value, bound)``
pairs where ``bound`` is a certified absolute error bracket.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "zeta_tail",
    "power_tail_sum",
    "integrated_tail_weight",
    "neumaier_sum",
]

# Bernoulli numbers B_2, B_4, ..., B_14 and (2m)! for the Euler-Maclaurin
# correction series; the first omitted term uses B_16 = -3617/510.
_BERN = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)
_FACT2M = (
    2.0,
    24.0,
    720.0,
    40320.0,
    3628800.0,
    479001600.0,
    87178291200.0,
)
_B16_OVER_F16 = (-3617.0 / 510.0) / 20922789888000.0

_HEAD_TERMS = 64


def zeta_tail(s: float, a, head_terms: int = _HEAD_TERMS):
    """Return ``(value, bound)`` for ``sum_{k>=0} (a+k)^{-s}``, ``s > 1``.

    ``a`` may be a scalar or an array of positive reals.  The result brackets
    the true sum within ``bound``: an explicit ``head_terms``-term head, then
    the Euler-Maclaurin expansion of the remainder at ``x = a + head_terms``::

        x^{1-s}/(s-1) + x^{-s}/2 + sum_m B_{2m}/(2m)! (s)_{2m-1} x^{-s-2m+1}

    For the completely monotone integrand ``t -> t^{-s}`` the correction
    terms alternate in sign envelope, so twice the first omitted term bounds
    the truncation; a rounding allowance proportional to the number of summed
    terms is added on top.
    """
    if s <= 1.0:
        raise ValueError(f"zeta_tail requires s > 1, got s={s}")
    a = np.asarray(a, dtype=np.float64)
    if np.any(a <= 0.0):
        raise ValueError("zeta_tail requires a > 0")
    scalar = a.ndim == 0
    a = np.atleast_1d(a)

    k = np.arange(head_terms, dtype=np.float64)
    head = np.sum((a[..., None] + k) ** (-s), axis=-1)

    x = a + head_terms
    tail = x ** (1.0 - s) / (s - 1.0) + 0.5 * x ** (-s)
    poch = 1.0
    for m, (b, f) in enumerate(zip(_BERN, _FACT2M)):
        if m == 0:
            poch = s
        else:
            poch *= (s + 2 * m - 1.0) * (s + 2 * m)
        tail = tail + (b / f) * poch * x ** (-s - 2 * m - 1.0)
    next_term = abs(_B16_OVER_F16) * poch * (s + 13.0) * (s + 14.0) * x ** (-s - 15.0)

    value = head + tail
    bound = 2.0 * next_term + (head_terms + 10) * np.finfo(np.float64).eps * np.abs(value)
    if scalar:
        return float(value[0]), float(bound[0])
    return value, bound


def power_tail_sum(s: float, n_from, shift: float = 0.0):
    """Return ``(value, bound)`` for ``sum_{k>=n_from} (k + shift)^{-s}``."""
    n_from = np.asarray(n_from, dtype=np.float64)
    return zeta_tail(s, n_from + shift)


def integrated_tail_weight(alpha: float, m):
    """Return ``(value, bound)`` for ``sum_{r>m} sum_{j>r} j^{-(1+alpha)}``.

    Swapping the order of summation gives the closed form::

        sum_{j>=m+2} (j - m - 1) j^{-(1+alpha)}
            = zeta_tail(alpha, m+2) - (m+1) * zeta_tail(1+alpha, m+2)

    which needs only two certified tail sums.  ``m`` may be fractional (the
    formula extends analytically); the lattice callers pass integers.
    """
    m = np.asarray(m, dtype=np.float64)
    v1, e1 = zeta_tail(alpha, m + 2.0)
    v2, e2 = zeta_tail(1.0 + alpha, m + 2.0)
    c = m + 1.0
    return v1 - c * v2, e1 + np.abs(c) * e2


def neumaier_sum(values) -> float:
    """Exactly-rounded sum of a 1-D array (Shewchuk accumulation)."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    return math.fsum(arr.tolist())
