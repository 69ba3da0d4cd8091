"""Windowed signed sequences with certified convolution and tail summation.

A ``WindowSeq`` stores a real sequence on an integer window ``[lo, hi]``
together with optional magnitude envelopes for the parts outside the window
and a uniform absolute error budget for the stored values.  The two
workhorses are ``convolve`` (zero-padded fast cyclic convolution, with the
off-window mass bounded through the envelopes and folded into the output
budget) and ``tail_sum`` (exactly-rounded summation of a stored tail plus a
certified bracket for the unstored remainder).

Envelope semantics: ``right_model=(exponent, constant)`` asserts
``|a_n| <= constant * n^{-exponent}`` for every ``n > hi``; ``None`` asserts
the sequence vanishes exactly beyond the window (the usual case for pmfs and
finite convolution outputs).  Left models mirror this with ``|n|``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._cert import neumaier_sum, zeta_tail

__all__ = ["TailModel", "WindowSeq", "convolve", "direct_convolve", "tail_sum"]

_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class TailModel:
    """Magnitude envelope ``|a_n| <= constant * |n|^{-exponent}`` off-window."""

    exponent: float
    constant: float

    def point_bound(self, n: float) -> float:
        return self.constant * float(abs(n)) ** (-self.exponent)

    def sum_bound(self, n_from: float) -> float:
        """Certified bound on ``sum_{|m| >= n_from} |a_m|`` on one side."""
        if self.exponent <= 1.0:
            return float("inf")
        v, b = zeta_tail(self.exponent, float(n_from))
        return self.constant * (v + b)


@dataclass(frozen=True)
class WindowSeq:
    lo: int
    hi: int
    values: np.ndarray
    right_model: Optional[TailModel] = None
    left_model: Optional[TailModel] = None
    err_budget: float = 0.0

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.hi - self.lo + 1,):
            raise ValueError("values length does not match window")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", v)
        for side, model, edge in (("right", self.right_model, self.hi),
                                  ("left", self.left_model, self.lo)):
            if model is not None and abs(edge) >= 1:
                if abs(self[edge]) > 1.1 * model.point_bound(edge) + self.err_budget:
                    raise ValueError(
                        f"{side} tail model invalid at window edge n={edge}")

    def __getitem__(self, n: int) -> float:
        if self.lo <= n <= self.hi:
            return float(self.values[n - self.lo])
        return 0.0

    def slice(self, lo: int, hi: int) -> np.ndarray:
        """Values on [lo, hi], zero-filled outside the stored window."""
        out = np.zeros(hi - lo + 1, dtype=np.float64)
        s_lo = max(lo, self.lo)
        s_hi = min(hi, self.hi)
        if s_hi >= s_lo:
            out[s_lo - lo: s_hi - lo + 1] = self.values[s_lo - self.lo: s_hi - self.lo + 1]
        return out

    @property
    def abs_mass(self) -> float:
        return float(np.sum(np.abs(self.values)))

    @property
    def abs_max(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def with_budget(self, extra: float) -> "WindowSeq":
        return replace(self, err_budget=self.err_budget + extra)


def delta_seq() -> WindowSeq:
    """The convolution identity: the unit mass at 0."""
    return WindowSeq(0, 0, np.array([1.0]))


# ---------------------------------------------------------------------------


def _off_window_bound(a: WindowSeq, b: WindowSeq, out_lo: int, out_hi: int) -> float:
    """Uniform bound on contributions of a's off-window mass to c_n.

    The right-of-window part of ``a`` can reach ``c_n`` only through
    ``b_{n-m}`` with ``m > a.hi``, i.e. ``n - m < out_hi - a.hi``; if ``b``
    vanishes below ``b.lo`` and ``out_hi - a.hi <= b.lo`` the contribution is
    exactly zero.  Otherwise it is bounded by the smaller of
    (tail sum of a) * max|b| and (tail max of a) * ||b||_1.
    """
    total = 0.0
    if a.right_model is not None and a.right_model.constant != 0.0:
        reachable = (b.left_model is not None) or (out_hi - a.hi > b.lo)
        if reachable:
            m0 = a.hi + 1
            cand = a.right_model.point_bound(m0) * (b.abs_mass + b.err_budget * (b.hi - b.lo + 1))
            s = a.right_model.sum_bound(m0)
            cand = min(cand, s * b.abs_max) if np.isfinite(s) else cand
            total += cand
    if a.left_model is not None and a.left_model.constant != 0.0:
        reachable = (b.right_model is not None) or (out_lo - a.lo < b.hi)
        if reachable:
            m0 = abs(a.lo - 1)
            cand = a.left_model.point_bound(m0) * (b.abs_mass + b.err_budget * (b.hi - b.lo + 1))
            s = a.left_model.sum_bound(m0)
            cand = min(cand, s * b.abs_max) if np.isfinite(s) else cand
            total += cand
    return total


def convolve(a: WindowSeq, b: WindowSeq, out_lo: int, out_hi: int) -> WindowSeq:
    """c_n = sum_m a_m b_{n-m} on [out_lo, out_hi] with certified budget.

    The stored-window part is computed exactly (up to float rounding) by a
    zero-padded power-of-two cyclic transform; off-window contributions are
    bounded through the tail envelopes and added to the output budget
    together with the bilinear propagation of the input budgets.
    """
    la = a.hi - a.lo + 1
    lb = b.hi - b.lo + 1
    full = la + lb - 1
    nfft = 1 << int(np.ceil(np.log2(max(full, 2))))
    fa = np.fft.rfft(a.values, nfft)
    fb = np.fft.rfft(b.values, nfft)
    conv = np.fft.irfft(fa * fb, nfft)[:full]
    # full linear result lives on [a.lo + b.lo, a.hi + b.hi]
    base = a.lo + b.lo
    out = np.zeros(out_hi - out_lo + 1, dtype=np.float64)
    s_lo = max(out_lo, base)
    s_hi = min(out_hi, a.hi + b.hi)
    if s_hi >= s_lo:
        out[s_lo - out_lo: s_hi - out_lo + 1] = conv[s_lo - base: s_hi - base + 1]

    fp = 4.0 * _EPS * np.log2(nfft) * a.abs_mass * b.abs_mass
    budget = (a.err_budget * (b.abs_mass + lb * b.err_budget)
              + b.err_budget * a.abs_mass
              + fp
              + _off_window_bound(a, b, out_lo, out_hi)
              + _off_window_bound(b, a, out_lo, out_hi))
    return WindowSeq(out_lo, out_hi, out, err_budget=budget)


def direct_convolve(a: WindowSeq, b: WindowSeq, out_lo: int, out_hi: int) -> WindowSeq:
    """Quadratic-time oracle with the same contract as ``convolve``."""
    out = np.zeros(out_hi - out_lo + 1, dtype=np.float64)
    for i, am in enumerate(a.values):
        m = a.lo + i
        j_lo = max(b.lo, out_lo - m)
        j_hi = min(b.hi, out_hi - m)
        if j_hi < j_lo:
            continue
        seg = b.values[j_lo - b.lo: j_hi - b.lo + 1]
        out[m + j_lo - out_lo: m + j_hi - out_lo + 1] += am * seg
    budget = (a.err_budget * (b.abs_mass + (b.hi - b.lo + 1) * b.err_budget)
              + b.err_budget * a.abs_mass
              + (a.hi - a.lo + 1) * _EPS * a.abs_mass * b.abs_max
              + _off_window_bound(a, b, out_lo, out_hi)
              + _off_window_bound(b, a, out_lo, out_hi))
    return WindowSeq(out_lo, out_hi, out, err_budget=budget)


def tail_sum(a: WindowSeq, n: int, side: str = "right"):
    """(value, remainder_bound) for ``sum_{r>n} a_r`` or ``sum_{r<n} a_r``.

    The stored part is summed with exact rounding; the unstored part beyond
    the window contributes zero to the value and its envelope sum to the
    bound (envelopes are magnitude-only, so no signed credit is taken).
    """
    if side == "right":
        if n >= a.hi:
            if a.right_model is None:
                if n > a.hi:
                    raise ValueError("no right tail model and n beyond window")
                return 0.0, _stored_bound(a, 0)
            rem = a.right_model.sum_bound(max(n + 1, 1))
            if not np.isfinite(rem):
                raise ValueError("right tail model not summable (exponent <= 1)")
            return 0.0, rem
        seg = a.values[n + 1 - a.lo:]
        value = neumaier_sum(seg)
        rem = _stored_bound(a, seg.size)
        if a.right_model is not None:
            extra = a.right_model.sum_bound(max(a.hi + 1, 1))
            if not np.isfinite(extra):
                raise ValueError("right tail model not summable (exponent <= 1)")
            rem += extra
        return value, rem
    elif side == "left":
        if n <= a.lo:
            if a.left_model is None:
                if n < a.lo:
                    raise ValueError("no left tail model and n beyond window")
                return 0.0, _stored_bound(a, 0)
            rem = a.left_model.sum_bound(max(abs(n - 1), 1))
            if not np.isfinite(rem):
                raise ValueError("left tail model not summable (exponent <= 1)")
            return 0.0, rem
        seg = a.values[: n - a.lo]
        value = neumaier_sum(seg)
        rem = _stored_bound(a, seg.size)
        if a.left_model is not None:
            extra = a.left_model.sum_bound(max(abs(a.lo - 1), 1))
            if not np.isfinite(extra):
                raise ValueError("left tail model not summable (exponent <= 1)")
            rem += extra
        return value, rem
    raise ValueError(f"side must be 'right' or 'left', got {side!r}")


def _stored_bound(a: WindowSeq, n_terms: int) -> float:
    return a.err_budget * n_terms + 2.0 * _EPS * n_terms


# ---------------------------------------------------------------------------
# CSV with #meta sidecar


def write_csv(path, columns, rows, meta: Optional[dict] = None) -> None:
    """Write a CSV table with ``#meta key=value`` comment headers.

    Floats are rendered with ``repr`` so identical runs produce
    byte-identical files.
    """
    lines = []
    for key, val in (meta or {}).items():
        lines.append(f"#meta {key}={_fmt(val)}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (np.floating,)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)
