"""Renewal mass function by two independent pathways, plus difference tables.

``u_n`` (the expected number of visits to site ``n``) is computed by

* **state-space doubling**: partial sums ``G_K = sum_{k<K} p^{*k}`` via
  ``G_{2K} = G_K + p^{*K} * G_K`` on a buffered window, stopped when a
  left-deviation exponential-moment certificate shows the remaining visit
  mass is below tolerance; and
* **spectral inversion**: the backward difference ``Delta_n = u_{n-1} - u_n``
  has transform ``(e^{it}-1)/(1-p-hat(t))``, sampled on an exactly folded
  dyadic grid and inverted; ``u`` is then rebuilt by telescoping from
  ``u_n -> 1/mu`` with a modeled far-tail.

The two pathways share no numerical machinery beyond the pmf itself, which
is the point: their agreement is the acceptance evidence.  The module also
evaluates the exact convolution identity relating ``n Delta_n`` to the
smoothing sequence, and the decay/ratio diagnostics for the backward
differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import charfn
from .expansion import PhiSeq, c_const, phibar1_closed_form, r_star
from .seqkit import TailModel, WindowSeq, convolve
from .steplaw import StepLaw, chernoff_bound, moments

__all__ = [
    "RenewalTable",
    "DifferenceTable",
    "PropRow",
    "u_by_doubling",
    "delta_by_inversion",
    "u_from_delta",
    "delta_from_renewal",
    "identity_06_residual",
    "prop_diagnostics",
]

_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class RenewalTable:
    n_lo: int
    n_hi: int
    u: np.ndarray
    err: float                  # certified uniform absolute bound
    method: str                 # "doubling" | "inversion" | "mc"
    mu: float
    model_assisted: bool = False

    def value(self, n: int) -> float:
        if not (self.n_lo <= n <= self.n_hi):
            raise KeyError(f"n={n} outside table window [{self.n_lo}, {self.n_hi}]")
        return float(self.u[n - self.n_lo])

    def values(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        if ns.size and (ns.min() < self.n_lo or ns.max() > self.n_hi):
            raise KeyError("requested n outside table window")
        return self.u[ns - self.n_lo]


@dataclass(frozen=True)
class DifferenceTable:
    """Backward differences on a window, with their self-convolution.

    ``delta.values[i]`` is ``Delta_{lo+i}``; ``err_profile[i]`` bounds its
    absolute error (alias plus rounding).  ``n_max`` marks the range over
    which the dyadic-grid alias-control precondition held at construction.
    """

    delta: WindowSeq
    delta2: Optional[WindowSeq]
    err_delta: float            # uniform bound on [delta.lo, n_max]
    err_profile: np.ndarray
    mu: float
    M: int
    n_max: int
    method: str


# ---------------------------------------------------------------------------
# pathway 1: doubling


def u_by_doubling(law: StepLaw, window, tol: float = 1e-9,
                  max_doublings: int = 40) -> RenewalTable:
    """Visit counts by repeated squaring of the step distribution.

    The working window pads the request with
    ``buffer = max(2 |n_lo|, 10 ceil(1/mu) ln(1/tol), 1000)``; mass leaving
    the window can re-enter the request range only through a left excursion
    of at least the buffer depth, which the exponential-moment certificate
    makes negligible, so window drops are accounted rather than ignored.
    """
    n_lo, n_hi = int(window[0]), int(window[1])
    if n_hi < n_lo:
        raise ValueError("empty request window")
    mom = moments(law)
    buffer = int(max(2 * abs(n_lo), 10 * math.ceil(1.0 / mom.mu) * math.log(1.0 / tol),
                     1000))
    lo_w = min(n_lo, 0) - buffer      # keep the origin interior to the window
    hi_w = n_hi + buffer
    L = hi_w - lo_w + 1
    nfft = 1 << int(np.ceil(np.log2(2 * L)))

    n_axis = np.arange(lo_w, hi_w + 1)
    p = np.asarray(law.pmf(n_axis), dtype=np.float64)
    G = np.zeros(L)
    G[-lo_w] = 1.0
    P = p.copy()
    K = 1
    fp_total = 0.0
    pmf_err_total = float(law.norm_residual)
    cert = None
    for _ in range(max_doublings):
        cert = chernoff_bound(law, n_hi, K)
        if cert.series_bound < tol / 2.0:
            break
        Ph = np.fft.rfft(P, nfft)
        Gh = np.fft.rfft(G, nfft)
        # linear products live on index base 2*lo_w; slice back to base lo_w
        s0 = -lo_w
        G = G + np.fft.irfft(Ph * Gh, nfft)[s0: s0 + L]
        P = np.fft.irfft(Ph * Ph, nfft)[s0: s0 + L]
        K *= 2
        norm_G = float(np.abs(G).sum())
        fp_total += 4.0 * _EPS * math.log2(nfft) * (norm_G + 1.0)
        pmf_err_total += float(law.norm_residual) * (norm_G + 1.0)
    else:
        raise ValueError("doubling did not certify within max_doublings; "
                         "budget ledger: " + repr(cert))

    # window-escape accounting: mass above hi_w must descend >= buffer to be
    # seen again; mass below lo_w reached there only via a >= buffer left
    # excursion in the first place
    ret = chernoff_bound(law, n_hi - hi_w, 1).series_bound
    esc_left = chernoff_bound(law, lo_w, 1).series_bound
    escape_err = K * (law.right_tail(buffer) * ret + esc_left)

    err = cert.series_bound + fp_total + pmf_err_total + escape_err
    if err > max(tol, 1e-6):
        raise ValueError(f"doubling budget blowup: err={err:.3e} > tol={tol}; "
                         f"components: cert={cert.series_bound:.1e} "
                         f"fp={fp_total:.1e} pmf={pmf_err_total:.1e} "
                         f"escape={escape_err:.1e}")
    u = G[n_lo - lo_w: n_hi - lo_w + 1]
    table = RenewalTable(n_lo=n_lo, n_hi=n_hi, u=u, err=err,
                         method="doubling", mu=mom.mu)
    _check_renewal_invariants(table, law)
    return table


def _check_renewal_invariants(table: RenewalTable, law: StepLaw) -> None:
    if float(table.u.min()) < -table.err - 1e-12:
        raise AssertionError("renewal invariant violated: u_n < -err")
    edge = table.n_hi
    if law.family == "power":
        pb1, _ = phibar1_closed_form(law.alpha, law.c_right, table.mu, float(edge))
        allowance = 2.0 * pb1 / table.mu
    else:
        allowance = 2.0 ** (-min(edge, 500) / 4) if edge > 64 else 1.0
    if edge >= 1000 or law.family == "finite":
        gap = abs(table.value(edge) - 1.0 / table.mu)
        if gap > table.err + allowance + 1e-12:
            raise AssertionError(
                f"renewal invariant violated at right edge n={edge}: "
                f"|u - 1/mu| = {gap:.3e} > err + allowance = "
                f"{table.err + allowance:.3e}")


# ---------------------------------------------------------------------------
# pathway 2: inversion


def delta_by_inversion(law: StepLaw, n_max: int, M: Optional[int] = None,
                       tol: float = 1e-9, with_delta2: bool = True,
                       delta2_window=None) -> DifferenceTable:
    """Backward differences from the inverse transform of the folded grid.

    ``M >= 32 n_max`` keeps the wrap-around (alias) images of the slowly
    decaying right tail far from the certified range.  The stored window
    intentionally extends beyond ``n_max`` (up to a guard band below ``M``)
    so the telescoping reconstruction can consume it; entries past ``n_max``
    carry their own, larger, per-entry bounds in ``err_profile``.
    """
    if M is None:
        M = 1 << 22
    if M < 32 * n_max:
        raise ValueError(f"M={M} < 32*n_max={32 * n_max}: alias control violated")
    grid = charfn.derive(charfn.build_grid(law, M), k_max=0)
    if grid.aperiodicity_margin() <= 0.0:
        raise ValueError("law is periodic on a sublattice: |p-hat| reaches 1 off 0")
    dt_full = np.fft.irfft(grid.deltahat, M)
    mom = moments(law)

    guard = max(M // 32, 1 << 12)
    lo = -guard
    hi = M - guard
    idx = np.arange(lo, hi + 1)
    vals = dt_full[np.mod(idx, M)]

    fp_irfft = 4.0 * _EPS * math.log2(M) * float(np.mean(np.abs(grid.deltahat)))
    if law.family == "power":
        c_env = 1.3 * law.c_right / mom.mu ** 2
        # envelope validity spot-check against the computed values
        probe = np.unique(np.geomspace(64, n_max, 12).astype(np.int64))
        bad = np.abs(vals[probe - lo]) > c_env * probe.astype(float) ** (-law.alpha)
        if np.any(bad):
            raise AssertionError("backward-difference envelope check failed "
                                 f"at n={probe[bad][0]}")
        nf = idx.astype(np.float64)
        err_profile = (c_env * ((M - nf) ** (-law.alpha) + (M + np.abs(nf)) ** (-law.alpha))
                       + fp_irfft + grid.trunc_bound)
        err_delta = float(np.max(err_profile[: n_max - lo + 1]))
    else:
        # finite-support laws: the true differences decay geometrically, so
        # the alias level is read off the dead zone of the window itself
        dead_start = max(n_max + 1000, (3 * hi) // 4)
        dead = np.abs(vals[dead_start - lo:])
        alias = 2.0 * float(np.max(dead)) if dead.size else 0.0
        err_profile = np.full(idx.size, alias + fp_irfft + grid.trunc_bound)
        err_delta = float(err_profile[0])
    if err_delta > tol:
        raise ValueError(f"alias bound {err_delta:.3e} exceeds tol={tol}; "
                         "increase M")

    right_model = None
    if law.family == "power":
        right_model = TailModel(law.alpha, 1.5 * law.c_right / mom.mu ** 2)
    # left of the window the true differences have decayed below float range
    dseq = WindowSeq(lo, hi, vals, right_model=right_model,
                     err_budget=float(np.max(err_profile)))
    d2 = None
    if with_delta2:
        if delta2_window is None:
            delta2_window = (2 * lo, min(hi, 4 * n_max))
        # trim the operand so entries near the wrap guard (largest alias
        # error) stay out of the product
        t_hi = min(hi, max(2 * n_max, delta2_window[1] + guard))
        trimmed = WindowSeq(lo, t_hi, vals[: t_hi - lo + 1],
                            right_model=right_model,
                            err_budget=float(np.max(err_profile[: t_hi - lo + 1])))
        d2 = convolve(trimmed, trimmed, int(delta2_window[0]), int(delta2_window[1]))
    return DifferenceTable(delta=dseq, delta2=d2, err_delta=err_delta,
                           err_profile=err_profile, mu=mom.mu, M=M,
                           n_max=int(n_max), method="inversion")


def delta_from_renewal(table: RenewalTable,
                       with_delta2: bool = False) -> DifferenceTable:
    """Backward differences of an existing u table (telescoping exactness)."""
    vals = np.empty(table.n_hi - table.n_lo, dtype=np.float64)
    vals[:] = table.u[:-1] - table.u[1:]
    lo = table.n_lo + 1
    seq = WindowSeq(lo, table.n_hi, vals, err_budget=2.0 * table.err)
    prof = np.full(vals.size, 2.0 * table.err)
    d2 = None
    if with_delta2:
        d2 = convolve(seq, seq, 2 * lo, table.n_hi)
    return DifferenceTable(delta=seq, delta2=d2, err_delta=2.0 * table.err,
                           err_profile=prof, mu=table.mu, M=0,
                           n_max=table.n_hi, method=table.method)


# ---------------------------------------------------------------------------
# telescoping reconstruction with modeled far tail


def _antider(e: float, u):
    """Antiderivative kernel of (u+2)^e, handling the logarithmic exponent."""
    if abs(e + 1.0) < 1e-12:
        return np.log(u + 2.0)
    return (u + 2.0) ** (e + 1.0) / (e + 1.0)


class _TailModelD:
    """Smooth remainder model d(j) ~ sum_k c_k Phibar_1(j)^k / mu (k <= r*)."""

    def __init__(self, law: StepLaw, mu: float):
        self.alpha = law.alpha
        self.cr = law.c_right
        self.mu = mu
        if law.alpha is not None and law.alpha < 2.0:
            rs = r_star(law.alpha)
            beta = law.alpha - 1.0
            ks = range(2, min(rs, 3) + 1)
            self.coeffs = [c_const(k, beta) for k in ks]
            self.k_gap = min(rs, 3)
        else:
            self.coeffs = []
            self.k_gap = 2

    def p1(self, j):
        v, _ = phibar1_closed_form(self.alpha, self.cr, self.mu, j)
        return v

    def d(self, j):
        p1 = self.p1(np.asarray(j, dtype=np.float64))
        acc = p1.copy() if isinstance(p1, np.ndarray) else p1
        for i, c in enumerate(self.coeffs, start=2):
            acc = acc + c * p1 ** i
        return acc / self.mu

    def second_order_scale(self, j) -> float:
        """Magnitude of the model's non-leading part: the honesty stamp."""
        p1 = float(self.p1(np.asarray(float(j))))
        extra = sum(abs(c) * p1 ** i for i, c in enumerate(self.coeffs, start=2))
        if extra == 0.0:      # boundary or vanishing-coefficient families
            extra = p1 ** 2
        return extra / self.mu

    def wrap_gap(self, M: int) -> float:
        """Model-vs-truth gap summed over the explicit wrap-around images.

        The subtraction removes the model exactly, so only the part of the
        true remainder beyond the modeled orders survives; it is conservatively
        charged as ``p1^k_gap`` at each image argument.
        """
        acc = 0.0
        for el in range(1, 65):
            acc += float(self.p1(np.asarray(float(el * M)))) ** self.k_gap
        return 4.0 * acc / self.mu

    # smooth proxies for the alias sum beyond the explicit terms
    def smooth_terms(self):
        a = self.alpha
        A1 = 1.0 / (a * (a - 1.0))
        A2 = 1.0 / a
        k1 = self.cr / self.mu ** 2

        def Sc(u):
            return A1 * (u + 2.0) ** (1.0 - a) + A2 * (u + 2.0) ** (-a)

        def Sc_d(u):
            return -((u + 2.0) ** (-a)) / a - (u + 2.0) ** (-1.0 - a)

        def IS(ua, ub):
            return (A1 * _antider(1.0 - a, ub) + A2 * _antider(-a, ub)
                    - A1 * _antider(1.0 - a, ua) - A2 * _antider(-a, ua))

        terms = [(k1, Sc, Sc_d, IS)]
        if self.coeffs:
            c2 = self.coeffs[0]
            if c2 != 0.0:
                k2 = c2 * self.cr ** 2 / self.mu ** 3
                e1, e2 = 1.0 - a, -a

                def Sc2(u):
                    return Sc(u) ** 2

                def Sc2_d(u):
                    return 2.0 * Sc(u) * Sc_d(u)

                def IS2(ua, ub):
                    def F(u):
                        return (A1 * A1 * _antider(2 * e1, u)
                                + 2 * A1 * A2 * _antider(e1 + e2, u)
                                + A2 * A2 * _antider(2 * e2, u))
                    return F(ub) - F(ua)

                terms.append((k2, Sc2, Sc2_d, IS2))
        return terms


def u_from_delta(dtable: DifferenceTable, law: StepLaw,
                 window=None) -> RenewalTable:
    """Rebuild u by telescoping the stored differences down from ``1/mu``.

    ``u_n = 1/mu + sum_{m>n} Delta_m``: the stored span contributes an exact
    cumulative sum; the unstored far tail is taken from the smooth remainder
    model, and — because the stored differences come from a periodic grid —
    the wrap-around images ``sum_{l>=1} d(n+lM)`` are subtracted explicitly
    (64 terms) plus a midpoint integral correction for the rest.  The model
    contribution is charged to ``err`` at twice its non-leading magnitude and
    the table is flagged model-assisted.
    """
    mom = moments(law)
    mu = mom.mu
    seq = dtable.delta
    if window is None:
        window = (max(seq.lo + 1, -200), dtable.n_max)
    n_lo, n_hi = int(window[0]), int(window[1])
    if n_lo <= seq.lo or n_hi > seq.hi:
        raise ValueError("request window outside stored differences")
    W = seq.hi
    if law.family != "power":
        # geometric decay: differences beyond a short multiple of the request
        # have underflowed, so a trimmed span only sheds rounding noise
        W = min(seq.hi, max(4 * n_hi, 3000))
    M = dtable.M

    body = seq.values[n_lo + 1 - seq.lo: W - seq.lo + 1]
    csum = np.cumsum(body[::-1])[::-1]
    stored = csum[: n_hi - n_lo + 1]

    ns = np.arange(n_lo, n_hi + 1, dtype=np.float64)
    if law.family == "power" and M > 0:
        model = _TailModelD(law, mu)
        dW = float(model.d(np.float64(W)))
        L0 = 64
        Cn = np.zeros_like(ns)
        for el in range(1, L0 + 1):
            Cn += model.d(ns + el * M)
            Cn -= float(model.d(np.float64(W + el * M)))
        xm = L0 + 0.5
        for k_c, Sc, Sc_d, IS in model.smooth_terms():
            Cn += k_c * IS(ns + xm * M, W + xm * M) / M
            Cn += k_c * M * (Sc_d(ns + xm * M) - Sc_d(W + xm * M)) / 24.0
        u = 1.0 / mu + stored + dW - Cn
        model_err = 2.0 * model.second_order_scale(W)
        assisted = True
    elif law.family == "power":
        # differences not from a periodic grid: plain modeled tail, no wrap
        model = _TailModelD(law, mu)
        dW = float(model.d(np.float64(W)))
        u = 1.0 / mu + stored + dW
        model_err = 2.0 * model.second_order_scale(W)
        assisted = True
    else:
        # finite-support law: the far tail has decayed below float range
        u = 1.0 / mu + stored
        model_err = float(np.abs(seq[W])) * 4.0
        assisted = False

    n_terms = W - n_lo
    # cumulative-sum rounding: deterministic envelope over the stored span
    fp = _EPS * n_terms * (float(np.max(np.abs(stored))) + 1.0)
    if law.family == "power" and M > 0:
        # per-entry alias mass is exactly what the wrap-around subtraction
        # removes; what remains is the model's own mismatch at arguments
        # beyond the window, summed over the explicit images
        err = model_err + fp + model.wrap_gap(M)
    elif law.family == "power":
        err = model_err + fp
    else:
        err = model_err + fp + float(dtable.err_profile[0]) * n_terms
    table = RenewalTable(n_lo=n_lo, n_hi=n_hi, u=u, err=float(err),
                         method="inversion", mu=mu, model_assisted=assisted)
    _check_renewal_invariants(table, law)
    return table


# ---------------------------------------------------------------------------
# the exact convolution identity


def identity_06_residual(dtable: DifferenceTable, phi: PhiSeq, window):
    """Max residual of ``n Delta_n / mu = sum_m m phi_m Delta2_{n-m}``.

    Returns ``(residual, budget)``; the identity is exact, so the residual
    must not exceed the combined certified budget.
    """
    n_lo, n_hi = int(window[0]), int(window[1])
    if dtable.delta2 is None:
        raise ValueError("difference table was built without delta2")
    d2 = dtable.delta2
    s = phi.seq
    m_axis = np.arange(s.lo, s.hi + 1, dtype=np.float64)
    mphi = WindowSeq(s.lo, s.hi, m_axis * s.values,
                     right_model=(TailModel(phi.alpha - 1.0,
                                            2.0 * phi.c_right / ((phi.alpha - 1.0) * phi.mu))
                                  if phi.alpha is not None else None),
                     err_budget=s.err_budget * max(abs(s.lo), s.hi))
    rhs = convolve(mphi, d2, n_lo, n_hi)

    seq = dtable.delta
    ns = np.arange(n_lo, n_hi + 1, dtype=np.float64)
    lhs = ns * seq.slice(n_lo, n_hi) / dtable.mu

    prof = dtable.err_profile[n_lo - seq.lo: n_hi - seq.lo + 1] \
        if dtable.err_profile.size else np.zeros_like(ns)
    lhs_budget = float(np.max(np.abs(ns) * prof)) / dtable.mu
    budget = rhs.err_budget + lhs_budget
    residual = float(np.max(np.abs(lhs - rhs.values)))
    return residual, budget


# ---------------------------------------------------------------------------
# decay and ratio diagnostics for the differences


@dataclass(frozen=True)
class PropRow:
    n: int
    delta: float
    n_delta: float
    ratio_b: Optional[float]    # Delta_n / phi^+_{|n|}; None when phi^+ = 0


def prop_diagnostics(dtable: DifferenceTable, law: StepLaw,
                     n_grid: Optional[Sequence[int]] = None):
    """Per-n rows of ``n Delta_n`` and ``Delta_n / phi^+`` both directions.

    For power laws built on a periodic grid the wrap-around images
    ``sum_l Delta_{n+lM} ~ sum_l F-bar(n+lM)/mu^2`` are subtracted through
    the first-order difference model, so the reported entries track the true
    differences rather than the grid's folded ones.
    """
    mom = moments(law)
    seq = dtable.delta
    if n_grid is None:
        top = dtable.n_max
        pos = np.unique(np.geomspace(1, top, 24).astype(np.int64))
        neg_top = min(-seq.lo, 10 ** 4)
        neg = -np.unique(np.geomspace(1, max(neg_top, 2), 12).astype(np.int64))
        n_grid = np.concatenate([neg[::-1], pos])
    M = dtable.M
    correct = law.family == "power" and M > 0
    els = np.arange(1, 65, dtype=np.float64)
    rows = []
    for n in n_grid:
        n = int(n)
        if not (seq.lo <= n <= seq.hi):
            continue
        d = seq[n]
        if correct:
            imgs = law.right_tail(n + els * M) / mom.mu ** 2
            a = law.alpha
            x = n + 64.5 * M
            tail = (law.c_right / (a * mom.mu ** 2)) * x ** (1.0 - a) / ((a - 1.0) * M)
            d -= float(np.sum(imgs)) + tail
        fbar = law.right_tail(abs(n))
        if mom.mu_plus > 0 and fbar > 0:
            ratio = d / (fbar / mom.mu_plus)
        else:
            ratio = None
        rows.append(PropRow(n=n, delta=d, n_delta=n * d, ratio_b=ratio))
    return rows
