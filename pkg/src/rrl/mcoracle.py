"""Monte Carlo visit-count oracle with counter-based deterministic streams.

Each replica walks ``S_0 = 0, S_{k+1} = S_k + X`` until it first exceeds a
stop level, counting visits to the requested targets.  Randomness comes from
a Philox 4x32-10 block cipher keyed by the master seed, with the replica
index in the counter block: every replica owns its stream regardless of how
replicas are scheduled across threads, and the per-target tallies are
integers, so results are bit-identical for any thread count.

Sampling splits the step law at a window boundary ``T``: the window part
uses a Vose alias table, the ``n > T`` tail uses a Pareto proposal
``(T + 1/2) U^{-1/alpha}`` rounded to the nearest integer and thinned by
rejection.  The cell envelope ``(n-1/2)^{-alpha} - (n+1/2)^{-alpha}`` is at
least ``alpha n^{-(1+alpha)}`` (odd-order series, all terms positive), so a
scale of ``c_r / alpha`` dominates the target cell mass exactly.

Visits after the walk first crosses the stop level are never counted; their
expectation is bias, bounded by the left-excursion certificate and reported,
not absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numba
from numba import njit, uint64, int64, float64

from .steplaw import StepLaw, chernoff_bound, moments

__all__ = ["McEstimate", "estimate_u", "philox4x32", "build_alias"]

_U32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)

_N_CHUNKS = 256      # fixed stream partitioning; independent of thread count


@njit(inline="always")
def _philox_rounds(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        h0 = (p0 >> uint64(32)) & _U32
        l0 = p0 & _U32
        h1 = (p1 >> uint64(32)) & _U32
        l1 = p1 & _U32
        c0 = h1 ^ c1 ^ k0
        c1 = l1
        c2 = h0 ^ c3 ^ k1
        c3 = l0
        k0 = (k0 + _W0) & _U32
        k1 = (k1 + _W1) & _U32
    return c0, c1, c2, c3


@njit(inline="always")
def _pair(k0, k1, rep, step, sub):
    """Two 53-bit uniforms from one cipher block at (sub, 0, rep, step)."""
    w0, w1, w2, w3 = _philox_rounds(sub & _U32, uint64(0), rep & _U32,
                                    step & _U32, k0, k1)
    ua = float64(((w0 << uint64(32)) | w1) >> uint64(11)) * (1.0 / 9007199254740992.0)
    ub = float64(((w2 << uint64(32)) | w3) >> uint64(11)) * (1.0 / 9007199254740992.0)
    return ua, ub


@njit(cache=True)
def _walk_range(k0, k1, rep0, rep1, stop_level, tmap, tmin, tmax,
                aJ, aq, wlo, qtail, T, alpha, acc_c, cr, counts, counts2):
    K = aJ.shape[0]
    nt = counts.shape[0]
    v = np.zeros(nt, np.int64)
    stepcount = uint64(0)
    for rep in range(rep0, rep1):
        for i in range(nt):
            v[i] = 0
        urep = uint64(rep)
        S = 0
        if tmin <= 0 <= tmax and tmap[0 - tmin] >= 0:
            v[tmap[0 - tmin]] += 1
        step = uint64(0)
        while S <= stop_level:
            sub = uint64(0)
            ua, ub = _pair(k0, k1, urep, step, sub)
            step += uint64(1)
            if ua < qtail:
                while True:
                    y = (T + 0.5) * ub ** (-1.0 / alpha)
                    sub += uint64(1)
                    uc, ud = _pair(k0, k1, urep, step, sub)
                    if y > 1.0e15:
                        ub = ud        # astronomically deep uniform: resample
                        continue
                    n = int64(y + 0.5)
                    fy = float64(n)
                    env = acc_c * ((fy - 0.5) ** (-alpha) - (fy + 0.5) ** (-alpha))
                    pn = cr * fy ** (-(1.0 + alpha))
                    if uc * env <= pn:
                        X = n
                        break
                    ub = ud
            else:
                x = (ua - qtail) / (1.0 - qtail) * K
                j = int64(x)
                if j >= K:
                    j = K - 1
                if x - j < aq[j]:
                    X = wlo + j
                else:
                    X = wlo + aJ[j]
            S += X
            if tmin <= S <= tmax:
                ii = tmap[S - tmin]
                if ii >= 0:
                    v[ii] += 1
        stepcount += step
        for i in range(nt):
            counts[i] += v[i]
            counts2[i] += v[i] * v[i]
    return stepcount


@njit(parallel=True, cache=True)
def _walk_all(k0, k1, R, stop_level, tmap, tmin, tmax, aJ, aq, wlo,
              qtail, T, alpha, acc_c, cr, counts, counts2, steps):
    nchunks = counts.shape[0]
    for c in numba.prange(nchunks):
        rep0 = c * R // nchunks
        rep1 = (c + 1) * R // nchunks
        steps[c] = _walk_range(k0, k1, rep0, rep1, stop_level, tmap, tmin,
                               tmax, aJ, aq, wlo, qtail, T, alpha, acc_c, cr,
                               counts[c], counts2[c])


def philox4x32(counter: Sequence[int], key: Sequence[int]):
    """Ten-round Philox 4x32 block for known-answer testing."""
    c = [np.uint64(x & 0xFFFFFFFF) for x in counter]
    k = [np.uint64(x & 0xFFFFFFFF) for x in key]
    w = _philox_kat(c[0], c[1], c[2], c[3], k[0], k[1])
    return tuple(int(x) for x in w)


@njit(cache=True)
def _philox_kat(c0, c1, c2, c3, k0, k1):
    return _philox_rounds(c0, c1, c2, c3, k0, k1)


def build_alias(w):
    """Vose alias table for a weight vector summing to 1."""
    K = len(w)
    q = np.asarray(w, dtype=np.float64) * K
    J = np.zeros(K, np.int64)
    small = [i for i in range(K) if q[i] < 1.0]
    large = [i for i in range(K) if q[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        J[s] = l
        q[l] = q[l] - (1.0 - q[s])
        (small if q[l] < 1.0 else large).append(l)
    for i in large + small:
        q[i] = 1.0
    return J, q


@dataclass(frozen=True)
class McEstimate:
    targets: np.ndarray
    u_hat: np.ndarray
    se: np.ndarray
    replicas: int
    master_seed: int
    stop_level: int
    bias_bound: float
    steps_total: int


def _sampler_parts(law: StepLaw, T: int):
    """Alias window plus tail-rejection constants for the given split."""
    if law.family == "finite":
        sites = [s for s, _ in law.finite_atoms]
        wlo, whi = min(sites), max(sites)
        w = np.array([dict(law.finite_atoms).get(s, 0.0)
                      for s in range(wlo, whi + 1)])
        return wlo, w / w.sum(), 0.0, 0, 0.0, 0.0, 0.0
    if law.left.geom_mass > 0.0:
        k_cut = int(math.ceil(70.0 * math.log(2.0) / -math.log(law.left.geom_q)))
        wlo = -k_cut
    elif law.left.atoms:
        wlo = min(s for s, _ in law.left.atoms)
    else:
        wlo = 1
    qtail = float(law.right_tail(T))
    sites = np.arange(wlo, T + 1)
    w = np.asarray(law.pmf(sites), dtype=np.float64)
    rem = 1.0 - w.sum() - qtail          # truncated geometric dust
    w[0] += max(rem, 0.0)
    acc_c = law.c_right / law.alpha
    return wlo, w / w.sum(), qtail, T, law.alpha, acc_c, law.c_right


def estimate_u(law: StepLaw, targets, replicas: int = 1_000_000,
               master_seed: int = 0, threads: Optional[int] = None,
               bias_target: Optional[float] = None,
               window_top: int = 4096) -> McEstimate:
    """Visit-count estimates with standard errors and a stopping-bias bound."""
    targets = np.asarray(sorted(int(t) for t in targets), dtype=np.int64)
    if targets.size == 0:
        raise ValueError("no targets")
    mom = moments(law)
    if mom.mu <= 0:
        raise ValueError("Monte Carlo oracle requires positive drift")
    top = int(targets.max())

    if bias_target is None:
        bias_target = 0.05 / math.sqrt(max(mom.mu, 1e-9) * replicas)
    margin = max(64, 20 * math.ceil(1.0 / mom.mu))
    while True:
        cert = chernoff_bound(law, -margin, 1)
        if cert.series_bound < bias_target or margin > 10 ** 7:
            break
        margin *= 2
    stop_level = top + margin
    bias = cert.series_bound

    wlo, w, qtail, T, alpha, acc_c, cr = _sampler_parts(law, window_top)
    aJ, aq = build_alias(w)
    tmin, tmax = int(targets.min()), int(targets.max())
    tmap = np.full(tmax - tmin + 1, -1, dtype=np.int64)
    tmap[targets - tmin] = np.arange(targets.size)

    if threads is not None:
        # results never depend on the thread count (fixed chunking, integer
        # tallies); clamp to what the machine actually offers
        numba.set_num_threads(max(1, min(int(threads),
                                         numba.config.NUMBA_NUM_THREADS)))
    counts = np.zeros((_N_CHUNKS, targets.size), dtype=np.int64)
    counts2 = np.zeros((_N_CHUNKS, targets.size), dtype=np.int64)
    steps = np.zeros(_N_CHUNKS, dtype=np.uint64)
    k0 = np.uint64(master_seed & 0xFFFFFFFF)
    k1 = np.uint64((master_seed >> 32) & 0xFFFFFFFF)
    _walk_all(k0, k1, replicas, stop_level, tmap, tmin, tmax,
              aJ, aq, wlo, qtail, T, alpha, acc_c, cr, counts, counts2, steps)

    tot = counts.sum(axis=0)
    tot2 = counts2.sum(axis=0)
    u_hat = tot / float(replicas)
    var = (tot2 - tot.astype(np.float64) ** 2 / replicas) / max(replicas - 1, 1)
    se = np.sqrt(np.maximum(var, 0.0) / replicas)
    return McEstimate(targets=targets, u_hat=u_hat, se=se, replicas=replicas,
                      master_seed=master_seed, stop_level=stop_level,
                      bias_bound=float(bias), steps_total=int(steps.sum()))
