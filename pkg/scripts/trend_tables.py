#!/usr/bin/env python3
"""Correction-term trend tables across the shipped lattice laws.

For every power-tail law spec this sweeps the expansion diagnostics on a
log-spaced grid of n and records how the order-k ratio statistics approach
their limiting constants.  One CSV per law, plus a combined summary row
per (law, k) with the final gap to the limit.

Usage:
    python3 scripts/trend_tables.py [--n-max 20000] [--grid-m 1048576]
                                    [--out trend_out] [--laws a.law b.law ...]
"""

import argparse
import glob
import os

import numpy as np

from rrl import (delta_by_inversion, diagnostics, load_law, phi_seq, phibar,
                 r_star, u_from_delta, write_csv)


def trend_for_law(path: str, n_max: int, grid_m: int, tol: float):
    law = load_law(path)
    if law.alpha is None or abs(law.alpha - 2.0) < 1e-12:
        return None                      # boundary/finite laws have no c_k trend
    k_eff = r_star(law.alpha)
    grid = np.unique(np.round(np.geomspace(10.0, float(n_max), 25)).astype(np.int64))

    lo = min(law.support_lo if law.support_lo is not None else -2000, -2000)
    hi = 2 * n_max + k_eff * (-lo) + max(4000, n_max // 10)
    phi = phi_seq(law, (lo, hi))
    etable = phibar(phi, k_eff, grid)

    dtable = delta_by_inversion(law, n_max, M=grid_m, tol=tol)
    utable = u_from_delta(dtable, law, (0, n_max))
    diag = diagnostics(phi, etable, utable.values(grid),
                       np.full(grid.size, utable.err))

    cols = ["n", "first_order"]
    cols += [f"ratio_{k}" for k in range(2, k_eff + 1)]
    cols.append("e_star")
    rows = []
    for j, n in enumerate(grid):
        row = [int(n), float(diag.first_order[j])]
        row += [float(diag.ratios[k - 2, j]) for k in range(2, k_eff + 1)]
        row.append(float(diag.remainder.e_star[j]))
        rows.append(tuple(row))
    meta = {"alpha": law.alpha, "mu": phi.mu, "k_max": k_eff,
            "u_err": utable.err}
    summary = []
    for k in range(2, k_eff + 1):
        c_k = diag.constants.c[k - 1]
        gap = abs(float(diag.ratios[k - 2, -1]) - c_k)
        summary.append((os.path.basename(path), law.alpha, k, c_k,
                        float(diag.ratios[k - 2, -1]), gap))
    return law, cols, rows, meta, summary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-max", type=int, default=20_000)
    ap.add_argument("--grid-m", type=int, default=1 << 20)
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--out", default="trend_out")
    ap.add_argument("--laws", nargs="*", default=None,
                    help="law spec files (default: laws/*.law)")
    args = ap.parse_args()

    paths = args.laws or sorted(glob.glob("laws/*.law"))
    os.makedirs(args.out, exist_ok=True)
    combined = []
    for path in paths:
        res = trend_for_law(path, args.n_max, args.grid_m, args.tol)
        if res is None:
            print(f"{path}: skipped (no power-tail trend)")
            continue
        law, cols, rows, meta, summary = res
        name = os.path.splitext(os.path.basename(path))[0]
        dest = os.path.join(args.out, f"trend_{name}.csv")
        write_csv(dest, tuple(cols), rows, meta=meta)
        combined.extend(summary)
        for _, alpha, k, c_k, last, gap in summary:
            print(f"{name}: alpha={alpha}  ratio_{k}({args.n_max}) = {last:+.5f}"
                  f"  limit {c_k:+.5f}  gap {gap:.2e}")
        print(f"wrote {dest}")
    write_csv(os.path.join(args.out, "trend_summary.csv"),
              ("law", "alpha", "k", "limit", "final_ratio", "final_gap"),
              combined, meta={"n_max": args.n_max, "grid_m": args.grid_m})
    print(f"wrote {os.path.join(args.out, 'trend_summary.csv')}")


if __name__ == "__main__":
    main()
