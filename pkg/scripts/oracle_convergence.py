"""Finite-difference convergence of the numeric bracket estimate.

For each even built-in, estimates the bracket table by least squares at a
halving sequence of step sizes and prints the max deviation from the exact table.
Central differences make the error fall as h^2 until roundoff takes over.
"""

from __future__ import annotations

import argparse

import numpy as np

from ciquant.brackets import derive_table
from ciquant.library import BUILTIN_NAMES, builtin
from ciquant.oracle import oracle_check


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("models", nargs="*", default=["christ-lee", "bosonic-oscillator", "free-particle"])
    ap.add_argument("--h0", type=float, default=0.1, help="largest step")
    ap.add_argument("--halvings", type=int, default=14)
    ap.add_argument("--grid", type=int, default=64)
    args = ap.parse_args()

    for name in args.models:
        if name not in BUILTIN_NAMES:
            ap.error(f"unknown model {name}")
        m = builtin(name, N=2) if name in ("sigma-o2", "lightcone-scalar", "chiral-boson") else builtin(name)
        if not m.is_even():
            print(f"{name}: odd constants, skipped")
            continue
        table = derive_table(m)
        print(name)
        prev = None
        for h in args.h0 / 2.0 ** np.arange(args.halvings + 1):
            err = oracle_check(m, table, h=h, n_grid=args.grid, tol=np.inf)["max_deviation"]
            ratio = f"{prev / err:7.2f}" if prev and err > 0 else "      -"
            print(f"  h={h:8.1e}  max deviation {err:.3e}  ratio {ratio}")
            prev = err


if __name__ == "__main__":
    main()
