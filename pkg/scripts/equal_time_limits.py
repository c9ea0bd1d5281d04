"""Equal-time commutator limits of the light-cone scalar and chiral boson.

Derives the ladder table at small N, extends it over the N schedule and
prints the deviation from the distributional target at each N.  With
``--json`` the raw and Cesaro-averaged values are written out for plotting.
"""

from __future__ import annotations

import argparse
import json
import time

from ciquant.brackets import derive_table
from ciquant.fields import equal_time_limit, standard_limit_checks
from ciquant.library import builtin


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, nargs="+", default=[1000, 3000, 10000], help="mode counts")
    ap.add_argument("--box", type=float, default=1000.0, help="box length L")
    ap.add_argument("--json", help="write per-N values here")
    args = ap.parse_args()

    tables = {}
    dump = []
    for model_name, chk in standard_limit_checks():
        if model_name not in tables:
            m = builtin(model_name, N=2)
            tables[model_name] = (m, derive_table(m))
        m, table = tables[model_name]
        chk.N_schedule = tuple(args.N)
        chk.L = args.box
        t0 = time.perf_counter()
        equal_time_limit(m, table, chk)
        dt = time.perf_counter() - t0
        print(f"{chk.name}  (tol {chk.tol:g}, {dt:.2f} s)")
        for N, dev, raw in zip(chk.N_schedule, chk.deviations, chk.raw_deviations):
            print(f"  N={N:>6d}  cesaro {dev:.3e}   partial sum {raw:.3e}")
        print(f"  {'PASS' if chk.passed else 'FAIL'}")
        d = chk.to_dict()
        d["values"] = [[[z.real, z.imag] for z in row] for row in chk.values]
        dump.append(d)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(dump, fh, indent=2)


if __name__ == "__main__":
    main()
