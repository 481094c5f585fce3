#!/usr/bin/env python3
"""Generate random systems and check that the condensed form recovers their dims.

    python scripts/roundtrip_sweep.py --count 500 --seed 0
"""
import argparse
import time

from phfeedback.condense import condensed_form, condensed_violations, structural_indices
from phfeedback.generator import GeneratorSpec, SpecError, generate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    done = fails = 0
    k = 0
    while done < args.count:
        spec = GeneratorSpec(seed=args.seed + k, cond1=[None, True, False][k % 3],
                             e_mode=[None, "index1", "cond3", "nocond3"][k % 4],
                             uncontrollable_mode=k % 5 == 0)
        k += 1
        try:
            sys, truth = generate(spec)
        except SpecError:
            continue
        cf = condensed_form(sys)
        si = structural_indices(sys)
        n1, n2, n3, n4, n5, n6 = truth.dims
        ok = (cf.dims == truth.dims and not condensed_violations(cf, sys)
              and si.n1_plus_n4 == n1 + n4 and si.n3_plus_n4 == n3 + n4)
        if not ok:
            fails += 1
            print(f"seed {spec.seed}: expected {truth.dims}, got {cf.dims}")
        done += 1
    print(f"{done} systems, {fails} failures, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
