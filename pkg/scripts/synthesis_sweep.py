#!/usr/bin/env python3
"""Run every feedback problem on generated systems and tabulate the outcomes.

Each cell counts instances as certified / infeasible / failed.  ``failed``
means a label said solvable but synthesis or certification did not succeed,
or a label said unsolvable but synthesis returned something.
"""
import argparse
from collections import Counter

from phfeedback.generator import GeneratorSpec, SpecError, generate
from phfeedback.synth import CLAIMS, InfeasibleError, certify, synthesize

PROBLEMS = {"1": "p1", "2": "p2", "3": "p3", "B1": "B1", "B3": "B3", "B5": "B5"}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    table = {p: Counter() for p in PROBLEMS}
    for k in range(args.count):
        try:
            sys, truth = generate(GeneratorSpec(seed=args.seed + k, uncontrollable_mode=k % 4 == 0,
                                                axis_mode=k % 6 == 1))
        except SpecError:
            continue
        for p, label in PROBLEMS.items():
            try:
                fb = synthesize(sys, p)
            except InfeasibleError:
                table[p]["infeasible" if not truth.labels[label] else "failed"] += 1
                continue
            except Exception:
                table[p]["failed"] += 1
                continue
            ok = certify(sys, fb, CLAIMS[p])[0] and truth.labels[label]
            table[p]["certified" if ok else "failed"] += 1

    print(f"{'problem':>8} {'certified':>10} {'infeasible':>11} {'failed':>7}")
    for p, c in table.items():
        print(f"{p:>8} {c['certified']:>10} {c['infeasible']:>11} {c['failed']:>7}")


if __name__ == "__main__":
    main()
