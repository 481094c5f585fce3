#!/usr/bin/env python3
"""Energy balance of a stabilised closed loop under step halving.

Prints the largest per-step balance residual and the observed order for a
sequence of step sizes, plus the energy drop with zero input.
"""
import argparse

import numpy as np

from phfeedback.generator import GeneratorSpec, generate
from phfeedback.model import closed_loop
from phfeedback.sim import InputSignal, simulate
from phfeedback.synth import synthesize
from phfeedback.verify import finite_eigenvalues


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--levels", type=int, default=5)
    args = ap.parse_args()

    sys, truth = generate(GeneratorSpec(seed=args.seed, cond1=True, e_mode="index1"))
    fb = synthesize(sys, "3")
    ev = finite_eigenvalues(closed_loop(sys, fb))
    rho = max(float(np.abs(ev).max()) if ev.size else 0.0, 1.0)
    h0 = 0.02 / rho
    T = 100 * h0
    x0 = np.random.default_rng(args.seed).standard_normal(sys.n)
    u = InputSignal("sinusoid", 1.0, freq=1.0 / (20 * np.pi * h0))
    print(f"dims {truth.dims}, spectral radius {rho:.3g}, T = {T:.3g}")

    prev = None
    for j in range(args.levels):
        h = h0 / 2 ** j
        tr = simulate(sys, u, x0, T, h, fb=fb)
        r = float(np.abs(tr.residual).max())
        order = "" if prev is None else f"{np.log2(prev / r):6.2f}"
        print(f"h = {h:.3e}  max residual {r:.3e}  {order}")
        prev = r

    tr = simulate(sys, None, x0, T, h0, fb=fb)
    print(f"zero input: H {tr.H[0]:.4g} -> {tr.H[-1]:.4g}, "
          f"largest increase {max(0.0, float(np.diff(tr.H).max())):.2e}")


if __name__ == "__main__":
    main()
