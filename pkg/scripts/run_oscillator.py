#!/usr/bin/env python3
"""Oscillator experiment: accuracy, energy band, pairing conservation.

Integrates the unit harmonic oscillator over one period with both
schemes, prints the end-state error against the closed form, the energy
band over the run, and the pairing of the two fundamental tangent
solutions on a handful of time slices.
"""

import numpy as np

from histodyn.builtin import oscillator
from histodyn.diagnostics import hypersurface_independence, linearize
from histodyn.integrators import SimConfig, run_simulation


def main():
    model = oscillator()
    T = 2 * np.pi
    print("scheme            dt       |q-1|       |p|     energy band")
    for scheme in ("leapfrog", "symplectic_euler"):
        for dt in (1e-2, 1e-3):
            steps = int(round(T / dt)) + 1
            cfg = SimConfig(dt=dt, steps=steps, scheme=scheme,
                            initial_C={(): 1.0}, initial_P={(): 0.0})
            res = run_simulation(model, cfg)
            k = steps - 1
            q = float(res.trajectory[k].C[()])
            p = float(res.centered[k][()])
            band = float(np.max(np.abs(res.energy - res.energy[0])))
            print(f"{scheme:<16s} {dt:7.0e}  {abs(q - 1):.3e}  "
                  f"{abs(p):.3e}  {band:.3e}")

    dt = 1e-3
    cfg = SimConfig(dt=dt, steps=int(round(T / dt)), scheme="leapfrog",
                    initial_C={(): 1.0}, initial_P={(): 0.0})
    base = run_simulation(model, cfg)
    d1 = linearize(model, cfg, base, {(): 1.0}, {(): 0.0})
    d2 = linearize(model, cfg, base, {(): 0.0}, {(): 1.0})
    n = len(d1.states)
    out = hypersurface_independence(d1, d2, [1, n // 4, n // 2, n - 1])
    print("\ntangent pairing per slice:", ["%.15f" % v for v in out["values"]])
    print("relative spread:", out["max_rel_spread"])


if __name__ == "__main__":
    main()
