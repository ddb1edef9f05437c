#!/usr/bin/env python3
"""Gauge-field experiment: constraint and energy conservation.

Runs the 2+1 staggered scheme from random divergence-free initial data
and reports the divergence-constraint residual over the run, the exact
discrete field-energy invariant, and the second-order decay of the
centred covariant residual under joint refinement.
"""

import numpy as np

from histodyn.builtin import electromagnetism_2p1
from histodyn.diagnostics import centered_residual
from histodyn.dynamics import hamilton_equations
from histodyn.integrators import (
    SimConfig,
    assemble_history,
    compile_scheme,
    run_simulation,
)


def divergence_free_config(cells, steps, seed=3, cfl=0.5):
    em = electromagnetism_2p1(cells=cells, length=1.0)
    hs = 1.0 / cells
    rng = np.random.default_rng(seed)
    psi = np.zeros((cells, cells))
    x = np.arange(cells) / cells
    for _ in range(3):
        kx, ky = rng.integers(1, 4, size=2)
        psi += rng.normal() * np.cos(
            2 * np.pi * (kx * x[:, None] + ky * x[None, :])
            + rng.uniform(0, 2 * np.pi))

    def bwd(a, ax):
        return (a - np.roll(a, 1, axis=ax)) / hs

    zero = np.zeros((cells, cells))
    cfg = SimConfig(dt=cfl * hs, steps=steps, scheme="yee",
                    initial_C={(1,): zero, (2,): zero},
                    initial_P={(1,): -bwd(psi, 0), (2,): -bwd(psi, 1)},
                    staggered_init=True)
    return em, cfg


def main():
    em, cfg = divergence_free_config(64, 5000)
    res = run_simulation(em, cfg)
    g = res.constraint_residuals[(1, 2)]
    print(f"constraint residual: start {g[0]:.3e}, "
          f"max deviation {np.max(np.abs(g - g[0])):.3e}")

    compiled = compile_scheme(em, "yee")
    energies = []
    for k in range(1, len(res.trajectory), 50):
        prev = res.trajectory[k - 1].P
        cur = res.trajectory[k].P
        B = compiled.derived_momentum(res.trajectory[k].C)[(0,)]
        energies.append(0.5 * (np.sum(prev[(1,)] * cur[(1,)])
                               + np.sum(prev[(2,)] * cur[(2,)])
                               + np.sum(B ** 2)))
    energies = np.asarray(energies)
    print(f"discrete energy invariant: rel deviation "
          f"{np.max(np.abs(energies - energies[0])) / energies[0]:.3e}")

    print("\ncells   centred residual")
    prev = None
    for cells in (16, 32, 64):
        emc, cfgc = divergence_free_config(cells, 4 * cells)
        r = run_simulation(emc, cfgc)
        y = assemble_history(emc, r, cfgc.dt)
        c = centered_residual(y, hamilton_equations(emc), emc)
        ratio = "" if prev is None else f"   (x{prev / c['res_P']:.2f})"
        print(f"{cells:5d}   {c['res_P']:.3e}{ratio}")
        prev = c["res_P"]


if __name__ == "__main__":
    main()
