"""Programmatic constructors for the three worked model families.

The shipped model files under models/ describe the same systems through
the DSL; the parser tests cross-check both routes.
"""

from __future__ import annotations

from .expr import (
    Const,
    Differential,
    FieldC,
    FieldP,
    HodgeStar,
    ScalarFun,
    Sum,
    VolSlot,
    Wedge,
)
from .model import ModelSpec, Potential


def _standard_hamiltonian():
    """0.5 * star(P) ^ P + U(C) * Vol"""
    return Sum((
        Wedge(Const(0.5), Wedge(HodgeStar(FieldP()), FieldP())),
        Wedge(ScalarFun("U", FieldC()), VolSlot(())),
    ))


def _standard_lagrangian():
    """0.5 * d(C) ^ star(d(C)) - U(C) * Vol"""
    dC = Differential(FieldC())
    return Sum((
        Wedge(Const(0.5), Wedge(dC, HodgeStar(dC))),
        Wedge(Const(-1.0), Wedge(ScalarFun("U", FieldC()), VolSlot(()))),
    ))


def oscillator(omega2_param=True):
    """Time dynamics with U(q) = 0.5 q^2: the unit harmonic oscillator."""
    return ModelSpec(
        name="oscillator",
        dim=1,
        rank=0,
        signature=(1,),
        spatial_sizes=(),
        spatial_extents=(),
        params={},
        potentials={"U": Potential.from_coefficients("U", [0.0, 0.0, 0.5])},
        hamiltonian=_standard_hamiltonian(),
        lagrangian=_standard_lagrangian(),
        field_symbol="q",
        momentum_symbol="p",
        defaults={"scheme": "leapfrog", "dt": 1e-3, "steps": 6284,
                  "record_every": 1, "initial_C": "1.0", "initial_P": "0.0"},
    )


def free_particle():
    return ModelSpec(
        name="free_particle",
        dim=1,
        rank=0,
        signature=(1,),
        spatial_sizes=(),
        spatial_extents=(),
        potentials={"U": Potential.from_coefficients("U", [0.0])},
        hamiltonian=_standard_hamiltonian(),
        lagrangian=_standard_lagrangian(),
        field_symbol="q",
        momentum_symbol="p",
        defaults={"scheme": "symplectic_euler", "dt": 1e-2, "steps": 100,
                  "record_every": 1, "initial_C": "1.0", "initial_P": "1.0"},
    )


def klein_gordon(cells=256, length=6.283185307179586, mass=1.0):
    """Massive scalar field on a 1+1 periodic domain, U = 0.5 m^2 C^2."""
    return ModelSpec(
        name="klein_gordon",
        dim=2,
        rank=0,
        signature=(1, -1),
        spatial_sizes=(cells,),
        spatial_extents=(length,),
        params={"m": mass},
        potentials={"U": Potential("U", ((2, ((0.5, (("m", 2),)),)),))},
        hamiltonian=_standard_hamiltonian(),
        lagrangian=_standard_lagrangian(),
        defaults={"scheme": "leapfrog", "record_every": 1,
                  "initial_C": "cos(2*pi*x1/L)", "initial_P": "0.0"},
    )


def electromagnetism_2p1(cells=64, length=1.0):
    """Rank-1 field on a 2+1 periodic domain, H = 0.5 P ^ star(P).

    The usual fixed-time analysis of this system introduces a vanishing
    time-component momentum as a constraint, and the per-component
    multimomentum route carries antisymmetry constraints; treating the
    potential as a single 1-form history instead makes the momentum the
    dual field strength and no constraint arises. The integrator fixes
    the temporal gauge (time component of the potential frozen at zero).
    """
    return ModelSpec(
        name="em_2p1",
        dim=3,
        rank=1,
        signature=(1, -1, -1),
        spatial_sizes=(cells, cells),
        spatial_extents=(length, length),
        potentials={},
        hamiltonian=Wedge(Const(0.5), Wedge(FieldP(), HodgeStar(FieldP()))),
        lagrangian=Wedge(
            Const(0.5),
            Wedge(Differential(FieldC()), HodgeStar(Differential(FieldC())))),
        field_symbol="A",
        defaults={"scheme": "yee", "record_every": 1,
                  "initial_C": "0.0", "initial_P": "0.0"},
    )
