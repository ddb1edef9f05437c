"""Pairing conservation, hypersurface independence, Noether currents."""

import numpy as np
import pytest

from histodyn.builtin import klein_gordon, oscillator
from histodyn.diagnostics import (
    DiagnosticsError,
    Symmetry,
    bracket_onshell_check,
    hypersurface_independence,
    initial_pairing,
    linearize,
    noether_current,
    symplectic_pairing,
)
from histodyn.history import random_history
from histodyn.integrators import SimConfig, assemble_history, run_simulation
from histodyn.model import ModelSpec, Potential


@pytest.fixture(scope="module")
def osc_setup():
    model = oscillator()
    dt = 1e-3
    cfg = SimConfig(dt=dt, steps=2000, scheme="leapfrog",
                    initial_C={(): 1.0}, initial_P={(): 0.0})
    base = run_simulation(model, cfg)
    d1 = linearize(model, cfg, base, {(): 1.0}, {(): 0.0})
    d2 = linearize(model, cfg, base, {(): 0.0}, {(): 1.0})
    return model, cfg, base, d1, d2


def test_pairing_antisymmetry_and_self_zero(osc_setup):
    model, cfg, base, d1, d2 = osc_setup
    assert symplectic_pairing(d1, d1, 700) == 0.0
    v12 = symplectic_pairing(d1, d2, 700)
    v21 = symplectic_pairing(d2, d1, 700)
    assert v12 == pytest.approx(-v21, abs=1e-14)


def test_pairing_bilinear(osc_setup):
    model, cfg, base, d1, d2 = osc_setup
    d3 = linearize(model, cfg, base, {(): 0.7}, {(): -0.3})
    k = 1200
    lhs = symplectic_pairing(d3, d2, k)
    # d3 = 0.7 d1 - 0.3 d2 by linearity of the tangent flow
    want = 0.7 * symplectic_pairing(d1, d2, k) \
        - 0.3 * symplectic_pairing(d2, d2, k)
    assert lhs == pytest.approx(want, rel=1e-12)


def test_oscillator_rotating_frame_pairing(osc_setup):
    """The two fundamental tangent solutions keep pairing value -1: the
    half-kick initialisation is itself symplectic, so the discrete value
    sits exactly on the continuum one."""
    model, cfg, base, d1, d2 = osc_setup
    out = hypersurface_independence(d1, d2, [1, 400, 900, 1500, 1999])
    for v in out["values"]:
        assert abs(v + 1.0) < 1e-12
    assert out["max_rel_spread"] < 1e-13


def test_single_slice_spread_zero(osc_setup):
    model, cfg, base, d1, d2 = osc_setup
    out = hypersurface_independence(d1, d2, [500, 500, 500])
    assert out["max_rel_spread"] == 0.0


def test_nonlinear_pairing_still_conserved():
    """Exact force Jacobians make the tangent flow symplectic, so the
    staggered pairing is conserved to rounding even for a quartic
    potential."""
    nl = ModelSpec(
        name="quartic", dim=1, rank=0, signature=(1,),
        spatial_sizes=(), spatial_extents=(),
        potentials={"U": Potential.from_coefficients("U", [0, 0, 0.5, 0, 0.25])},
        hamiltonian=oscillator().hamiltonian,
        lagrangian=oscillator().lagrangian)
    cfg = SimConfig(dt=1e-3, steps=1500, scheme="leapfrog",
                    initial_C={(): 0.8}, initial_P={(): 0.1})
    base = run_simulation(nl, cfg)
    e1 = linearize(nl, cfg, base, {(): 1.0}, {(): 0.2})
    e2 = linearize(nl, cfg, base, {(): 0.3}, {(): 1.0})
    out = hypersurface_independence(e1, e2, [1, 500, 1000, 1499])
    assert out["max_rel_spread"] < 1e-12


def test_nonlinear_pairing_converges_to_continuum_value():
    """Sampling the conserved pairing on coarse centred slices deviates
    from the continuum (initial-data) value at second order in dt."""
    nl = ModelSpec(
        name="quartic", dim=1, rank=0, signature=(1,),
        spatial_sizes=(), spatial_extents=(),
        potentials={"U": Potential.from_coefficients("U", [0, 0, 0.5, 0, 0.25])},
        hamiltonian=oscillator().hamiltonian,
        lagrangian=oscillator().lagrangian)
    exact = initial_pairing(nl, "leapfrog",
                            {(): 1.0}, {(): 0.2}, {(): 0.3}, {(): 1.0})
    assert exact == pytest.approx(0.2 * 0.3 - 1.0 * 1.0)

    def deviation(dt, refine=16):
        # fine tangent run resampled onto the coarse staggered slots
        fine_dt = dt / refine
        steps = int(round(1.5 / fine_dt))
        cfg = SimConfig(dt=fine_dt, steps=steps, scheme="leapfrog",
                        initial_C={(): 0.8}, initial_P={(): 0.1})
        base = run_simulation(nl, cfg)
        e1 = linearize(nl, cfg, base, {(): 1.0}, {(): 0.2})
        e2 = linearize(nl, cfg, base, {(): 0.3}, {(): 1.0})

        def pair_at(k_coarse):
            # coarse-centred momentum from fine staggered samples around
            # t_k -/+ dt/2
            k = k_coarse * refine
            lo, hi = k - refine // 2, k + refine // 2
            out = 0.0
            for a, b in ((e1, e2), (e2, e1)):
                sgn = 1.0 if a is e1 else -1.0
                pc = 0.25 * (a.states[lo - 1].P[()] + a.states[lo].P[()]
                             + a.states[hi - 1].P[()] + a.states[hi].P[()])
                out += sgn * float(pc * b.states[k].C[()])
            return out

        ks = [2, 6, 10, 14]
        return max(abs(pair_at(k) - exact) for k in ks)

    d_coarse = deviation(0.08)
    d_fine = deviation(0.04)
    assert 3.0 < d_coarse / d_fine < 5.0


def test_symplectic_euler_pairing_conserved():
    model = oscillator()
    cfg = SimConfig(dt=1e-2, steps=400, scheme="symplectic_euler",
                    initial_C={(): 1.0}, initial_P={(): 0.0})
    base = run_simulation(model, cfg)
    d1 = linearize(model, cfg, base, {(): 1.0}, {(): 0.0})
    d2 = linearize(model, cfg, base, {(): 0.0}, {(): 1.0})
    out = hypersurface_independence(d1, d2, [1, 100, 250, 399])
    assert out["max_rel_spread"] < 1e-12


def test_kg_mode_orthogonality(rng):
    cells = 64
    L = 2 * np.pi
    kg = klein_gordon(cells=cells, length=L)
    h = L / cells
    dt = 0.4 * h
    x = np.arange(cells) * h
    omega = np.sqrt(2.0)
    cfg = SimConfig(dt=dt, steps=200, scheme="leapfrog",
                    initial_C={(): np.cos(x)},
                    initial_P={(1,): omega * np.sin(x + omega * dt / 2)},
                    staggered_init=True)
    base = run_simulation(kg, cfg)
    zero = np.zeros(cells)
    k2 = linearize(kg, cfg, base, {(): np.cos(2 * x)}, {(1,): np.sin(2 * x)})
    k3 = linearize(kg, cfg, base, {(): np.cos(3 * x)}, {(1,): np.sin(3 * x)})
    for s in (1, 100, 199):
        assert abs(symplectic_pairing(k2, k3, s)) < 1e-12
    # matched modes pair non-trivially and the value is conserved
    m1 = linearize(kg, cfg, base, {(): np.cos(2 * x)}, {(1,): zero})
    m2 = linearize(kg, cfg, base, {(): zero}, {(1,): np.cos(2 * x)})
    out = hypersurface_independence(m1, m2, [1, 60, 120, 199])
    assert abs(out["values"][0]) > 0.1
    assert out["max_rel_spread"] < 1e-12


def test_misaligned_solutions_rejected(osc_setup):
    model, cfg, base, d1, d2 = osc_setup
    cfg_short = SimConfig(dt=cfg.dt, steps=100, scheme="leapfrog",
                          initial_C={(): 1.0}, initial_P={(): 0.0})
    base_short = run_simulation(model, cfg_short)
    d_short = linearize(model, cfg_short, base_short, {(): 1.0}, {(): 0.0})
    with pytest.raises(DiagnosticsError):
        symplectic_pairing(d1, d_short, 50)
    with pytest.raises(DiagnosticsError):
        symplectic_pairing(d1, d2, 0)


# ---- noether ---------------------------------------------------------------

@pytest.fixture(scope="module")
def osc_history(osc_setup):
    model, cfg, base, _, _ = osc_setup
    return model, assemble_history(model, base, cfg.dt)


def test_time_translation_energy(osc_history):
    model, y = osc_history
    out = noether_current(model, Symmetry("translation", 0), y)
    vals = out["slice_values"]
    interior = vals[2:-2]
    assert np.max(np.abs(interior - interior[0])) < 1e-6
    assert interior[0] == pytest.approx(0.5, abs=1e-5)  # energy of (1, 0)


def test_noether_contrast_oscillator(osc_history, rng):
    model, y = osc_history
    on = noether_current(model, Symmetry("translation", 0), y)
    y_off = random_history(y.grid, 0, rng, smooth=True)
    off = noether_current(model, Symmetry("translation", 0), y_off)
    assert on["dj_norm"] <= 1e-3 * off["dj_norm"]


def test_field_shift_current_is_momentum():
    model = ModelSpec(
        name="free_scalar", dim=2, rank=0, signature=(1, -1),
        spatial_sizes=(32,), spatial_extents=(6.283185307179586,),
        potentials={"U": Potential.from_coefficients("U", [0.0])},
        hamiltonian=klein_gordon().hamiltonian,
        lagrangian=klein_gordon().lagrangian)
    h = model.spatial_extents[0] / 32
    dt = 0.4 * h
    x = np.arange(32) * h
    cfg = SimConfig(dt=dt, steps=150, scheme="leapfrog",
                    initial_C={(): np.cos(x)},
                    initial_P={(1,): np.sin(x + dt / 2)}, staggered_init=True)
    base = run_simulation(model, cfg)
    y = assemble_history(model, base, dt)
    out = noether_current(model, Symmetry("field_shift", amount=2.0), y)
    # j = amount * P, so dj = amount * dP, tiny on shell
    assert out["dj_norm"] < 1e-10


def test_field_shift_needs_flat_potential(osc_history):
    model, y = osc_history
    with pytest.raises(DiagnosticsError):
        noether_current(model, Symmetry("field_shift"), y)


def test_unknown_symmetry_rejected(osc_history):
    model, y = osc_history
    with pytest.raises(DiagnosticsError):
        noether_current(model, Symmetry("boost"), y)


def test_zero_variation_current(osc_history):
    # amount 0 shifts nothing: j vanishes identically for the flat model
    model = ModelSpec(
        name="free", dim=1, rank=0, signature=(1,),
        spatial_sizes=(), spatial_extents=(),
        potentials={"U": Potential.from_coefficients("U", [0.0])},
        hamiltonian=oscillator().hamiltonian,
        lagrangian=oscillator().lagrangian)
    cfg = SimConfig(dt=1e-2, steps=64, scheme="leapfrog",
                    initial_C={(): 1.0}, initial_P={(): 1.0})
    base = run_simulation(model, cfg)
    y = assemble_history(model, base, 1e-2)
    out = noether_current(model, Symmetry("field_shift", amount=0.0), y)
    assert out["dj_norm"] == 0.0


# ---- bracket on shell -------------------------------------------------------

def test_bracket_onshell(osc_history):
    model, y = osc_history
    rec = bracket_onshell_check(model, y, tolerance=1e-6)
    assert rec["pc_is_one"]
    assert rec["gap_dC"] < 1e-6 and rec["gap_dP"] < 1e-6
    assert rec["pass"]


def test_bracket_onshell_fails_off_shell(rng):
    model = oscillator()
    grid = model.grid(128, 1.0)
    y = random_history(grid, 0, rng, smooth=True)
    rec = bracket_onshell_check(model, y, tolerance=1e-6)
    assert not rec["pass"]
    assert rec["gap_dC"] > 1e-2
