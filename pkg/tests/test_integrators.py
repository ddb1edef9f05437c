"""Stepping schemes: exactness, accuracy order, conservation, residuals."""

import numpy as np
import pytest

from histodyn.builtin import (
    electromagnetism_2p1,
    free_particle,
    klein_gordon,
    oscillator,
)
from histodyn.dynamics import hamilton_equations, onshell_residual
from histodyn.integrators import (
    SchemeError,
    SimConfig,
    SimulationDiverged,
    assemble_history,
    compile_scheme,
    run_simulation,
)
from histodyn.model import ModelSpec, Potential


def run_oscillator(dt, steps, scheme="leapfrog", q0=1.0, p0=0.0):
    cfg = SimConfig(dt=dt, steps=steps, scheme=scheme,
                    initial_C={(): q0}, initial_P={(): p0})
    return run_simulation(oscillator(), cfg)


def test_free_particle_symplectic_euler_exact():
    cfg = SimConfig(dt=0.01, steps=100, scheme="symplectic_euler",
                    initial_C={(): 0.0}, initial_P={(): 1.0})
    res = run_simulation(free_particle(), cfg)
    last = res.trajectory[-1]
    assert float(last.P[()]) == 1.0
    assert abs(float(last.C[()]) - last.t) < 1e-14


def test_zero_initial_data_stays_zero():
    for make in (oscillator, lambda: klein_gordon(cells=16)):
        model = make()
        shape = tuple(model.spatial_sizes)
        cfg = SimConfig(dt=0.01, steps=50, scheme="leapfrog",
                        initial_C={}, initial_P={})
        res = run_simulation(model, cfg)
        for s in res.trajectory:
            for arr in list(s.C.values()) + list(s.P.values()):
                assert not np.any(arr)


def test_oscillator_full_period():
    dt = 1e-3
    steps = int(round(2 * np.pi / dt)) + 1
    res = run_oscillator(dt, steps)
    k = steps - 1
    state = res.trajectory[k]
    q = float(state.C[()])
    p = float(res.centered[k][()])
    assert abs(q - 1.0) < 1e-3
    assert abs(p - 0.0) < 1e-3
    drift = np.max(np.abs(res.energy - res.energy[0]))
    assert drift < 1e-6


def test_oscillator_second_order_convergence():
    # end-state error against the closed form, ratio ~4 under halving
    errs = []
    for dt in (2e-3, 1e-3):
        steps = int(round(1.0 / dt))
        res = run_oscillator(dt, steps + 1)
        s = res.trajectory[steps]
        err = abs(float(s.C[()]) - np.cos(s.t))
        errs.append(err)
    ratio = errs[0] / errs[1]
    assert 3.5 < ratio < 4.5


def test_oscillator_energy_bound_long_run():
    # 1e6 leapfrog steps: |h(t) - h(0)| stays within the pinned dt^2 bound
    dt = 1e-3
    res = run_oscillator(dt, 1_000_000, scheme="leapfrog")
    drift = float(np.max(np.abs(res.energy - res.energy[0])))
    assert drift <= 0.5 * dt * dt


def test_symplectic_euler_oscillator_first_order():
    errs = []
    for dt in (2e-3, 1e-3):
        steps = int(round(1.0 / dt))
        res = run_oscillator(dt, steps + 1, scheme="symplectic_euler")
        s = res.trajectory[steps]
        errs.append(abs(float(s.C[()]) - np.cos(s.t)))
    assert 1.7 < errs[0] / errs[1] < 2.3


def kg_plane_wave(cells, periods=1.0, cfl=0.4, mode=1):
    L = 2 * np.pi
    kg = klein_gordon(cells=cells, length=L, mass=1.0)
    h = L / cells
    dt = cfl * h
    k = float(mode)
    omega = np.sqrt(k * k + 1.0)
    steps = int(round(periods * (2 * np.pi / omega) / dt))
    x = np.arange(cells) * h
    cfg = SimConfig(
        dt=dt, steps=steps, scheme="leapfrog",
        initial_C={(): np.cos(k * x)},
        initial_P={(1,): omega * np.sin(k * x + omega * dt / 2)},
        staggered_init=True)
    return kg, cfg, omega, k, x


def test_klein_gordon_phase_error_second_order():
    errs = []
    for cells in (64, 128):
        kg, cfg, omega, k, x = kg_plane_wave(cells)
        res = run_simulation(kg, cfg)
        last = res.trajectory[-1]
        want = np.cos(k * x - omega * last.t)
        errs.append(float(np.max(np.abs(last.C[()] - want))))
    ratio = errs[0] / errs[1]
    assert 3.5 < ratio < 4.5


def test_klein_gordon_residual_rounding_level():
    kg, cfg, *_ = kg_plane_wave(48, periods=0.25)
    res = run_simulation(kg, cfg)
    y = assemble_history(kg, res, cfg.dt)
    r = onshell_residual(y, hamilton_equations(kg), kg)
    assert r["res_C"] < 1e-11
    assert r["res_P"] < 1e-11


def test_residual_with_constant_momentum():
    # uniform arrays are site-agnostic; the free particle's constant
    # momentum must not confuse the staggering bookkeeping
    cfg = SimConfig(dt=0.01, steps=64, scheme="leapfrog",
                    initial_C={(): 0.0}, initial_P={(): 1.0})
    model = free_particle()
    res = run_simulation(model, cfg)
    y = assemble_history(model, res, 0.01)
    r = onshell_residual(y, hamilton_equations(model), model)
    assert r["res_C"] < 1e-13 and r["res_P"] < 1e-13


def test_tD_residual_rounding_level():
    res = run_oscillator(1e-2, 200)
    model = oscillator()
    y = assemble_history(model, res, 1e-2)
    r = onshell_residual(y, hamilton_equations(model), model)
    assert r["res_C"] < 1e-12 and r["res_P"] < 1e-12


def em_divergence_free(cells=32, steps=400, cfl=0.4, seed=3):
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

    P1 = -bwd(psi, 0)
    P2 = -bwd(psi, 1)
    zero = np.zeros((cells, cells))
    cfg = SimConfig(dt=cfl * hs, steps=steps, scheme="yee",
                    initial_C={(1,): zero, (2,): zero},
                    initial_P={(1,): P1, (2,): P2}, staggered_init=True)
    return em, cfg


def test_em_gauss_residual_constant():
    em, cfg = em_divergence_free()
    res = run_simulation(em, cfg)
    g = res.constraint_residuals[(1, 2)]
    assert g[0] < 1e-11
    assert np.max(np.abs(g - g[0])) < 1e-10


def test_em_residual_rounding_level():
    em, cfg = em_divergence_free(cells=24, steps=100)
    res = run_simulation(em, cfg)
    y = assemble_history(em, res, cfg.dt)
    r = onshell_residual(y, hamilton_equations(em), em)
    assert r["res_C"] < 1e-11
    assert r["res_P"] < 1e-10


def test_em_discrete_field_energy_exactly_conserved():
    # the staggered product 0.5 [P(k-1/2) P(k+1/2) + B(k)^2] is the exact
    # quadratic invariant of the linear staggered flow
    em, cfg = em_divergence_free(cells=32, steps=300)
    res = run_simulation(em, cfg)
    compiled = compile_scheme(em, "yee")
    series = []
    for k in range(1, len(res.trajectory)):
        prev = res.trajectory[k - 1].P
        cur = res.trajectory[k].P
        B = compiled.derived_momentum(res.trajectory[k].C)[(0,)]
        e = 0.5 * (np.sum(prev[(1,)] * cur[(1,)])
                   + np.sum(prev[(2,)] * cur[(2,)]) + np.sum(B ** 2))
        series.append(e)
    series = np.asarray(series)
    rel = np.max(np.abs(series - series[0])) / abs(series[0])
    assert rel < 1e-12


def test_scalar_field_2p1_plane_wave():
    """The same stepper machinery runs a rank-0 field on 2+1."""
    cells = 24
    L = 2 * np.pi
    model = ModelSpec(
        name="kg2p1", dim=3, rank=0, signature=(1, -1, -1),
        spatial_sizes=(cells, cells), spatial_extents=(L, L),
        params={"m": 1.0},
        potentials={"U": Potential("U", ((2, ((0.5, (("m", 2),)),)),))},
        hamiltonian=klein_gordon().hamiltonian,
        lagrangian=klein_gordon().lagrangian)
    h = L / cells
    dt = 0.3 * h
    omega = np.sqrt(3.0)  # k = (1, 1), m = 1
    x1 = (np.arange(cells) * h)[:, None]
    x2 = (np.arange(cells) * h)[None, :]
    steps = int(round((2 * np.pi / omega) / dt))
    cfg = SimConfig(
        dt=dt, steps=steps, scheme="leapfrog",
        initial_C={(): np.cos(x1 + x2) + 0 * x2},
        initial_P={(1, 2): omega * np.sin(x1 + x2 + omega * dt / 2) + 0 * x2},
        staggered_init=True)
    res = run_simulation(model, cfg)
    last = res.trajectory[-1]
    want = np.cos(x1 + x2 - omega * last.t) + 0 * x2
    assert np.max(np.abs(last.C[()] - want)) < 0.05
    y = assemble_history(model, res, dt)
    r = onshell_residual(y, hamilton_equations(model), model)
    assert r["res_C"] < 1e-11 and r["res_P"] < 1e-11


# ---- guard rails -------------------------------------------------------------

def test_cfl_enforced():
    kg = klein_gordon(cells=16, length=1.0)
    cfg = SimConfig(dt=1.0, steps=2, scheme="leapfrog",
                    initial_C={}, initial_P={})
    with pytest.raises(SchemeError):
        run_simulation(kg, cfg)


def test_cfl_override_warns():
    kg = klein_gordon(cells=16, length=1.0)
    cfg = SimConfig(dt=0.12, steps=2, scheme="leapfrog",
                    initial_C={}, initial_P={}, cfl_override=True)
    with pytest.warns(RuntimeWarning):
        run_simulation(kg, cfg)


def test_fixed_boundary_fields_rejected():
    from dataclasses import replace
    kg = replace(klein_gordon(cells=16), boundary="fixed")
    with pytest.raises(SchemeError, match="periodic"):
        compile_scheme(kg, "leapfrog")


def test_scheme_model_mismatch():
    with pytest.raises(SchemeError):
        compile_scheme(klein_gordon(cells=16), "yee")
    with pytest.raises(SchemeError):
        compile_scheme(electromagnetism_2p1(cells=8), "leapfrog")
    with pytest.raises(SchemeError):
        compile_scheme(klein_gordon(cells=16), "symplectic_euler")


def test_nonseparable_hamiltonian_rejected():
    from histodyn.expr import Const, FieldC, FieldP, HodgeStar, Sum, VolSlot, Wedge
    model = ModelSpec(
        name="coupled", dim=1, rank=0, signature=(1,),
        spatial_sizes=(), spatial_extents=(),
        potentials={},
        hamiltonian=Sum((
            Wedge(Const(0.5), Wedge(HodgeStar(FieldP()), FieldP())),
            Wedge(FieldC(), Wedge(FieldP(), VolSlot(()))),
        )))
    with pytest.raises(SchemeError):
        compile_scheme(model, "leapfrog")


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_divergence_detected():
    nl = ModelSpec(
        name="blowup", dim=1, rank=0, signature=(1,),
        spatial_sizes=(), spatial_extents=(),
        potentials={"U": Potential.from_coefficients("U", [0, 0, -80.0])},
        hamiltonian=oscillator().hamiltonian)
    cfg = SimConfig(dt=0.5, steps=10_000, scheme="leapfrog",
                    initial_C={(): 1.0}, initial_P={(): 0.0})
    with pytest.raises(SimulationDiverged):
        run_simulation(nl, cfg)


def test_deterministic_trajectories():
    a = run_oscillator(1e-3, 500)
    b = run_oscillator(1e-3, 500)
    for sa, sb in zip(a.trajectory, b.trajectory):
        assert float(sa.C[()]) == float(sb.C[()])
        assert float(sa.P[()]) == float(sb.P[()])
