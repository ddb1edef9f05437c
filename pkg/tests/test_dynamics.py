"""Momentum, Legendre transform, field equations, brackets."""

import numpy as np
import pytest

from histodyn.builtin import electromagnetism_2p1, klein_gordon, oscillator
from histodyn.calculus import (
    expressions_equal,
    is_canonically_one,
    is_canonically_zero,
    partial_wrt_C,
)
from histodyn.dynamics import (
    LegendreDegenerateError,
    action_stationarity_check,
    bracket,
    euler_lagrange,
    hamilton_equations,
    conjugate_momentum,
    legendre_transform,
    onshell_residual,
)
from histodyn.expr import (
    Differential,
    FieldC,
    FieldP,
    HodgeStar,
    ScalarFun,
    Sum,
    VolSlot,
    Wedge,
    Zero,
    evaluate,
)
from histodyn.forms import exterior_derivative, hodge_star
from histodyn.history import random_history

ALL_MODELS = [oscillator, lambda: klein_gordon(cells=10),
              lambda: electromagnetism_2p1(cells=6)]


@pytest.mark.parametrize("make", ALL_MODELS)
def test_momentum_is_hodge_dual_of_velocity(make):
    model = make()
    P = conjugate_momentum(model.lagrangian, model)
    assert expressions_equal(P, HodgeStar(Differential(FieldC())), model)


def test_degenerate_legendre_reported():
    model = oscillator()
    L = Wedge(ScalarFun("U", FieldC()), VolSlot(()))  # no velocity at all
    with pytest.raises(LegendreDegenerateError):
        conjugate_momentum(L, model)


def test_noninvertible_momentum_reported():
    # L = q ^ dq gives P = q: nothing to invert for the velocity
    from dataclasses import replace
    model = replace(oscillator(),
                    lagrangian=Wedge(FieldC(), Differential(FieldC())))
    with pytest.raises(LegendreDegenerateError, match="invert"):
        legendre_transform(model)


def test_identity_members_hold_by_construction(rng):
    """dX^mu = dx^mu (interior cells) and dPi_mu = 0 on any realised
    history: the auxiliary pair is inert."""
    from histodyn.forms import exterior_derivative
    model = klein_gordon(cells=16)
    grid = model.grid(16, 1.0)
    y = random_history(grid, 0, rng)
    for mu in range(grid.dim):
        dX = exterior_derivative(y.coordinate_map(mu))
        comp = dX.component((mu,))
        sl = [slice(None, -1) if ax == mu else slice(None)
              for ax in range(grid.dim)]
        assert (abs(comp[tuple(sl)] - 1.0)).max() < 1e-12
        other = sum(dX.component((nu,)).max() for nu in range(grid.dim)
                    if nu != mu)
        assert other == 0.0
    assert y.Pi.max_abs() == 0.0
    assert exterior_derivative(y.Pi).max_abs() == 0.0


@pytest.mark.parametrize("make,expect", [
    (oscillator, "U(q)*vol + 0.5*p^2*vol"),
    (lambda: klein_gordon(cells=10), "U(C)*vol + 0.5*star(P)*P"),
    (lambda: electromagnetism_2p1(cells=6), "0.5*star(P)*P"),
])
def test_legendre_produces_standard_hamiltonians(make, expect):
    from histodyn.modelfile import print_expr
    model = make()
    out = legendre_transform(model)
    assert print_expr(out.hamiltonian, out) == expect
    # and it agrees with the shipped Hamiltonian exactly
    assert expressions_equal(out.hamiltonian, model.hamiltonian, model)


@pytest.mark.parametrize("make", ALL_MODELS)
def test_hamilton_equations_shapes(make):
    model = make()
    eqs = hamilton_equations(model)
    assert expressions_equal(eqs.rhs_for_dC, HodgeStar(FieldP()), model)
    assert eqs.identities == ("dX^mu = dx^mu", "dPi_mu = 0")


def test_em_equations_are_sourceless():
    em = electromagnetism_2p1(cells=6)
    eqs = hamilton_equations(em)
    assert isinstance(eqs.rhs_for_dP, Zero)


@pytest.mark.parametrize("make", ALL_MODELS)
def test_legendre_round_trip_on_random_histories(make, rng):
    """Eliminating the momentum from the Hamiltonian pair reproduces the
    Euler-Lagrange residual."""
    model = make()
    work = legendre_transform(model)
    grid = model.grid(10, 1.0)
    P_expr = conjugate_momentum(model.lagrangian, model)
    dHdC = partial_wrt_C(work.hamiltonian, work)
    el = euler_lagrange(model.lagrangian, model)
    eps_c = (-1.0) ** model.rank
    for _ in range(20):
        y = random_history(grid, model.rank, rng)
        res_H = exterior_derivative(evaluate(P_expr, y, model))
        if not isinstance(dHdC, Zero):
            res_H = res_H + evaluate(dHdC, y, work)
        el_eval = evaluate(el, y, model)
        gap = (res_H + el_eval * eps_c).max_abs()
        assert gap <= 1e-10 * max(el_eval.max_abs(), 1e-30)


def test_legendre_round_trip_rank1_3plus1(rng):
    """The 3+1 Lorentzian gauge field: the double star on 2-forms flips
    sign there, so the generated Hamiltonian differs from the naive one;
    the round trip certifies the generated signs."""
    from histodyn.model import ModelSpec
    em4 = ModelSpec(
        name="em_3p1", dim=4, rank=1, signature=(1, -1, -1, -1),
        spatial_sizes=(4, 4, 4), spatial_extents=(1.0, 1.0, 1.0),
        potentials={},
        hamiltonian=None,
        lagrangian=electromagnetism_2p1().lagrangian)
    work = legendre_transform(em4)
    grid = em4.grid(4, 1.0)
    P_expr = conjugate_momentum(em4.lagrangian, em4)
    el = euler_lagrange(em4.lagrangian, em4)
    eqs = hamilton_equations(work)
    for _ in range(10):
        y = random_history(grid, 1, rng)
        # dA = dH/dP must invert the momentum: substitute P = star(dA)
        P_val = evaluate(P_expr, y, em4)
        y_onmap = type(y)(y.C, P_val)
        back = evaluate(eqs.rhs_for_dC, y_onmap, work)
        dA = exterior_derivative(y.C)
        assert (back - dA).max_abs() < 1e-12
        # and the eliminated dP equation reproduces the EL residual
        res_H = exterior_derivative(P_val)
        el_eval = evaluate(el, y, em4)
        assert (res_H + el_eval * (-1.0)).max_abs() < 1e-12 * max(
            el_eval.max_abs(), 1.0)


def test_el_residual_for_plane_wave(rng):
    # cos(k x - w t) with w^2 = k^2 + m^2 annihilates the EL operator to
    # second order in the spacings (staggered velocity stencil)
    from histodyn.dynamics import staggered_velocity
    errs = []
    for cells in (32, 64):
        kg = klein_gordon(cells=cells, length=2 * np.pi, mass=1.0)
        omega = np.sqrt(2.0)
        # periodic in time too: pick the time extent as one full period
        T = 2 * np.pi / omega
        grid = kg.grid(cells, T)
        t = grid.coordinate_array(0)
        x = grid.coordinate_array(1)
        from histodyn.forms import Form
        C = Form.scalar(grid, np.cos(x - omega * t))
        P = hodge_star(exterior_derivative(C))
        from histodyn.history import HamiltonianHistory
        y = HamiltonianHistory(C, P)
        el = euler_lagrange(kg.lagrangian, kg)
        res = evaluate(el, y, kg, overrides={("C", 1): staggered_velocity(C)})
        errs.append(res.max_abs())
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert errs[1] < 0.02


def test_el_residual_zero_at_critical_point(rng):
    kg = klein_gordon(cells=8)
    grid = kg.grid(6, 1.0)
    from histodyn.forms import Form
    from histodyn.history import HamiltonianHistory
    y = HamiltonianHistory(Form.constant(grid, 0.0), Form.zero(grid, 1))
    el = euler_lagrange(kg.lagrangian, kg)
    assert evaluate(el, y, kg).max_abs() == 0.0


@pytest.mark.parametrize("make", ALL_MODELS)
def test_onshell_residual_positive_off_shell(make, rng):
    model = make()
    eqs = hamilton_equations(model)
    grid = model.grid(8, 1.0)
    y = random_history(grid, model.rank, rng)
    res = onshell_residual(y, eqs, model)
    assert res["res_C"] > 0.05 and res["res_P"] >= 0.0


# ---- bracket ---------------------------------------------------------------

@pytest.mark.parametrize("make", ALL_MODELS)
def test_bracket_canonical_pair(make):
    model = make()
    assert is_canonically_one(bracket(FieldP(), FieldC(), model), model)


@pytest.mark.parametrize("make", ALL_MODELS)
def test_bracket_reproduces_equations(make):
    model = make()
    eqs = hamilton_equations(model)
    hc = bracket(model.hamiltonian, FieldC(), model)
    hp = bracket(model.hamiltonian, FieldP(), model)
    assert expressions_equal(hc, eqs.rhs_for_dC, model)
    if isinstance(eqs.rhs_for_dP, Zero):
        assert isinstance(hp, Zero) or is_canonically_zero(hp, model)
    else:
        assert expressions_equal(hp, eqs.rhs_for_dP, model)


def test_bracket_antisymmetry():
    model = klein_gordon(cells=8)
    f = model.hamiltonian
    g = Wedge(FieldC(), FieldP())
    lhs = bracket(f, g, model)
    rhs = bracket(g, f, model)
    total = Sum((lhs, rhs))
    assert is_canonically_zero(total, model)


def test_bracket_grade_arithmetic():
    from histodyn.expr import infer_grade
    model = klein_gordon(cells=8)
    f = model.hamiltonian                  # [0; n]
    g = Wedge(FieldC(), FieldP())          # [0; n-1]
    out = bracket(f, g, model)
    got = infer_grade(out, model)
    n = model.dim
    assert (got.k, got.R) == (0, n + (n - 1) + 1 - n)


def test_bracket_grade_restriction_reported():
    model = klein_gordon(cells=8)
    # g = star(P)^... build a P-dependent [0; 0] expression: undefined
    bad = HodgeStar(Wedge(HodgeStar(FieldP()), FieldP()))
    with pytest.raises(Exception) as err:
        bracket(model.hamiltonian, bad, model)
    assert "grade" in str(err.value).lower()


# ---- action stationarity ----------------------------------------------------

def test_action_stationary_on_shell(rng):
    from histodyn.integrators import SimConfig, assemble_history, run_simulation
    model = oscillator()
    dt = 1e-3
    cfg = SimConfig(dt=dt, steps=2000, scheme="leapfrog",
                    initial_C={(): 1.0}, initial_P={(): 0.0})
    res = run_simulation(model, cfg)
    y = assemble_history(model, res, dt)
    gap = action_stationarity_check(model, y, rng)
    assert gap < 1e-6


def test_action_not_stationary_off_shell(rng):
    model = oscillator()
    grid = model.grid(512, 2.0)
    y = random_history(grid, 0, rng, smooth=True)
    gap = action_stationarity_check(model, y, rng)
    assert gap > 1e-3


def test_zero_variation_gap_is_zero(rng):
    from histodyn.forms import Form
    from histodyn.grid import Region
    from histodyn.forms import integrate_region
    model = oscillator()
    grid = model.grid(64, 1.0)
    y = random_history(grid, 0, rng)
    plus = evaluate(model.lagrangian, y, model)
    assert integrate_region(plus - plus, Region.full()) == 0.0
