"""Symbolic partials against the finite-difference variation oracle, the
vertical derivative, and the exact nilpotency checks."""

import pytest

from histodyn.builtin import electromagnetism_2p1, klein_gordon, oscillator
from histodyn.calculus import (
    expressions_equal,
    is_canonically_one,
    is_canonically_zero,
    pair_variation,
    partial_wrt_C,
    partial_wrt_dC,
    partial_wrt_P,
    second_vertical_derivative,
    variation_oracle,
    vertical_derivative,
)
from histodyn.expr import (
    Const,
    CoordDifferential,
    DerivativeError,
    Differential,
    FieldC,
    FieldP,
    GradeError,
    HodgeStar,
    Power,
    ScalarFun,
    Sum,
    VolSlot,
    Wedge,
    Zero,
)
from histodyn.forms import random_form
from histodyn.history import random_history
from histodyn.model import ModelSpec, Potential


def scalar_model(n, potential=None):
    pots = {"U": potential} if potential is not None else {}
    return ModelSpec(
        name=f"scalar{n}", dim=n, rank=0,
        signature=(1,) + (-1,) * (n - 1),
        spatial_sizes=(5,) * (n - 1), spatial_extents=(1.0,) * (n - 1),
        params={"kappa": 0.7},
        potentials=pots,
        hamiltonian=Wedge(Const(0.5), Wedge(HodgeStar(FieldP()), FieldP())),
    )


def random_hamiltonian(model, rng, quadratic=False):
    """Random top-grade polynomial generator in C, P, star(P)."""
    n = model.dim
    terms = []
    kinetic = Wedge(Const(float(rng.uniform(0.3, 1.5))),
                    Wedge(HodgeStar(FieldP()), FieldP()))
    terms.append(kinetic)
    max_cpow = 2 if quadratic else 4
    cpow = int(rng.integers(1, max_cpow + 1))
    terms.append(Wedge(Const(float(rng.uniform(-1, 1))),
                       Wedge(Power(FieldC(), cpow), VolSlot(()))))
    if not quadratic and rng.random() < 0.7:
        # linear momentum term against a coordinate differential
        mu = int(rng.integers(0, n))
        terms.append(Wedge(Const(float(rng.uniform(-1, 1))),
                           Wedge(CoordDifferential(mu), FieldP())))
    if rng.random() < 0.5:
        terms.append(Wedge(Param("kappa"), Wedge(
            Power(FieldC(), 2 if quadratic else int(rng.integers(1, 3))),
            VolSlot(()))))
    return Sum(tuple(terms))


from histodyn.expr import Param  # noqa: E402


@pytest.mark.parametrize("n", [1, 2])
def test_partials_match_oracle_random(n, rng):
    model = scalar_model(n)
    grid = model.grid(5, 1.0)
    for i in range(25):
        H = random_hamiltonian(model, rng)
        y = random_history(grid, 0, rng)
        dC = random_form(grid, 0, rng)
        dP = random_form(grid, n - 1, rng)
        lhs = pair_variation(H, y, dC, dP, model)
        rhs = variation_oracle(H, y, dC, dP, model, step=1e-5)
        denom = max(rhs.max_abs(), 1.0)
        assert (lhs - rhs).max_abs() / denom < 1e-6


@pytest.mark.parametrize("n", [1, 2])
def test_partials_exact_on_quadratics(n, rng):
    model = scalar_model(n)
    grid = model.grid(5, 1.0)
    for i in range(10):
        H = random_hamiltonian(model, rng, quadratic=True)
        y = random_history(grid, 0, rng)
        dC = random_form(grid, 0, rng)
        dP = random_form(grid, n - 1, rng)
        # central differences are exact on quadratics at any step
        lhs = pair_variation(H, y, dC, dP, model)
        rhs = variation_oracle(H, y, dC, dP, model, step=0.5)
        denom = max(rhs.max_abs(), 1.0)
        assert (lhs - rhs).max_abs() / denom < 1e-12


def test_partials_match_oracle_rank1(rng):
    em = electromagnetism_2p1(cells=5)
    grid = em.grid(5, 1.0)
    for _ in range(5):
        y = random_history(grid, 1, rng)
        dC = random_form(grid, 1, rng)
        dP = random_form(grid, 1, rng)
        lhs = pair_variation(em.hamiltonian, y, dC, dP, em)
        rhs = variation_oracle(em.hamiltonian, y, dC, dP, em, step=0.5)
        assert (lhs - rhs).max_abs() < 1e-12


def test_partial_with_composite_star_coefficient(rng):
    """A generator term whose momentum derivative wraps a star around a
    composite product still matches the oracle."""
    from histodyn.expr import CoordDifferential, SW, HodgeStar, Wedge as W
    em4 = ModelSpec(
        name="r1n4", dim=4, rank=1, signature=(1, -1, -1, -1),
        spatial_sizes=(4, 4, 4), spatial_extents=(1.0, 1.0, 1.0),
        potentials={},
        hamiltonian=W(HodgeStar(FieldP()),
                      W(FieldC(), CoordDifferential(2))))
    grid = em4.grid(4, 1.0)
    H = em4.hamiltonian
    dP = partial_wrt_P(H, em4)
    # the coefficient is a star of (C ^ dx2), an opaque composite
    assert "SW" in repr(dP) or "HodgeStar" in repr(dP)
    for _ in range(4):
        y = random_history(grid, 1, rng)
        dC = random_form(grid, 1, rng)
        dPf = random_form(grid, 2, rng)
        lhs = pair_variation(H, y, dC, dPf, em4)
        rhs = variation_oracle(H, y, dC, dPf, em4, step=0.5)
        assert (lhs - rhs).max_abs() < 1e-12


def test_evaluate_star_of_composite(rng):
    from histodyn.expr import CoordDifferential, HodgeStar, Wedge as W, evaluate
    from histodyn.forms import Form, hodge_star as hs, wedge as fw
    kg = klein_gordon(cells=6)
    grid = kg.grid(6, 1.0)
    y = random_history(grid, 0, rng)
    e = HodgeStar(W(FieldC(), CoordDifferential(0)))
    got = evaluate(e, y, kg)
    want = hs(fw(y.C, Form.monomial(grid, (0,))))
    assert (got - want).max_abs() < 1e-14


def test_standard_examples():
    kg = klein_gordon(cells=8)
    H = kg.hamiltonian
    dP = partial_wrt_P(H, kg)
    assert expressions_equal(dP, HodgeStar(FieldP()), kg)
    dC = partial_wrt_C(H, kg)
    assert expressions_equal(
        dC, Wedge(ScalarFun("U", FieldC(), 1), VolSlot(())), kg)
    # no C dependence in the kinetic part
    kin = Wedge(Const(0.5), Wedge(HodgeStar(FieldP()), FieldP()))
    assert isinstance(partial_wrt_C(kin, kg), Zero)


def test_zero_variation_gives_zero(rng):
    kg = klein_gordon(cells=6)
    grid = kg.grid(5, 1.0)
    y = random_history(grid, 0, rng)
    out = variation_oracle(kg.hamiltonian, y, None, None, kg)
    assert out.max_abs() == 0.0


def test_grade_restriction_reported():
    kg = klein_gordon(cells=6)
    # dF/dP of a [0; 0] expression that depends on P is undefined for n=2
    with pytest.raises((GradeError, DerivativeError)):
        partial_wrt_P(HodgeStar(Wedge(HodgeStar(FieldP()), FieldP())), kg)


def test_momentum_collection_side():
    # left-collection makes the conjugate momentum the plain Hodge dual
    for model in (oscillator(), klein_gordon(cells=6),
                  electromagnetism_2p1(cells=4)):
        P = partial_wrt_dC(model.lagrangian, model)
        assert expressions_equal(P, HodgeStar(Differential(FieldC())), model)


def test_vertical_derivative_of_field():
    kg = klein_gordon(cells=6)
    D = vertical_derivative(FieldC(), kg)
    assert [(t.slot.label, t.slot.n_d) for t in D.terms] == [("C", 0)]
    assert is_canonically_one(D.terms[0].coefficient, kg)


def test_vertical_derivative_matches_partials(rng):
    kg = klein_gordon(cells=6)
    grid = kg.grid(5, 1.0)
    y = random_history(grid, 0, rng)
    D = vertical_derivative(kg.hamiltonian, kg)
    dC = random_form(grid, 0, rng)
    dP = random_form(grid, 1, rng)
    paired = D.pair(y, kg, {"C": dC, "P": dP})
    direct = pair_variation(kg.hamiltonian, y, dC, dP, kg)
    assert (paired - direct).max_abs() < 1e-12


def test_dd_zero_symbolically(rng):
    for n in (1, 2):
        model = scalar_model(n, potential=Potential.from_coefficients(
            "U", [0.0, 0.0, 0.5, 0.1]))
        model.potentials["U"] and None
        for _ in range(10):
            H = random_hamiltonian(model, rng)
            assert second_vertical_derivative(H, model) == {}
    # with scalar-function factors
    kg = klein_gordon(cells=6)
    assert second_vertical_derivative(kg.hamiltonian, kg) == {}
    assert second_vertical_derivative(kg.lagrangian, kg) == {}
    em = electromagnetism_2p1(cells=4)
    assert second_vertical_derivative(em.hamiltonian, em) == {}
    assert second_vertical_derivative(em.lagrangian, em) == {}


def test_d_and_D_commute_coefficientwise(rng):
    """d(D e) and D(d e) have identical slot coefficients."""
    from histodyn.calculus import (horizontal_derivative_vertical,
                                   vertical_forms_equal)
    kg = klein_gordon(cells=8)
    exprs = [
        FieldC(),
        Wedge(FieldC(), FieldC()),
        Wedge(Const(0.3), Wedge(FieldC(), FieldP())),
        Wedge(Param("m"), FieldC()),
        Sum((Wedge(FieldC(), FieldP()),
             Wedge(Const(0.25), Differential(FieldC())))),
    ]
    for e in exprs:
        lhs = horizontal_derivative_vertical(vertical_derivative(e, kg), kg)
        rhs = vertical_derivative(Differential(e), kg)
        assert vertical_forms_equal(lhs, rhs, kg), e


def test_canonical_zero_detection():
    kg = klein_gordon(cells=6)
    e = Sum((Wedge(FieldC(), FieldP()),
             Wedge(Const(-1.0), Wedge(FieldC(), FieldP()))))
    assert is_canonically_zero(e, kg)
    assert not is_canonically_zero(FieldC(), kg)
