"""From a model's generator to its evolution equations.

The covariant Hamilton pair is

    dC = dH/dP,    dP = -dH/dC,

together with the bookkeeping identities dX^mu = dx^mu and dPi_mu = 0.
The Lagrangian route defines the conjugate momentum P = dL/d(dC), inverts
it (supported: quadratic kinetic terms kappa * dC ^ *dC), and builds
H0 = dC ^ P - L with dC eliminated. The wedge order dC ^ P realises the
duality pairing momentum-components times velocity-components, which is
what reproduces the standard Hamiltonian densities in every dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import (
    is_canonically_zero,
    partial_wrt_C,
    partial_wrt_dC,
    partial_wrt_P,
)
from .expr import (
    FF,
    Const,
    Differential,
    Expr,
    GradeError,
    Mono,
    Sum,
    Wedge,
    Zero,
    canonicalize,
    infer_grade,
    monos_to_expr,
    normalize,
    evaluate,
)
from .forms import Form, exterior_derivative
from .history import HamiltonianHistory
from .model import ModelSpec


class DynamicsError(ValueError):
    pass


class LegendreDegenerateError(DynamicsError):
    """The Legendre map is not invertible; the offending constraint is
    reported instead of being processed."""


@dataclass(frozen=True)
class FieldEquations:
    rhs_for_dC: Expr
    rhs_for_dP: Expr
    identities: tuple = ("dX^mu = dx^mu", "dPi_mu = 0")


def _negate(e, model):
    if isinstance(e, Zero):
        return e
    monos = canonicalize([m.scaled(-1.0) for m in normalize(e, model)], model)
    g = infer_grade(e, model)
    return monos_to_expr(monos, model, zero_grade=g.R)


def conjugate_momentum(L, model) -> Expr:
    """Conjugate momentum P = dL/d(dC) (variation collected on the left).

    Raises LegendreDegenerateError when L does not depend on dC at all
    (fully constrained: P vanishes identically).
    """
    g = infer_grade(L, model)
    if (g.k, g.R) != (0, model.dim):
        raise DynamicsError(f"Lagrangian must have grade [0; {model.dim}], got {g}")
    P = partial_wrt_dC(L, model)
    if isinstance(P, Zero) or is_canonically_zero(P, model):
        raise LegendreDegenerateError(
            "L has no dC dependence; the momentum vanishes identically "
            "(constraint P = 0)")
    return P


def _invertible_momentum(P_expr, model):
    """Check P = a * star(dC) and return the scaling monomial a.

    The inversion then reads dC = (s * sigma / a) * star(P) with s the
    metric determinant sign and sigma = (-1)^((r+1)(n-r-1)).
    """
    monos = canonicalize(normalize(P_expr, model), model)
    if len(monos) != 1:
        raise LegendreDegenerateError(
            f"momentum is not a single star(dC) term: {P_expr}")
    m = monos[0]
    if m.factors != (FF("C", 1, True, 0),):
        raise LegendreDegenerateError(
            f"momentum {P_expr} cannot be inverted for dC")
    return m


def legendre_transform(model: ModelSpec) -> ModelSpec:
    """Replace the model's Hamiltonian by the one generated from its
    Lagrangian: H0 = dC ^ P - L with dC eliminated via the inverted
    momentum. Constraint terms are never generated; degenerate Legendre
    maps raise."""
    if model.lagrangian is None:
        raise DynamicsError("model has no Lagrangian")
    L = model.lagrangian
    P_expr = conjugate_momentum(L, model)
    a = _invertible_momentum(P_expr, model)
    n, r = model.dim, model.rank
    s = 1
    for v in model.signature:
        s *= v
    sigma = (-1.0) ** ((r + 1) * (n - r - 1))
    lam = Mono(s * sigma / a.coeff,
               tuple((name, -e) for name, e in a.params), ())

    # dC ^ P with dC = lam * star(P)
    first = Mono(lam.coeff, lam.params, (FF("P", 0, True, 0), FF("P")))

    # eliminate dC inside L: dC -> lam * star(P), star(dC) -> lam*s*sigma * P
    out = [first]
    for m in normalize(L, model):
        factors = []
        coeff = -m.coeff
        params = dict(m.params)
        for f in m.factors:
            if isinstance(f, FF) and f.field == "C" and f.pre_d == 1 and f.post_d == 0:
                coeff *= lam.coeff
                for name, e in lam.params:
                    params[name] = params.get(name, 0) + e
                if not f.star:
                    factors.append(FF("P", 0, True, 0))
                else:
                    coeff *= s * sigma
                    factors.append(FF("P", 0, False, 0))
            else:
                factors.append(f)
        out.append(Mono(coeff, tuple(sorted((k, v) for k, v in params.items() if v)),
                        tuple(factors)))
    H0 = monos_to_expr(canonicalize(out, model), model, zero_grade=n)
    return model.with_hamiltonian(H0)


def euler_lagrange(L, model) -> Expr:
    """delta L / delta C = dL/dC - (-1)^r d(dL/d(dC))."""
    g = infer_grade(L, model)
    if (g.k, g.R) != (0, model.dim):
        raise DynamicsError(f"Lagrangian must have grade [0; {model.dim}], got {g}")
    dLdC = partial_wrt_C(L, model)
    P = partial_wrt_dC(L, model)
    eps_c = (-1.0) ** model.rank
    terms = []
    if not isinstance(dLdC, Zero):
        terms.append(dLdC)
    if not isinstance(P, Zero):
        terms.append(Wedge(Const(-eps_c), Differential(P)))
    if not terms:
        return Zero(model.dim)
    e = terms[0] if len(terms) == 1 else Sum(tuple(terms))
    monos = canonicalize(normalize(e, model), model)
    return monos_to_expr(monos, model, zero_grade=model.dim)


def hamilton_equations(model: ModelSpec) -> FieldEquations:
    """The covariant evolution pair from the model Hamiltonian."""
    if model.hamiltonian is None:
        raise DynamicsError("model has no Hamiltonian; run the Legendre "
                            "transform or supply one")
    H = model.hamiltonian
    g = infer_grade(H, model)
    if (g.k, g.R) != (0, model.dim):
        raise GradeError(f"Hamiltonian must have grade [0; {model.dim}], got {g}")
    rhs_dC = partial_wrt_P(H, model)
    rhs_dP = _negate(partial_wrt_C(H, model), model)
    return FieldEquations(rhs_for_dC=rhs_dC, rhs_for_dP=rhs_dP)


def onshell_residual(y: HamiltonianHistory, eqs: FieldEquations, model,
                     params=None, trim_time=True):
    """Discrete L2 norms of dC - rhs_dC and dP - rhs_dP on a full-grid
    history.

    When the field is co-located but the momentum is staggered (integrator
    output), the components of dC are retagged to their half-cell sites so
    the subtraction compares matching stencils. Time-boundary layers are
    trimmed from the norms: the wrap-around differences there do not
    belong to any stencil.
    """
    grid = y.grid
    lhs_C = exterior_derivative(y.C)
    if y.C.colocated and not y.P.colocated:
        retags = {}
        for key in lhs_C.comps:
            retags[key] = tuple(1 if ax in key else 0 for ax in range(grid.dim))
        lhs_C = lhs_C.retag(retags)
    res_C = lhs_C - evaluate(eqs.rhs_for_dC, y, model, params)
    lhs_P = exterior_derivative(y.P)
    rhs_P = eqs.rhs_for_dP
    if isinstance(rhs_P, Zero):
        res_P = lhs_P
    else:
        res_P = lhs_P - evaluate(rhs_P, y, model, params)
    if trim_time:
        res_C = _trim_time_layers(res_C)
        res_P = _trim_time_layers(res_P)
    return {"res_C": res_C.l2(), "res_P": res_P.l2()}


def _trim_time_layers(form):
    def zero_edges(arr):
        out = arr.copy()
        out[0] = 0.0
        out[-1] = 0.0
        return out
    return form.map(zero_edges)


def staggered_velocity(C: Form) -> Form:
    """Discrete dC retagged to its half-cell sites.

    Forward differences of co-located samples live half a cell up each
    differenced axis; tagging them so makes a second application of d use
    the matching backward stencil, which is what turns d(star(dC)) into
    the centred second-difference operator. Pass the result as the
    velocity override when evaluating Euler-Lagrange residuals on
    co-located data.
    """
    dC = exterior_derivative(C)
    if not C.colocated or C.grade > 0:
        # only the rank-0 components have a single unambiguous source
        return dC
    retags = {}
    for key in dC.comps:
        retags[key] = tuple(1 if ax in key else 0 for ax in range(C.grid.dim))
    return dC.retag(retags)


def hamiltonian_vertical_derivative(model: ModelSpec):
    """D of the full Hamiltonian: the variational derivative of the model
    H0 plus the fixed auxiliary slots, whose coefficients are the
    coordinate differentials (the auxiliary pair never feeds back)."""
    from .calculus import VerticalForm, VerticalTerm, vertical_derivative
    from .expr import CoordDifferential, VerticalBasis

    if model.hamiltonian is None:
        raise DynamicsError("model has no Hamiltonian")
    base = vertical_derivative(model.hamiltonian, model)
    terms = list(base.terms)
    for mu in range(model.dim):
        terms.append(VerticalTerm(VerticalBasis(("Pi", mu)),
                                  CoordDifferential(mu)))
    return VerticalForm(tuple(terms))


def bracket(f, g, model) -> Expr:
    """Covariant bracket {f, g}; the term arrangement is fixed by the
    canonical relations {P, C} = 1, {H, C} = dH/dP, {H, P} = -dH/dC."""
    gf = infer_grade(f, model)
    gg = infer_grade(g, model)

    def safe_partial(op, e, which):
        try:
            return op(e, model)
        except GradeError as err:
            raise GradeError(
                f"bracket undefined for grades [0; {gf.R}] and [0; {gg.R}]: "
                f"{which}: {err}") from err

    dg_dC = safe_partial(partial_wrt_C, g, "dg/dC")
    df_dP = safe_partial(partial_wrt_P, f, "df/dP")
    df_dC = safe_partial(partial_wrt_C, f, "df/dC")
    dg_dP = safe_partial(partial_wrt_P, g, "dg/dP")

    def wedge_or_zero(a, b):
        if isinstance(a, Zero) or isinstance(b, Zero):
            return None
        return Wedge(a, b)

    t1 = wedge_or_zero(dg_dC, df_dP)
    t2 = wedge_or_zero(df_dC, dg_dP)
    grade_out = gf.R + gg.R + 1 - model.dim
    terms = []
    if t1 is not None:
        terms.append(t1)
    if t2 is not None:
        terms.append(Wedge(Const(-1.0), t2))
    if not terms:
        return Zero(grade_out if grade_out >= 0 else None)
    e = terms[0] if len(terms) == 1 else Sum(tuple(terms))
    monos = canonicalize(normalize(e, model), model)
    return monos_to_expr(monos, model, zero_grade=grade_out)


def action_stationarity_check(model: ModelSpec, y: HamiltonianHistory,
                              rng, samples=4, params=None):
    """Stationarity of the action along compactly supported variations.

    For each random variation deltaC vanishing near the time boundary the
    first variation of the integrated Lagrangian is computed by central
    differences; on a solution it equals a pure boundary term, hence zero.
    Returns the largest absolute variation observed.
    """
    if model.lagrangian is None:
        raise DynamicsError("action check needs a Lagrangian")
    from .forms import random_form
    from .grid import Region
    from .forms import integrate_region

    grid = y.grid
    worst = 0.0
    for _ in range(samples):
        dC = random_form(grid, model.rank, rng, smooth=True)
        dC = dC.map(lambda arr: _bump_window(arr, grid))
        plus = evaluate(model.lagrangian, y.shifted(dC, None, +1e-4), model, params)
        minus = evaluate(model.lagrangian, y.shifted(dC, None, -1e-4), model, params)
        delta = (plus - minus) * (0.5 / 1e-4)
        val = integrate_region(delta, Region.full())
        worst = max(worst, abs(val))
    return worst


def _bump_window(arr, grid):
    """Zero a margin near both time ends and taper smoothly inside."""
    nt = grid.sizes[0]
    t = np.arange(nt, dtype=float)
    margin = max(2, nt // 8)
    win = np.clip((t - margin) / max(nt - 2 * margin - 1, 1), 0.0, 1.0)
    win = np.sin(np.pi * win) ** 2
    win[:margin] = 0.0
    win[nt - margin:] = 0.0
    shape = [1] * grid.dim
    shape[0] = nt
    return arr * win.reshape(shape)
