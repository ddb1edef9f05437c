"""Variational calculus on history expressions.

partial_wrt_C / partial_wrt_P return the coefficient of the variation in
the pairing

    delta F = dF/dC ^ deltaC + dF/dP ^ deltaP            (variation right)

while the Lagrangian-side derivative with respect to dC collects the
variation on the left,

    delta L = ... + delta(dC) ^ dL/d(dC),

which is the arrangement that makes the conjugate momentum of the
quadratic kinetic Lagrangians come out as the plain Hodge dual of dC.

Hodge-starred field factors are differentiated through the pairing
identity a ^ *b = b ^ *a, which needs the monomial to have top horizontal
grade; elsewhere the derivative is refused (grade restriction).

The vertical derivative D is available in two forms: a field-level one
returning (coefficient, slot) pairs for display and pairing, and a
component-level one used to certify D.D = 0 exactly (slots there are
scalar components, so antisymmetry is plain and mixed partials cancel in
rational arithmetic).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


from . import multiindex as mi
from .expr import (
    CF,
    FF,
    SW,
    UF,
    Const,
    DerivativeError,
    Differential,
    Expr,
    Grade,
    GradeError,
    Mono,
    Sum,
    VerticalBasis,
    Zero,
    _field_grade,
    canonicalize,
    evaluate,
    factor_grade,
    infer_grade,
    monos_to_expr,
    normalize,
)
from .forms import Form, exterior_derivative, wedge as form_wedge


# ---------------------------------------------------------------------------
# Partial derivatives
# ---------------------------------------------------------------------------

def _target_grade(field, pre_d, model):
    return _field_grade(field, model) + pre_d


def _partial_monos(monos, field, pre_d, model, side):
    n = model.dim
    g = _target_grade(field, pre_d, model)
    out = []
    for m in monos:
        grades = [factor_grade(f, model) for f in m.factors]
        total = sum(grades)
        for i, f in enumerate(m.factors):
            if isinstance(f, UF) and field == "C" and pre_d == 0:
                out.append(Mono(m.coeff, m.params,
                                m.factors[:i] + (UF(f.name, f.dorder + 1),)
                                + m.factors[i + 1:]))
                continue
            if not isinstance(f, FF) or f.field != field or f.pre_d != pre_d \
                    or f.post_d != 0:
                if isinstance(f, (SW,)) or (isinstance(f, FF) and f.post_d > 0):
                    if _factor_depends(f, field, pre_d):
                        raise DerivativeError(
                            f"factor {f!r} is outside the differentiable grammar")
                continue
            rest = m.factors[:i] + m.factors[i + 1:]
            before = sum(grades[:i])
            after = sum(grades[i + 1:])
            if not f.star:
                sign = (-1.0) ** (g * (after if side == "right" else before))
                out.append(Mono(m.coeff * sign, m.params, rest))
            else:
                if total != n:
                    raise DerivativeError(
                        "starred factor can only be differentiated in a top-grade "
                        f"monomial (grade {total}, n={n})")
                if side == "right":
                    sign = (-1.0) ** ((n - g) * after + g * (n - g))
                else:
                    sign = (-1.0) ** ((n - g) * before + g * (n - g))
                ssign, starred = _star_of_rest(rest, model)
                out.append(Mono(m.coeff * sign * ssign, m.params, starred))
    return out


def _factor_depends(f, field, pre_d):
    if isinstance(f, FF):
        return f.field == field and f.pre_d == pre_d
    if isinstance(f, SW):
        return any(_factor_depends(x, field, pre_d) for x in f.inner)
    if isinstance(f, UF):
        return field == "C" and pre_d == 0
    return False


def _star_of_rest(rest, model):
    """Hodge star of a factor product, pulling grade-0 factors outside.

    Returns (sign, factors).
    """
    def is_scalar(f):
        return factor_grade(f, model) == 0 and not (isinstance(f, FF) and f.star)

    scalars = tuple(f for f in rest if is_scalar(f))
    others = tuple(f for f in rest if not is_scalar(f))
    if not others:
        return 1.0, scalars + (CF(tuple(range(model.dim))),)
    if len(others) == 1:
        f = others[0]
        if isinstance(f, FF) and not f.star and f.post_d == 0:
            return 1.0, scalars + (FF(f.field, f.pre_d, True, 0),)
        if isinstance(f, FF) and f.star and f.post_d == 0:
            n = model.dim
            g0 = _field_grade(f.field, model) + f.pre_d
            sign = 1.0
            for v in model.signature:
                sign *= v
            sign *= (-1.0) ** (g0 * (n - g0))
            return sign, scalars + (FF(f.field, f.pre_d, False, 0),)
        if isinstance(f, CF):
            comp = mi.complement(f.axes, model.dim)
            sign = mi.epsilon_sign(tuple(f.axes) + comp, model.dim)
            for a in f.axes:
                sign *= model.signature[a]
            return float(sign), scalars + (CF(comp),)
    return 1.0, scalars + (SW(others),)


def _depends(monos, field, pre_d):
    return any(_factor_depends(f, field, pre_d)
               for m in monos for f in m.factors)


def _partial(e, field, pre_d, model, side):
    monos = normalize(e, model)
    grade = infer_grade(e, model)
    if grade.k != 0:
        raise DerivativeError("partial derivatives apply to vertical grade 0")
    g = _target_grade(field, pre_d, model)
    if not _depends(monos, field, pre_d):
        R = grade.R - g
        return Zero(R if R >= 0 else None)
    if grade.R < g:
        raise GradeError(
            f"derivative undefined: expression grade [0; {grade.R}] is below the "
            f"target grade {g}")
    out = canonicalize(_partial_monos(monos, field, pre_d, model, side), model)
    return monos_to_expr(out, model, zero_grade=grade.R - g)


def partial_wrt_C(e, model) -> Expr:
    """Coefficient of deltaC in the first variation (variation collected on
    the right)."""
    return _partial(e, "C", 0, model, "right")


def partial_wrt_P(e, model) -> Expr:
    return _partial(e, "P", 0, model, "right")


def partial_wrt_dC(e, model) -> Expr:
    """Lagrangian-side momentum derivative (variation collected on the
    left)."""
    return _partial(e, "C", 1, model, "left")


# ---------------------------------------------------------------------------
# Finite-difference variation oracle
# ---------------------------------------------------------------------------

def variation_oracle(e, history, dC, dP, model, step=1e-5, params=None) -> Form:
    """Central-difference directional variation [e(y+h d) - e(y-h d)] / 2h.

    Independent of the symbolic path; exact on expressions quadratic in
    the fields.
    """
    if dC is not None and dC.grade != history.C.grade:
        raise GradeError("deltaC grade does not match the field")
    if dP is not None and dP.grade != history.P.grade:
        raise GradeError("deltaP grade does not match the momentum")
    plus = evaluate(e, history.shifted(dC, dP, +step), model, params)
    minus = evaluate(e, history.shifted(dC, dP, -step), model, params)
    return (plus - minus) * (0.5 / step)


def pair_variation(e, history, dC, dP, model, params=None) -> Form:
    """Symbolic side of the variation pairing:
    dF/dC ^ deltaC + dF/dP ^ deltaP."""
    grid = history.grid
    grade = infer_grade(e, model)
    out = Form.zero(grid, grade.R)
    if dC is not None:
        coef = partial_wrt_C(e, model)
        if not isinstance(coef, Zero):
            out = out + form_wedge(evaluate(coef, history, model, params), dC)
    if dP is not None:
        coef = partial_wrt_P(e, model)
        if not isinstance(coef, Zero):
            out = out + form_wedge(evaluate(coef, history, model, params), dP)
    return out


# ---------------------------------------------------------------------------
# Field-level vertical derivative
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerticalTerm:
    slot: VerticalBasis
    coefficient: Expr


@dataclass(frozen=True)
class VerticalForm:
    """Vertical-grade-1 expression, kept as (coefficient, slot) pairs with
    coefficients on the left of their slot."""

    terms: tuple

    def coefficient(self, label, n_d=0):
        for t in self.terms:
            if t.slot.label == label and t.slot.n_d == n_d:
                return t.coefficient
        return Zero(None)

    def pair(self, history, model, variations, params=None) -> Form:
        """Contract with a variation: variations maps slot labels to forms
        (the n_d > 0 slots receive the exterior derivative of the entry)."""
        grade = None
        out = None
        for t in self.terms:
            if isinstance(t.coefficient, Zero):
                continue
            var = variations.get(t.slot.label)
            if var is None:
                continue
            for _ in range(t.slot.n_d):
                var = exterior_derivative(var)
            piece = form_wedge(evaluate(t.coefficient, history, model, params), var)
            out = piece if out is None else out + piece
        if out is None:
            g = infer_grade_vertical(self, model)
            return Form.zero(history.grid, g.R if g is not None else 0)
        return out


def infer_grade_vertical(vf, model):
    grades = set()
    for t in vf.terms:
        if isinstance(t.coefficient, Zero):
            continue
        gc = infer_grade(t.coefficient, model)
        gs = infer_grade(t.slot, model)
        grades.add(Grade(gc.k + gs.k, gc.R + gs.R))
    if not grades:
        return None
    if len(grades) > 1:
        raise GradeError(f"vertical form mixes grades {sorted(map(str, grades))}")
    return grades.pop()


def horizontal_derivative_vertical(vf: VerticalForm, model) -> VerticalForm:
    """d applied to a vertical-grade-1 form, slotwise:

        d(c ^ S) = (d c) ^ S + (-1)^R(c) c ^ (d S),

    where d S is the slot with one more horizontal differential."""
    acc = {}

    def add(label, n_d, expr):
        key = (label, n_d)
        cur = acc.get(key)
        acc[key] = expr if cur is None else Sum((cur, expr))

    for t in vf.terms:
        if isinstance(t.coefficient, Zero):
            continue
        g = infer_grade(t.coefficient, model)
        dc = Differential(t.coefficient)
        try:
            infer_grade(dc, model)
            add(t.slot.label, t.slot.n_d, dc)
        except GradeError:
            pass  # top-grade coefficient: d c vanishes identically
        if t.slot.n_d == 0:
            # a twice-differentiated slot pairs to d(d(variation)) = 0
            sign = (-1.0) ** g.R
            add(t.slot.label, t.slot.n_d + 1,
                t.coefficient if sign == 1.0 else Const(-1.0) * t.coefficient)
    terms = []
    for (label, n_d), expr in acc.items():
        monos = canonicalize(normalize(expr, model), model)
        terms.append(VerticalTerm(VerticalBasis(label, n_d),
                                  monos_to_expr(monos, model)))
    return VerticalForm(tuple(terms))


def vertical_forms_equal(a: VerticalForm, b: VerticalForm, model) -> bool:
    slots = {(t.slot.label, t.slot.n_d) for t in a.terms} \
        | {(t.slot.label, t.slot.n_d) for t in b.terms}
    for label, n_d in slots:
        ca = a.coefficient(label, n_d)
        cb = b.coefficient(label, n_d)
        if isinstance(ca, Zero) and isinstance(cb, Zero):
            continue
        if isinstance(ca, Zero) or isinstance(cb, Zero):
            if not is_canonically_zero(cb if isinstance(ca, Zero) else ca, model):
                return False
            continue
        if not expressions_equal(ca, cb, model):
            return False
    return True


def vertical_derivative(e, model) -> VerticalForm:
    """D e = sum_A (de/dY^A) ^ DY^A over the slots present in e."""
    grade = infer_grade(e, model)
    if grade.k != 0:
        raise DerivativeError("field-level D handles vertical grade 0; "
                              "use the component engine for higher grades")
    monos = normalize(e, model)
    terms = []
    for field, pre_d in (("C", 0), ("P", 0), ("C", 1), ("P", 1)):
        if not _depends(monos, field, pre_d):
            continue
        coef = _partial(e, field, pre_d, model, "right")
        terms.append(VerticalTerm(VerticalBasis(field, pre_d), coef))
    return VerticalForm(tuple(terms))


# ---------------------------------------------------------------------------
# Component engine: exact polynomial algebra over scalar components
# ---------------------------------------------------------------------------
#
# Symbols are ("C", axes), ("P", axes), ("dC", axes) for canonical
# multi-indices; a monomial key is (vars, ufacs, params) with each part a
# sorted tuple of (atom, exponent). Coefficients are Fractions, so
# cancellations are exact.

def _sym_sorted(d):
    return tuple(sorted((k, v) for k, v in d.items() if v != 0))


class ComponentPoly(dict):
    """{(vars, ufacs, params): Fraction}"""

    def add(self, key, value):
        cur = self.get(key, Fraction(0)) + value
        if cur == 0:
            self.pop(key, None)
        else:
            self[key] = cur

    def scaled(self, s):
        out = ComponentPoly()
        for k, v in self.items():
            out.add(k, v * s)
        return out

    def product(self, other):
        out = ComponentPoly()
        for (v1, u1, p1), c1 in self.items():
            for (v2, u2, p2), c2 in other.items():
                vars_ = dict(v1)
                for k, e in v2:
                    vars_[k] = vars_.get(k, 0) + e
                ufacs = dict(u1)
                for k, e in u2:
                    ufacs[k] = ufacs.get(k, 0) + e
                params = dict(p1)
                for k, e in p2:
                    params[k] = params.get(k, 0) + e
                out.add((_sym_sorted(vars_), _sym_sorted(ufacs), _sym_sorted(params)),
                        c1 * c2)
        return out

    def diff(self, sym):
        """Partial derivative with respect to one scalar component symbol.
        Scalar-function factors chain through the single rank-0 C symbol."""
        out = ComponentPoly()
        for (vars_, ufacs, params), c in self.items():
            vd = dict(vars_)
            exp = vd.get(sym, 0)
            if exp:
                vd[sym] = exp - 1
                out.add((_sym_sorted(vd), ufacs, params), c * exp)
            if sym[0] == "C" and sym[1] == ():
                for (name, dorder), e in ufacs:
                    ud = dict(ufacs)
                    ud[(name, dorder)] = e - 1
                    ud[(name, dorder + 1)] = ud.get((name, dorder + 1), 0) + 1
                    out.add((vars_, _sym_sorted(ud), params), c * e)
        return out


def _const_poly(value):
    p = ComponentPoly()
    p.add(((), (), ()), Fraction(value).limit_denominator(10 ** 12))
    return p


def expand_components(e, model):
    """Expand a vertical-grade-0 expression into per-multi-index polynomials
    over scalar component symbols. Returns {axes: ComponentPoly}."""
    out = {}
    for m in normalize(e, model):
        term = {(): _const_poly(m.coeff)}
        if m.params:
            p = ComponentPoly()
            p.add(((), (), tuple(m.params)), Fraction(1))
            term = {(): term[()].product(p)}
        for f in m.factors:
            term = _merge_expansion(term, _expand_factor(f, model), model)
        for axes, poly in term.items():
            acc = out.setdefault(axes, ComponentPoly())
            for k, v in poly.items():
                acc.add(k, v)
    return {axes: poly for axes, poly in out.items() if poly}


def _merge_expansion(a, b, model):
    out = {}
    for ax1, p1 in a.items():
        for ax2, p2 in b.items():
            axes, sign = mi.merge(ax1, ax2)
            if sign == 0:
                continue
            prod = p1.product(p2).scaled(Fraction(sign))
            acc = out.setdefault(axes, ComponentPoly())
            for k, v in prod.items():
                acc.add(k, v)
    return out


def _expand_factor(f, model):
    n = model.dim
    if isinstance(f, CF):
        return {f.axes: _const_poly(1)}
    if isinstance(f, UF):
        if model.rank != 0:
            raise DerivativeError("scalar functions need a rank-0 field")
        pot = model.potentials.get(f.name)
        if pot is not None and not pot.nth_derivative(f.dorder).terms:
            return {}
        p = ComponentPoly()
        p.add(((), (((f.name, f.dorder), 1),), ()), Fraction(1))
        return {(): p}
    if isinstance(f, FF):
        if f.post_d:
            raise DerivativeError(
                "outer differentials are not componentwise expandable")
        # first differentials count as independent jet symbols
        sym = f.field if f.pre_d == 0 else "d" + f.field
        grade = _field_grade(f.field, model) + f.pre_d
        out = {}
        for axes in mi.canonical_indices(n, grade):
            poly = ComponentPoly()
            poly.add(((((sym, axes), 1),), (), ()), Fraction(1))
            out[axes] = poly
        if f.star:
            starred = {}
            for axes, poly in out.items():
                comp = mi.complement(axes, n)
                sign = mi.epsilon_sign(tuple(axes) + comp, n)
                for a in axes:
                    sign *= model.signature[a]
                acc = starred.setdefault(comp, ComponentPoly())
                for k, v in poly.scaled(Fraction(sign)).items():
                    acc.add(k, v)
            out = starred
        return out
    if isinstance(f, SW):
        raise DerivativeError("composite starred factors are not expandable")
    raise DerivativeError(f"unknown factor {f!r}")


def component_symbols(expansion):
    syms = set()
    for poly in expansion.values():
        for vars_, _, _ in poly:
            for sym, _e in vars_:
                syms.add(sym)
    return sorted(syms)


def second_vertical_derivative(e, model):
    """D(D e) at component level: {(slot_a, slot_b, axes): ComponentPoly}
    with slot_a < slot_b after antisymmetrisation. Empty dict means the
    canonical form is zero."""
    expansion = expand_components(e, model)
    syms = set(component_symbols(expansion))
    for poly in expansion.values():
        for _vars, ufacs, _params in poly:
            if ufacs:
                syms.add(("C", ()))
    out = {}
    for axes, poly in expansion.items():
        for s1 in syms:
            d1 = poly.diff(s1)
            if not d1:
                continue
            for s2 in syms:
                d2 = d1.diff(s2)
                if not d2:
                    continue
                # term d2 * Slot_{s2} ^ Slot_{s1}; slots anticommute
                if s2 == s1:
                    continue
                if s2 < s1:
                    key, sgn = (s2, s1, axes), 1
                else:
                    key, sgn = (s1, s2, axes), -1
                acc = out.setdefault(key, ComponentPoly())
                for k, v in d2.items():
                    acc.add(k, v * sgn)
    return {k: p for k, p in out.items() if p}


def expressions_equal(a, b, model):
    """Exact componentwise equality via the polynomial expansion."""
    ea = expand_components(a, model)
    eb = expand_components(b, model)
    keys = set(ea) | set(eb)
    for k in keys:
        pa = ea.get(k, ComponentPoly())
        pb = eb.get(k, ComponentPoly())
        mk = set(pa) | set(pb)
        for m in mk:
            if pa.get(m, Fraction(0)) != pb.get(m, Fraction(0)):
                return False
    return True


def is_canonically_zero(e, model):
    return not expand_components(e, model)


def is_canonically_one(e, model):
    exp = expand_components(e, model)
    if set(exp) != {()}:
        return False
    poly = exp[()]
    return dict(poly) == {((), (), ()): Fraction(1)}
