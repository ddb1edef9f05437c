"""Symbolic expressions over field histories.

An expression maps a history (C, P) to a differential form on the domain.
Every node carries a bigrade [k; R]: k counts variation (vertical) degree,
R the form degree on the domain. Wedge adds both grades, the horizontal
differential d raises R, the vertical derivative raises k.

Internally expressions are normalised to sums of wedge monomials: an
ordered tuple of factors with a numeric coefficient and a parameter
monomial. The factor grammar is closed under the operations the dynamics
layer needs (polynomials in C, P, dC, their Hodge duals, constant forms,
and registered scalar potentials of a rank-0 field).
"""

from __future__ import annotations

from dataclasses import dataclass, field


from . import multiindex as mi
from .forms import Form, exterior_derivative, hodge_star, wedge as form_wedge


class ExprError(ValueError):
    pass


class GradeError(ExprError):
    pass


class UnknownSymbolError(ExprError):
    pass


class DerivativeError(ExprError):
    """The requested partial derivative is outside the supported grammar
    or violates the grade restrictions."""


@dataclass(frozen=True)
class Grade:
    k: int
    R: int

    def __str__(self):
        return f"[{self.k}; {self.R}]"

    def __add__(self, other):
        return Grade(self.k + other.k, self.R + other.R)


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------

class Expr:
    __slots__ = ()

    def __add__(self, other):
        return Sum((self, other))

    def __sub__(self, other):
        return Sum((self, Wedge(Const(-1.0), other)))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            other = Const(float(other))
        return Wedge(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return Wedge(Const(-1.0), self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class FieldC(Expr):
    pass


@dataclass(frozen=True)
class FieldP(Expr):
    pass


@dataclass(frozen=True)
class Differential(Expr):
    child: Expr


@dataclass(frozen=True)
class HodgeStar(Expr):
    child: Expr


@dataclass(frozen=True)
class Wedge(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple


@dataclass(frozen=True)
class ScalarFun(Expr):
    name: str
    child: Expr
    deriv_order: int = 0


@dataclass(frozen=True)
class CoordDifferential(Expr):
    axis: int


@dataclass(frozen=True)
class VolSlot(Expr):
    """Vol when contracted_axes is empty, else the interior product of Vol
    with the listed coordinate vectors (in order)."""

    contracted_axes: tuple = ()


@dataclass(frozen=True)
class Zero(Expr):
    """Annihilating element; R may be None when no grade is attributable."""

    R: object = None


@dataclass(frozen=True)
class VerticalBasis(Expr):
    """Variation basis slot. label is 'C', 'P', ('X', mu) or ('Pi', mu);
    n_d counts horizontal differentials applied on top."""

    label: object
    n_d: int = 0


@dataclass(frozen=True)
class VerticalWedge(Expr):
    left: Expr
    right: Expr


# ---------------------------------------------------------------------------
# Monomial form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FF:
    """Field factor: [star] d^pre_d (C|P), then post_d outer differentials."""

    field: str          # "C" | "P"
    pre_d: int = 0
    star: bool = False
    post_d: int = 0


@dataclass(frozen=True)
class CF:
    """Constant form dx^axes (canonical ascending; signs live in the
    monomial coefficient)."""

    axes: tuple


@dataclass(frozen=True)
class UF:
    """Registered scalar function of the rank-0 field, differentiated
    dorder times."""

    name: str
    dorder: int = 0


@dataclass(frozen=True)
class SW:
    """Hodge star wrapped around a composite factor product."""

    inner: tuple
    post_d: int = 0


@dataclass(frozen=True)
class Mono:
    coeff: float
    params: tuple       # sorted ((name, exponent), ...)
    factors: tuple

    def scaled(self, s):
        return Mono(self.coeff * s, self.params, self.factors)


def _field_grade(field_name, model):
    return model.rank if field_name == "C" else model.momentum_grade


def factor_grade(f, model):
    n = model.dim
    if isinstance(f, FF):
        g = _field_grade(f.field, model) + f.pre_d
        if f.star:
            g = n - g
        return g + f.post_d
    if isinstance(f, CF):
        return len(f.axes)
    if isinstance(f, UF):
        return 0
    if isinstance(f, SW):
        inner = sum(factor_grade(x, model) for x in f.inner)
        return n - inner + f.post_d
    raise ExprError(f"unknown factor {f!r}")


def mono_grade(m, model):
    return sum(factor_grade(f, model) for f in m.factors)


def _merge_params(a, b):
    acc = dict(a)
    for name, e in b:
        acc[name] = acc.get(name, 0) + e
    return tuple(sorted((k, v) for k, v in acc.items() if v != 0))


def _mono_product(a, b):
    return Mono(a.coeff * b.coeff, _merge_params(a.params, b.params),
                a.factors + b.factors)


# ---------------------------------------------------------------------------
# Normalisation
# ---------------------------------------------------------------------------

def normalize(e, model):
    """Flatten an expression of vertical grade 0 into a monomial list."""
    if isinstance(e, Const):
        if e.value == 0:
            return []
        return [Mono(float(e.value), (), ())]
    if isinstance(e, Zero):
        return []
    if isinstance(e, Param):
        if e.name not in model.params:
            raise UnknownSymbolError(f"unknown parameter {e.name!r}")
        return [Mono(1.0, ((e.name, 1),), ())]
    if isinstance(e, Power):
        out = [Mono(1.0, (), ())]
        for _ in range(e.exponent):
            out = [_mono_product(m, x) for m in out for x in normalize(e.base, model)]
        return out
    if isinstance(e, FieldC):
        return [Mono(1.0, (), (FF("C"),))]
    if isinstance(e, FieldP):
        return [Mono(1.0, (), (FF("P"),))]
    if isinstance(e, CoordDifferential):
        if not 0 <= e.axis < model.dim:
            raise GradeError(f"coordinate axis {e.axis} out of range")
        return [Mono(1.0, (), (CF((e.axis,)),))]
    if isinstance(e, VolSlot):
        n = model.dim
        rho = mi.complement(e.contracted_axes, n)
        sign = mi.epsilon_sign(tuple(e.contracted_axes) + rho, n)
        if sign == 0:
            return []
        return [Mono(float(sign), (), (CF(rho),))]
    if isinstance(e, Sum):
        out = []
        for t in e.terms:
            out.extend(normalize(t, model))
        return out
    if isinstance(e, Wedge):
        left = normalize(e.left, model)
        right = normalize(e.right, model)
        return [_mono_product(a, b) for a in left for b in right]
    if isinstance(e, ScalarFun):
        if e.name not in model.potentials:
            raise UnknownSymbolError(f"unknown scalar function {e.name!r}")
        if model.rank != 0 or not isinstance(e.child, FieldC):
            raise ExprError("scalar functions apply to the rank-0 field itself")
        return [Mono(1.0, (), (UF(e.name, e.deriv_order),))]
    if isinstance(e, Differential):
        return _normalize_differential(e.child, model)
    if isinstance(e, HodgeStar):
        return [_star_mono(m, model) for m in normalize(e.child, model)]
    raise ExprError(f"cannot normalise vertical node {type(e).__name__}")


def _normalize_differential(child, model):
    out = []
    for m in normalize(child, model):
        before = 0
        for i, f in enumerate(m.factors):
            dfs = _d_factor(f, model)
            if dfs is not None:
                sign = (-1.0) ** (before % 2)
                factors = m.factors[:i] + dfs + m.factors[i + 1:]
                out.append(Mono(m.coeff * sign, m.params, factors))
            before += factor_grade(f, model)
    return out


def _d_factor(f, model):
    """Differential of one factor, or None when it vanishes."""
    if isinstance(f, FF):
        if not f.star and f.post_d == 0:
            if f.pre_d == 0:
                return (FF(f.field, 1, False, 0),)
            return None
        if f.post_d == 0:
            return (FF(f.field, f.pre_d, True, 1),)
        return None
    if isinstance(f, CF):
        return None
    if isinstance(f, UF):
        # chain rule through the rank-0 field
        return (UF(f.name, f.dorder + 1), FF("C", 1))
    if isinstance(f, SW):
        if f.post_d == 0:
            return (SW(f.inner, 1),)
        return None
    raise ExprError(f"unknown factor {f!r}")


def _star_mono(m, model):
    """Hodge star of a monomial, pulling grade-0 factors outside."""
    n = model.dim
    scalars = []
    others = []
    for f in m.factors:
        if factor_grade(f, model) == 0 and not (isinstance(f, FF) and f.star):
            scalars.append(f)
        else:
            others.append(f)
    coeff = m.coeff
    if not others:
        new = (CF(tuple(range(n))),)
    elif len(others) == 1:
        f = others[0]
        if isinstance(f, FF) and f.post_d == 0:
            if not f.star:
                new = (FF(f.field, f.pre_d, True, 0),)
            else:
                g0 = _field_grade(f.field, model) + f.pre_d
                sign = model_metric_sign(model) * (-1.0) ** (g0 * (n - g0))
                coeff *= sign
                new = (FF(f.field, f.pre_d, False, 0),)
        elif isinstance(f, CF):
            sign, comp = _star_axes(f.axes, model)
            coeff *= sign
            new = (CF(comp),)
        else:
            new = (SW(tuple(others)),)
            others = []
    else:
        new = (SW(tuple(others)),)
        others = []
    return Mono(coeff, m.params, tuple(scalars) + new)


def _star_axes(axes, model):
    comp = mi.complement(axes, model.dim)
    sign = mi.epsilon_sign(tuple(axes) + comp, model.dim)
    for a in axes:
        sign *= model.signature[a]
    return float(sign), comp


def model_metric_sign(model):
    s = 1
    for v in model.signature:
        s *= v
    return s


# ---------------------------------------------------------------------------
# Canonical ordering (for printing and light zero detection)
# ---------------------------------------------------------------------------

def _factor_sort_key(f, model):
    if isinstance(f, UF):
        return (0, f.name, f.dorder)
    if isinstance(f, FF) and factor_grade(f, model) == 0:
        return (1, f.field, f.pre_d, f.star)
    if isinstance(f, FF):
        return (2, f.field, f.pre_d, 0 if f.star else 1, f.post_d)
    if isinstance(f, SW):
        return (3, tuple(_factor_sort_key(x, model) for x in f.inner), f.post_d)
    if isinstance(f, CF):
        return (4, f.axes)
    return (9,)


def canonicalize(monos, model):
    """Sort factors with graded swap signs, merge constant forms, combine
    like monomials, and drop exact zeros."""
    acc = {}
    for m in monos:
        factors = list(m.factors)
        coeff = m.coeff
        # bubble sort with graded commutation signs
        changed = True
        while changed:
            changed = False
            for i in range(len(factors) - 1):
                a, b = factors[i], factors[i + 1]
                if _factor_sort_key(a, model) > _factor_sort_key(b, model):
                    ga, gb = factor_grade(a, model), factor_grade(b, model)
                    coeff *= (-1.0) ** (ga * gb)
                    factors[i], factors[i + 1] = b, a
                    changed = True
        # repeated odd-grade factor annihilates
        dead = False
        for i in range(len(factors) - 1):
            if factors[i] == factors[i + 1] and factor_grade(factors[i], model) % 2 == 1:
                dead = True
        # scalar functions whose registered body is structurally zero
        for f in factors:
            if isinstance(f, UF):
                pot = model.potentials.get(f.name)
                if pot is not None and not pot.nth_derivative(f.dorder).terms:
                    dead = True
        if dead or coeff == 0:
            continue
        # merge trailing constant forms
        cfs = [f for f in factors if isinstance(f, CF)]
        rest = [f for f in factors if not isinstance(f, CF)]
        if len(cfs) > 1:
            axes = ()
            sign = 1
            for f in cfs:
                axes2, s = mi.merge(axes, f.axes)
                if s == 0:
                    sign = 0
                    break
                axes, sign = axes2, sign * s
            if sign == 0:
                continue
            coeff *= sign
            cfs = [CF(axes)]
        factors = tuple(rest + cfs)
        key = (m.params, factors)
        acc[key] = acc.get(key, 0.0) + coeff
    out = []
    for (params, factors), coeff in acc.items():
        if coeff != 0:
            out.append(Mono(coeff, params, factors))
    out.sort(key=lambda m: (tuple(_factor_sort_key(f, model) for f in m.factors),
                            m.params))
    return out


def monos_to_expr(monos, model, zero_grade=None):
    if not monos:
        return Zero(zero_grade)
    terms = []
    for m in monos:
        node = None
        if m.coeff != 1.0 or (not m.params and not m.factors):
            node = Const(m.coeff)
        for name, exp in m.params:
            p = Param(name) if exp == 1 else Power(Param(name), exp)
            node = p if node is None else Wedge(node, p)
        for f in m.factors:
            fe = _factor_to_expr(f, model)
            node = fe if node is None else Wedge(node, fe)
        terms.append(node)
    if len(terms) == 1:
        return terms[0]
    return Sum(tuple(terms))


def _factor_to_expr(f, model):
    if isinstance(f, FF):
        e = FieldC() if f.field == "C" else FieldP()
        if f.pre_d:
            e = Differential(e)
        if f.star:
            e = HodgeStar(e)
        for _ in range(f.post_d):
            e = Differential(e)
        return e
    if isinstance(f, CF):
        n = model.dim
        if f.axes == tuple(range(n)):
            return VolSlot(())
        if len(f.axes) == 1:
            return CoordDifferential(f.axes[0])
        node = CoordDifferential(f.axes[0])
        for a in f.axes[1:]:
            node = Wedge(node, CoordDifferential(a))
        return node
    if isinstance(f, UF):
        return ScalarFun(f.name, FieldC(), f.dorder)
    if isinstance(f, SW):
        inner = None
        for x in f.inner:
            fe = _factor_to_expr(x, model)
            inner = fe if inner is None else Wedge(inner, fe)
        e = HodgeStar(inner)
        for _ in range(f.post_d):
            e = Differential(e)
        return e
    raise ExprError(f"unknown factor {f!r}")


# ---------------------------------------------------------------------------
# Grade inference
# ---------------------------------------------------------------------------

def infer_grade(e, model) -> Grade:
    """Bottom-up bigrade computation with strict overflow checking."""
    n = model.dim
    if isinstance(e, Const):
        return Grade(0, 0)
    if isinstance(e, Param):
        if e.name not in model.params:
            raise UnknownSymbolError(f"unknown parameter {e.name!r}")
        return Grade(0, 0)
    if isinstance(e, Zero):
        return Grade(0, e.R if e.R is not None else 0)
    if isinstance(e, Power):
        g = infer_grade(e.base, model)
        out = Grade(g.k * e.exponent, g.R * e.exponent)
        if out.R > n:
            raise GradeError(f"power overflows horizontal grade: {out}")
        return out
    if isinstance(e, FieldC):
        return Grade(0, model.rank)
    if isinstance(e, FieldP):
        return Grade(0, model.momentum_grade)
    if isinstance(e, CoordDifferential):
        return Grade(0, 1)
    if isinstance(e, VolSlot):
        return Grade(0, n - len(e.contracted_axes))
    if isinstance(e, Differential):
        g = infer_grade(e.child, model)
        if g.R + 1 > n:
            raise GradeError(f"d on horizontal grade {g.R} overflows (n={n})")
        return Grade(g.k, g.R + 1)
    if isinstance(e, HodgeStar):
        g = infer_grade(e.child, model)
        if g.k != 0:
            raise GradeError("hodge star needs vertical grade 0")
        return Grade(0, n - g.R)
    if isinstance(e, Wedge):
        gl = infer_grade(e.left, model)
        gr = infer_grade(e.right, model)
        out = gl + gr
        if out.R > n:
            raise GradeError(
                f"wedge of {gl} and {gr} overflows horizontal grade (n={n})")
        return out
    if isinstance(e, Sum):
        grades = set()
        for t in e.terms:
            if isinstance(t, Zero) and t.R is None:
                continue
            grades.add(infer_grade(t, model))
        if not grades:
            return Grade(0, 0)
        if len(grades) > 1:
            raise GradeError(f"sum mixes grades {sorted(map(str, grades))}")
        return grades.pop()
    if isinstance(e, ScalarFun):
        g = infer_grade(e.child, model)
        if g != Grade(0, 0):
            raise GradeError(f"scalar function argument has grade {g}")
        if e.name not in model.potentials:
            raise UnknownSymbolError(f"unknown scalar function {e.name!r}")
        return Grade(0, 0)
    if isinstance(e, VerticalBasis):
        if e.label == "C":
            base = model.rank
        elif e.label == "P":
            base = model.momentum_grade
        elif isinstance(e.label, tuple) and e.label[0] == "X":
            base = 0
        elif isinstance(e.label, tuple) and e.label[0] == "Pi":
            base = n - 1
        else:
            raise ExprError(f"unknown vertical basis label {e.label!r}")
        return Grade(1, base + e.n_d)
    if isinstance(e, VerticalWedge):
        out = infer_grade(e.left, model) + infer_grade(e.right, model)
        if out.R > n:
            raise GradeError(f"vertical wedge overflows horizontal grade {out.R}")
        return out
    raise ExprError(f"unknown node {type(e).__name__}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(e, history, model, params=None, overrides=None) -> Form:
    """Evaluate a vertical-grade-0 expression on a history.

    `overrides` optionally maps (field, pre_d) pairs to forms used in
    place of the history-derived value, e.g. {("C", 1): my_dC} to supply
    a custom discrete velocity.
    """
    grade = infer_grade(e, model)
    if grade.k != 0:
        raise ExprError(f"cannot evaluate vertical grade {grade.k} directly")
    p = dict(model.params)
    if params:
        p.update(params)
    grid = history.grid
    monos = normalize(e, model)
    out = Form.zero(grid, grade.R)
    for m in monos:
        out = out + _eval_mono(m, history, model, p, grid, overrides)
    return out


def _eval_mono(m, history, model, params, grid, overrides=None):
    coeff = m.coeff
    for name, exp in m.params:
        if name not in params:
            raise UnknownSymbolError(f"unbound parameter {name!r}")
        coeff *= params[name] ** exp
    acc = Form.constant(grid, coeff)
    for f in m.factors:
        acc = form_wedge(acc, _eval_factor(f, history, model, params, grid,
                                           overrides))
    return acc


def _eval_factor(f, history, model, params, grid, overrides=None):
    if isinstance(f, FF):
        base = None
        if overrides:
            base = overrides.get((f.field, f.pre_d))
        if base is None:
            base = history.C if f.field == "C" else history.P
            for _ in range(f.pre_d):
                base = exterior_derivative(base)
        if f.star:
            base = hodge_star(base)
        for _ in range(f.post_d):
            base = exterior_derivative(base)
        return base
    if isinstance(f, CF):
        return Form.monomial(grid, f.axes)
    if isinstance(f, UF):
        pot = model.potential(f.name).nth_derivative(f.dorder)
        c = history.C.component(())
        return Form.scalar(grid, pot(c, params))
    if isinstance(f, SW):
        acc = Form.constant(grid, 1.0)
        for x in f.inner:
            acc = form_wedge(acc, _eval_factor(x, history, model, params, grid,
                                               overrides))
        out = hodge_star(acc)
        for _ in range(f.post_d):
            out = exterior_derivative(out)
        return out
    raise ExprError(f"unknown factor {f!r}")
