"""Model-description files: parsing, printing, and the expression grammar.

A model file has named blocks and top-level assignments:

    model klein_gordon
    domain { dim = 2  signature = +-  boundary = periodic
             spatial_sizes = 256  spatial_extents = 6.283185307179586 }
    field { rank = 0  symbol = C  momentum = P }
    params { m = 1.0 }
    potential U(C) = 0.5*m^2*pow(C, 2)
    hamiltonian = "0.5*star(P)*P + U(C)*vol"
    lagrangian = "0.5*d(C)*star(d(C)) - U(C)*vol"
    simulate { scheme = leapfrog  dt = 0.01  steps = 400  record_every = 1
               initial_C = "cos(2*pi*x1/L)"  initial_P = "0.0" }

Expression grammar ('*' is the wedge product; '^' an integer power):

    expr   := term (('+'|'-') term)*
    term   := ['-'] factor ('*' factor)*
    factor := atom ['^' integer]
    atom   := number | ident | func '(' args ')' | '(' expr ')'

Functions: wedge, star, d (around the field symbol only), pow, and any
declared potential. Reserved identifiers: the field and momentum symbols,
vol, dx0..dx{n-1}. Explicit coordinate dependence in generators is
rejected. Initial-condition expressions use a separate scalar grammar
with sin/cos/exp, '/', the spatial coordinates x1.., pi, L (the first
spatial extent), and the model parameters.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .expr import (
    CF,
    FF,
    SW,
    UF,
    Const,
    CoordDifferential,
    Differential,
    FieldC,
    FieldP,
    GradeError,
    HodgeStar,
    Param,
    Power,
    ScalarFun,
    Sum,
    UnknownSymbolError,
    VolSlot,
    Wedge,
    Zero,
    canonicalize,
    infer_grade,
    normalize,
)
from .model import ModelSpec, Potential


class ModelSyntaxError(ValueError):
    def __init__(self, message, line=None, col=None):
        loc = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>\d+\.\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|\d+([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>[{}()=+\-*/^,])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "newline":
            line += 1
            col = 1
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
            col += len(value)
        else:
            col += len(value)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Cursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, kind=None, text=None):
        t = self.next()
        if kind is not None and t.kind != kind:
            raise ModelSyntaxError(
                f"expected {kind}, got {t.text!r}", t.line, t.col)
        if text is not None and t.text != text:
            raise ModelSyntaxError(
                f"expected {text!r}, got {t.text!r}", t.line, t.col)
        return t

    def at(self, text):
        return self.peek().text == text

    def done(self):
        return self.peek().kind == "eof"


# ---------------------------------------------------------------------------
# field-expression parser
# ---------------------------------------------------------------------------

class ExpressionParser:
    """Recursive-descent parser for generator expressions."""

    def __init__(self, dim, field_symbol="C", momentum_symbol="P",
                 potentials=(), params=()):
        self.dim = dim
        self.field_symbol = field_symbol
        self.momentum_symbol = momentum_symbol
        self.potentials = set(potentials)
        self.params = set(params)

    def parse(self, text):
        cur = _Cursor(tokenize(text))
        e = self._expr(cur)
        t = cur.peek()
        if t.kind != "eof":
            raise ModelSyntaxError(f"trailing input {t.text!r}", t.line, t.col)
        return e

    def _expr(self, cur):
        terms = [self._term(cur)]
        while cur.peek().text in ("+", "-"):
            op = cur.next().text
            t = self._term(cur)
            if op == "-":
                t = Wedge(Const(-1.0), t)
            terms.append(t)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def _term(self, cur):
        negate = False
        if cur.at("-"):
            cur.next()
            negate = True
        node = self._factor(cur)
        while cur.at("*"):
            cur.next()
            node = Wedge(node, self._factor(cur))
        if negate:
            node = Wedge(Const(-1.0), node)
        return node

    def _factor(self, cur):
        node = self._atom(cur)
        if cur.at("^"):
            cur.next()
            t = cur.expect("number")
            if "." in t.text or "e" in t.text.lower():
                raise ModelSyntaxError("exponent must be an integer", t.line, t.col)
            node = Power(node, int(t.text))
        return node

    def _atom(self, cur):
        t = cur.next()
        if t.kind == "number":
            return Const(float(t.text))
        if t.text == "(":
            e = self._expr(cur)
            cur.expect(text=")")
            return e
        if t.kind != "ident":
            raise ModelSyntaxError(f"unexpected token {t.text!r}", t.line, t.col)
        name = t.text
        if cur.at("("):
            return self._call(name, t, cur)
        return self._ident(name, t)

    def _ident(self, name, t):
        if name == self.field_symbol or name == "C":
            return FieldC()
        if name == self.momentum_symbol or name == "P":
            return FieldP()
        if name == "vol":
            return VolSlot(())
        m = re.fullmatch(r"dx(\d+)", name)
        if m:
            axis = int(m.group(1))
            if axis >= self.dim:
                raise ModelSyntaxError(
                    f"coordinate differential {name} out of range for "
                    f"dim {self.dim}", t.line, t.col)
            return CoordDifferential(axis)
        if re.fullmatch(r"x\d+", name) or name == "t":
            raise ModelSyntaxError(
                "explicit coordinate dependence is not supported in "
                "generators", t.line, t.col)
        if name in self.params:
            return Param(name)
        if name in self.potentials:
            raise ModelSyntaxError(
                f"{name} is a scalar function and needs an argument",
                t.line, t.col)
        raise UnknownSymbolError(
            f"unknown identifier {name!r} (line {t.line}, column {t.col})")

    def _call(self, name, t, cur):
        cur.expect(text="(")
        args = [self._expr(cur)]
        while cur.at(","):
            cur.next()
            args.append(self._expr(cur))
        cur.expect(text=")")
        if name == "wedge":
            if len(args) != 2:
                raise ModelSyntaxError("wedge takes two arguments", t.line, t.col)
            return Wedge(args[0], args[1])
        if name == "star":
            if len(args) != 1:
                raise ModelSyntaxError("star takes one argument", t.line, t.col)
            return HodgeStar(args[0])
        if name == "d":
            if len(args) != 1 or not isinstance(args[0], FieldC):
                raise ModelSyntaxError(
                    "d applies to the field symbol only", t.line, t.col)
            return Differential(args[0])
        if name == "pow":
            if len(args) != 2 or not isinstance(args[1], Const) \
                    or args[1].value != int(args[1].value):
                raise ModelSyntaxError(
                    "pow takes an expression and an integer", t.line, t.col)
            return Power(args[0], int(args[1].value))
        if name in self.potentials:
            if len(args) != 1 or not isinstance(args[0], FieldC):
                raise ModelSyntaxError(
                    f"{name} applies to the field symbol", t.line, t.col)
            return ScalarFun(name, args[0])
        raise UnknownSymbolError(
            f"unknown identifier {name!r} (line {t.line}, column {t.col})")


# ---------------------------------------------------------------------------
# printing (round-trips through the parser)
# ---------------------------------------------------------------------------

def _coeff_str(c):
    if c == int(c):
        return str(int(c))
    return repr(c)


def print_expr(e, model) -> str:
    """Canonical source form of a vertical-grade-0 expression."""
    if isinstance(e, Zero):
        return "0"
    monos = canonicalize(normalize(e, model), model)
    if not monos:
        return "0"
    parts = []
    for i, m in enumerate(monos):
        body = _mono_str(m, model)
        neg = m.coeff < 0
        if i == 0:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts)


def _mono_str(m, model):
    pieces = []
    c = abs(m.coeff)
    if c != 1.0 or (not m.params and not m.factors):
        pieces.append(_coeff_str(c))
    for name, exp in m.params:
        pieces.append(name if exp == 1 else f"{name}^{exp}")
    i = 0
    factors = list(m.factors)
    while i < len(factors):
        f = factors[i]
        run = 1
        while i + run < len(factors) and factors[i + run] == f:
            run += 1
        s = _factor_str(f, model)
        pieces.append(s if run == 1 else f"{s}^{run}")
        i += run
    return "*".join(pieces)


def _factor_str(f, model):
    if isinstance(f, FF):
        base = model.field_symbol if f.field == "C" else model.momentum_symbol
        s = base
        if f.pre_d:
            s = f"d({s})"
        if f.star:
            s = f"star({s})"
        for _ in range(f.post_d):
            s = f"d({s})"
        return s
    if isinstance(f, CF):
        if f.axes == tuple(range(model.dim)):
            return "vol"
        return "*".join(f"dx{a}" for a in f.axes)
    if isinstance(f, UF):
        primes = "'" * f.dorder
        return f"{f.name}{primes}({model.field_symbol})"
    if isinstance(f, SW):
        inner = "*".join(_factor_str(x, model) for x in f.inner)
        s = f"star({inner})"
        for _ in range(f.post_d):
            s = f"d({s})"
        return s
    raise ValueError(f"unknown factor {f!r}")


# ---------------------------------------------------------------------------
# scalar initial-condition expressions
# ---------------------------------------------------------------------------

_SCALAR_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp,
                 "sqrt": np.sqrt, "tanh": np.tanh}


def eval_scalar_expr(text, names):
    """Evaluate an initial-condition expression over coordinate arrays."""
    cur = _Cursor(tokenize(text))
    val = _scalar_expr(cur, names)
    t = cur.peek()
    if t.kind != "eof":
        raise ModelSyntaxError(f"trailing input {t.text!r}", t.line, t.col)
    return val


def _scalar_expr(cur, names):
    val = _scalar_term(cur, names)
    while cur.peek().text in ("+", "-"):
        op = cur.next().text
        rhs = _scalar_term(cur, names)
        val = val + rhs if op == "+" else val - rhs
    return val


def _scalar_term(cur, names):
    neg = False
    if cur.at("-"):
        cur.next()
        neg = True
    val = _scalar_factor(cur, names)
    while cur.peek().text in ("*", "/"):
        op = cur.next().text
        rhs = _scalar_factor(cur, names)
        val = val * rhs if op == "*" else val / rhs
    return -val if neg else val


def _scalar_factor(cur, names):
    val = _scalar_atom(cur, names)
    if cur.at("^"):
        cur.next()
        t = cur.expect("number")
        val = val ** float(t.text)
    return val


def _scalar_atom(cur, names):
    t = cur.next()
    if t.kind == "number":
        return float(t.text)
    if t.text == "(":
        val = _scalar_expr(cur, names)
        cur.expect(text=")")
        return val
    if t.kind != "ident":
        raise ModelSyntaxError(f"unexpected token {t.text!r}", t.line, t.col)
    if cur.at("("):
        cur.next()
        arg = _scalar_expr(cur, names)
        cur.expect(text=")")
        fn = _SCALAR_FUNCS.get(t.text)
        if fn is None:
            raise ModelSyntaxError(f"unknown function {t.text!r}", t.line, t.col)
        return fn(arg)
    if t.text == "pi":
        return np.pi
    if t.text in names:
        return names[t.text]
    raise UnknownSymbolError(
        f"unknown identifier {t.text!r} (line {t.line}, column {t.col})")


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def parse_model(text) -> ModelSpec:
    """Parse a model file and grade-check its generators."""
    cur = _Cursor(tokenize(text))
    name = "model"
    blocks = {}
    potentials = {}
    potential_order = []
    exprs = {}
    field_count = 0

    while not cur.done():
        t = cur.next()
        if t.kind != "ident":
            raise ModelSyntaxError(f"expected a section, got {t.text!r}",
                                   t.line, t.col)
        if t.text == "model":
            name = cur.expect("ident").text
        elif t.text in ("domain", "field", "params", "simulate"):
            if t.text == "field":
                field_count += 1
                if field_count > 1:
                    raise ModelSyntaxError(
                        "exactly one field block is allowed", t.line, t.col)
            blocks[t.text] = _parse_block(cur)
        elif t.text == "potential":
            pname, psrc = _parse_potential_header(cur)
            potentials[pname] = psrc
            potential_order.append(pname)
        elif t.text in ("hamiltonian", "lagrangian"):
            cur.expect(text="=")
            s = cur.expect("string")
            exprs[t.text] = (s.text[1:-1], s.line)
        else:
            raise ModelSyntaxError(f"unknown section {t.text!r}", t.line, t.col)

    domain = blocks.get("domain")
    if domain is None:
        raise ModelSyntaxError("missing domain block")
    fieldb = blocks.get("field")
    if fieldb is None:
        raise ModelSyntaxError("missing field block")
    dim = int(domain.get("dim", "1"))
    sig_text = domain.get("signature", "+" + "-" * (dim - 1))
    signature = tuple(1 if ch == "+" else -1 for ch in sig_text)
    if len(signature) != dim:
        raise ModelSyntaxError(
            f"signature {sig_text!r} does not cover {dim} axes")
    boundary = domain.get("boundary", "periodic")
    spatial_sizes = _int_list(domain.get("spatial_sizes", ""))
    spatial_extents = _float_list(domain.get("spatial_extents", ""))
    rank = int(fieldb.get("rank", "0"))
    field_symbol = fieldb.get("symbol", "C")
    momentum_symbol = fieldb.get("momentum", "P")

    params = {}
    for k, v in blocks.get("params", {}).items():
        params[k] = float(v)

    parser = ExpressionParser(dim, field_symbol, momentum_symbol,
                              potentials=set(potentials), params=set(params))
    pot_objects = {}
    for pname in potential_order:
        src, line = potentials[pname]
        body = parser.parse(src)
        pot_objects[pname] = _potential_from_expr(pname, body, dim, rank,
                                                  params, line)

    defaults = dict(blocks.get("simulate", {}))
    if not exprs:
        raise ModelSyntaxError("model needs a hamiltonian or a lagrangian")

    parsed = {}
    for kind, (src, line) in exprs.items():
        parsed[kind] = parser.parse(src)

    spec = ModelSpec(
        name=name, dim=dim, rank=rank, signature=signature,
        spatial_sizes=tuple(spatial_sizes),
        spatial_extents=tuple(spatial_extents),
        boundary=boundary, params=params, potentials=pot_objects,
        hamiltonian=parsed.get("hamiltonian"),
        lagrangian=parsed.get("lagrangian"),
        field_symbol=field_symbol, momentum_symbol=momentum_symbol,
        defaults=defaults,
    )
    for kind in ("hamiltonian", "lagrangian"):
        e = getattr(spec, kind)
        if e is None:
            continue
        g = infer_grade(e, spec)
        if (g.k, g.R) != (0, dim):
            raise GradeError(
                f"{kind} must have grade [0; {dim}], got {g} "
                f"(node {type(e).__name__})")
    return spec


def _parse_block(cur):
    cur.expect(text="{")
    out = {}
    while not cur.at("}"):
        key = cur.expect("ident").text
        cur.expect(text="=")
        out[key] = _parse_value(cur)
    cur.expect(text="}")
    return out


def _parse_value(cur):
    """Collect a block value: a quoted string, or a run of numbers, signs,
    commas and bare identifiers ending at the next `key =`, a brace or the
    end of input. Lists are comma-separated."""
    t = cur.peek()
    if t.kind == "string":
        cur.next()
        return t.text[1:-1]
    parts = []
    while True:
        t = cur.peek()
        if t.kind == "eof" or t.text in ("}", "{"):
            break
        if t.kind == "ident" and parts:
            following = cur.tokens[cur.i + 1]
            if following.text in ("=", "{", "(") or following.kind in ("ident", "string"):
                break
        if t.kind not in ("number", "ident") and t.text not in ("+", "-", ","):
            break
        parts.append(cur.next().text)
    if not parts:
        t = cur.peek()
        raise ModelSyntaxError("expected a value", t.line, t.col)
    return "".join(parts)


def _int_list(text):
    if not str(text).strip():
        return []
    return [int(p) for p in re.split(r"[,\s]+", str(text).strip()) if p]


def _float_list(text):
    if not str(text).strip():
        return []
    return [float(p) for p in re.split(r"[,\s]+", str(text).strip()) if p]


def _parse_potential_header(cur):
    t = cur.expect("ident")
    pname = t.text
    cur.expect(text="(")
    cur.expect("ident")
    cur.expect(text=")")
    cur.expect(text="=")
    parts = []
    line = cur.peek().line
    while not cur.done() and cur.peek().line == line:
        parts.append(cur.next().text)
    return pname, ("".join(parts), line)


def _potential_from_expr(name, body, dim, rank, params, line):
    """Extract polynomial terms from a parsed potential body."""
    if rank != 0:
        raise ModelSyntaxError("potentials need a rank-0 field", line, 1)
    probe = ModelSpec(
        name="_potential_probe", dim=dim, rank=0,
        signature=(1,) * dim, spatial_sizes=(4,) * (dim - 1),
        spatial_extents=(1.0,) * (dim - 1), params=params,
        potentials={}, hamiltonian=Const(1.0), lagrangian=None)
    terms = {}
    for m in canonicalize(normalize(body, probe), probe):
        power = 0
        for f in m.factors:
            if f == FF("C"):
                power += 1
            else:
                raise ModelSyntaxError(
                    f"potential {name} must be polynomial in the field",
                    line, 1)
        terms.setdefault(power, []).append((m.coeff, m.params))
    return Potential(name, tuple(sorted((p, tuple(v)) for p, v in terms.items())))


def print_model(model: ModelSpec) -> str:
    """Regenerate model-file source. parse(print(parse(x))) is a fixed
    point of the composition."""
    lines = [f"model {model.name}", ""]
    sig = "".join("+" if s > 0 else "-" for s in model.signature)
    lines.append("domain {")
    lines.append(f"  dim = {model.dim}")
    lines.append(f"  signature = {sig}")
    lines.append(f"  boundary = {model.boundary}")
    if model.spatial_sizes:
        lines.append("  spatial_sizes = "
                     + ", ".join(str(s) for s in model.spatial_sizes))
        lines.append("  spatial_extents = "
                     + ", ".join(repr(e) for e in model.spatial_extents))
    lines.append("}")
    lines.append("")
    lines.append("field {")
    lines.append(f"  rank = {model.rank}")
    lines.append(f"  symbol = {model.field_symbol}")
    lines.append(f"  momentum = {model.momentum_symbol}")
    lines.append("}")
    lines.append("")
    if model.params:
        lines.append("params {")
        for k in sorted(model.params):
            lines.append(f"  {k} = {repr(model.params[k])}")
        lines.append("}")
        lines.append("")
    for pname in sorted(model.potentials):
        body = _potential_source(model.potentials[pname], model)
        lines.append(f"potential {pname}({model.field_symbol}) = {body}")
    if model.potentials:
        lines.append("")
    if model.hamiltonian is not None:
        lines.append(f'hamiltonian = "{print_expr(model.hamiltonian, model)}"')
    if model.lagrangian is not None:
        lines.append(f'lagrangian = "{print_expr(model.lagrangian, model)}"')
    if model.defaults:
        lines.append("")
        lines.append("simulate {")
        for k in model.defaults:
            v = str(model.defaults[k])
            if re.fullmatch(r"[0-9eE+\-.,]+|[A-Za-z_][A-Za-z_0-9]*", v):
                lines.append(f"  {k} = {v}")
            else:
                lines.append(f'  {k} = "{v}"')
        lines.append("}")
    return "\n".join(lines) + "\n"


def _potential_source(pot, model):
    parts = []
    for power, pieces in pot.terms:
        for coeff, pparams in pieces:
            bits = []
            if coeff != 1.0 or (power == 0 and not pparams):
                bits.append(_coeff_str(coeff))
            for pname, e in pparams:
                bits.append(pname if e == 1 else f"{pname}^{e}")
            if power == 1:
                bits.append(model.field_symbol)
            elif power > 1:
                bits.append(f"pow({model.field_symbol}, {power})")
            parts.append("*".join(bits))
    return " + ".join(parts) if parts else "0"
