"""Structure-preserving integration of the covariant evolution pair.

The stepper is derived from the evolution equations themselves rather
than from per-model physics. At setup the right-hand sides are expanded
componentwise; the map P -> dC/dP-rows must be linear with constant
coefficients (quadratic kinetic Hamiltonians) and the force rows must
depend on the field only (separable Hamiltonians). The component
structure of the discrete d then dictates which momentum components are
stepped at half times, which are derived from spatial derivatives of the
field, and on which half-cell sites everything lives. For a rank-0 field
this reproduces the time-staggered leapfrog; for the rank-1 gauge field
it reproduces the classic staggered-mesh update in the temporal gauge
(the time component of the field is frozen at zero).

Time-stepped quantities are stored so that index k of a momentum array
holds the sample at t = (k + 1/2) dt; the field array holds integer
steps. With the staggering-aware exterior derivative the assembled
histories then satisfy the discrete equations to rounding.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import multiindex as mi
from .calculus import expand_components
from .dynamics import FieldEquations, hamilton_equations
from .expr import Zero
from .forms import Form
from .history import HamiltonianHistory
from .model import ModelSpec

SCHEMES = ("symplectic_euler", "leapfrog", "yee")


class SchemeError(ValueError):
    pass


class SimulationDiverged(RuntimeError):
    def __init__(self, step):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass
class SimConfig:
    dt: float
    steps: int
    scheme: str = "leapfrog"
    record_every: int = 1
    initial_C: dict = None          # stepped C component key -> array/scalar
    initial_P: dict = None          # stepped P component key -> array/scalar
    staggered_init: bool = False    # True: initial_P already at t = -dt/2
    cfl_override: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise SchemeError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise SchemeError(f"unknown scheme {self.scheme!r}")


@dataclass
class SimState:
    step: int
    t: float
    C: dict
    P: dict
    scheme: str

    def copy_arrays(self):
        return ({k: np.array(v) for k, v in self.C.items()},
                {k: np.array(v) for k, v in self.P.items()})


@dataclass
class SimResult:
    trajectory: list
    times: np.ndarray
    energy: np.ndarray
    constraint_residuals: dict
    model: ModelSpec
    config: SimConfig
    centered: list = None       # time-centred momentum per recorded step


# ---------------------------------------------------------------------------
# compiled component polynomials
# ---------------------------------------------------------------------------

def _poly_value(poly, values, model, params):
    out = 0.0
    for (vars_, ufacs, pfacs), coeff in poly.items():
        term = float(coeff)
        for name, e in pfacs:
            term *= params[name] ** e
        acc = term
        for sym, e in vars_:
            acc = acc * values[sym] ** e
        for (name, dorder), e in ufacs:
            u = model.potential(name).nth_derivative(dorder)
            acc = acc * u(values[("C", ())], params) ** e
        out = out + acc
    return out


def _univariate_coeffs(poly, model, params):
    """Collapse a polynomial in the single rank-0 field component into
    plain numeric coefficients, or return None if other symbols occur."""
    coeffs = {}
    for (vars_, ufacs, pfacs), coeff in poly.items():
        base = float(coeff)
        for name, e in pfacs:
            base *= params[name] ** e
        expanded = {0: base}
        for sym, e in vars_:
            if sym != ("C", ()):
                return None
            expanded = {k + e: v for k, v in expanded.items()}
        for (name, dorder), e in ufacs:
            u = model.potential(name).nth_derivative(dorder)
            ucoef = {k: u.coefficient(k, params) for k in range(u.max_power() + 1)}
            for _ in range(e):
                nxt = {}
                for k1, v1 in expanded.items():
                    for k2, v2 in ucoef.items():
                        if v2 == 0:
                            continue
                        nxt[k1 + k2] = nxt.get(k1 + k2, 0.0) + v1 * v2
                expanded = nxt
        for k, v in expanded.items():
            coeffs[k] = coeffs.get(k, 0.0) + v
    top = max(coeffs) if coeffs else 0
    return np.array([coeffs.get(k, 0.0) for k in range(top + 1)])


# ---------------------------------------------------------------------------
# scheme compilation
# ---------------------------------------------------------------------------

@dataclass
class CompiledScheme:
    model: ModelSpec
    eqs: FieldEquations
    params: dict
    stepped_C: list          # field component keys without the time axis
    gauge_C: list            # field component keys containing the time axis
    stepped_P: list
    derived_P: list
    M: dict                  # dC row key -> {P key: float}
    force: dict              # dP row key -> ComponentPoly (C symbols only)
    force_fast: dict         # univariate numeric coefficients where possible
    tags_C: dict             # spatial staggering per stepped C key
    tags_P: dict             # spatial staggering per stepped/derived P key
    solve_matrix: object     # derived-P solve: (rows, cols, inv_matrix)
    spatial_shape: tuple
    spacing: tuple           # spacings indexed by domain axis (0 unused here)
    time_rows: dict = field(default_factory=dict)
    constraint_rows: list = field(default_factory=list)
    gauss_rows: list = field(default_factory=list)
    h_density: object = None

    # -- spatial difference helpers (arrays are spatial-only) -------------

    def _sdiff(self, arr, axis, backward):
        ax = axis - 1
        h = self.spacing[axis]
        if backward:
            return (arr - np.roll(arr, 1, axis=ax)) / h
        return (np.roll(arr, -1, axis=ax) - arr) / h

    def spatial_dC(self, C):
        """Constraint-row values (dC components without the time axis)."""
        out = {}
        for row in self.constraint_rows:
            acc = 0.0
            for a in row:
                src = tuple(x for x in row if x != a)
                _, sign = mi.merge((a,), src)
                acc = acc + sign * self._sdiff(C[src], a, backward=False)
            out[row] = acc
        return out

    def derived_momentum(self, C):
        """Solve the spatial part of the dC equation for the momentum
        components that carry the time axis."""
        if not self.derived_P:
            return {}
        rows, cols, inv = self.solve_matrix
        rhs_map = self.spatial_dC(C)
        rhs = [rhs_map[row] for row in rows]
        out = {}
        for i, col in enumerate(cols):
            acc = 0.0
            for j in range(len(rows)):
                if inv[i, j] != 0.0:
                    acc = acc + inv[i, j] * rhs[j]
            out[col] = acc + np.zeros(self.spatial_shape)
        return out

    def kick_rhs(self, C, jacobian_at=None):
        """Time derivative of each stepped momentum component.

        With jacobian_at set to a base field configuration, returns the
        exact directional derivative of the kick at that base applied to
        C (tangent stepping).
        """
        if jacobian_at is None:
            values = self._value_map(C)
        der = self.derived_momentum(C)
        out = {}
        for row, poly in self.force.items():
            key = tuple(x for x in row if x != 0)
            if jacobian_at is None:
                fast = self.force_fast.get(row)
                if fast is not None:
                    q = C[()]
                    f = np.polynomial.polynomial.polyval(q, fast) \
                        if fast.size else 0.0
                else:
                    f = _poly_value(poly, values, self.model, self.params)
            else:
                f = self._jacobian_apply(poly, jacobian_at, C)
            acc = f + np.zeros(self.spatial_shape)
            for a in row:
                if a == 0:
                    continue
                src = tuple(x for x in row if x != a)
                _, sign = mi.merge((a,), src)
                backward = self.tags_P[src][a - 1] == 1
                acc = acc - sign * self._sdiff(der[src], a, backward=backward)
            out[key] = acc
        return out

    def _jacobian_apply(self, poly, base, direction):
        base_values = self._value_map(base)
        total = 0.0
        syms = set()
        for vars_, _u, _p in poly:
            for sym, _e in vars_:
                syms.add(sym)
        syms.add(("C", ()))  # potential factors chain through it
        for sym in syms:
            d = poly.diff(sym)
            if not d:
                continue
            vec = direction.get(sym[1])
            if vec is None:
                continue  # gauge-frozen component: no variation
            total = total + _poly_value(d, base_values, self.model, self.params) \
                * vec
        return total

    def _value_map(self, C):
        values = {}
        for key in self.stepped_C:
            values[("C", key)] = C[key]
        for key in self.gauge_C:
            values[("C", key)] = np.zeros(self.spatial_shape)
        return values

    def drift_rhs(self, P):
        """Time derivative of each stepped field component."""
        out = {}
        for row, cols in self.time_rows.items():
            key = tuple(x for x in row if x != 0)
            acc = 0.0
            for pkey, coeff in cols.items():
                acc = acc + coeff * P[pkey]
            out[key] = acc
        return out

    def constraint_residual(self, P):
        """Momentum constraint rows (dP components without the time axis),
        evaluated on the stepped components."""
        out = {}
        for row in self.gauss_rows:
            acc = 0.0
            for a in row:
                src = tuple(x for x in row if x != a)
                if src in self.derived_P:
                    continue
                _, sign = mi.merge((a,), src)
                backward = self.tags_P[src][a - 1] == 1
                acc = acc + sign * self._sdiff(P[src], a, backward=backward)
            out[row] = acc
        return out

    def energy_density(self, C, P_centered):
        values = self._value_map(C)
        for key, arr in P_centered.items():
            values[("P", key)] = arr
        for key, arr in self.derived_momentum(C).items():
            values[("P", key)] = arr
        h_poly = self.h_density
        return _poly_value(h_poly, values, self.model, self.params)


def compile_scheme(model: ModelSpec, scheme: str, params=None) -> CompiledScheme:
    """Derive the staggered update structure from the evolution equations."""
    n, r = model.dim, model.rank
    if n > 1 and model.boundary != "periodic":
        raise SchemeError("field integrators support periodic boundaries only")
    if scheme == "symplectic_euler" and n != 1:
        raise SchemeError("symplectic_euler supports time dynamics only")
    if scheme == "leapfrog" and r != 0:
        raise SchemeError("leapfrog supports rank-0 fields; use yee for rank 1")
    if scheme == "yee" and r != 1:
        raise SchemeError("yee supports rank-1 fields only")
    p = dict(model.params)
    if params:
        p.update(params)
    eqs = hamilton_equations(model)

    stepped_C = [k for k in mi.canonical_indices(n, r) if 0 not in k]
    gauge_C = [k for k in mi.canonical_indices(n, r) if 0 in k]
    stepped_P = [k for k in mi.canonical_indices(n, n - r - 1) if 0 not in k]
    derived_P = [k for k in mi.canonical_indices(n, n - r - 1) if 0 in k]

    # linear momentum map from the dC equation
    dc_exp = expand_components(eqs.rhs_for_dC, model)
    M = {}
    for row, poly in dc_exp.items():
        cols = {}
        for (vars_, ufacs, pfacs), coeff in poly.items():
            if ufacs or len(vars_) != 1 or vars_[0][1] != 1 \
                    or vars_[0][0][0] != "P":
                raise SchemeError(
                    "dC equation is not linear in the momentum; this scheme "
                    "needs a quadratic kinetic term")
            c = float(coeff)
            for name, e in pfacs:
                c *= p[name] ** e
            cols[vars_[0][0][1]] = cols.get(vars_[0][0][1], 0.0) + c
        M[row] = cols

    time_rows = {}
    constraint_rows = []
    for row in mi.canonical_indices(n, r + 1):
        cols = M.get(row, {})
        if 0 in row:
            for pkey in cols:
                if pkey in derived_P and cols[pkey] != 0.0:
                    raise SchemeError(
                        "time rows of the dC equation touch a momentum "
                        "component that is not time-stepped")
            time_rows[row] = cols
        else:
            constraint_rows.append(row)

    # force rows from the dP equation
    force = {}
    if not isinstance(eqs.rhs_for_dP, Zero):
        dp_exp = expand_components(eqs.rhs_for_dP, model)
        for row, poly in dp_exp.items():
            if 0 not in row:
                raise SchemeError(
                    "dP equation sources a spatial constraint row; the "
                    "staggered schemes cannot advance it")
            for (vars_, _u, _p), _c in poly.items():
                for sym, _e in vars_:
                    if sym[0] != "C":
                        raise SchemeError(
                            "dP equation depends on the momentum; this "
                            "scheme needs a separable Hamiltonian")
            force[row] = poly
    evolution_rows = [k for k in mi.canonical_indices(n, n - r) if 0 in k]
    gauss_rows = [k for k in mi.canonical_indices(n, n - r) if 0 not in k]
    for row in evolution_rows:
        force.setdefault(row, _zero_poly())

    # staggering tags (per spatial axis, indices 0..n-2 for axes 1..n-1)
    tags_C = {k: tuple(1 if ax in k else 0 for ax in range(1, n))
              for k in stepped_C}
    tags_P = {}
    for row, cols in time_rows.items():
        ckey = tuple(x for x in row if x != 0)
        for pkey, coeff in cols.items():
            if coeff == 0.0:
                continue
            tag = tags_C[ckey]
            if tags_P.setdefault(pkey, tag) != tag:
                raise SchemeError("inconsistent staggering for stepped momentum")
    for pkey in stepped_P:
        tags_P.setdefault(pkey, (0,) * (n - 1))
    for row in constraint_rows:
        tag = tuple(1 if ax in row else 0 for ax in range(1, n))
        for pkey in derived_P:
            if M.get(row, {}).get(pkey, 0.0) != 0.0:
                if tags_P.setdefault(pkey, tag) != tag:
                    raise SchemeError(
                        "inconsistent staggering for derived momentum")
    for pkey in derived_P:
        tags_P.setdefault(pkey, tuple(1 for _ in range(n - 1)))

    # derived-momentum solve
    solve = None
    if derived_P:
        rows = sorted(constraint_rows)
        cols = sorted(derived_P)
        if len(rows) != len(cols):
            raise SchemeError(
                f"{len(cols)} derived momentum components but {len(rows)} "
                "spatial constraint rows")
        A = np.zeros((len(rows), len(cols)))
        for i, row in enumerate(rows):
            for j, col in enumerate(cols):
                A[i, j] = M.get(row, {}).get(col, 0.0)
            for pkey, coeff in M.get(row, {}).items():
                if pkey in stepped_P and coeff != 0.0:
                    raise SchemeError(
                        "spatial dC rows mix stepped and derived momenta")
        if abs(np.linalg.det(A)) < 1e-12:
            raise SchemeError("derived-momentum block is singular")
        solve = (rows, cols, np.linalg.inv(A))

    grid_spacing = model.grid(4, 1.0).spacing
    spatial_shape = tuple(model.spatial_sizes)

    force_fast = {}
    if model.rank == 0:
        for row, poly in force.items():
            fast = _univariate_coeffs(poly, model, p)
            if fast is not None:
                force_fast[row] = fast
    h_exp = expand_components(model.hamiltonian, model)
    h_density = h_exp.get(tuple(range(n)), _zero_poly())

    return CompiledScheme(
        model=model, eqs=eqs, params=p,
        stepped_C=stepped_C, gauge_C=gauge_C,
        stepped_P=stepped_P, derived_P=derived_P,
        M=M, force=force, force_fast=force_fast,
        tags_C=tags_C, tags_P=tags_P,
        solve_matrix=solve, spatial_shape=spatial_shape,
        spacing=grid_spacing,
        time_rows=time_rows, constraint_rows=constraint_rows,
        gauss_rows=gauss_rows, h_density=h_density,
    )


def _zero_poly():
    from .calculus import ComponentPoly
    return ComponentPoly()


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _init_arrays(keys, shape, spec):
    out = {}
    spec = spec or {}
    for k in keys:
        v = spec.get(k, 0.0)
        arr = np.asarray(v, dtype=float)
        if arr.shape != shape:
            arr = np.broadcast_to(arr, shape).copy()
        else:
            arr = arr.copy()
        out[k] = arr
    return out


def advance_step(compiled: CompiledScheme, state: SimState, dt: float) -> SimState:
    """One step of the staggered update (kick with the dP row values, then
    drift with the dC row values). symplectic_euler co-locates both."""
    C = {k: v for k, v in state.C.items()}
    P = {k: v for k, v in state.P.items()}
    kick = compiled.kick_rhs(C)
    for k in compiled.stepped_P:
        P[k] = P[k] + dt * kick[k]
    drift = compiled.drift_rhs(P)
    for k in compiled.stepped_C:
        C[k] = C[k] + dt * drift[k]
    return SimState(state.step + 1, state.t + dt, C, P, state.scheme)


def run_simulation(model: ModelSpec, cfg: SimConfig, params=None) -> SimResult:
    """Advance the model `cfg.steps` times, recording every
    `cfg.record_every` steps. Deterministic given the configuration.

    Recorded momentum arrays hold the post-kick (half-step) values; the
    energy series uses time-centred momenta.
    """
    compiled = compile_scheme(model, cfg.scheme, params)
    n = model.dim
    if n > 1:
        hmin = min(compiled.spacing[1:])
        if cfg.dt > hmin + 1e-15:
            if not cfg.cfl_override:
                raise SchemeError(
                    f"dt={cfg.dt} exceeds the minimum spatial spacing {hmin}; "
                    "pass cfl_override to proceed")
            warnings.warn("dt exceeds the spatial spacing bound; the scheme "
                          "may be unstable", RuntimeWarning)
    shape = compiled.spatial_shape
    C = _init_arrays(compiled.stepped_C, shape, cfg.initial_C)
    P = _init_arrays(compiled.stepped_P, shape, cfg.initial_P)
    if cfg.scheme in ("leapfrog", "yee") and not cfg.staggered_init:
        kick = compiled.kick_rhs(C)
        for k in compiled.stepped_P:
            P[k] = P[k] - 0.5 * cfg.dt * kick[k]

    trajectory = []
    times = []
    energies = []
    centered_list = []
    gauss = {row: [] for row in compiled.gauss_rows}
    state = SimState(0, 0.0, C, P, cfg.scheme)
    staggered = cfg.scheme in ("leapfrog", "yee")

    for step in range(cfg.steps):
        new_state = advance_step(compiled, state, cfg.dt)
        if step % cfg.record_every == 0:
            # record field at integer time; momentum post-kick (half step
            # ahead) for staggered schemes, co-timed for symplectic Euler
            rec_P = new_state.P if staggered else state.P
            rec = SimState(state.step, state.t,
                           {k: v.copy() for k, v in state.C.items()},
                           {k: v.copy() for k, v in rec_P.items()},
                           cfg.scheme)
            trajectory.append(rec)
            times.append(state.t)
            if staggered:
                centered = {k: 0.5 * (state.P[k] + new_state.P[k])
                            for k in state.P}
            else:
                centered = {k: v.copy() for k, v in state.P.items()}
            centered_list.append(centered)
            e = compiled.energy_density(state.C, centered)
            energies.append(_integrate_spatial(e, compiled))
            res = compiled.constraint_residual(rec_P)
            for row, arr in res.items():
                gauss[row].append(float(np.max(np.abs(arr))))
        if step % 64 == 0:
            for arr in new_state.C.values():
                if not np.all(np.isfinite(arr)):
                    raise SimulationDiverged(step)
        state = new_state

    for arr in state.C.values():
        if not np.all(np.isfinite(arr)):
            raise SimulationDiverged(cfg.steps)
    return SimResult(
        trajectory=trajectory,
        times=np.asarray(times),
        energy=np.asarray(energies),
        constraint_residuals={row: np.asarray(v) for row, v in gauss.items()},
        model=model,
        config=cfg,
        centered=centered_list,
    )


def _integrate_spatial(density, compiled):
    cell = 1.0
    for h in compiled.spacing[1:]:
        cell *= h
    arr = density + np.zeros(compiled.spatial_shape)
    return float(np.sum(arr)) * cell


# ---------------------------------------------------------------------------
# tangent (linearised) flow
# ---------------------------------------------------------------------------

def run_tangent(model: ModelSpec, cfg: SimConfig, base: SimResult,
                dC0, dP0, params=None):
    """Integrate the linearisation of the discrete flow around a recorded
    base run, with the same scheme and steps. The force Jacobian is exact
    (polynomial differentiation), so for linear models the tangent flow
    is the exact variation of the discrete map.

    Requires the base run recorded every step.
    """
    if cfg.record_every != 1:
        raise SchemeError("tangent stepping needs record_every=1")
    compiled = compile_scheme(model, cfg.scheme, params)
    shape = compiled.spatial_shape
    dC = _init_arrays(compiled.stepped_C, shape, dC0)
    dP = _init_arrays(compiled.stepped_P, shape, dP0)
    if cfg.scheme in ("leapfrog", "yee") and not cfg.staggered_init:
        base_C = base.trajectory[0].C
        kick = compiled.kick_rhs(dC, jacobian_at=base_C)
        for k in compiled.stepped_P:
            dP[k] = dP[k] - 0.5 * cfg.dt * kick[k]
    out = []
    for step in range(len(base.trajectory)):
        base_C = base.trajectory[step].C
        kick = compiled.kick_rhs(dC, jacobian_at=base_C)
        newP = {k: dP[k] + cfg.dt * kick[k] for k in compiled.stepped_P}
        drift = compiled.drift_rhs(newP)
        newC = {k: dC[k] + cfg.dt * drift[k] for k in compiled.stepped_C}
        out.append(SimState(step, step * cfg.dt,
                            {k: v.copy() for k, v in dC.items()},
                            {k: v.copy() for k, v in newP.items()},
                            cfg.scheme))
        dC, dP = newC, newP
    return out


# ---------------------------------------------------------------------------
# full-grid assembly
# ---------------------------------------------------------------------------

def assemble_history(model: ModelSpec, result_or_states, dt, params=None,
                     scheme="leapfrog"):
    """Stack recorded slices into a spacetime history with staggering tags.

    Field components carry their spatial tags with integer time; stepped
    momentum components sit at half time steps; momentum components that
    carry the time axis are recomputed from the field slice by slice.
    """
    states = result_or_states.trajectory \
        if isinstance(result_or_states, SimResult) else result_or_states
    if isinstance(result_or_states, SimResult):
        scheme = result_or_states.config.scheme
    compiled = compile_scheme(model, scheme, params)
    n = model.dim
    T = len(states)
    grid = model.grid(T, T * dt)

    c_comps, c_offs = {}, {}
    for key in compiled.stepped_C:
        arr = np.stack([s.C[key] for s in states])
        c_comps[key] = arr
        c_offs[key] = (0,) + compiled.tags_C[key]
    C = Form(grid, model.rank, c_comps, c_offs)

    p_comps, p_offs = {}, {}
    for key in compiled.stepped_P:
        arr = np.stack([s.P[key] for s in states])
        p_comps[key] = arr
        p_offs[key] = (1,) + compiled.tags_P[key]
    for key in compiled.derived_P:
        slices = [compiled.derived_momentum(s.C)[key] for s in states]
        p_comps[key] = np.stack(slices)
        p_offs[key] = (0,) + compiled.tags_P[key]
    P = Form(grid, model.momentum_grade, p_comps, p_offs)
    return HamiltonianHistory(C, P)
