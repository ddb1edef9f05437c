"""Command line: derive | simulate | diagnose | check-identities.

Exit codes: 0 success; 2 model-file syntax error; 3 grade or symbol
error; 4 simulation failure (divergence, step-size bound); 5 diagnostics
outside tolerance; 6 identity-check failure; 1 anything else.

Configuration precedence: command-line flags, then the model file's
simulate block, then built-in defaults. HISTODYN_THREADS caps the
data-parallel width of the sample loops.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from . import checks
from .calculus import partial_wrt_C
from .diagnostics import (
    ConservationReport,
    Symmetry,
    bracket_onshell_check,
    centered_residual,
    hypersurface_independence,
    linearize,
    noether_current,
)
from .dynamics import (
    DynamicsError,
    euler_lagrange,
    hamilton_equations,
    conjugate_momentum,
    legendre_transform,
    onshell_residual,
)
from .expr import ExprError, GradeError, UnknownSymbolError, Zero, evaluate
from .forms import exterior_derivative
from .history import random_history
from .integrators import (
    SchemeError,
    SimConfig,
    SimulationDiverged,
    assemble_history,
    run_simulation,
)
from .model import ModelError, ModelSpec
from .modelfile import (
    ModelSyntaxError,
    eval_scalar_expr,
    parse_model,
    print_expr,
)
from .report import write_csv, write_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SYNTAX = 2
EXIT_GRADE = 3
EXIT_SIMULATION = 4
EXIT_TOLERANCE = 5
EXIT_IDENTITY = 6

_BUILTIN_DEFAULTS = {"scheme": "leapfrog", "dt": 1e-2, "steps": 200,
                     "record_every": 1, "initial_C": "0.0", "initial_P": "0.0"}


@dataclass
class CommandResult:
    """Outcome of one subcommand: exit code 0 iff every requested check
    passed its tolerance, the artifacts written, and a printable summary."""

    exit_code: int
    artifacts: tuple = ()
    summary: str = ""


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
        if result.summary:
            print(result.summary)
        return result.exit_code
    except ModelSyntaxError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SYNTAX
    except (GradeError, UnknownSymbolError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GRADE
    except (SchemeError, SimulationDiverged) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SIMULATION
    except (ExprError, DynamicsError, ModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def _build_parser():
    p = argparse.ArgumentParser(
        prog="histodyn",
        description="Covariant Hamiltonian dynamics: derive evolution "
                    "equations, integrate them, and verify conservation.")
    sub = p.add_subparsers(required=True)

    def common(sp):
        sp.add_argument("model", help="model description file")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--steps", type=int)
        sp.add_argument("--scheme", choices=("symplectic_euler", "leapfrog", "yee"))
        sp.add_argument("--out")
        sp.add_argument("--tolerance", type=float)
        sp.add_argument("--seed", type=int, default=0)

    d = sub.add_parser("derive", help="print the evolution equations")
    common(d)
    d.set_defaults(func=cmd_derive)

    s = sub.add_parser("simulate", help="integrate and write a CSV trajectory")
    common(s)
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("diagnose", help="run conservation diagnostics, write JSON")
    common(g)
    g.set_defaults(func=cmd_diagnose)

    c = sub.add_parser("check-identities",
                       help="run the form-calculus property suites")
    common(c)
    c.add_argument("--samples", type=int, default=100)
    c.set_defaults(func=cmd_check_identities)
    return p


def _load_model(args) -> ModelSpec:
    with open(args.model) as fh:
        return parse_model(fh.read())


def _config(model, args):
    merged = dict(_BUILTIN_DEFAULTS)
    merged.update(model.defaults)
    if args.dt is not None:
        merged["dt"] = args.dt
    if args.steps is not None:
        merged["steps"] = args.steps
    if args.scheme is not None:
        merged["scheme"] = args.scheme
    return merged


def _initial_arrays(model, merged, key):
    """Evaluate an initial-condition expression on the spatial grid."""
    text = str(merged.get(key, "0.0"))
    names = dict(model.params)
    names["L"] = model.spatial_extents[0] if model.spatial_extents else 1.0
    if model.dim > 1:
        g = model.grid(2, 1.0)
        for ax in range(1, model.dim):
            c = g.coordinate_array(ax)[0]
            names[f"x{ax}"] = c
    val = eval_scalar_expr(text, names)
    return val


def _sim_config(model, merged):
    shape = tuple(model.spatial_sizes)
    init_C = _initial_arrays(model, merged, "initial_C")
    init_P = _initial_arrays(model, merged, "initial_P")
    c_spec = {}
    p_spec = {}
    from . import multiindex as mi
    for k in mi.canonical_indices(model.dim, model.rank):
        if 0 not in k:
            c_spec[k] = np.broadcast_to(np.asarray(init_C, dtype=float), shape)
    for k in mi.canonical_indices(model.dim, model.momentum_grade):
        if 0 not in k:
            p_spec[k] = np.broadcast_to(np.asarray(init_P, dtype=float), shape)
    return SimConfig(
        dt=float(merged["dt"]),
        steps=int(merged["steps"]),
        scheme=str(merged["scheme"]),
        record_every=int(merged.get("record_every", 1)),
        initial_C=c_spec,
        initial_P=p_spec,
    )


# ---------------------------------------------------------------------------
# derive
# ---------------------------------------------------------------------------

def cmd_derive(args):
    model = _load_model(args)
    lines = _derive_lines(model, seed=args.seed)
    text = "\n".join(lines) + "\n"
    print(text, end="")
    artifacts = ()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        artifacts = (args.out,)
    ok = "[ok]" in text or "legendre" not in text
    return CommandResult(EXIT_OK if ok else EXIT_TOLERANCE, artifacts)


def _derive_lines(model, seed=0):
    sig = "".join("+" if s > 0 else "-" for s in model.signature)
    lines = [f"model {model.name}: dim={model.dim}, rank={model.rank}, "
             f"signature={sig}"]
    work = model
    if work.hamiltonian is None:
        work = legendre_transform(work)
    lines.append(f"hamiltonian: {print_expr(work.hamiltonian, work)}")
    eqs = hamilton_equations(work)
    fs, ms = model.field_symbol, model.momentum_symbol
    lines.append("evolution equations:")
    lines.append(f"  d{fs} = {print_expr(eqs.rhs_for_dC, work)}")
    lines.append(f"  d{ms} = {print_expr(eqs.rhs_for_dP, work)}")
    lines.append("identities:")
    for ident in eqs.identities:
        lines.append(f"  {ident}")
    if model.lagrangian is not None:
        lines.append(f"lagrangian: {print_expr(model.lagrangian, model)}")
        P = conjugate_momentum(model.lagrangian, model)
        lines.append(f"conjugate momentum: {ms} = {print_expr(P, model)}")
        el = euler_lagrange(model.lagrangian, model)
        lines.append(f"euler-lagrange residual: {print_expr(el, model)}")
        gap = _roundtrip_gap(model, work, seed)
        verdict = "ok" if gap < 1e-10 else "FAILED"
        lines.append(f"legendre round trip: max rel gap {gap:.2e} over "
                     f"20 random histories [{verdict}]")
    return lines


def _roundtrip_gap(model, work, seed, samples=20):
    """Hamiltonian-side residual against the EL residual on random
    histories, after eliminating the momentum."""
    rng = np.random.default_rng(seed)
    sizes = tuple(min(s, 12) for s in model.spatial_sizes)
    small = ModelSpec(
        name=model.name, dim=model.dim, rank=model.rank,
        signature=model.signature, spatial_sizes=sizes,
        spatial_extents=model.spatial_extents or (),
        boundary=model.boundary, params=model.params,
        potentials=model.potentials, hamiltonian=work.hamiltonian,
        lagrangian=model.lagrangian, field_symbol=model.field_symbol,
        momentum_symbol=model.momentum_symbol)
    grid = small.grid(12, 1.0)
    P_expr = conjugate_momentum(small.lagrangian, small)
    dHdC = partial_wrt_C(small.hamiltonian, small)
    el = euler_lagrange(small.lagrangian, small)
    eps_c = (-1.0) ** small.rank
    worst = 0.0
    for _ in range(samples):
        y = random_history(grid, small.rank, rng)
        res_H = exterior_derivative(evaluate(P_expr, y, small))
        if not isinstance(dHdC, Zero):
            res_H = res_H + evaluate(dHdC, y, small)
        el_eval = evaluate(el, y, small)
        gap = (res_H + el_eval * eps_c).max_abs()
        denom = max(el_eval.max_abs(), 1e-30)
        worst = max(worst, gap / denom)
    return worst


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    model = _load_model(args)
    merged = _config(model, args)
    work = model if model.hamiltonian is not None else legendre_transform(model)
    cfg = _sim_config(work, merged)
    result = run_simulation(work, cfg)
    rows, header = _csv_rows(work, result)
    out = args.out or f"{model.name}_trajectory.csv"
    write_csv(out, header, rows)
    return CommandResult(EXIT_OK, (out,), f"wrote {out} ({len(rows)} rows)")


def _csv_rows(model, result):
    if model.dim == 1:
        header = ["step", "t", "q", "p", "energy"]
        rows = []
        for i, s in enumerate(result.trajectory):
            rows.append([s.step, s.t, float(s.C[()]),
                         float(result.centered[i][()]), float(result.energy[i])])
        return rows, header
    # for field models the last column is the integrated generator
    # density, a diagnostic rather than the conserved field energy
    header = ["step", "t", "C_l2", "P_l2", "h_int"]
    cell = 1.0
    g = model.grid(2, 1.0)
    for h in g.spacing[1:]:
        cell *= h
    rows = []
    for i, s in enumerate(result.trajectory):
        c2 = sum(float(np.sum(v * v)) for v in s.C.values()) * cell
        p2 = sum(float(np.sum(v * v)) for v in result.centered[i].values()) * cell
        rows.append([s.step, s.t, float(np.sqrt(c2)), float(np.sqrt(p2)),
                     float(result.energy[i])])
    return rows, header


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------

def cmd_diagnose(args):
    model = _load_model(args)
    merged = _config(model, args)
    merged["record_every"] = 1
    tolerance = args.tolerance if args.tolerance is not None else 1e-10
    report = run_diagnose(model, merged, tolerance, seed=args.seed)
    out = args.out or f"{model.name}_report.json"
    write_json(out, report.to_json_dict())
    status = "pass" if report.passed else "FAIL"
    return CommandResult(EXIT_OK if report.passed else EXIT_TOLERANCE,
                         (out,), f"wrote {out} [{status}]")


def run_diagnose(model, merged, tolerance=1e-10, seed=0) -> ConservationReport:
    rng = np.random.default_rng(seed)
    work = model if model.hamiltonian is not None else legendre_transform(model)
    cfg = _sim_config(work, merged)
    base = run_simulation(work, cfg)
    dt = cfg.dt
    y = assemble_history(work, base, dt)
    eqs = hamilton_equations(work)

    residuals = onshell_residual(y, eqs, work)
    res_centered = centered_residual(y, eqs, work)

    # symplectic pairing of two tangent solutions
    d1C, d1P, d2C, d2P = _pairing_seeds(work, cfg)
    t1 = linearize(work, cfg, base, d1C, d1P)
    t2 = linearize(work, cfg, base, d2C, d2P)
    n_rec = len(t1.states)
    slices = sorted({1, n_rec // 4, n_rec // 2, (3 * n_rec) // 4, n_rec - 1})
    pairing = hypersurface_independence(t1, t2, slices, "staggered")
    pairing_pass = pairing["max_rel_spread"] < tolerance

    # noether current: time translation for time dynamics, else the first
    # spatial translation
    noether = {"available": model.lagrangian is not None}
    noether_pass = True
    if model.lagrangian is not None:
        axis = 0 if model.dim == 1 else 1
        on = noether_current(model, Symmetry("translation", axis), y)
        y_off = random_history(y.grid, model.rank, rng, smooth=True)
        off = noether_current(model, Symmetry("translation", axis), y_off)
        ratio = on["dj_norm"] / max(off["dj_norm"], 1e-300)
        noether_pass = ratio <= 1e-3
        noether.update({
            "axis": axis,
            "dj_onshell": on["dj_norm"],
            "dj_offshell": off["dj_norm"],
            "ratio": ratio,
            "pass": noether_pass,
        })

    # convergence of the centred residual under dt (and h) halving
    fine_model, fine_merged = _refined(model, merged)
    fine_work = fine_model if fine_model.hamiltonian is not None \
        else legendre_transform(fine_model)
    fine_cfg = _sim_config(fine_work, fine_merged)
    fine = run_simulation(fine_work, fine_cfg)
    y_fine = assemble_history(fine_work, fine, fine_cfg.dt)
    fine_res = centered_residual(y_fine, hamilton_equations(fine_work), fine_work)
    ratios = {}
    for key in ("res_C", "res_P"):
        # residuals at rounding level have nothing left to converge
        denom = fine_res[key]
        ratios[key] = res_centered[key] / denom if denom > 1e-12 else None
    conv_pass = all(r is None or 2.5 < r < 6.0 for r in ratios.values())

    bracket_rec = bracket_onshell_check(work, y, tolerance=1e-6)

    passed = bool(pairing_pass and noether_pass and conv_pass
                  and bracket_rec["pass"])
    return ConservationReport(
        model=model.name,
        config={"dt": dt, "steps": cfg.steps, "scheme": cfg.scheme,
                "seed": seed, "tolerance": tolerance},
        residuals={"matched_stencil": residuals, "centered": res_centered,
                   "bracket_onshell": {k: v for k, v in bracket_rec.items()}},
        pairing={"slices": list(slices), "values": pairing["values"],
                 "hypersurface_spread": pairing["max_rel_spread"],
                 "tolerance": tolerance, "pass": pairing_pass},
        noether=noether,
        convergence={"centered_residual_coarse": res_centered,
                     "centered_residual_fine": fine_res,
                     "ratios": ratios, "pass": conv_pass},
        passed=passed,
    )


def _pairing_seeds(model, cfg):
    """Two tangent initialisations with a non-degenerate mutual pairing."""
    shape = tuple(model.spatial_sizes)
    if model.dim == 1:
        pattern = 1.0
    else:
        g = model.grid(2, 1.0)
        x1 = g.coordinate_array(1)[0]
        pattern = np.cos(2 * np.pi * x1 / model.spatial_extents[0])
    ckey = next(iter(cfg.initial_C))
    pkey = next(iter(cfg.initial_P))
    zero = np.zeros(shape)
    d1C = {ckey: np.broadcast_to(np.asarray(pattern), shape).copy()}
    d1P = {pkey: zero}
    d2C = {ckey: zero}
    d2P = {pkey: np.broadcast_to(np.asarray(pattern), shape).copy()}
    return d1C, d1P, d2C, d2P


def _refined(model, merged):
    from dataclasses import replace
    fine_sizes = tuple(2 * s for s in model.spatial_sizes)
    fine_model = replace(model, spatial_sizes=fine_sizes)
    fine_merged = dict(merged)
    fine_merged["dt"] = float(merged["dt"]) / 2
    fine_merged["steps"] = 2 * int(merged["steps"])
    return fine_model, fine_merged


# ---------------------------------------------------------------------------
# check-identities
# ---------------------------------------------------------------------------

def cmd_check_identities(args):
    _ = _load_model(args)  # validates the file even though checks are generic
    tolerance = args.tolerance if args.tolerance is not None else 1e-12
    rows = checks.run_all(seed=args.seed, samples=args.samples,
                          tolerance=tolerance)
    ok = True
    for name, gap, passed in rows:
        ok = ok and passed
        print(f"  {name:<40s} max gap {gap:.2e} [{'ok' if passed else 'FAIL'}]")
    artifacts = ()
    if args.out:
        write_json(args.out, {"tolerance": tolerance,
                              "results": [{"name": n, "gap": g, "pass": p}
                                          for n, g, p in rows],
                              "pass": ok})
        artifacts = (args.out,)
    summary = ("all checks passed" if ok else "CHECKS FAILED") \
        + f" (tolerance {tolerance:g})"
    return CommandResult(EXIT_OK if ok else EXIT_IDENTITY, artifacts, summary)


if __name__ == "__main__":
    sys.exit(main())
