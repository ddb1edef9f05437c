"""Randomised property suites for the form calculus and the
internal-index identities. Shared by the command line and the tests.
"""

from __future__ import annotations

import itertools

import numpy as np

from .forms import (
    Form,
    boundary_integral,
    exterior_derivative,
    hodge_star,
    integrate_region,
    interior_product,
    random_form,
    wedge,
)
from .grid import Region, euclidean, minkowski
from .lorentz import IndexedFormSet, verify_tetrad_identities
from .util import parallel_map


def _grids(dims, size=4):
    out = []
    for n in dims:
        out.append(minkowski(n, (size,) * n, (1.0,) * n))
        out.append(euclidean(n, (size,) * n, (1.0,) * n))
    return out


def check_dd_zero(seed, samples, dims=(1, 2, 4)):
    rng = np.random.default_rng(seed)
    grids = _grids(dims)
    worst = 0.0
    for i in range(samples):
        grid = grids[i % len(grids)]
        r = int(rng.integers(0, grid.dim))
        a = random_form(grid, r, rng)
        worst = max(worst, exterior_derivative(exterior_derivative(a)).max_abs())
    return worst


def check_wedge_commutativity(seed, samples, dims=(1, 2, 4)):
    rng = np.random.default_rng(seed)
    grids = _grids(dims)
    worst = 0.0
    for i in range(samples):
        grid = grids[i % len(grids)]
        p = int(rng.integers(0, grid.dim + 1))
        q = int(rng.integers(0, grid.dim + 1 - p))
        a = random_form(grid, p, rng)
        b = random_form(grid, q, rng)
        gap = (wedge(a, b) - wedge(b, a) * ((-1.0) ** (p * q))).max_abs()
        worst = max(worst, gap)
    return worst


def check_double_star(seed, samples, dims=(1, 2, 4)):
    rng = np.random.default_rng(seed)
    grids = _grids(dims)
    worst = 0.0
    for i in range(samples):
        grid = grids[i % len(grids)]
        s = grid.metric_det_sign
        r = int(rng.integers(0, grid.dim + 1))
        a = random_form(grid, r, rng)
        expect = a * (s * (-1.0) ** (r * (grid.dim - r)))
        worst = max(worst, (hodge_star(hodge_star(a)) - expect).max_abs())
    return worst


def check_interior_antiderivation(seed, samples, dims=(2, 4)):
    rng = np.random.default_rng(seed)
    grids = _grids(dims)
    worst = 0.0
    for i in range(samples):
        grid = grids[i % len(grids)]
        p = int(rng.integers(1, grid.dim))
        q = int(rng.integers(1, grid.dim + 1 - p))
        axis = int(rng.integers(0, grid.dim))
        a = random_form(grid, p, rng)
        b = random_form(grid, q, rng)
        lhs = interior_product(axis, wedge(a, b))
        rhs = wedge(interior_product(axis, a), b) \
            + wedge(a, interior_product(axis, b)) * ((-1.0) ** p)
        worst = max(worst, (lhs - rhs).max_abs())
    return worst


def check_stokes(seed, samples=8, dims=(2, 3)):
    """|int_R da - int_dR a| on fixed-boundary grids with smooth data.

    The forward-difference calculus telescopes exactly, so the gap sits at
    rounding level, well inside the first-order bound.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(samples):
        n = dims[i % len(dims)]
        size = int(rng.integers(5, 9))
        grid = euclidean(n, (size,) * n, (1.0,) * n, boundary="fixed")
        comps = {}
        for key in itertools.combinations(range(n), n - 1):
            comps[key] = _smooth_fixed(grid, rng)
        a = Form(grid, n - 1, comps)
        lhs = integrate_region(exterior_derivative(a), Region.full())
        rhs = boundary_integral(a)
        worst = max(worst, abs(lhs - rhs))
    return worst


def _smooth_fixed(grid, rng):
    out = np.zeros(grid.sizes)
    for _ in range(2):
        coeffs = rng.normal(size=grid.dim)
        phase = rng.uniform(0, np.pi)
        acc = phase
        for ax in range(grid.dim):
            acc = acc + coeffs[ax] * grid.coordinate_array(ax)
        out += np.sin(acc)
    return out


def check_tetrad_identities(seed, samples, size=4):
    """Both epsilon/eta identities on random cotetrad-type data."""
    grid = minkowski(4, (size,) * 4, (1.0,) * 4)

    def one(i):
        rng = np.random.default_rng(seed + i)
        e = IndexedFormSet.vector([random_form(grid, 1, rng) for _ in range(4)])
        w = IndexedFormSet.antisymmetric_pair(
            {(a, b): random_form(grid, 1, rng)
             for a, b in itertools.combinations(range(4), 2)})
        return verify_tetrad_identities(e, w)["max_abs_gap"]

    return max(parallel_map(one, range(samples)))


def run_all(seed=0, samples=100, tolerance=1e-12):
    """Every suite with one (name, gap, ok) row per law."""
    rows = [
        ("d.d = 0", check_dd_zero(seed, samples)),
        ("wedge graded commutativity", check_wedge_commutativity(seed, samples)),
        ("double star sign law", check_double_star(seed, samples)),
        ("interior-product antiderivation",
         check_interior_antiderivation(seed, samples)),
        ("stokes boundary telescoping", check_stokes(seed)),
        ("tetrad pair identity + quadratic identity",
         check_tetrad_identities(seed, samples)),
    ]
    return [(name, gap, gap < tolerance) for name, gap in rows]
