"""Exterior algebra and discrete exterior calculus on a DomainGrid.

A grade-r form stores one value array per strictly increasing multi-index
(C(n, r) arrays, all of grid shape). Each component carries a per-axis
staggering tag (0 co-located, 1 half-cell); co-located data is the default
and the algebraic laws are exact there. The discrete exterior derivative
differences forward on co-located axes and backward on staggered ones, so
that d maps between staggered slots and d.d vanishes identically on
periodic grids.

Orientation conventions fixed here and relied on everywhere else:
eps_{01...n-1} = +1 and Vol = dx^0 ^ ... ^ dx^{n-1}.
"""

from __future__ import annotations

import numpy as np

from . import multiindex as mi
from .grid import FIXED, PERIODIC, DomainGrid, Region, check_same_grid


class FormError(ValueError):
    pass


class Form:
    """Grade-r differential form with dense per-component storage.

    Forms are value objects: operations return new instances and never
    mutate their inputs.
    """

    __slots__ = ("grid", "grade", "comps", "offsets")

    def __init__(self, grid: DomainGrid, grade: int, comps=None, offsets=None):
        if not 0 <= grade <= grid.dim:
            raise FormError(f"grade {grade} out of range for dim {grid.dim}")
        self.grid = grid
        self.grade = grade
        keys = mi.canonical_indices(grid.dim, grade)
        self.comps = {}
        self.offsets = {}
        comps = comps or {}
        offsets = offsets or {}
        for k in keys:
            arr = comps.get(k)
            if arr is None:
                arr = np.zeros(grid.sizes)
            else:
                arr = np.asarray(arr, dtype=float)
                if arr.shape == ():
                    arr = np.full(grid.sizes, float(arr))
                if arr.shape != tuple(grid.sizes):
                    raise FormError(
                        f"component {k} has shape {arr.shape}, grid is {grid.sizes}")
            self.comps[k] = arr
            self.offsets[k] = tuple(offsets.get(k, (0,) * grid.dim))

    # ---- constructors -------------------------------------------------

    @staticmethod
    def zero(grid, grade):
        return Form(grid, grade)

    @staticmethod
    def scalar(grid, values):
        return Form(grid, 0, {(): values})

    @staticmethod
    def constant(grid, value=1.0):
        return Form(grid, 0, {(): np.full(grid.sizes, float(value))})

    @staticmethod
    def monomial(grid, axes, values=1.0, offsets=None):
        """values * dx^axes, canonicalising the axis order."""
        key, sign = mi.sort_sign(axes)
        if sign == 0:
            return Form.zero(grid, len(set(axes)))
        arr = np.asarray(values, dtype=float)
        if arr.shape == ():
            arr = np.full(grid.sizes, float(arr))
        off = {key: offsets} if offsets is not None else None
        return Form(grid, len(key), {key: sign * arr}, off)

    @staticmethod
    def volume(grid):
        return Form.monomial(grid, tuple(range(grid.dim)))

    @staticmethod
    def volume_contracted(grid, axes):
        """Vol_axes: Vol contracted with the listed axis vectors, first
        axis innermost, equal to eps(axes, complement) dx^complement."""
        f = Form.volume(grid)
        for a in axes:
            f = interior_product(a, f)
        return f

    # ---- value-object plumbing ----------------------------------------

    def copy(self):
        return Form(self.grid, self.grade,
                    {k: v.copy() for k, v in self.comps.items()}, dict(self.offsets))

    def component(self, axes):
        key, sign = mi.sort_sign(axes)
        if sign == 0:
            return np.zeros(self.grid.sizes)
        return sign * self.comps[key]

    def map(self, fn):
        return Form(self.grid, self.grade,
                    {k: fn(v) for k, v in self.comps.items()}, dict(self.offsets))

    def __add__(self, other):
        if not isinstance(other, Form):
            return NotImplemented
        check_same_grid(self.grid, other.grid)
        if self.grade != other.grade:
            raise FormError(f"cannot add grades {self.grade} and {other.grade}")
        comps = {}
        offsets = {}
        for k in self.comps:
            a, b = self.comps[k], other.comps[k]
            oa, ob = self.offsets[k], other.offsets[k]
            if oa != ob:
                # uniform components carry no site information
                if _is_uniform(a):
                    oa = ob
                elif _is_uniform(b):
                    ob = oa
                else:
                    raise FormError(
                        f"component {k}: staggering {oa} vs {ob}; align explicitly")
            comps[k] = a + b
            offsets[k] = oa
        return Form(self.grid, self.grade, comps, offsets)

    def retag(self, offsets):
        """Replace staggering tags (metadata only, no interpolation).

        `offsets` maps component keys to tag tuples; omitted keys keep
        their tags.
        """
        new = dict(self.offsets)
        for k, off in offsets.items():
            key, sign = mi.sort_sign(k)
            if sign == 0:
                continue
            new[key] = tuple(off)
        return Form(self.grid, self.grade, self.comps, new)

    def align_to(self, offsets):
        """Interpolate every component to the given tags (2-point averages)."""
        comps = {}
        new = {}
        for k, arr in self.comps.items():
            target = tuple(offsets.get(k, self.offsets[k]))
            comps[k] = _align(arr, self.offsets[k], target)
            new[k] = target
        return Form(self.grid, self.grade, comps, new)

    @property
    def colocated(self):
        return all(not any(o) for o in self.offsets.values())

    def __sub__(self, other):
        return self + (other * -1.0)

    def __mul__(self, scalar):
        s = float(scalar)
        return Form(self.grid, self.grade,
                    {k: v * s for k, v in self.comps.items()}, dict(self.offsets))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def max_abs(self):
        return max((float(np.max(np.abs(v))) for v in self.comps.values()), default=0.0)

    def l2(self):
        total = sum(float(np.sum(v * v)) for v in self.comps.values())
        return float(np.sqrt(total * self.grid.cell_volume()))

    def allclose(self, other, atol=1e-12):
        return (self - other).max_abs() <= atol

    def __repr__(self):
        return f"Form(grade={self.grade}, dim={self.grid.dim})"


def _align(arr, from_off, to_off):
    """Move an array between staggering slots by 2-point averaging per axis."""
    out = arr
    for axis, (f, t) in enumerate(zip(from_off, to_off)):
        if f == t:
            continue
        if f == 1 and t == 0:
            out = 0.5 * (out + np.roll(out, 1, axis=axis))
        else:
            out = 0.5 * (out + np.roll(out, -1, axis=axis))
    return out


# ---- operations ---------------------------------------------------------

def _is_uniform(arr):
    return arr.size == 0 or float(np.min(arr)) == float(np.max(arr))


def wedge(a: Form, b: Form) -> Form:
    """Exterior product. Grade overflow yields the zero top form.

    Components on mismatched staggering sites are reconciled by 2-point
    averaging; uniform arrays are site-agnostic and simply adopt the
    other operand's tag.
    """
    grid = check_same_grid(a.grid, b.grid)
    grade = a.grade + b.grade
    if grade > grid.dim:
        return Form.zero(grid, grid.dim)
    comps = {}
    offsets = {}
    for ka, va in a.comps.items():
        if not va.any():
            continue
        for kb, vb in b.comps.items():
            if not vb.any():
                continue
            key, sign = mi.merge(ka, kb)
            if sign == 0:
                continue
            oa, ob = a.offsets[ka], b.offsets[kb]
            if ob != oa:
                if _is_uniform(vb):
                    ob = oa
                elif _is_uniform(va):
                    oa = ob
                else:
                    vb = _align(vb, ob, oa)
                    ob = oa
            acc = comps.get(key)
            term = sign * va * vb
            if acc is None:
                comps[key] = term
                offsets[key] = oa
            else:
                if offsets[key] != oa:
                    term = _align(term, oa, offsets[key])
                comps[key] = acc + term
    return Form(grid, grade, comps, offsets)


def exterior_derivative(a: Form) -> Form:
    """Discrete d.

    Fully co-located forms are differenced forward on every axis and stay
    co-located; d.d = 0 is then exact on periodic grids (and on fixed ones,
    where the final layer is one-sided). Staggered forms are differenced
    forward on tag-0 axes and backward on tag-1/2 axes, with the tag
    flipping on the differenced axis; contributions that disagree on the
    resulting tag indicate an inconsistent layout and raise.

    A top-grade input returns the zero top form (degenerate but valid).
    """
    grid = a.grid
    if a.grade >= grid.dim:
        return Form.zero(grid, grid.dim)
    h = grid.spacing
    flip = not a.colocated
    comps = {}
    offsets = {}
    for key, arr in a.comps.items():
        if not arr.any():
            continue
        off = a.offsets[key]
        for axis in range(grid.dim):
            if axis in key:
                continue
            dkey, sign = mi.merge((axis,), key)
            if sign == 0:
                continue
            d = sign * _diff(arr, axis, h[axis], off[axis], grid.boundary)
            noff = list(off)
            if flip:
                noff[axis] = 1 - off[axis]
            noff = tuple(noff)
            if dkey in comps:
                if offsets[dkey] != noff:
                    raise FormError(
                        f"inconsistent staggering feeding component {dkey}")
                comps[dkey] = comps[dkey] + d
            else:
                comps[dkey] = d
                offsets[dkey] = noff
    return Form(grid, a.grade + 1, comps, offsets)


def _diff(arr, axis, h, offset, boundary):
    if offset == 0:
        d = (np.roll(arr, -1, axis=axis) - arr) / h
        if boundary == FIXED:
            # keep the last layer one-sided rather than wrapped
            last = _take(arr, axis, -1)
            prev = _take(arr, axis, -2)
            _put(d, axis, -1, (last - prev) / h)
    else:
        if boundary == FIXED:
            raise FormError("staggered components require a periodic grid")
        d = (arr - np.roll(arr, 1, axis=axis)) / h
    return d


def _take(arr, axis, idx):
    sl = [slice(None)] * arr.ndim
    sl[axis] = idx
    return arr[tuple(sl)]


def _put(arr, axis, idx, values):
    sl = [slice(None)] * arr.ndim
    sl[axis] = idx
    arr[tuple(sl)] = values


def centered_derivative(a: Form) -> Form:
    """Second-order centred discrete d for fully co-located forms on
    periodic grids. Diagnostics use it where sampling consistency matters
    more than exact nilpotency."""
    grid = a.grid
    if not a.colocated:
        raise FormError("centered_derivative expects a co-located form")
    if grid.boundary != PERIODIC:
        raise FormError("centered_derivative expects a periodic grid")
    if a.grade >= grid.dim:
        return Form.zero(grid, grid.dim)
    h = grid.spacing
    comps = {}
    for key, arr in a.comps.items():
        if not arr.any():
            continue
        for axis in range(grid.dim):
            if axis in key:
                continue
            dkey, sign = mi.merge((axis,), key)
            d = sign * (np.roll(arr, -1, axis=axis)
                        - np.roll(arr, 1, axis=axis)) / (2 * h[axis])
            comps[dkey] = comps.get(dkey, 0.0) + d
    return Form(grid, a.grade + 1, comps)


def star_sign(axes, dim, signature):
    """Coefficient of dx^complement in star(dx^axes): permutation parity of
    (axes, complement) times the inverse-metric factors of `axes`."""
    comp = mi.complement(axes, dim)
    sign = mi.epsilon_sign(tuple(axes) + comp, dim)
    for a in axes:
        sign *= signature[a]
    return sign, comp


def hodge_star(a: Form) -> Form:
    """Metric dual: star(dx^I) = eps(I, I^c) * prod(eta^aa, a in I) * dx^I^c.

    Satisfies star(star(a)) = s * (-1)^(r(n-r)) * a with s the product of
    the signature entries. Staggering tags carry over per component.
    """
    grid = a.grid
    n = grid.dim
    comps = {}
    offsets = {}
    for key, arr in a.comps.items():
        sign, comp = star_sign(key, n, grid.signature)
        comps[comp] = sign * arr
        offsets[comp] = a.offsets[key]
    return Form(grid, n - a.grade, comps, offsets)


def interior_product(axis: int, a: Form) -> Form:
    """Contraction with the coordinate vector of `axis`; anti-derivation of
    degree -1. Grade-0 input gives zero."""
    grid = a.grid
    if not 0 <= axis < grid.dim:
        raise FormError(f"axis {axis} out of range for dim {grid.dim}")
    if a.grade == 0:
        return Form.zero(grid, 0)
    comps = {}
    offsets = {}
    for key, arr in a.comps.items():
        rest, sign = mi.contraction(axis, key)
        if sign == 0:
            continue
        comps[rest] = sign * arr
        offsets[rest] = a.offsets[key]
    return Form(grid, a.grade - 1, comps, offsets)


def integrate_region(a: Form, region: Region) -> float:
    """Riemann sum of a form over the full domain or a hypersurface slice.

    Full-domain integration needs a top form; slices take the component
    dual to the slice normal of an (n-1)-form. Fixed axes drop the final
    sample (left-point cells), periodic axes use every cell.
    """
    grid = a.grid
    n = grid.dim
    if region.kind == "full":
        if a.grade != n:
            raise FormError(f"full-domain integral needs grade {n}, got {a.grade}")
        arr = a.comps[tuple(range(n))]
        arr = _drop_last_fixed(arr, grid, skip_axis=None)
        return float(np.sum(arr)) * grid.cell_volume()
    if region.kind == "slice":
        if a.grade != n - 1:
            raise FormError(f"hypersurface integral needs grade {n - 1}, got {a.grade}")
        axis = region.axis
        if not 0 <= axis < n:
            raise FormError(f"slice axis {axis} out of range")
        if not 0 <= region.index < grid.sizes[axis]:
            raise FormError(f"slice index {region.index} out of range")
        key = mi.complement((axis,), n)
        arr = _take(a.comps[key], axis, region.index)
        arr = _drop_last_fixed(arr, grid, skip_axis=axis)
        measure = 1.0
        for ax in range(n):
            if ax != axis:
                measure *= grid.spacing[ax]
        return float(np.sum(arr)) * measure
    raise FormError(f"unknown region kind {region.kind!r}")


def _drop_last_fixed(arr, grid, skip_axis):
    if grid.boundary != FIXED:
        return arr
    sl = []
    for ax in range(grid.dim):
        if ax == skip_axis:
            continue
        sl.append(slice(None, -1))
    return arr[tuple(sl)] if sl else arr


def boundary_integral(a: Form) -> float:
    """Sum of oriented face integrals of an (n-1)-form over the box boundary.

    The face normal to axis mu carries the induced-orientation sign (-1)^mu,
    outward top minus bottom. On periodic grids every axis wraps and the
    result is zero up to rounding.
    """
    grid = a.grid
    total = 0.0
    for axis in range(grid.dim):
        if grid.boundary == PERIODIC:
            continue
        top = integrate_region(a, Region.hyperslice(axis, grid.sizes[axis] - 1))
        bot = integrate_region(a, Region.hyperslice(axis, 0))
        total += (-1) ** axis * (top - bot)
    return total


def random_form(grid, grade, rng, smooth=False, amplitude=1.0):
    """Random form with independent components; `smooth` superposes a few
    low Fourier modes instead of white noise (periodic grids)."""
    comps = {}
    for key in mi.canonical_indices(grid.dim, grade):
        if smooth:
            comps[key] = random_smooth_field(grid, rng, amplitude)
        else:
            comps[key] = rng.normal(scale=amplitude, size=grid.sizes)
    return Form(grid, grade, comps)


def random_smooth_field(grid, rng, amplitude=1.0, modes=3):
    """Band-limited random scalar samples on a periodic grid."""
    out = np.zeros(grid.sizes)
    for _ in range(modes):
        k = [rng.integers(-2, 3) for _ in range(grid.dim)]
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal(scale=amplitude / modes)
        phases = phase
        for ax in range(grid.dim):
            x = grid.coordinate_array(ax)
            phases = phases + 2 * np.pi * k[ax] * x / grid.extents[ax]
        out += amp * np.cos(phases)
    return out
