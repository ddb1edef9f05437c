"""Discretised evolution domain: a rectangular grid with a flat diagonal metric.

Axis 0 is the evolution (time) axis by convention for the integrators; the
form calculus itself treats all axes alike. Spacing follows the cell model:
periodic axes have `size` cells covering `extent`, fixed axes have `size`
sample points spanning `extent` (size-1 cells).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PERIODIC = "periodic"
FIXED = "fixed"


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class DomainGrid:
    dim: int
    sizes: tuple
    extents: tuple
    signature: tuple
    boundary: str = PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "signature", tuple(int(s) for s in self.signature))
        if self.dim < 1:
            raise GridError(f"dim must be >= 1, got {self.dim}")
        for name, seq in (("sizes", self.sizes), ("extents", self.extents),
                          ("signature", self.signature)):
            if len(seq) != self.dim:
                raise GridError(f"{name} must have {self.dim} entries, got {len(seq)}")
        if any(s < 2 for s in self.sizes):
            raise GridError(f"all sizes must be >= 2, got {self.sizes}")
        if any(e <= 0 for e in self.extents):
            raise GridError(f"all extents must be > 0, got {self.extents}")
        if any(s not in (1, -1) for s in self.signature):
            raise GridError(f"signature entries must be +1/-1, got {self.signature}")
        if self.boundary not in (PERIODIC, FIXED):
            raise GridError(f"boundary must be periodic or fixed, got {self.boundary!r}")

    @property
    def spacing(self):
        if self.boundary == PERIODIC:
            return tuple(e / s for e, s in zip(self.extents, self.sizes))
        return tuple(e / (s - 1) for e, s in zip(self.extents, self.sizes))

    @property
    def shape(self):
        return self.sizes

    @property
    def metric_det_sign(self):
        s = 1
        for v in self.signature:
            s *= v
        return s

    def axis_coords(self, axis, offset=0):
        """Sample coordinates along one axis; offset=1 shifts by half a cell."""
        h = self.spacing[axis]
        base = np.arange(self.sizes[axis], dtype=float) * h
        if offset:
            base = base + 0.5 * h
        return base

    def coordinate_array(self, axis, offsets=None):
        """Coordinate function x^axis sampled on the full grid."""
        off = 0 if offsets is None else offsets[axis]
        c = self.axis_coords(axis, off)
        shape = [1] * self.dim
        shape[axis] = self.sizes[axis]
        return np.broadcast_to(c.reshape(shape), self.sizes).copy()

    def cell_volume(self):
        v = 1.0
        for h in self.spacing:
            v *= h
        return v


def check_same_grid(*grids):
    first = grids[0]
    for g in grids[1:]:
        if g is not first and g != first:
            raise GridError("operation mixes forms living on different grids")
    return first


def euclidean(dim, sizes, extents, boundary=PERIODIC):
    return DomainGrid(dim, tuple(sizes), tuple(extents), (1,) * dim, boundary)


def minkowski(dim, sizes, extents, boundary=PERIODIC):
    """Mostly-minus signature (+, -, ..., -)."""
    return DomainGrid(dim, tuple(sizes), tuple(extents),
                      (1,) + (-1,) * (dim - 1), boundary)


@dataclass(frozen=True)
class Region:
    """Integration region: the full domain or an axis-aligned hypersurface."""

    kind: str                    # "full" | "slice"
    axis: int = 0
    index: int = 0

    @staticmethod
    def full():
        return Region("full")

    @staticmethod
    def hyperslice(axis, index):
        return Region("slice", axis, index)
