"""Realisation of a phase-space history on a grid.

C is the field (grade r), P its conjugate momentum (grade n-r-1). The
auxiliary top form Pi is carried but inert; the coordinate maps X are
realised on demand from the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

from .forms import Form, FormError, random_form
from .grid import check_same_grid


@dataclass(frozen=True)
class HamiltonianHistory:
    C: Form
    P: Form
    Pi: Form = None

    def __post_init__(self):
        grid = check_same_grid(self.C.grid, self.P.grid)
        n = grid.dim
        r = self.C.grade
        if self.P.grade != n - r - 1:
            raise FormError(
                f"momentum grade {self.P.grade} does not match field rank {r} (n={n})")
        if self.Pi is None:
            object.__setattr__(self, "Pi", Form.zero(grid, n))
        elif self.Pi.grade != n:
            raise FormError(f"Pi must be a top form, got grade {self.Pi.grade}")

    @property
    def grid(self):
        return self.C.grid

    @property
    def rank(self):
        return self.C.grade

    def shifted(self, dC=None, dP=None, scale=1.0):
        C = self.C if dC is None else self.C + dC * scale
        P = self.P if dP is None else self.P + dP * scale
        return HamiltonianHistory(C, P, self.Pi)

    def coordinate_map(self, axis):
        """X^axis realised as a grade-0 form."""
        return Form.scalar(self.grid, self.grid.coordinate_array(axis))


def random_history(grid, rank, rng, smooth=False, amplitude=1.0):
    return HamiltonianHistory(
        random_form(grid, rank, rng, smooth=smooth, amplitude=amplitude),
        random_form(grid, grid.dim - rank - 1, rng, smooth=smooth, amplitude=amplitude),
    )
