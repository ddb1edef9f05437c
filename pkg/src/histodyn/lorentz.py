"""Internal Lorentz-index layer: indexed families of forms and the
epsilon/eta contraction identities for cotetrad-type data.

The internal space is four dimensional with eta = diag(+1,-1,-1,-1) and
eps_{0123} = +1. Antisymmetric index pairs are stored for I < J only; the
I > J entry is minus the stored one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field


from .forms import Form, FormError, wedge

INTERNAL_DIM = 4
ETA = (1.0, -1.0, -1.0, -1.0)


def eps4(i, j, k, l):
    idx = (i, j, k, l)
    if len(set(idx)) != 4:
        return 0
    sign = 1
    a = list(idx)
    for x in range(4):
        for y in range(3 - x):
            if a[y] > a[y + 1]:
                a[y], a[y + 1] = a[y + 1], a[y]
                sign = -sign
    return sign


@dataclass
class IndexedFormSet:
    """Mapping from internal index tuples to forms of a common grade.

    rank 1 holds vectors e^I; rank 2 holds antisymmetric pairs w^{IJ}
    (stored I < J).
    """

    rank: int
    members: dict = field(default_factory=dict)

    def __post_init__(self):
        grades = {f.grade for f in self.members.values()}
        grids = {id(f.grid) for f in self.members.values()}
        if len(grades) > 1 or len(grids) > 1:
            raise FormError("indexed set members must share grade and grid")

    @staticmethod
    def vector(forms):
        """e^I for I = 0..3."""
        forms = list(forms)
        if len(forms) != INTERNAL_DIM:
            raise FormError(f"need {INTERNAL_DIM} members, got {len(forms)}")
        return IndexedFormSet(1, {(i,): f for i, f in enumerate(forms)})

    @staticmethod
    def antisymmetric_pair(pairs):
        """w^{IJ} from a dict keyed by (I, J) with I < J."""
        members = {}
        for (i, j), f in pairs.items():
            if not (0 <= i < j < INTERNAL_DIM):
                raise FormError(f"pair {(i, j)} must satisfy 0 <= I < J < 4")
            members[(i, j)] = f
        return IndexedFormSet(2, members)

    def get(self, *idx):
        """Member with antisymmetry applied; missing entries are zero."""
        if self.rank == 1:
            return self.members[idx]
        i, j = idx
        if i == j:
            return self._zero()
        if i < j:
            f = self.members.get((i, j))
            return f if f is not None else self._zero()
        f = self.members.get((j, i))
        return -f if f is not None else self._zero()

    def _zero(self):
        any_form = next(iter(self.members.values()))
        return Form.zero(any_form.grid, any_form.grade)

    @property
    def grid(self):
        return next(iter(self.members.values())).grid

    @property
    def grade(self):
        return next(iter(self.members.values())).grade


def _lowered(w: IndexedFormSet, upper, lower):
    """w^upper_lower = w^{upper, lower} * eta_{lower, lower}."""
    return w.get(upper, lower) * ETA[lower]


def tetrad_identity_lhs(e: IndexedFormSet, w: IndexedFormSet, a: int, b: int) -> Form:
    """sum_{I,J,K} eps_{JKab} e^J ^ e^I ^ w^K_I   (a 3-form)."""
    grid = e.grid
    out = Form.zero(grid, 3)
    for j, k in itertools.permutations(range(4), 2):
        s = eps4(j, k, a, b)
        if s == 0:
            continue
        for i in range(4):
            term = wedge(wedge(e.get(j), e.get(i)), _lowered(w, k, i))
            out = out + term * s
    return out


def tetrad_identity_rhs(e: IndexedFormSet, w: IndexedFormSet, a: int, b: int) -> Form:
    """(1/2) [ sum eps_{JaMN} e^M ^ e^N ^ w^J_b  -  (a <-> b) ]."""
    def half(x, y):
        grid = e.grid
        acc = Form.zero(grid, 3)
        for j in range(4):
            for m, n in itertools.permutations(range(4), 2):
                s = eps4(j, x, m, n)
                if s == 0:
                    continue
                acc = acc + wedge(wedge(e.get(m), e.get(n)), _lowered(w, j, y)) * s
        return acc
    return (half(a, b) - half(b, a)) * 0.5


def tetrad_quadratic_lhs(e: IndexedFormSet, w: IndexedFormSet) -> Form:
    """sum eps_{IJKL} e^I ^ e^J ^ w^K_A ^ w^{AL}   (a 4-form)."""
    grid = e.grid
    out = Form.zero(grid, 4)
    for i, j, k, l in itertools.permutations(range(4)):
        s = eps4(i, j, k, l)
        ee = wedge(e.get(i), e.get(j))
        for a in range(4):
            out = out + wedge(wedge(ee, _lowered(w, k, a)), w.get(a, l)) * s
    return out


def tetrad_quadratic_rhs(e: IndexedFormSet, w: IndexedFormSet) -> Form:
    """sum eps_{JKMN} e^I ^ e^J ^ w^K_I ^ w^{MN}."""
    grid = e.grid
    out = Form.zero(grid, 4)
    for j, k, m, n in itertools.permutations(range(4)):
        s = eps4(j, k, m, n)
        for i in range(4):
            out = out + wedge(wedge(wedge(e.get(i), e.get(j)),
                                    _lowered(w, k, i)), w.get(m, n)) * s
    return out


def verify_tetrad_identities(e: IndexedFormSet, w: IndexedFormSet):
    """Evaluate both sides of the two contraction identities on the grid.

    Returns a dict with the per-side forms and the maximum componentwise
    gap across both identities and all free index pairs.
    """
    if e.rank != 1 or len(e.members) != INTERNAL_DIM:
        raise FormError("e must be an internal vector of four forms")
    if w.rank != 2:
        raise FormError("w must be an antisymmetric internal pair set")
    lhs16 = {}
    rhs16 = {}
    gap = 0.0
    for a, b in itertools.combinations(range(4), 2):
        l = tetrad_identity_lhs(e, w, a, b)
        r = tetrad_identity_rhs(e, w, a, b)
        lhs16[(a, b)] = l
        rhs16[(a, b)] = r
        gap = max(gap, (l - r).max_abs())
    l17 = tetrad_quadratic_lhs(e, w)
    r17 = tetrad_quadratic_rhs(e, w)
    gap = max(gap, (l17 - r17).max_abs())
    return {
        "lhs16": lhs16,
        "rhs16": rhs16,
        "lhs17": l17,
        "rhs17": r17,
        "max_abs_gap": gap,
    }
