"""Antisymmetric multi-index bookkeeping for form components.

Components of a grade-r form are stored per strictly increasing axis tuple.
Any unsorted construction is normalised here and the permutation parity is
returned as a sign; a repeated axis annihilates (sign 0).
"""

from __future__ import annotations

import itertools
from math import comb


def sort_sign(axes):
    """Canonicalise an axis sequence.

    Returns (sorted_tuple, sign) where sign is the parity of the sorting
    permutation, or (None, 0) if an axis repeats.
    """
    axes = list(axes)
    if len(set(axes)) != len(axes):
        return None, 0
    sign = 1
    # insertion sort; counts inversions
    for i in range(1, len(axes)):
        j = i
        while j > 0 and axes[j - 1] > axes[j]:
            axes[j - 1], axes[j] = axes[j], axes[j - 1]
            sign = -sign
            j -= 1
    return tuple(axes), sign


def merge(a, b):
    """Concatenate two canonical multi-indices, canonicalising the result.

    Returns (axes, sign); sign 0 when the concatenation has a repeat.
    """
    return sort_sign(tuple(a) + tuple(b))


def complement(axes, dim):
    """Axes of [0, dim) not contained in `axes`, ascending."""
    s = set(axes)
    return tuple(i for i in range(dim) if i not in s)


def epsilon_sign(perm, dim=None):
    """Levi-Civita sign of `perm` as a permutation of (0..dim-1).

    Returns +1/-1 for even/odd permutations, 0 for repeats or when the
    entries are not exactly (0..dim-1).
    """
    perm = tuple(perm)
    n = len(perm) if dim is None else dim
    if len(perm) != n or set(perm) != set(range(n)):
        return 0
    _, sign = sort_sign(perm)
    return sign


def canonical_indices(dim, grade):
    """All strictly increasing multi-indices of the given grade."""
    return list(itertools.combinations(range(dim), grade))


def index_count(dim, grade):
    return comb(dim, grade)


def contraction(axis, axes):
    """Interior-product bookkeeping: remove `axis` from a canonical tuple.

    Returns (remaining_axes, sign) with sign (-1)**position, or (None, 0)
    when the axis is absent.
    """
    axes = tuple(axes)
    if axis not in axes:
        return None, 0
    pos = axes.index(axis)
    rest = axes[:pos] + axes[pos + 1:]
    return rest, (-1) ** pos
