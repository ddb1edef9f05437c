"""Model description: domain, field rank, parameters, potential functions,
and the dynamical generator (Hamiltonian density and/or Lagrangian).

Potentials are univariate polynomials with coefficients that may carry
model parameters, so their derivatives of any order stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import DomainGrid


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Potential:
    """Polynomial scalar function sum_k c_k(params) * x^k.

    terms maps power -> list of (coefficient, param_powers) with
    param_powers a tuple of (name, exponent) pairs.
    """

    name: str
    terms: tuple  # ((power, ((coeff, ((param, exp), ...)), ...)), ...)

    @staticmethod
    def from_coefficients(name, coeffs):
        """Numeric-only helper: coeffs[k] multiplies x^k."""
        terms = tuple((k, ((float(c), ()),)) for k, c in enumerate(coeffs) if c != 0)
        return Potential(name, terms)

    def derivative(self):
        terms = []
        for power, pieces in self.terms:
            if power == 0:
                continue
            terms.append((power - 1,
                          tuple((c * power, pp) for c, pp in pieces)))
        return Potential(self.name + "'", tuple(terms))

    def nth_derivative(self, order):
        p = self
        for _ in range(order):
            p = p.derivative()
        return p

    def coefficient(self, power, params):
        total = 0.0
        for pw, pieces in self.terms:
            if pw != power:
                continue
            for c, pp in pieces:
                v = c
                for pname, exp in pp:
                    if pname not in params:
                        raise ModelError(f"unbound parameter {pname!r} in {self.name}")
                    v *= params[pname] ** exp
                total += v
        return total

    def __call__(self, x, params):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for power, _ in self.terms:
            out = out + self.coefficient(power, params) * x ** power
        return out

    def max_power(self):
        return max((p for p, _ in self.terms), default=0)


@dataclass(frozen=True)
class ModelSpec:
    """Parsed model: everything the symbolic and numeric layers need."""

    name: str
    dim: int
    rank: int
    signature: tuple
    spatial_sizes: tuple = ()
    spatial_extents: tuple = ()
    boundary: str = "periodic"
    params: dict = field(default_factory=dict)
    potentials: dict = field(default_factory=dict)
    hamiltonian: object = None
    lagrangian: object = None
    field_symbol: str = "C"
    momentum_symbol: str = "P"
    defaults: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.hamiltonian is None and self.lagrangian is None:
            raise ModelError("model needs a hamiltonian or a lagrangian")
        if not 0 <= self.rank <= self.dim - 1:
            raise ModelError(f"field rank {self.rank} invalid for dim {self.dim}")
        if len(self.spatial_sizes) != self.dim - 1:
            raise ModelError("spatial block must cover every non-time axis")

    @property
    def momentum_grade(self):
        return self.dim - self.rank - 1

    def with_hamiltonian(self, h):
        return replace(self, hamiltonian=h)

    def grid(self, time_size, time_extent):
        """Full spacetime grid with the given time axis."""
        return DomainGrid(
            self.dim,
            (time_size,) + tuple(self.spatial_sizes),
            (time_extent,) + tuple(self.spatial_extents),
            self.signature,
            self.boundary,
        )

    def potential(self, name):
        if name not in self.potentials:
            raise ModelError(f"unknown scalar function {name!r}")
        return self.potentials[name]
