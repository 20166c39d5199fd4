"""First-order resonance formulas for small layered high-contrast bodies.

Every closed form has the shape ``lambda_h = lambda0 + c h`` with
``c = -i lambda0^(5/2) / (4 pi) * bracket``; only the bracket differs:

* ``n_layer``       ``U0 * sum_k eta_k U_k``
* ``two_layer``     ``eta1 U1^2 + eta2 U2^2 + (eta1 + eta2) U1 U2``
* ``factored``      ``(eta1 U1 + eta2 U2) U0``
* ``single``        ``eta0 U0^2``
* ``biorthogonal``  ``(sum_k eta_k U_k)^2 / <eta0 u0, u0>``

The last one pairs the perturbation with the left eigenvector ``eta0 u0`` of
``T0`` instead of ``u0``.  It coincides with the others when all layers share
one susceptibility, and is offered for comparison on layered bodies where
``T0`` is not self-adjoint in L2(B).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import QuadratureGrid
from .errors import DimensionMismatch, GridMismatch, NonpositiveLambda0
from .operators import DiscreteOperator

FORMS = ("n_layer", "two_layer", "factored", "single", "inner_product", "biorthogonal")


@dataclass(frozen=True)
class MomentSet:
    U0: float
    Uk: tuple

    @property
    def n_layers(self) -> int:
        return len(self.Uk)

    def flipped(self) -> "MomentSet":
        return MomentSet(-self.U0, tuple(-u for u in self.Uk))


@dataclass(frozen=True)
class AsymptoticResult:
    lambda0: float
    lambda_h: complex
    first_order_coeff: complex
    h: float
    form: str


def moments(grid: QuadratureGrid, u0) -> MomentSet:
    """Layer integrals ``U_k = sum_{tag = k} w_i u_i`` and their total."""
    u0 = np.asarray(u0, dtype=float)
    wu = grid.weights * u0
    uk = tuple(math.fsum(wu[grid.layer_tag == k]) for k in range(1, grid.n_layers + 1))
    return MomentSet(math.fsum(wu), uk)


def power_five_halves(lambda0: float) -> float:
    if isinstance(lambda0, complex) or not lambda0 > 0:
        raise NonpositiveLambda0(f"lambda0 must be real and positive, got {lambda0}")
    return math.exp(2.5 * math.log(lambda0))


def _result(lambda0, bracket, h, form) -> AsymptoticResult:
    coeff = complex(0.0, -power_five_halves(lambda0) / (4 * math.pi) * bracket)
    return AsymptoticResult(float(lambda0), lambda0 + coeff * h, coeff, float(h), form)


def resonance_first_order(lambda0: float, etas: Sequence[float], m: MomentSet,
                          h: float) -> AsymptoticResult:
    if len(etas) != m.n_layers:
        raise DimensionMismatch(f"{len(etas)} susceptibilities for {m.n_layers} moments")
    bracket = m.U0 * math.fsum(e * u for e, u in zip(etas, m.Uk))
    return _result(lambda0, bracket, h, "n_layer")


def resonance_two_layer(lambda0, eta1, eta2, U1, U2, h) -> AsymptoticResult:
    bracket = eta1 * U1**2 + eta2 * U2**2 + (eta1 + eta2) * U1 * U2
    return _result(lambda0, bracket, h, "two_layer")


def resonance_factored(lambda0, eta1, eta2, U1, U2, h, U0=None) -> AsymptoticResult:
    U0 = U1 + U2 if U0 is None else U0
    return _result(lambda0, (eta1 * U1 + eta2 * U2) * U0, h, "factored")


def resonance_single(lambda0, eta0, U0, h) -> AsymptoticResult:
    return _result(lambda0, eta0 * U0**2, h, "single")


def resonance_biorthogonal(lambda0: float, etas: Sequence[float], m: MomentSet,
                           eta_norm2: float, h: float) -> AsymptoticResult:
    """First-order term with the left eigenvector; ``eta_norm2 = <eta0 u0, u0>``."""
    if len(etas) != m.n_layers:
        raise DimensionMismatch(f"{len(etas)} susceptibilities for {m.n_layers} moments")
    if not eta_norm2 > 0:
        raise ValueError("eta-weighted norm must be positive")
    s = math.fsum(e * u for e, u in zip(etas, m.Uk))
    return _result(lambda0, s * s / eta_norm2, h, "biorthogonal")


def eta_weighted_norm2(grid: QuadratureGrid, etas, u0) -> float:
    u0 = np.asarray(u0, dtype=float)
    return math.fsum(grid.eta_per_node(etas) * grid.weights * u0 * u0)


def correction_inner_product(T0: DiscreteOperator, Th_at_lambda0: DiscreteOperator, u0,
                             lambda0: float, grid: QuadratureGrid) -> complex:
    """``lambda0 + lambda0^2 <(T0 - T_h(lambda0)) u0, u0>`` on the grid."""
    if T0.grid is not grid or Th_at_lambda0.grid is not grid:
        raise GridMismatch("operators were assembled on a different grid")
    u0 = np.asarray(u0)
    if u0.shape != (grid.size,):
        raise GridMismatch(f"vector of length {u0.shape} on a grid of {grid.size} nodes")
    if Th_at_lambda0.scale_h == 0:
        return complex(lambda0)
    diff = (T0.matrix - Th_at_lambda0.matrix) @ u0
    inner = np.sum(grid.weights * diff * np.conj(u0))
    return complex(lambda0 + lambda0**2 * inner)
