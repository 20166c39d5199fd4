"""Dense Nystrom discretisations of the volume potentials T0 and T_h(lambda).

Entry ``(i, j)`` off the diagonal is ``eta0_j w_j / (4 pi) * K(|x_i - x_j|)``
with ``K(r) = 1/r`` (T0) or ``exp(i sqrt(lambda) h r) / r`` (T_h).  The weakly
singular self-cell is replaced by the exact integral of the kernel over the
ball of equal volume centred on the node, radius ``a_i = (3 w_i / 4 pi)^(1/3)``.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .domain import QuadratureGrid
from .errors import BranchViolation, DimensionMismatch, NoConvergenceWarning

FOUR_PI = 4.0 * math.pi
DIST_CACHE_MAX = 6000
ROW_BLOCK = 256
BRANCH_TOL = 1e-12
SERIES_CUTOFF = 0.5
SERIES_TERMS = 24


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    matrix: np.ndarray
    grid: QuadratureGrid
    kind: str
    etas: tuple
    scale_h: float = 0.0
    lambda_eval: complex = 0j

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def column_weights(self) -> np.ndarray:
        """``eta0_j * w_j``: the right factor ``D`` in ``M = K D / (4 pi)``."""
        return self.grid.eta_per_node(self.etas) * self.grid.weights


def _check_etas(grid: QuadratureGrid, etas) -> np.ndarray:
    etas = np.asarray(etas, dtype=float).ravel()
    if len(etas) != grid.n_layers:
        raise DimensionMismatch(f"{len(etas)} susceptibilities for {grid.n_layers} layers")
    if np.any(~(etas > 0)):
        raise ValueError("susceptibilities must be positive")
    return etas


def equivalent_radii(grid: QuadratureGrid) -> np.ndarray:
    return np.cbrt(3.0 * grid.weights / FOUR_PI)


def _distance_block(grid: QuadratureGrid, start: int, stop: int) -> np.ndarray:
    cached = grid._cache.get("dist")
    if cached is not None:
        return cached[start:stop]
    return cdist(grid.nodes[start:stop], grid.nodes)


def pair_distances(grid: QuadratureGrid) -> np.ndarray:
    """Full distance matrix, memoised on the grid when it is small enough."""
    cached = grid._cache.get("dist")
    if cached is not None:
        return cached
    dist = cdist(grid.nodes, grid.nodes)
    dist.setflags(write=False)
    if grid.size <= DIST_CACHE_MAX:
        grid._cache["dist"] = dist
    return dist


def self_cell_integral(a, wavenumber: complex = 0.0):
    """Integral of ``exp(i k r) / r`` over a ball of radius ``a`` about its centre.

    Equals ``4 pi (exp(i k a)(1 - i k a) - 1) / k^2``; the series
    ``4 pi a^2 sum_n (i k a)^n / (n! (n + 2))`` is used for ``|k a| < 0.5``, where
    the closed form loses about ``log10(1 / |k a|)`` digits to cancellation.
    """
    a = np.asarray(a, dtype=float)
    if wavenumber == 0:
        return 2.0 * math.pi * a**2
    z = wavenumber * a
    iz = 1j * np.asarray(z)
    series = np.zeros_like(iz)
    term = np.ones_like(iz)
    for n in range(SERIES_TERMS):
        series = series + term / (n + 2)
        term = term * iz / (n + 1)
    series = FOUR_PI * a**2 * series
    closed = FOUR_PI * (np.exp(1j * z) * (1.0 - 1j * z) - 1.0) / wavenumber**2
    return np.where(np.abs(z) < SERIES_CUTOFF, series, closed)


def check_branch(lam: complex) -> None:
    lam = complex(lam)
    if lam.real <= 0 and abs(lam.imag) <= BRANCH_TOL * max(1.0, abs(lam)):
        raise BranchViolation(f"lambda={lam} lies on the branch cut (closed negative real axis)")


def principal_sqrt(lam: complex) -> complex:
    return cmath.sqrt(complex(lam))


def _assemble(grid: QuadratureGrid, etas: np.ndarray, wavenumber: complex) -> np.ndarray:
    n = grid.size
    eta_nodes = grid.eta_per_node(etas)
    col = eta_nodes * grid.weights / FOUR_PI
    dtype = float if wavenumber is None else complex
    out = np.empty((n, n), dtype=dtype)
    for start in range(0, n, ROW_BLOCK):
        stop = min(start + ROW_BLOCK, n)
        r = np.array(_distance_block(grid, start, stop))
        rows = np.arange(stop - start)
        r[rows, start + rows] = 1.0
        block = out[start:stop]
        if wavenumber is None:
            np.divide(col, r, out=block)
        else:
            np.exp((1j * wavenumber) * r, out=block)
            block *= col
            block /= r
    a = equivalent_radii(grid)
    diag = eta_nodes / FOUR_PI * self_cell_integral(a, 0.0 if wavenumber is None else wavenumber)
    out[np.arange(n), np.arange(n)] = diag
    return out


def assemble_T0(grid: QuadratureGrid, etas) -> DiscreteOperator:
    etas = _check_etas(grid, etas)
    return DiscreteOperator(_assemble(grid, etas, None), grid, "T0", tuple(etas))


def assemble_Th(grid: QuadratureGrid, etas, h: float, lam: complex) -> DiscreteOperator:
    """T_h(lambda) with the principal branch of ``sqrt(lambda)``."""
    etas = _check_etas(grid, etas)
    if not h >= 0:
        raise ValueError(f"h must be nonnegative, got {h}")
    check_branch(lam)
    wavenumber = principal_sqrt(lam) * h
    matrix = _assemble(grid, etas, wavenumber) if wavenumber != 0 else \
        _assemble(grid, etas, None).astype(complex)
    return DiscreteOperator(matrix, grid, "Th", tuple(etas), float(h), complex(lam))


class NormEstimate(float):
    """Float carrying convergence metadata of the estimate."""

    converged: bool
    iterations: int

    def __new__(cls, value, converged=True, iterations=0):
        obj = super().__new__(cls, value)
        obj.converged = converged
        obj.iterations = iterations
        return obj


def operator_norm(op, tol: float = 1e-8, max_iter: int = 500) -> NormEstimate:
    """Largest singular value by power iteration on ``A^H A``."""
    a = op.matrix if isinstance(op, DiscreteOperator) else np.asarray(op)
    if not np.any(a):
        return NormEstimate(0.0, True, 0)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(a.shape[1]) + 1.0
    x /= np.linalg.norm(x)
    sigma = 0.0
    for it in range(1, max_iter + 1):
        y = a @ x
        new = float(np.linalg.norm(y))
        z = a.conj().T @ y
        nz = np.linalg.norm(z)
        if nz == 0:
            return NormEstimate(new, True, it)
        x = z / nz
        if abs(new - sigma) <= tol * new:
            return NormEstimate(new, True, it)
        sigma = new
    warnings.warn(f"operator norm not converged after {max_iter} iterations", NoConvergenceWarning)
    return NormEstimate(sigma, False, max_iter)
