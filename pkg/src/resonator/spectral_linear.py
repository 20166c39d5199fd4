"""Limiting linear eigenproblem ``lambda0 T0 u0 = u0``.

``M = K D / (4 pi)`` with ``K`` symmetric and ``D = diag(eta0_j w_j)``, so
``D^{1/2} M D^{-1/2}`` is symmetric and eigenvectors of ``M`` are orthogonal in
the ``D``-weighted inner product.  Small problems use a dense symmetric
eigensolver; large ones use power iteration with D-orthogonal deflation so the
matrix is never copied.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .domain import QuadratureGrid
from .errors import DegenerateEigenvalueWarning, SolverFailure, ZeroVector
from .operators import DiscreteOperator

log = logging.getLogger(__name__)

DENSE_MAX = 4000
EIGEN_RESIDUAL = 1e-8
POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000
SIMPLE_GAP = 1e-6
_IDEMPOTENT_SLACK = 1e-14


@dataclass(frozen=True, eq=False)
class EigenPair:
    mu: float
    lambda0: float
    vector: np.ndarray
    index: int
    gap: float
    residual: float = 0.0

    @property
    def simple(self) -> bool:
        return self.gap >= SIMPLE_GAP


def normalize(grid: QuadratureGrid, vector) -> np.ndarray:
    """Scale to unit discrete L2(B) norm with ``sum(w v) >= 0``."""
    v = np.asarray(vector)
    w = grid.weights
    norm = math.sqrt(float(np.sum(w * np.abs(v) ** 2)))
    if norm == 0.0 or not math.isfinite(norm):
        raise ZeroVector("cannot normalise a zero vector")
    mass = float(np.real(np.sum(w * v)))
    if mass == 0.0:
        mass = float(np.real(v.flat[np.argmax(np.abs(v))]))
    sign = -1.0 if mass < 0 else 1.0
    if sign > 0 and abs(norm - 1.0) <= _IDEMPOTENT_SLACK:
        return v.copy()
    return v * (sign / norm)


def _gaps(mus: np.ndarray) -> np.ndarray:
    gaps = np.full(len(mus), np.inf)
    for i, mu in enumerate(mus):
        others = np.delete(mus, i)
        if len(others):
            gaps[i] = np.min(np.abs(others - mu)) / abs(mu)
    return gaps


def _dense_symmetric(op: DiscreteOperator, m: int):
    d = op.column_weights
    root = np.sqrt(d)
    s = op.matrix * root[:, None] / root[None, :]
    s = 0.5 * (s + s.T)
    n = op.size
    vals, vecs = scipy.linalg.eigh(s, subset_by_index=[n - m, n - 1])
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order] / root[:, None]


def _power_deflation(op: DiscreteOperator, count: int, m: int):
    """Top ``m`` pairs; the last ``m - count`` only need a converged eigenvalue."""
    a = op.matrix
    d = op.column_weights
    n = op.size
    rng = np.random.default_rng(0)
    basis: list[np.ndarray] = []
    values: list[float] = []
    for k in range(m):
        x = np.ones(n) if k == 0 else rng.standard_normal(n)
        mu_old = np.inf
        for it in range(1, POWER_MAX_ITER + 1):
            for b in basis:
                x = x - b * (b @ (d * x))
            x = x / math.sqrt(float(x @ (d * x)))
            y = a @ x
            mu = float(x @ (d * y))
            res = float(np.linalg.norm(y - mu * x) / np.linalg.norm(x))
            if res <= POWER_TOL * abs(mu):
                break
            if k >= count and abs(mu - mu_old) <= POWER_TOL * abs(mu):
                break
            mu_old = mu
            x = y
        else:
            raise SolverFailure(f"power iteration for pair {k} did not converge "
                                f"in {POWER_MAX_ITER} iterations (residual {res:.2e})")
        log.debug("power pair %d: mu=%.12g after %d iterations", k, mu, it)
        for b in basis:
            x = x - b * (b @ (d * x))
        x = x / math.sqrt(float(x @ (d * x)))
        basis.append(x)
        values.append(mu)
    return np.array(values), np.stack(basis, axis=1)


def eigen_spectrum(op: DiscreteOperator, count: int = 1,
                   residual_tol: float = EIGEN_RESIDUAL) -> list[EigenPair]:
    """The ``count`` largest eigenpairs of a T0 matrix, ``mu`` descending."""
    if op.kind != "T0":
        raise ValueError("eigen_spectrum expects a T0 operator")
    n = op.size
    if not 1 <= count <= n:
        raise ValueError(f"count must lie in [1, {n}], got {count}")
    m = min(count + 1, n)
    if n <= DENSE_MAX:
        mus, vecs = _dense_symmetric(op, m)
    else:
        mus, vecs = _power_deflation(op, count, m)
    gaps = _gaps(mus)
    grid = op.grid
    pairs = []
    for i in range(count):
        v = normalize(grid, vecs[:, i])
        mu = float(mus[i])
        residual = float(np.linalg.norm(op.matrix @ v - mu * v) / np.linalg.norm(v))
        if residual > residual_tol:
            raise SolverFailure(f"eigenpair {i} residual {residual:.3e} exceeds {residual_tol}")
        if gaps[i] < SIMPLE_GAP:
            warnings.warn(f"eigenvalue {i} (mu={mu:.10g}) is not simple: relative gap "
                          f"{gaps[i]:.2e}", DegenerateEigenvalueWarning, stacklevel=2)
        pairs.append(EigenPair(mu, 1.0 / mu, v, i, float(gaps[i]), residual))
    return pairs


def principal_pair(op: DiscreteOperator, eigen_index: int = 0,
                   residual_tol: float = EIGEN_RESIDUAL) -> EigenPair:
    """The pair at ``eigen_index`` (0 is the largest ``mu``)."""
    return eigen_spectrum(op, eigen_index + 1, residual_tol)[eigen_index]
