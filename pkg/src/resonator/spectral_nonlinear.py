"""Nonlinear resonance problem ``lambda T_h(lambda) u = u``.

The primary iteration is ``lambda <- 1 / mu*(lambda)``, where ``mu*`` is the
eigenvalue of ``T_h(lambda)`` whose eigenvector overlaps the reference mode
most.  Since ``T_h`` depends on ``lambda`` only through ``sqrt(lambda) h`` the
map contracts with rate O(h); a secant iteration on
``f(lambda) = lambda mu*(lambda) - 1`` takes over if the steps stop shrinking.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .domain import QuadratureGrid
from .errors import LostTrack, NoConvergenceWarning, SolverFailure
from .operators import DiscreteOperator, assemble_Th, check_branch
from .spectral_linear import normalize

log = logging.getLogger(__name__)

TRACK_COUNT = 6
FULL_EIG_MAX = 400
MIN_OVERLAP = 0.5
STEP_TOL = 1e-10
RESIDUAL_TOL = 1e-8
MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class NonlinearResonance:
    lambda_h: complex
    u_h: np.ndarray
    iterations: int
    residual: float
    converged: bool
    h: float
    overlap: float = 1.0
    method: str = "fixed_point"
    history: tuple = field(default=(), repr=False)


def weighted_inner(grid: QuadratureGrid, a, b) -> complex:
    """Discrete L2(B) inner product, conjugate-linear in the second slot."""
    return complex(np.sum(grid.weights * a * np.conj(b)))


def weighted_norm(grid: QuadratureGrid, a) -> float:
    return math.sqrt(float(np.sum(grid.weights * np.abs(a) ** 2)))


def _top_eigenpairs(matrix: np.ndarray, k: int, start):
    n = matrix.shape[0]
    if n <= FULL_EIG_MAX or k >= n - 1:
        vals, vecs = np.linalg.eig(matrix)
    else:
        try:
            vals, vecs = scipy.sparse.linalg.eigs(matrix, k=k, which="LM",
                                                  v0=np.asarray(start, dtype=complex))
        except scipy.sparse.linalg.ArpackError as exc:
            raise SolverFailure(f"ARPACK failed: {exc}") from exc
    order = np.argsort(-np.abs(vals), kind="stable")[:k]
    return vals[order], vecs[:, order]


def track_eigenpair(op: DiscreteOperator, reference):
    """Eigenpair among the top six by magnitude closest to ``reference``.

    Returns ``(mu, vector, overlap)``; the vector is L2(B)-normalised with
    ``<vector, reference>`` real and nonnegative.
    """
    grid = op.grid
    ref = np.asarray(reference, dtype=complex)
    ref = ref / weighted_norm(grid, ref)
    vals, vecs = _top_eigenpairs(op.matrix, min(TRACK_COUNT, op.size), ref)
    overlaps = []
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        overlaps.append(abs(weighted_inner(grid, v, ref)) / weighted_norm(grid, v))
    best = int(np.argmax(overlaps))
    overlap = float(overlaps[best])
    if overlap < MIN_OVERLAP:
        raise LostTrack(f"best overlap {overlap:.3f} with the reference mode is below "
                        f"{MIN_OVERLAP}", overlap)
    v = vecs[:, best]
    v = v / weighted_norm(grid, v)
    proj = weighted_inner(grid, v, ref)
    v = v * (abs(proj) / proj) if proj != 0 else v
    return complex(vals[best]), v, overlap


def _phase_fix(grid: QuadratureGrid, u: np.ndarray) -> np.ndarray:
    mass = complex(np.sum(grid.weights * u))
    if mass != 0:
        u = u * (abs(mass) / mass)
    return u / weighted_norm(grid, u)


def resonance_residual(grid: QuadratureGrid, etas, h: float, lam: complex, u) -> float:
    """``||lam T_h(lam) u - u||`` in L2(B) on a freshly assembled operator."""
    op = assemble_Th(grid, etas, h, lam)
    return weighted_norm(grid, lam * (op.matrix @ u) - u)


def solve_resonance(grid: QuadratureGrid, etas, h: float, lambda_init: complex, reference,
                    max_iter: int = MAX_ITER, step_tol: float = STEP_TOL,
                    residual_tol: float = RESIDUAL_TOL) -> NonlinearResonance:
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    check_branch(lambda_init)
    reference = normalize(grid, np.asarray(reference, dtype=complex))

    def mu_star(lam):
        return track_eigenpair(assemble_Th(grid, etas, h, lam), reference)

    lam = complex(lambda_init)
    history = [lam]
    steps: list[float] = []
    method = "fixed_point"
    f_prev = lam_prev = None
    converged = False
    overlap = 1.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        check_branch(lam)
        mu, v, overlap = mu_star(lam)
        if method == "fixed_point":
            new = 1.0 / mu
        else:
            f = lam * mu - 1.0
            if f_prev is None or f == f_prev:
                new = 1.0 / mu
            else:
                new = lam - f * (lam - lam_prev) / (f - f_prev)
            f_prev, lam_prev = f, lam
        step = abs(new - lam)
        scale = 1.0 + abs(lam)
        lam = new
        history.append(lam)
        log.debug("h=%g iter %d (%s): lambda=%s step=%.3e", h, iterations, method, lam, step)
        if step <= step_tol * scale:
            converged = True
            break
        steps.append(step)
        if method == "fixed_point" and len(steps) >= 5:
            last = steps[-5:]
            if any(b >= a for a, b in zip(last, last[1:])):
                log.info("h=%g: fixed point stalled, switching to secant", h)
                method = "secant"
                f_prev = lam_prev = None
    mu, u, overlap = mu_star(lam)
    u = _phase_fix(grid, u)
    residual = resonance_residual(grid, etas, h, lam, u)
    if converged and residual > residual_tol:
        converged = False
    if not converged:
        warnings.warn(f"resonance at h={h} not converged after {iterations} iterations "
                      f"(residual {residual:.2e})", NoConvergenceWarning, stacklevel=2)
    return NonlinearResonance(lam, u, iterations, residual, converged, float(h), overlap,
                              method, tuple(history))
