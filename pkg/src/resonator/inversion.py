"""Recover layer susceptibilities and the size scale from measured resonances.

The forward model is the multilayer first-order formula evaluated with the
discrete limiting eigenpair of the body.  Unknowns are log-parameterised, so
positivity holds without constraints, and fitted by damped Gauss-Newton with a
central finite-difference Jacobian.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .asymptotics import moments, resonance_first_order
from .domain import DomainSpec, LayerSpec, build_domain, discretize
from .errors import InvalidSpec, NoConvergence, SingularNormalMatrix, UnderdeterminedProblem
from .operators import assemble_T0
from .spectral_linear import principal_pair
from .spectral_nonlinear import solve_resonance

log = logging.getLogger(__name__)

UNKNOWNS = ("eta0", "scale")
FD_STEP = 1e-5
GTOL = 1e-10
MAX_ITER = 200
DAMPING_INIT = 1e-3
DAMPING_UP = 3.0
DAMPING_DOWN = 0.5
DAMPING_MAX = 1e16
STALL_GTOL = 1e-6
COND_MAX = 1e14


def _geometry(spec: DomainSpec, resolution) -> tuple:
    return (spec.shape_kind, spec.shape_params, spec.scales, spec.mask,
            spec.resolution if resolution is None else int(resolution))


@lru_cache(maxsize=16)
def _grid(geometry: tuple):
    kind, params, scales, mask, resolution = geometry
    spec = DomainSpec(kind, params, tuple(LayerSpec(s, 1.0) for s in scales), resolution, mask)
    return discretize(build_domain(spec), resolution)


@lru_cache(maxsize=256)
def _limit(geometry: tuple, etas: tuple, eigen_index: int):
    grid = _grid(geometry)
    pair = principal_pair(assemble_T0(grid, etas), eigen_index)
    return pair, moments(grid, pair.vector)


def clear_caches() -> None:
    _grid.cache_clear()
    _limit.cache_clear()


def forward_model(domain_family: DomainSpec, eta0: Sequence[float], h: float,
                  resolution: int | None = None, eigen_index: int = 0,
                  use_solver: bool = False) -> complex:
    """Resonance predicted for ``eta0`` at scale ``h`` on the family's geometry."""
    etas = tuple(float(e) for e in eta0)
    if len(etas) != len(domain_family.layers) or any(not e > 0 for e in etas):
        raise InvalidSpec("eta0", f"need {len(domain_family.layers)} positive values, got {etas}")
    geometry = _geometry(domain_family, resolution)
    pair, m = _limit(geometry, etas, eigen_index)
    if use_solver and h > 0:
        res = solve_resonance(_grid(geometry), etas, h, pair.lambda0, pair.vector)
        return res.lambda_h
    return resonance_first_order(pair.lambda0, etas, m, h).lambda_h


@dataclass(frozen=True)
class InversionProblem:
    measurements: tuple
    domain: DomainSpec
    unknowns: tuple = ("eta0",)
    weights: tuple | None = None
    initial_eta0: tuple | None = None
    initial_scale: float = 1.0
    resolution: int | None = None
    eigen_index: int = 0
    use_solver: bool = False

    def __post_init__(self):
        object.__setattr__(self, "measurements",
                           tuple((float(h), complex(lam)) for h, lam in self.measurements))
        object.__setattr__(self, "unknowns", tuple(self.unknowns))

    @property
    def n_parameters(self) -> int:
        n = 0
        if "eta0" in self.unknowns:
            n += len(self.domain.layers)
        if "scale" in self.unknowns:
            n += 1
        return n

    def parameter_names(self) -> list[str]:
        names = []
        if "eta0" in self.unknowns:
            names += [f"eta0[{k}]" for k in range(1, len(self.domain.layers) + 1)]
        if "scale" in self.unknowns:
            names.append("scale")
        return names

    def validate(self) -> None:
        bad = set(self.unknowns) - set(UNKNOWNS)
        if bad or not self.unknowns:
            raise InvalidSpec("unknowns", f"choose a nonempty subset of {UNKNOWNS}, got {self.unknowns}")
        if not self.measurements:
            raise InvalidSpec("measurements", "no measurements")
        if any(not h > 0 for h, _ in self.measurements):
            raise InvalidSpec("measurements", "all h must be positive")
        if self.weights is not None:
            if len(self.weights) != len(self.measurements) or any(not w > 0 for w in self.weights):
                raise InvalidSpec("weights", "one positive weight per measurement")
        self.domain.validate()
        if len(self.measurements) < self.n_parameters:
            raise UnderdeterminedProblem(
                f"{len(self.measurements)} measurement(s) for {self.n_parameters} unknowns",
                math.inf)


@dataclass
class InversionResult:
    estimates: np.ndarray
    names: list
    residual_norm: float
    iterations: int
    converged: bool
    covariance_proxy: np.ndarray
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "estimates": dict(zip(self.names, map(float, self.estimates))),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "covariance_proxy": self.covariance_proxy.tolist(),
            "trace": self.trace,
        }


def _unpack(problem: InversionProblem, theta: np.ndarray):
    n = len(problem.domain.layers)
    i = 0
    if "eta0" in problem.unknowns:
        etas = np.exp(theta[:n])
        i = n
    else:
        etas = np.array(problem.domain.etas)
    scale = math.exp(theta[i]) if "scale" in problem.unknowns else 1.0
    return etas, scale


def invert(problem: InversionProblem, max_iter: int = MAX_ITER, gtol: float = GTOL) -> InversionResult:
    problem.validate()
    hs = np.array([h for h, _ in problem.measurements])
    meas = np.array([lam for _, lam in problem.measurements])
    w = np.ones(len(hs)) if problem.weights is None else np.array(problem.weights, dtype=float)
    sqrt_w = np.sqrt(np.concatenate([w, w]))

    def residuals(theta):
        etas, scale = _unpack(problem, theta)
        model = np.array([forward_model(problem.domain, etas, scale * h, problem.resolution,
                                        problem.eigen_index, problem.use_solver) for h in hs])
        d = model - meas
        return sqrt_w * np.concatenate([d.real, d.imag])

    def jacobian(theta):
        cols = []
        for j in range(len(theta)):
            e = np.zeros_like(theta)
            e[j] = FD_STEP
            cols.append((residuals(theta + e) - residuals(theta - e)) / (2 * FD_STEP))
        return np.stack(cols, axis=1)

    theta = []
    if "eta0" in problem.unknowns:
        init = problem.initial_eta0 or (1.0,) * len(problem.domain.layers)
        theta += [math.log(v) for v in init]
    if "scale" in problem.unknowns:
        theta.append(math.log(problem.initial_scale))
    theta = np.array(theta, dtype=float)

    r = residuals(theta)
    obj = float(r @ r)
    damping = DAMPING_INIT
    trace = [{"iteration": 0, "objective": obj, "damping": damping, "accepted": True,
              "grad_norm": None}]
    converged = False
    iterations = 0
    J = jacobian(theta)
    g = J.T @ r
    for iterations in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        trace[-1]["grad_norm"] = gnorm
        if gnorm <= gtol:
            converged = True
            break
        normal = J.T @ J
        cond = float(np.linalg.cond(normal))
        if not np.isfinite(cond) or cond > COND_MAX:
            raise SingularNormalMatrix("Gauss-Newton normal matrix is singular", cond)
        step = np.linalg.solve(normal + damping * np.eye(len(theta)), -g)
        trial = theta + step
        r_trial = residuals(trial)
        obj_trial = float(r_trial @ r_trial)
        accepted = obj_trial < obj
        if accepted:
            theta, r, obj = trial, r_trial, obj_trial
            damping *= DAMPING_DOWN
            J = jacobian(theta)
            g = J.T @ r
        else:
            damping *= DAMPING_UP
        trace.append({"iteration": iterations, "objective": obj, "damping": damping,
                      "accepted": accepted, "grad_norm": None})
        log.debug("GN %d: objective %.6e damping %.1e accepted=%s", iterations, obj, damping, accepted)
        if damping > DAMPING_MAX:
            # no descent left at working precision
            converged = float(np.linalg.norm(g)) <= STALL_GTOL
            break
    trace[-1]["grad_norm"] = float(np.linalg.norm(g))
    if not converged and iterations >= max_iter and float(np.linalg.norm(g)) <= gtol:
        converged = True
    etas, scale = _unpack(problem, theta)
    estimates = []
    if "eta0" in problem.unknowns:
        estimates += list(etas)
    if "scale" in problem.unknowns:
        estimates.append(scale)
    estimates = np.array(estimates)
    normal = J.T @ J
    try:
        cov_theta = np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        cov_theta = np.full_like(normal, np.nan)
    covariance = cov_theta * np.outer(estimates, estimates)
    d2 = (r / sqrt_w) ** 2
    n = len(hs)
    residual_norm = math.sqrt(float(np.sum(w * (d2[:n] + d2[n:])) / np.sum(w)))
    result = InversionResult(estimates, problem.parameter_names(), residual_norm, iterations,
                             converged, covariance, trace)
    if not converged:
        raise NoConvergence(f"Gauss-Newton stopped after {iterations} iterations with "
                            f"gradient norm {float(np.linalg.norm(g)):.3e}", best=result)
    return result


def synthesize(domain: DomainSpec, hs: Sequence[float], resolution: int | None = None,
               noise: float = 0.0, rng: np.random.Generator | None = None,
               scale: float = 1.0) -> list[tuple[float, complex]]:
    """Measurements from the forward model at ``scale * h``, with optional
    relative complex Gaussian noise of RMS magnitude ``noise``."""
    out = []
    for h in hs:
        lam = forward_model(domain, domain.etas, scale * h, resolution)
        if noise:
            z = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
            lam = lam * (1 + noise * z)
        out.append((float(h), complex(lam)))
    return out
