"""Independent ground truth for the limiting spectrum.

On a homogeneous ball of radius 1, applying ``-Laplace`` to ``lambda0 T0 u = u``
gives ``-Laplace u = lambda0 eta0 u`` inside, while ``T0 u`` is harmonic and
decaying outside.  Matching value and radial derivative of the potential at
``r = 1`` yields ``k j_l'(k) + (l + 1) j_l(k) = 0`` with ``lambda0 = k^2 / eta0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .domain import QuadratureGrid
from .errors import RootNotFound, TooLarge
from .operators import assemble_T0
from .spectral_linear import EigenPair, _gaps, normalize

BRUTEFORCE_MAX = 4000
_SCAN_STEP = 0.05
_K_MAX = 200.0


@dataclass(frozen=True)
class BallMode:
    l: int
    n: int
    k_root: float
    lambda0: float


def spherical_j(l: int, k: float) -> float:
    """``j_l(k)`` for ``l >= -1``.

    Upward recurrence from ``j_0``, ``j_1`` when ``k > l``; below that the
    recurrence loses digits and the ascending series is summed instead.
    ``j_{-1}(k) = cos(k) / k``.
    """
    if l < -1:
        raise ValueError("order must be >= -1")
    if k == 0:
        return 1.0 if l == 0 else 0.0
    if l == -1:
        return math.cos(k) / k
    if 0 < l and k <= l:
        return _ascending(l, k)
    j0 = math.sin(k) / k
    if l == 0:
        return j0
    j1 = math.sin(k) / k**2 - math.cos(k) / k
    prev, cur = j0, j1
    for m in range(1, l):
        prev, cur = cur, (2 * m + 1) / k * cur - prev
    return cur


def _ascending(l: int, k: float) -> float:
    # j_l(k) = k^l / (2l+1)!! * sum_m (-k^2/2)^m / (m! (2l+3)(2l+5)...(2l+2m+1))
    lead = k**l / math.prod(range(1, 2 * l + 2, 2))
    total, term, m = 1.0, 1.0, 0
    while abs(term) > 1e-18 * abs(total):
        m += 1
        term *= -0.5 * k * k / (m * (2 * l + 2 * m + 1))
        total += term
    return lead * total


def spherical_j_prime(l: int, k: float) -> float:
    return spherical_j(l - 1, k) - (l + 1) / k * spherical_j(l, k)


def matching_condition(l: int, k: float) -> float:
    return k * spherical_j_prime(l, k) + (l + 1) * spherical_j(l, k)


def _bisect(f, a: float, b: float, fa: float) -> float:
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def ball_eigenvalue(eta0: float, l: int, n: int) -> BallMode:
    """(n+1)-th positive root of the matching condition for angular order ``l``.

    Roots are bracketed by a uniform sign-change scan from ``k = 1e-6`` and
    refined by bisection.  Fixed ``[n pi, (n + 1) pi]`` brackets are not used:
    for ``l >= 2`` the roots drift out of the ``n``-th period.
    """
    if not eta0 > 0:
        raise ValueError("eta0 must be positive")
    if l < 0 or n < 0:
        raise ValueError("l and n must be nonnegative")
    f = lambda k: matching_condition(l, k)
    found = 0
    # condition equals k j_{l-1}(k), positive before the first root; the
    # recurrence is unreliable at tiny k so the sign is taken as known there
    a = 1e-6
    fa = 1.0
    while a < _K_MAX:
        b = a + _SCAN_STEP
        fb = f(b)
        if fb == 0.0 or (fa < 0) != (fb < 0):
            root = b if fb == 0.0 else _bisect(f, a, b, fa)
            if found == n:
                return BallMode(l, n, root, root**2 / eta0)
            found += 1
            if fb == 0.0:
                b += 1e-9
                fb = f(b)
        a, fa = b, fb
    raise RootNotFound(f"no root {n} for l={l} below k={_K_MAX}")


def ball_mode_table(eta0: float = 1.0, l_max: int = 3, n_max: int = 1) -> list[BallMode]:
    return [ball_eigenvalue(eta0, l, n) for l in range(l_max + 1) for n in range(n_max + 1)]


def ball_principal_moments(eta0: float = 1.0) -> tuple[float, float]:
    """``(U0, A)`` for ``u0 = A sin(kr)/(kr)``, ``k = pi/2``, on the unit ball.

    Computed by adaptive quadrature; closed forms are ``A = sqrt(pi/8)`` and
    ``U0 = 32 A / pi^2``.  The profile does not depend on ``eta0``.
    """
    if not eta0 > 0:
        raise ValueError("eta0 must be positive")
    k = ball_eigenvalue(eta0, 0, 0).k_root
    profile = lambda r: math.sin(k * r) / (k * r) if r > 0 else 1.0
    norm2, _ = quad(lambda r: 4 * math.pi * r**2 * profile(r) ** 2, 0.0, 1.0,
                    epsabs=0.0, epsrel=1e-12, limit=200)
    amplitude = 1.0 / math.sqrt(norm2)
    mass, _ = quad(lambda r: 4 * math.pi * r**2 * profile(r), 0.0, 1.0,
                   epsabs=0.0, epsrel=1e-12, limit=200)
    return amplitude * mass, amplitude


def bruteforce_spectrum(grid: QuadratureGrid, etas, count: int = 1) -> list[EigenPair]:
    """Full nonsymmetric dense eigendecomposition of the assembled T0."""
    if grid.size > BRUTEFORCE_MAX:
        raise TooLarge(f"{grid.size} nodes exceeds the brute-force limit {BRUTEFORCE_MAX}")
    op = assemble_T0(grid, etas)
    vals, vecs = np.linalg.eig(op.matrix)
    order = np.argsort(-vals.real)
    vals = vals[order].real
    vecs = vecs[:, order].real
    gaps = _gaps(vals[: count + 1])
    pairs = []
    for i in range(count):
        v = normalize(grid, vecs[:, i])
        res = float(np.linalg.norm(op.matrix @ v - vals[i] * v) / np.linalg.norm(v))
        pairs.append(EigenPair(float(vals[i]), 1.0 / float(vals[i]), v, i, float(gaps[i]), res))
    return pairs
