import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import resonator.spectral_linear as sl
from resonator.asymptotics import moments, resonance_first_order
from resonator.domain import DomainSpec, LayerSpec
from resonator.errors import DegenerateEigenvalueWarning, ZeroVector
from resonator.operators import assemble_T0, assemble_Th
from resonator.spectral_linear import eigen_spectrum, normalize

from helpers import PI2_4, ball_spec, grid_of


def test_unit_ball_lambda0_res24(ball24):
    _, g = ball24
    pair = eigen_spectrum(assemble_T0(g, [1.0]), 1)[0]
    assert abs(pair.lambda0 - PI2_4) / PI2_4 < 0.02
    assert pair.lambda0 == 1.0 / pair.mu


def test_doubling_etas_halves_lambda0(layered16):
    _, g = layered16
    a = eigen_spectrum(assemble_T0(g, [5.0, 1.0]), 1)[0]
    b = eigen_spectrum(assemble_T0(g, [10.0, 2.0]), 1)[0]
    assert b.lambda0 == pytest.approx(a.lambda0 / 2, rel=1e-12)


def test_principal_vector_positive(layered16):
    _, g = layered16
    v = eigen_spectrum(assemble_T0(g, [5.0, 1.0]), 1)[0].vector
    assert np.all(v > 0)


def test_pairs_satisfy_invariants(ellipsoid10):
    spec, g = ellipsoid10
    op = assemble_T0(g, spec.etas)
    pairs = eigen_spectrum(op, 4)
    mus = [p.mu for p in pairs]
    assert mus == sorted(mus, reverse=True)
    for p in pairs:
        assert np.linalg.norm(op.matrix @ p.vector - p.mu * p.vector) <= 1e-8 * np.linalg.norm(p.vector)
        assert np.sum(g.weights * p.vector**2) == pytest.approx(1.0, rel=1e-13)
        assert np.sum(g.weights * p.vector) >= 0
        assert abs(p.lambda0 * p.mu - 1.0) <= 2.3e-16


def test_degenerate_pairs_warn(ball12):
    _, g = ball12
    with pytest.warns(DegenerateEigenvalueWarning):
        pairs = eigen_spectrum(assemble_T0(g, [1.0]), 3)
    assert pairs[0].simple and not pairs[1].simple


def test_power_path_matches_dense(monkeypatch, layered16):
    spec, g = layered16
    op = assemble_T0(g, spec.etas)
    with warnings.catch_warnings():
        # the second mode is a dipole triplet
        warnings.simplefilter("ignore", DegenerateEigenvalueWarning)
        dense = eigen_spectrum(op, 2)
        monkeypatch.setattr(sl, "DENSE_MAX", 10)
        power = eigen_spectrum(op, 2)
    for a, b in zip(dense, power):
        assert b.mu == pytest.approx(a.mu, rel=1e-10)
        assert b.residual <= 1e-8
    np.testing.assert_allclose(power[0].vector, dense[0].vector, atol=1e-6)


def test_grid_convergence_to_pi2_over_4():
    lams = [eigen_spectrum(assemble_T0(g, [1.0]), 1)[0].lambda0
            for g in (grid_of(ball_spec(r)) for r in (12, 16, 24))]
    errors = [abs(l - PI2_4) / PI2_4 for l in lams]
    assert errors[-1] < 0.02
    assert max(errors) < 0.02


def test_sign_flip_leaves_products_unchanged(layered16):
    spec, g = layered16
    pair = eigen_spectrum(assemble_T0(g, spec.etas), 1)[0]
    m = moments(g, pair.vector)
    flipped = moments(g, -pair.vector)
    a = resonance_first_order(pair.lambda0, spec.etas, m, 0.05)
    b = resonance_first_order(pair.lambda0, spec.etas, flipped, 0.05)
    assert a.lambda_h == b.lambda_h


def test_normalize_examples():
    g = grid_of(DomainSpec("box", (1.0,), (LayerSpec(1.0, 1.0),), 10))
    ones = np.ones(g.size)
    assert np.array_equal(normalize(g, ones), ones)
    v = np.random.default_rng(0).standard_normal(g.size) + 0.1
    np.testing.assert_allclose(normalize(g, -7 * v), normalize(g, v), rtol=1e-14)
    once = normalize(g, v)
    assert normalize(g, once).tobytes() == once.tobytes()
    with pytest.raises(ZeroVector):
        normalize(g, np.zeros(g.size))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 64, elements=st.floats(-1e3, 1e3)),
       st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
def test_normalize_properties(v, scale):
    g = grid_of(DomainSpec("box", (1.0,), (LayerSpec(1.0, 1.0),), 4))
    if not np.any(np.abs(v) > 1e-150):
        return
    out = normalize(g, v)
    assert np.sum(g.weights * out**2) == pytest.approx(1.0, rel=1e-12)
    assert np.sum(g.weights * out) >= -1e-12
    assert normalize(g, out).tobytes() == out.tobytes()
    np.testing.assert_allclose(normalize(g, scale * v), out, rtol=1e-9, atol=1e-9)


def test_rejects_Th(ball12):
    _, g = ball12
    with pytest.raises(ValueError):
        eigen_spectrum(assemble_Th(g, [1.0], 0.1, 2.0), 1)
