"""Shared geometry builders for the test suite."""
import math

from resonator.domain import DomainSpec, LayerSpec, build_domain, discretize

PI2_4 = math.pi**2 / 4
ACCEPTANCE_LOG: list = []


def ball_spec(resolution=16, etas=(1.0,), scales=(1.0,), radius=1.0):
    layers = tuple(LayerSpec(s, e) for s, e in zip(scales, etas))
    return DomainSpec("ball", (radius,), layers, resolution)


def two_layer_spec(resolution=16):
    return ball_spec(resolution, etas=(5.0, 1.0), scales=(0.5, 1.0))


def grid_of(spec, resolution=None):
    return discretize(build_domain(spec), resolution)


def record_acceptance(criterion, passed, detail):
    ACCEPTANCE_LOG.append((criterion, bool(passed), detail))
