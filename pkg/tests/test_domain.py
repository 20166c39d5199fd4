import math

import numpy as np
import pytest

from resonator.domain import (DomainSpec, LayerSpec, VoxelMask, build_domain, discretize,
                              layer_volumes, read_voxel_mask, write_voxel_mask)
from resonator.errors import EmptyGrid, InvalidSpec

from helpers import ball_spec, grid_of


def test_single_layer_ball_membership():
    d = build_domain(ball_spec())
    assert d.layer_of([[0, 0, 0], [2, 0, 0]]).tolist() == [1, 0]


def test_two_layer_ball_membership():
    d = build_domain(ball_spec(etas=(5.0, 1.0), scales=(0.5, 1.0)))
    assert d.layer_of([[0.25, 0, 0], [0.75, 0, 0]]).tolist() == [1, 2]
    # shell boundaries are closed on the outside: |x| = s_k lies in layer k
    assert d.layer_of([[0.5, 0, 0], [1.0, 0, 0]]).tolist() == [1, 2]


def test_box_half_side_boundary():
    d = build_domain(DomainSpec("box", (1.0,), (LayerSpec(1.0, 1.0),), 10))
    assert d.layer_of([[0.49, 0, 0], [0.51, 0, 0]]).tolist() == [1, 0]


@pytest.mark.parametrize("layers, field", [
    ((LayerSpec(0.6, 1.0), LayerSpec(0.5, 1.0), LayerSpec(1.0, 1.0)), "layers[2].outer_scale"),
    ((LayerSpec(0.5, 1.0), LayerSpec(1.0, -2.0)), "layers[2].eta0"),
    ((LayerSpec(0.5, 1.0), LayerSpec(0.5, 1.0)), "layers[2].outer_scale"),
    ((LayerSpec(0.5, 1.0),), "layers[1].outer_scale"),
    ((), "layers"),
])
def test_invalid_spec_names_field(layers, field):
    with pytest.raises(InvalidSpec) as exc:
        build_domain(DomainSpec("ball", (1.0,), layers, 10))
    assert exc.value.field == field


def test_invalid_shape_and_resolution():
    with pytest.raises(InvalidSpec, match="shape_params"):
        build_domain(DomainSpec("ball", (-1.0,)))
    with pytest.raises(InvalidSpec, match="resolution"):
        build_domain(DomainSpec("ball", (1.0,), resolution=3))
    with pytest.raises(InvalidSpec, match="shape_kind"):
        build_domain(DomainSpec("torus", (1.0,)))


def test_eta_scaling_accessor():
    d = build_domain(ball_spec(etas=(5.0, 1.0), scales=(0.5, 1.0)))
    pts = np.random.default_rng(1).uniform(-1, 1, (500, 3))
    for h in (0.3, 0.1, 0.01):
        np.testing.assert_allclose(d.eta_of(pts, h) * h**2, d.eta0_of(pts), rtol=1e-15, atol=0)


def test_partition_of_random_points():
    spec = DomainSpec("ellipsoid", (1.0, 0.7, 0.5),
                      (LayerSpec(0.3, 2.0), LayerSpec(0.6, 3.0), LayerSpec(1.0, 1.0)), 10)
    d = build_domain(spec)
    pts = np.random.default_rng(2).uniform(-1.05, 1.05, (10_000, 3)) * d.half_extents()
    rho = d.gauge(pts)
    s = np.concatenate([[0.0], spec.scales])
    claims = np.stack([(s[k - 1] < rho) & (rho <= s[k]) if k > 1 else rho <= s[1]
                       for k in range(1, 4)], axis=1)
    inside = rho <= 1
    assert np.array_equal(claims.sum(axis=1) == 1, inside)
    assert np.array_equal(d.layer_of(pts) > 0, inside)
    assert np.array_equal(d.layer_of(pts)[inside], np.argmax(claims[inside], axis=1) + 1)


def test_ball_volume_resolution_20():
    g = grid_of(ball_spec(20))
    assert abs(g.weights.sum() - 4 * math.pi / 3) / (4 * math.pi / 3) < 0.05


def test_unit_box_tiles_exactly():
    g = grid_of(DomainSpec("box", (1.0,), (LayerSpec(1.0, 1.0),), 10))
    assert g.size == 1000
    assert layer_volumes(g) == [pytest.approx(1.0, rel=1e-14)]


def test_two_layer_volume_ratio():
    g = grid_of(ball_spec(40, etas=(5.0, 1.0), scales=(0.5, 1.0)))
    v = layer_volumes(g)
    assert abs(v[0] / sum(v) - 0.125) < 0.01
    assert abs(v[1] / v[0] - 7.0) < 0.6


def test_voxel_volume_convergence():
    exact = 4 * math.pi / 3
    errors = [abs(grid_of(ball_spec(r)).weights.sum() - exact) for r in (10, 20, 40, 80)]
    rises = sum(b > a for a, b in zip(errors, errors[1:]))
    assert rises <= 1
    assert errors[-1] / exact < 0.01


def test_grid_nodes_inside_and_tags_consistent(layered16):
    spec, g = layered16
    d = build_domain(spec)
    assert np.all(d.gauge(g.nodes) <= 1)
    assert np.array_equal(d.layer_of(g.nodes), g.layer_tag)
    assert np.all(g.weights > 0)


def test_grid_is_deterministic():
    a = grid_of(ball_spec(14, etas=(5.0, 1.0), scales=(0.5, 1.0)))
    b = grid_of(ball_spec(14, etas=(5.0, 1.0), scales=(0.5, 1.0)))
    assert a.nodes.tobytes() == b.nodes.tobytes()
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.layer_tag.tobytes() == b.layer_tag.tobytes()


def test_node_order_is_lexicographic():
    g = grid_of(ball_spec(8))
    idx = np.round((g.nodes + 1) / g.cell_size - 0.5).astype(int)
    keys = [tuple(r) for r in idx]
    assert keys == sorted(keys)


def test_grid_immutable(ball12):
    _, g = ball12
    with pytest.raises(ValueError):
        g.weights[0] = 1.0


def test_empty_grid():
    labels = np.zeros((4, 4, 4), dtype=int)
    spec = DomainSpec("voxel_mask", (), (LayerSpec(1.0, 1.0),), 4, VoxelMask(labels, 0.25))
    with pytest.raises(EmptyGrid):
        discretize(build_domain(spec))


def test_voxel_mask_round_trip(tmp_path):
    labels = np.zeros((5, 4, 3), dtype=int)
    labels[1:4, 1:3, 1] = 2
    labels[2, 1, 1] = 1
    labels[0, 0, 0] = 1
    mask = VoxelMask(labels, 0.2)
    path = tmp_path / "mask.txt"
    write_voxel_mask(mask, path)
    header = path.read_text().splitlines()[0]
    assert header.split()[:3] == ["5", "4", "3"]
    back = read_voxel_mask(path)
    assert back == mask
    # x-fastest ordering: the second token after the header is voxel (1, 0, 0)
    tokens = path.read_text().split()[4:]
    assert int(tokens[0]) == labels[0, 0, 0] and int(tokens[1]) == labels[1, 0, 0]


def test_voxel_mask_grid(tmp_path):
    labels = np.zeros((4, 4, 4), dtype=int)
    labels[1:3, 1:3, 1:3] = 2
    labels[1, 1, 1] = 1
    spec = DomainSpec("voxel_mask", (), (LayerSpec(0.5, 3.0), LayerSpec(1.0, 1.0)), 4,
                      VoxelMask(labels, 0.5))
    d = build_domain(spec)
    g = discretize(d)
    assert g.size == 8
    assert layer_volumes(g) == [0.125, 7 * 0.125]
    assert d.layer_of([[-0.25, -0.25, -0.25], [1.5, 0, 0]]).tolist() == [1, 0]


def test_voxel_mask_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 2 2 0.5\n1 1 1\n")
    with pytest.raises(InvalidSpec, match="expected 8"):
        read_voxel_mask(p)
    p.write_text("2 2 2 0.5\n1 1 1 1 1 1 1 x\n")
    with pytest.raises(InvalidSpec):
        read_voxel_mask(p)
