"""Layered small volumes and their voxel quadrature grids.

All geometry lives in reference coordinates (the unscaled body ``B``).  The
small parameter ``h`` never touches the grid; it only enters through the
susceptibility accessor :meth:`LayeredDomain.eta_of` and the operator kernels.

Layers are concentric scaled copies of the outer shape.  A point ``x`` has a
gauge value ``rho(x)`` (``rho <= 1`` is the body) and sits in layer ``k`` when
``s_{k-1} < rho(x) <= s_k`` with ``s_0 = 0``.  Layer indices are 1-based and
``0`` means "outside".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyGrid, InvalidSpec

SHAPE_KINDS = ("ball", "ellipsoid", "box", "voxel_mask")


@dataclass(frozen=True)
class LayerSpec:
    outer_scale: float
    eta0: float


@dataclass(frozen=True, eq=False)
class VoxelMask:
    """Explicit per-voxel layer labels (0 = outside, k >= 1 = layer k).

    ``labels`` has shape ``(nx, ny, nz)``; the mask is centred on the origin.
    Hashing is by identity so masks can key grid caches.
    """

    labels: np.ndarray
    cell_size: float

    @property
    def shape(self):
        return self.labels.shape

    def __eq__(self, other):
        if not isinstance(other, VoxelMask):
            return NotImplemented
        return self.cell_size == other.cell_size and np.array_equal(self.labels, other.labels)

    __hash__ = object.__hash__


def read_voxel_mask(path) -> VoxelMask:
    """Read the plain-text mask format.

    First line ``nx ny nz cell_size``, then ``nx*ny*nz`` integers, x fastest.
    """
    text = Path(path).read_text()
    tokens = text.split()
    if len(tokens) < 4:
        raise InvalidSpec("mask_file", "missing header 'nx ny nz cell_size'")
    try:
        nx, ny, nz = (int(t) for t in tokens[:3])
        cell = float(tokens[3])
        values = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    except ValueError as exc:
        raise InvalidSpec("mask_file", f"malformed token ({exc})") from None
    if min(nx, ny, nz) <= 0 or not cell > 0:
        raise InvalidSpec("mask_file", "dimensions and cell_size must be positive")
    if values.size != nx * ny * nz:
        raise InvalidSpec("mask_file", f"expected {nx * ny * nz} labels, found {values.size}")
    if np.any(values < 0):
        raise InvalidSpec("mask_file", "labels must be nonnegative")
    labels = values.reshape(nz, ny, nx).transpose(2, 1, 0).copy()
    return VoxelMask(labels=labels, cell_size=cell)


def write_voxel_mask(mask: VoxelMask, path) -> None:
    nx, ny, nz = mask.labels.shape
    flat = mask.labels.transpose(2, 1, 0).ravel()
    body = " ".join(str(int(v)) for v in flat)
    Path(path).write_text(f"{nx} {ny} {nz} {mask.cell_size!r}\n{body}\n")


@dataclass(frozen=True)
class DomainSpec:
    shape_kind: str
    shape_params: tuple = (1.0,)
    layers: tuple = (LayerSpec(1.0, 1.0),)
    resolution: int = 20
    mask: VoxelMask | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape_params", tuple(float(p) for p in self.shape_params))
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def etas(self) -> tuple:
        return tuple(layer.eta0 for layer in self.layers)

    @property
    def scales(self) -> tuple:
        return tuple(layer.outer_scale for layer in self.layers)

    def with_etas(self, etas: Sequence[float]) -> "DomainSpec":
        if len(etas) != len(self.layers):
            raise InvalidSpec("layers", f"expected {len(self.layers)} etas, got {len(etas)}")
        layers = tuple(LayerSpec(l.outer_scale, float(e)) for l, e in zip(self.layers, etas))
        return DomainSpec(self.shape_kind, self.shape_params, layers, self.resolution, self.mask)

    def validate(self) -> None:
        if self.shape_kind not in SHAPE_KINDS:
            raise InvalidSpec("shape_kind", f"unknown shape {self.shape_kind!r}")
        if not self.layers:
            raise InvalidSpec("layers", "at least one layer is required")
        if self.shape_kind == "voxel_mask":
            if self.mask is None:
                raise InvalidSpec("mask", "voxel_mask shape requires a mask")
        else:
            expected = {"ball": (1,), "ellipsoid": (3,), "box": (1, 3)}[self.shape_kind]
            if len(self.shape_params) not in expected:
                raise InvalidSpec("shape_params", f"{self.shape_kind} takes {expected} parameters")
        for p in self.shape_params:
            if not (math.isfinite(p) and p > 0):
                raise InvalidSpec("shape_params", f"parameters must be positive, got {p}")
        if not isinstance(self.resolution, (int, np.integer)) or self.resolution < 4:
            raise InvalidSpec("resolution", f"must be an integer >= 4, got {self.resolution}")
        previous = 0.0
        for k, layer in enumerate(self.layers, start=1):
            s = layer.outer_scale
            if not (math.isfinite(s) and previous < s <= 1.0):
                raise InvalidSpec(f"layers[{k}].outer_scale",
                                  f"scales must increase strictly in (0, 1], got {s}")
            previous = s
            if not (math.isfinite(layer.eta0) and layer.eta0 > 0):
                raise InvalidSpec(f"layers[{k}].eta0", f"susceptibility must be positive, got {layer.eta0}")
        if previous != 1.0:
            raise InvalidSpec(f"layers[{len(self.layers)}].outer_scale", "outermost scale must be 1")
        if self.mask is not None:
            top = int(self.mask.labels.max(initial=0))
            if top > len(self.layers):
                raise InvalidSpec("mask", f"label {top} exceeds the {len(self.layers)} declared layers")


@dataclass(frozen=True)
class LayeredDomain:
    spec: DomainSpec

    @property
    def n_layers(self) -> int:
        return len(self.spec.layers)

    @property
    def etas(self) -> np.ndarray:
        return np.array(self.spec.etas)

    def half_extents(self) -> np.ndarray:
        kind, p = self.spec.shape_kind, self.spec.shape_params
        if kind == "ball":
            return np.full(3, p[0])
        if kind == "ellipsoid":
            return np.array(p)
        if kind == "box":
            sides = np.full(3, p[0]) if len(p) == 1 else np.array(p)
            return sides / 2
        return np.array(self.spec.mask.shape) * self.spec.mask.cell_size / 2

    def gauge(self, points) -> np.ndarray:
        """Concentric parameter: the body is ``gauge <= 1``."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        e = self.half_extents()
        kind = self.spec.shape_kind
        if kind in ("ball", "ellipsoid"):
            return np.sqrt(np.sum((x / e) ** 2, axis=1))
        if kind == "box":
            return np.max(np.abs(x) / e, axis=1)
        raise TypeError("voxel masks carry explicit labels, not a gauge")

    def layer_of(self, points) -> np.ndarray:
        """Layer index per point (1-based, 0 outside)."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.spec.shape_kind == "voxel_mask":
            mask = self.spec.mask
            idx = np.floor((x + self.half_extents()) / mask.cell_size).astype(np.int64)
            dims = np.array(mask.shape)
            ok = np.all((idx >= 0) & (idx < dims), axis=1)
            out = np.zeros(len(x), dtype=np.int64)
            i = idx[ok]
            out[ok] = mask.labels[i[:, 0], i[:, 1], i[:, 2]]
            return out
        rho = self.gauge(x)
        scales = np.array(self.spec.scales)
        k = np.searchsorted(scales, rho, side="left") + 1
        k[rho > 1.0] = 0
        return k

    def eta0_of(self, points) -> np.ndarray:
        k = self.layer_of(points)
        table = np.concatenate([[0.0], self.etas])
        return table[k]

    def eta_of(self, points, h: float) -> np.ndarray:
        return self.eta0_of(points) / h**2


def build_domain(spec: DomainSpec) -> LayeredDomain:
    spec.validate()
    return LayeredDomain(spec)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Voxel midpoint rule on ``B``; weights are cell volumes."""

    nodes: np.ndarray
    weights: np.ndarray
    layer_tag: np.ndarray
    cell_size: float
    n_layers: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("nodes", "weights", "layer_tag"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 3:
            raise ValueError("nodes must have shape (N, 3)")
        if not (len(self.weights) == len(self.layer_tag) == len(self.nodes)):
            raise ValueError("nodes, weights and layer_tag lengths differ")

    @property
    def size(self) -> int:
        return len(self.weights)

    def eta_per_node(self, etas) -> np.ndarray:
        etas = np.asarray(etas, dtype=float)
        return etas[self.layer_tag - 1]


def discretize(domain: LayeredDomain, resolution: int | None = None) -> QuadratureGrid:
    """Cubic cells over the bounding box; keep cells whose centre is in ``B``.

    ``resolution`` is the number of cells along the longest axis.  Voxel-mask
    domains use the mask's own cells and ignore it.  Node order is
    lexicographic in the cell index ``(i, j, k)``.
    """
    spec = domain.spec
    if spec.shape_kind == "voxel_mask":
        mask = spec.mask
        cell = mask.cell_size
        counts = np.array(mask.shape)
    else:
        resolution = spec.resolution if resolution is None else resolution
        if resolution < 4:
            raise InvalidSpec("resolution", f"must be >= 4, got {resolution}")
        e = domain.half_extents()
        cell = 2 * float(e.max()) / resolution
        ratio = 2 * e / cell
        counts = np.where(np.abs(ratio - np.round(ratio)) < 1e-9, np.round(ratio), np.ceil(ratio))
        counts = np.maximum(counts.astype(np.int64), 1)
    axes = [(np.arange(n) + 0.5) * cell - n * cell / 2 for n in counts]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    points = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    tags = domain.layer_of(points)
    inside = tags > 0
    if not inside.any():
        raise EmptyGrid("no cell centre falls inside the body")
    n_in = int(inside.sum())
    return QuadratureGrid(
        nodes=points[inside],
        weights=np.full(n_in, cell**3),
        layer_tag=tags[inside],
        cell_size=float(cell),
        n_layers=domain.n_layers,
    )


def layer_volumes(grid: QuadratureGrid) -> list[float]:
    return [math.fsum(grid.weights[grid.layer_tag == k]) for k in range(1, grid.n_layers + 1)]
