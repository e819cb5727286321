"""Uniform Cartesian grids over bounded sets in one or two dimensions.

A discrete function lives on the interior cells only and is taken to be
zero everywhere else (cells outside the set, and all of the complement).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SHAPES = ("interval", "rectangle", "disk")


@dataclass(frozen=True)
class DomainSpec:
    """Description of the set to discretize.

    ``disk`` is the largest disk inscribed in the box, centered in it.
    """

    shape: str
    box_lo: tuple[float, ...]
    box_hi: tuple[float, ...]
    cells_per_axis: tuple[int, ...]

    @classmethod
    def interval(cls, lo: float = 0.0, hi: float = 1.0, n: int = 32) -> "DomainSpec":
        return cls("interval", (float(lo),), (float(hi),), (int(n),))

    @classmethod
    def rectangle(cls, lo=(0.0, 0.0), hi=(1.0, 1.0), n=16) -> "DomainSpec":
        n = (n, n) if np.isscalar(n) else tuple(n)
        return cls("rectangle", tuple(map(float, lo)), tuple(map(float, hi)), tuple(map(int, n)))

    @classmethod
    def disk(cls, lo=(0.0, 0.0), hi=(1.0, 1.0), n=16) -> "DomainSpec":
        n = (n, n) if np.isscalar(n) else tuple(n)
        return cls("disk", tuple(map(float, lo)), tuple(map(float, hi)), tuple(map(int, n)))


@dataclass(frozen=True, eq=False)
class Domain:
    shape: str
    dim: int
    box_lo: np.ndarray
    box_hi: np.ndarray
    cells_per_axis: tuple[int, ...]
    h: float
    interior_mask: np.ndarray
    cell_centers: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.cell_centers.shape[0]

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def diameter(self) -> float:
        """Diameter of the bounding box."""
        return float(np.linalg.norm(self.box_hi - self.box_lo))

    def all_centers(self) -> np.ndarray:
        """Centers of every box cell in row-major order, shape ``cells_per_axis + (dim,)``."""
        axes = [
            self.box_lo[a] + (np.arange(n) + 0.5) * self.h
            for a, n in enumerate(self.cells_per_axis)
        ]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def lattice_index(self) -> np.ndarray:
        """Integer grid coordinates of the interior cells, shape ``(n_cells, dim)``."""
        idx = np.stack(np.nonzero(self.interior_mask), axis=-1)
        return idx.astype(np.int64)


def build_grid(spec: DomainSpec) -> Domain:
    """Build the grid described by ``spec``.

    Interior cells are enumerated in row-major order of the box grid
    (last axis fastest). Membership is decided by the cell center.
    """
    if spec.shape not in SHAPES:
        raise ValueError(f"unsupported shape {spec.shape!r}; expected one of {SHAPES}")
    lo = np.asarray(spec.box_lo, dtype=float)
    hi = np.asarray(spec.box_hi, dtype=float)
    cells = tuple(int(c) for c in spec.cells_per_axis)
    dim = lo.size
    expected_dim = 1 if spec.shape == "interval" else 2
    if dim != expected_dim or hi.size != dim or len(cells) != dim:
        raise ValueError(
            f"shape {spec.shape!r} needs box_lo, box_hi and cells_per_axis of length {expected_dim}"
        )
    if np.any(hi <= lo):
        raise ValueError(f"degenerate box: box_lo={lo.tolist()} box_hi={hi.tolist()}")
    if min(cells) < 2:
        raise ValueError(f"resolution must be >= 2 per axis, got {cells}")

    spacing = (hi - lo) / np.asarray(cells)
    h = float(spacing[0])
    if not np.allclose(spacing, h, rtol=1e-12, atol=0.0):
        raise ValueError(f"grid spacing differs between axes: {spacing.tolist()}")

    axes = [lo[a] + (np.arange(n) + 0.5) * h for a, n in enumerate(cells)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    if spec.shape == "disk":
        middle = 0.5 * (lo + hi)
        radius = 0.5 * float(np.min(hi - lo))
        mask = np.linalg.norm(centers - middle, axis=-1) < radius
    else:
        mask = np.ones(cells, dtype=bool)

    interior = centers[mask]
    if interior.shape[0] < 2:
        raise ValueError("domain has fewer than 2 interior cells")
    mask.setflags(write=False)
    interior.setflags(write=False)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return Domain(
        shape=spec.shape,
        dim=dim,
        box_lo=lo,
        box_hi=hi,
        cells_per_axis=cells,
        h=h,
        interior_mask=mask,
        cell_centers=interior,
    )


def spec_from_mapping(data: dict) -> DomainSpec:
    """Parse a ``[domain]`` config table into a :class:`DomainSpec`."""
    shape = data.get("shape", "interval")
    n = data.get("n", data.get("cells_per_axis", 32))
    lo: Sequence[float] | float = data.get("box_lo", 0.0 if shape == "interval" else (0.0, 0.0))
    hi: Sequence[float] | float = data.get("box_hi", 1.0 if shape == "interval" else (1.0, 1.0))
    if shape == "interval":
        lo = lo[0] if not np.isscalar(lo) else lo
        hi = hi[0] if not np.isscalar(hi) else hi
        n = n[0] if not np.isscalar(n) else n
        return DomainSpec.interval(lo, hi, n)
    if shape == "rectangle":
        return DomainSpec.rectangle(lo, hi, n)
    if shape == "disk":
        return DomainSpec.disk(lo, hi, n)
    raise ValueError(f"unsupported shape {shape!r}; expected one of {SHAPES}")
