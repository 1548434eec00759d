"""Deterministic test-shape generation on grid geometries.

Shape parameters live in box-relative coordinates (fractions of the box
extent), so the same spec rasterized at two resolutions describes the same
world-space set — refinement studies depend on that.  Random kinds draw
from generators seeded only by the spec, never by the geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import GridGeometry, GridSet, validate_margin
from .maximal import Ball, ball_cells

__all__ = ["ShapeSpec", "generate_shape", "standard_corpus"]

KINDS = (
    "ball",
    "cube",
    "annulus",
    "union_random_balls",
    "random_dyadic",
    "half_space",
)

# random kinds keep their support inside this box-relative safety margin so
# the drawn world shape clears any grid margin up to SAFETY * resolution
SAFETY = 0.05


@dataclass(frozen=True)
class ShapeSpec:
    """Recipe for one deterministic test shape.

    ``params`` by kind: ball/annulus/cube take ``center`` (relative tuple)
    and ``radius``/``r_inner``/``r_outer``/``side``; union_random_balls
    takes ``count``, ``r_min``, ``r_max``; random_dyadic takes ``level``
    and ``density``; half_space takes ``axis`` and ``offset``.
    """

    kind: str
    params: dict = dc_field(default_factory=dict)
    seed: int = 0
    margin_cells: int = 4

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")


def _world(geometry: GridGeometry, rel) -> np.ndarray:
    low = np.asarray(geometry.box_low)
    high = np.asarray(geometry.box_high)
    return low + np.asarray(rel, dtype=float) * (high - low)


def _extent(geometry: GridGeometry) -> float:
    return float(
        min(h - l for l, h in zip(geometry.box_low, geometry.box_high))
    )


def _safety_box(geometry: GridGeometry) -> np.ndarray:
    """Cells inside the fixed box-relative safety margin.

    The clip is defined in world coordinates (SAFETY fraction of the box),
    not in cells, so clipped shapes stay the same world set when the grid
    is refined.
    """
    grids = geometry.center_grids()
    keep = np.ones(geometry.shape, dtype=bool)
    for axis, g in enumerate(grids):
        width = geometry.box_high[axis] - geometry.box_low[axis]
        lo = geometry.box_low[axis] + SAFETY * width
        hi = geometry.box_high[axis] - SAFETY * width
        keep &= np.broadcast_to((g > lo) & (g < hi), geometry.shape)
    return keep


def _ball_mask(geometry: GridGeometry, center_rel, radius_rel: float) -> np.ndarray:
    center = tuple(float(c) for c in _world(geometry, center_rel))
    return ball_cells(geometry, Ball(center, radius_rel * _extent(geometry))).mask


def generate_shape(spec: ShapeSpec, geometry: GridGeometry) -> GridSet:
    """Rasterize a shape spec; deterministic in (spec, geometry).

    Geometric kinds must clear the free-space margin (``margin_cells``
    cells on every side) and raise MarginViolation otherwise; the two kinds
    that naturally run to the box edge (random_dyadic, half_space) are
    clipped to the fixed relative safety box first, then validated like the
    rest.
    """
    p = spec.params
    ext = _extent(geometry)
    if spec.kind == "ball":
        mask = _ball_mask(geometry, p["center"], p["radius"])
    elif spec.kind == "cube":
        center = _world(geometry, p["center"])
        half = 0.5 * p["side"] * ext
        grids = geometry.center_grids()
        mask = np.ones(geometry.shape, dtype=bool)
        for axis, g in enumerate(grids):
            mask &= np.broadcast_to(
                np.abs(g - center[axis]) < half, geometry.shape
            )
    elif spec.kind == "annulus":
        mask = _ball_mask(geometry, p["center"], p["r_outer"]) & ~_ball_mask(
            geometry, p["center"], p["r_inner"]
        )
    elif spec.kind == "union_random_balls":
        rng = np.random.default_rng((spec.seed, 7))
        mask = np.zeros(geometry.shape, dtype=bool)
        for _ in range(int(p["count"])):
            r = float(rng.uniform(p["r_min"], p["r_max"]))
            lo, hi = SAFETY + r, 1.0 - SAFETY - r
            if lo >= hi:
                raise ValueError("ball radius exceeds the safety margin")
            center_rel = rng.uniform(lo, hi, geometry.d)
            mask |= _ball_mask(geometry, center_rel, r)
    elif spec.kind == "random_dyadic":
        level = int(p["level"])
        rng = np.random.default_rng((spec.seed, 11))
        blocks = rng.random((2**level,) * geometry.d) < p["density"]
        grids = geometry.center_grids()
        low = np.asarray(geometry.box_low)
        high = np.asarray(geometry.box_high)
        index = []
        for axis, g in enumerate(grids):
            rel = (g - low[axis]) / (high[axis] - low[axis])
            index.append(
                np.broadcast_to(
                    np.clip((rel * 2**level).astype(int), 0, 2**level - 1),
                    geometry.shape,
                )
            )
        mask = blocks[tuple(index)] & _safety_box(geometry)
    elif spec.kind == "half_space":
        axis = int(p["axis"])
        cut = float(
            geometry.box_low[axis]
            + p["offset"]
            * (geometry.box_high[axis] - geometry.box_low[axis])
        )
        g = geometry.center_grids()[axis]
        mask = np.broadcast_to(g < cut, geometry.shape) & _safety_box(geometry)
    else:  # pragma: no cover - guarded in __post_init__
        raise ValueError(spec.kind)
    out = GridSet(geometry, np.ascontiguousarray(mask))
    validate_margin(out, spec.margin_cells)
    return out


def standard_corpus() -> list[ShapeSpec]:
    """Twenty deterministic 2D shapes spanning the generator kinds."""
    specs = [
        ShapeSpec("ball", {"center": (0.5, 0.5), "radius": 0.12}),
        ShapeSpec("ball", {"center": (0.38, 0.61), "radius": 0.2}),
        ShapeSpec("ball", {"center": (0.5, 0.47), "radius": 0.3}),
        ShapeSpec("ball", {"center": (0.7, 0.3), "radius": 0.08}),
        ShapeSpec("cube", {"center": (0.5, 0.5), "side": 0.3}),
        ShapeSpec("cube", {"center": (0.31, 0.65), "side": 0.18}),
        ShapeSpec("annulus", {"center": (0.5, 0.5), "r_outer": 0.25, "r_inner": 0.12}),
        ShapeSpec("annulus", {"center": (0.55, 0.45), "r_outer": 0.3, "r_inner": 0.22}),
    ]
    ball_params = [
        (3, 0.05, 0.15, 1),
        (5, 0.03, 0.12, 2),
        (8, 0.02, 0.1, 3),
        (12, 0.02, 0.07, 4),
        (2, 0.1, 0.2, 5),
        (6, 0.04, 0.14, 6),
    ]
    for count, r_min, r_max, seed in ball_params:
        specs.append(
            ShapeSpec(
                "union_random_balls",
                {"count": count, "r_min": r_min, "r_max": r_max},
                seed=seed,
            )
        )
    dyadic_params = [(3, 0.4, 1), (4, 0.3, 2), (4, 0.55, 3), (5, 0.35, 4)]
    for level, density, seed in dyadic_params:
        specs.append(
            ShapeSpec(
                "random_dyadic", {"level": level, "density": density}, seed=seed
            )
        )
    specs.append(ShapeSpec("half_space", {"axis": 0, "offset": 0.5}))
    specs.append(ShapeSpec("half_space", {"axis": 1, "offset": 0.37}))
    return specs
