"""Binary cell sets and scalar fields on uniform grids.

Conventions used by every module in this package:

* A grid covers an axis-aligned box with ``shape[k]`` cells of side ``h``
  along axis ``k``; the cell with index ``i`` has its center at
  ``origin[k] + (i[k] + 0.5) * h``.
* A cell belongs to a continuous region iff its *center* does (rasterization
  by cell centers, used consistently for sets, balls, and window regions).
* ``omega=None`` selects free-space mode: the grid box is a window into
  R^d and cells beyond the box belong to a set iff the set's ``outside``
  flag says so.  Sets built inside the box carry ``outside=False``; their
  complements carry ``outside=True``.  This makes the face-count perimeter
  exactly symmetric under complementation.
* With an explicit ``omega`` the computation is restricted to that open
  subregion.  Faces are *qualifying* when at least one adjacent cell lies
  in omega ("touching" rule) or when both do ("interior" rule).  Perimeter
  defaults to the touching rule; variation integrals use the interior rule
  so that jumps sitting on the rim of omega are not charged, matching
  variation over an open region.
* The perimeter is the anisotropic face-count surface measure:
  ``h**(d-1)`` times the number of faces separating member cells from
  non-member cells.  For a disk it converges to 8r, not 2*pi*r; all
  bound constants measured in this package are relative to this measure.

Faces are identified as ``(cell, axis)`` where ``cell`` is the index of the
cell on the *low* side of the face.  A component equal to ``-1`` denotes a
face on the low edge of the box (the low-side cell is outside).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal, NamedTuple

import numpy as np

__all__ = [
    "GridGeometry",
    "GridSet",
    "ScalarField",
    "FaceSet",
    "CellPartition",
    "GeometryMismatch",
    "MarginViolation",
    "measure",
    "perimeter",
    "level_set",
    "attained_levels",
    "total_variation_direct",
    "variation_coarea",
    "classify_cells",
    "closure_cells",
    "boundary_union_check",
    "boundary_faces",
    "face_midpoints",
    "validate_margin",
]

FaceRule = Literal["touching", "interior"]


class GeometryMismatch(ValueError):
    """Two grid objects do not live on the same geometry."""


class MarginViolation(ValueError):
    """A set intrudes into the declared empty margin of the grid box."""


@dataclass(frozen=True)
class GridGeometry:
    """Uniform grid over an axis-aligned box.

    Attributes:
        shape: cells per axis, one entry per dimension (d in {1, 2, 3}).
        h: cell side length, strictly positive.
        origin: world coordinate of the low corner of the box.
    """

    shape: tuple[int, ...]
    h: float
    origin: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not 1 <= len(self.shape) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got shape {self.shape}")
        if any(int(n) != n or n < 1 for n in self.shape):
            raise ValueError(f"shape entries must be positive integers: {self.shape}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"cell size must be positive, got {self.h}")
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        origin = self.origin if self.origin else (0.0,) * len(self.shape)
        if len(origin) != len(self.shape):
            raise ValueError("origin and shape dimensions differ")
        object.__setattr__(self, "origin", tuple(float(c) for c in origin))

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def face_area(self) -> float:
        return self.h ** (self.d - 1)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def box_low(self) -> tuple[float, ...]:
        return self.origin

    @property
    def box_high(self) -> tuple[float, ...]:
        return tuple(o + n * self.h for o, n in zip(self.origin, self.shape))

    @property
    def diameter(self) -> float:
        """Euclidean diameter of the grid box."""
        return float(np.hypot.reduce([n * self.h for n in self.shape]))

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.h

    def center_grids(self) -> list[np.ndarray]:
        """Broadcastable arrays of cell-center coordinates, one per axis."""
        grids = np.meshgrid(
            *(self.axis_centers(k) for k in range(self.d)),
            indexing="ij",
            sparse=True,
        )
        return list(grids)

    def cell_of_point(self, point) -> tuple[int, ...]:
        """Index of the cell containing a world point (low-inclusive)."""
        idx = []
        for k in range(self.d):
            i = int(np.floor((point[k] - self.origin[k]) / self.h))
            if not 0 <= i < self.shape[k]:
                raise ValueError(f"point {tuple(point)} is outside the grid box")
            idx.append(i)
        return tuple(idx)

    def cell_center(self, index) -> tuple[float, ...]:
        return tuple(
            self.origin[k] + (index[k] + 0.5) * self.h for k in range(self.d)
        )

    def is_power_of_two(self) -> bool:
        return all(n >= 1 and (n & (n - 1)) == 0 for n in self.shape)


@dataclass
class GridSet:
    """A set of grid cells (boolean mask over the geometry).

    ``outside`` records whether cells beyond the grid box belong to the
    set under free-space semantics; complementation flips it.
    """

    geometry: GridGeometry
    mask: np.ndarray
    outside: bool = False

    def __post_init__(self) -> None:
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.geometry.shape:
            raise GeometryMismatch(
                f"mask shape {self.mask.shape} != grid shape {self.geometry.shape}"
            )

    @classmethod
    def empty(cls, geometry: GridGeometry) -> "GridSet":
        return cls(geometry, np.zeros(geometry.shape, dtype=bool))

    @classmethod
    def full(cls, geometry: GridGeometry) -> "GridSet":
        return cls(geometry, np.ones(geometry.shape, dtype=bool))

    @classmethod
    def from_predicate(cls, geometry: GridGeometry, predicate) -> "GridSet":
        """Rasterize ``predicate(coordinate arrays) -> bool array`` by cell centers."""
        mask = np.broadcast_to(
            predicate(*geometry.center_grids()), geometry.shape
        ).astype(bool)
        return cls(geometry, mask.copy())

    def complement(self) -> "GridSet":
        return GridSet(self.geometry, ~self.mask, outside=not self.outside)

    def union(self, other: "GridSet") -> "GridSet":
        _require_same_geometry(self, other)
        return GridSet(
            self.geometry, self.mask | other.mask, outside=self.outside or other.outside
        )

    def intersection(self, other: "GridSet") -> "GridSet":
        _require_same_geometry(self, other)
        return GridSet(
            self.geometry, self.mask & other.mask, outside=self.outside and other.outside
        )

    def difference(self, other: "GridSet") -> "GridSet":
        _require_same_geometry(self, other)
        return GridSet(
            self.geometry,
            self.mask & ~other.mask,
            outside=self.outside and not other.outside,
        )

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def is_empty(self) -> bool:
        return not self.mask.any()


@dataclass
class ScalarField:
    """Scalar values in [0, 1] on the cells of a grid.

    In free-space mode cells beyond the box read 0.
    """

    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.geometry.shape:
            raise GeometryMismatch(
                f"values shape {self.values.shape} != grid shape {self.geometry.shape}"
            )
        vmin, vmax = float(self.values.min(initial=0.0)), float(
            self.values.max(initial=0.0)
        )
        if vmin < 0.0 or vmax > 1.0:
            raise ValueError(f"field values outside [0, 1]: range [{vmin}, {vmax}]")

    @classmethod
    def indicator(cls, cells: GridSet) -> "ScalarField":
        return cls(cells.geometry, cells.mask.astype(np.float64))


class CellPartition(NamedTuple):
    """Partition of the cells of omega relative to a set E."""

    interior: GridSet
    boundary: GridSet
    exterior: GridSet


@dataclass
class FaceSet:
    """Explicit collection of grid faces as ``(low cell index, axis)`` pairs."""

    geometry: GridGeometry
    faces: list[tuple[tuple[int, ...], int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.faces)

    def __iter__(self) -> Iterator[tuple[tuple[int, ...], int]]:
        return iter(self.faces)

    def midpoints(self) -> np.ndarray:
        """World coordinates of the face midpoints, shape (n_faces, d)."""
        return face_midpoints(self.geometry, self.faces)


def _require_same_geometry(*objs) -> None:
    geo = objs[0].geometry
    for other in objs[1:]:
        if other is None:
            continue
        if other.geometry != geo:
            raise GeometryMismatch(
                f"incompatible geometries: {geo} vs {other.geometry}"
            )


def measure(cells: GridSet) -> float:
    """Lebesgue measure of a cell set: cell count times h^d."""
    return cells.count * cells.geometry.cell_volume


def _pad_slab(arr: np.ndarray, axis: int, value) -> np.ndarray:
    shape = list(arr.shape)
    shape[axis] = 1
    return np.full(shape, value, dtype=arr.dtype)


def _face_sides(arr: np.ndarray, axis: int, pad_value):
    """Values on the low/high side of every face along ``axis``.

    Returned arrays have ``shape[axis] + 1`` entries along ``axis``; entry j
    corresponds to the face between cell j-1 and cell j, with the two box
    faces included (missing side filled with ``pad_value``).
    """
    pad = _pad_slab(arr, axis, pad_value)
    lo = np.concatenate([pad, arr], axis=axis)
    hi = np.concatenate([arr, pad], axis=axis)
    return lo, hi


def _face_qualifier(
    omega: GridSet | None,
    geometry: GridGeometry,
    axis: int,
    rule: FaceRule,
):
    """Boolean array marking qualifying faces along ``axis``.

    Free space treats everything (including the region beyond the box) as
    part of the domain, so every face qualifies.
    """
    if omega is None:
        return True
    olo, ohi = _face_sides(omega.mask, axis, False)
    if rule == "touching":
        return olo | ohi
    if rule == "interior":
        return olo & ohi
    raise ValueError(f"unknown face rule {rule!r}")


def perimeter(
    cells: GridSet,
    omega: GridSet | None = None,
    *,
    rule: FaceRule = "touching",
) -> float:
    """Face-count perimeter of a cell set, optionally windowed by omega.

    Counts faces separating a member cell from a non-member cell, times
    ``h**(d-1)``.  With ``omega`` given, only qualifying faces count:
    ``rule="touching"`` keeps faces with at least one adjacent omega cell
    (so boundary sitting on the rim of omega is charged), while
    ``rule="interior"`` keeps faces with both cells in omega (boundary
    measured inside the open window only).  In free-space mode box-edge
    faces count, with the region beyond the box holding membership
    ``cells.outside``.
    """
    _require_same_geometry(cells, omega)
    geo = cells.geometry
    total = 0
    for axis in range(geo.d):
        lo, hi = _face_sides(cells.mask, axis, cells.outside)
        sep = lo != hi
        qual = _face_qualifier(omega, geo, axis, rule)
        total += int(np.count_nonzero(sep & qual)) if qual is not True else int(
            np.count_nonzero(sep)
        )
    return total * geo.face_area


def level_set(field_: ScalarField, lam: float) -> GridSet:
    """Strict superlevel set {f > lam} as a cell set."""
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"level must lie in [0, 1), got {lam}")
    return GridSet(field_.geometry, field_.values > lam)


def attained_levels(field_: ScalarField) -> np.ndarray:
    """Sorted distinct values attained by the field."""
    return np.unique(field_.values)


def _iter_value_faces(
    field_: ScalarField, omega: GridSet | None, rule: FaceRule
):
    """Yield (low values, high values, qualifier) per axis, box faces included.

    Cells beyond the box read 0; with the interior rule box faces never
    qualify because the outside is not part of omega.
    """
    geo = field_.geometry
    for axis in range(geo.d):
        lo, hi = _face_sides(field_.values, axis, 0.0)
        qual = _face_qualifier(omega, geo, axis, rule)
        yield lo, hi, qual


def _variation_rule(omega: GridSet | None) -> FaceRule:
    # Variation over an explicit (open) omega must not charge jumps on its
    # rim; free space keeps every face, with the outside reading 0.
    return "interior" if omega is not None else "touching"


def total_variation_direct(
    field_: ScalarField, omega: GridSet | None = None
) -> float:
    """Direct anisotropic total variation: sum of |jump| over qualifying faces."""
    _require_same_geometry(field_, omega)
    rule = _variation_rule(omega)
    total = 0.0
    for lo, hi, qual in _iter_value_faces(field_, omega, rule):
        jump = np.abs(lo - hi)
        if qual is not True:
            jump = jump[qual]
        total += float(jump.sum())
    return total * field_.geometry.face_area


def variation_coarea(field_: ScalarField, omega: GridSet | None = None) -> float:
    """Variation via the coarea formula over the attained levels.

    Computes sum_i Per({f > v_i}) * (v_{i+1} - v_i) over the sorted attained
    levels with v_0 = 0 prepended.  The per-level perimeters are evaluated
    through a face-event sweep which reproduces, level by level, exactly the
    count obtained from ``perimeter(level_set(f, v_i), omega)`` under the
    variation face rule.
    """
    _require_same_geometry(field_, omega)
    levels, per = level_perimeter_profile(field_, omega)
    if levels.size <= 1:
        return 0.0
    return float(np.sum(per[:-1] * np.diff(levels)))


def level_perimeter_profile(
    field_: ScalarField, omega: GridSet | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-level perimeters of {f > v} at every attained level (0 prepended).

    Returns ``(levels, perimeters)`` where ``perimeters[i]`` equals
    ``perimeter(level_set(f, levels[i]), omega)`` under the variation face
    rule.  A face with side values (a, b), a < b, separates {f > v} exactly
    for v in [a, b); the sweep counts, for each level, the faces whose
    interval covers it.
    """
    rule = _variation_rule(omega)
    levels = np.unique(np.concatenate([[0.0], field_.values.ravel()]))
    eps_lo: list[np.ndarray] = []
    eps_hi: list[np.ndarray] = []
    for lo, hi, qual in _iter_value_faces(field_, omega, rule):
        a = np.minimum(lo, hi).ravel()
        b = np.maximum(lo, hi).ravel()
        if qual is not True:
            keep = qual.ravel()
            a, b = a[keep], b[keep]
        jumpy = a < b
        eps_lo.append(a[jumpy])
        eps_hi.append(b[jumpy])
    starts = np.sort(np.concatenate(eps_lo)) if eps_lo else np.empty(0)
    stops = np.sort(np.concatenate(eps_hi)) if eps_hi else np.empty(0)
    active = np.searchsorted(starts, levels, side="right") - np.searchsorted(
        stops, levels, side="right"
    )
    return levels, active * field_.geometry.face_area


def _neighbor_agreement(
    mask: np.ndarray, domain: np.ndarray | None, target: bool
) -> np.ndarray:
    """Cells whose value is ``target`` and whose considered face-neighbors all are.

    Neighbors are the in-box face-adjacent cells, intersected with ``domain``
    when given; neighbors outside the domain (or the box) are ignored.
    """
    ok = (mask == target).copy()
    d = mask.ndim
    for axis in range(d):
        for shift in (-1, 1):
            nb = np.roll(mask, shift, axis=axis)
            exists = np.ones_like(mask, dtype=bool)
            edge = [slice(None)] * d
            edge[axis] = 0 if shift == 1 else -1
            exists[tuple(edge)] = False
            if domain is not None:
                exists &= np.roll(domain, shift, axis=axis)
            ok &= ~exists | (nb == target)
    return ok


def classify_cells(cells: GridSet, omega: GridSet | None = None) -> CellPartition:
    """Measure-theoretic interior/boundary/exterior partition of omega's cells.

    A cell of omega is interior when it and every considered face-neighbor
    belong to E, exterior when it and every considered face-neighbor avoid E,
    boundary otherwise.  Considered neighbors are the in-box face-neighbors,
    restricted to omega cells when omega is given.
    """
    _require_same_geometry(cells, omega)
    geo = cells.geometry
    domain = omega.mask if omega is not None else None
    inside = _neighbor_agreement(cells.mask, domain, True)
    outside = _neighbor_agreement(cells.mask, domain, False)
    if domain is not None:
        inside &= domain
        outside &= domain
        rest = domain & ~(inside | outside)
    else:
        rest = ~(inside | outside)
    return CellPartition(
        interior=GridSet(geo, inside),
        boundary=GridSet(geo, rest),
        exterior=GridSet(geo, outside),
    )


def closure_cells(cells: GridSet) -> GridSet:
    """Cells of E together with every cell having a face-neighbor in E."""
    grown = cells.mask.copy()
    for axis in range(cells.geometry.d):
        nb = np.roll(cells.mask, 1, axis=axis)
        edge = [slice(None)] * cells.geometry.d
        edge[axis] = 0
        nb[tuple(edge)] = False
        grown |= nb
        nb = np.roll(cells.mask, -1, axis=axis)
        edge[axis] = -1
        nb[tuple(edge)] = False
        grown |= nb
    return GridSet(cells.geometry, grown, outside=cells.outside)


def boundary_faces(
    cells: GridSet,
    omega: GridSet | None = None,
    *,
    rule: FaceRule = "touching",
    exclude_closure_of: GridSet | None = None,
) -> FaceSet:
    """Faces separating a set from its complement, as an explicit FaceSet.

    ``exclude_closure_of`` drops faces where either adjacent in-box cell lies
    in the closure (cells plus face-neighbors) of the given set; box-side
    neighbors are never in the closure.
    """
    _require_same_geometry(cells, omega)
    geo = cells.geometry
    excl = closure_cells(exclude_closure_of).mask if exclude_closure_of is not None else None
    out = FaceSet(geo)
    for axis in range(geo.d):
        lo, hi = _face_sides(cells.mask, axis, cells.outside)
        sep = lo != hi
        qual = _face_qualifier(omega, geo, axis, rule)
        if qual is not True:
            sep = sep & qual
        if excl is not None:
            elo, ehi = _face_sides(excl, axis, False)
            sep = sep & ~elo & ~ehi
        for pos in np.argwhere(sep):
            cell = list(pos)
            cell[axis] -= 1  # low-side cell; -1 marks the low box face
            out.faces.append((tuple(int(c) for c in cell), axis))
    return out


def face_midpoints(
    geometry: GridGeometry, faces: list[tuple[tuple[int, ...], int]]
) -> np.ndarray:
    if not faces:
        return np.empty((0, geometry.d))
    pts = np.empty((len(faces), geometry.d))
    for row, (cell, axis) in enumerate(faces):
        for k in range(geometry.d):
            c = geometry.origin[k] + (cell[k] + 0.5) * geometry.h
            if k == axis:
                c += 0.5 * geometry.h
            pts[row, k] = c
    return pts


def boundary_union_check(
    a: GridSet, b: GridSet, omega: GridSet | None = None
) -> list[tuple[tuple[int, ...], int]]:
    """Face-level check of the boundary-of-union inclusion; returns violations.

    Every boundary face of A by-union B must be a boundary face of A whose
    outer cell avoids B, or a boundary face of B whose outer cell avoids A,
    or a boundary face of both.  The returned list is expected to be empty.
    """
    _require_same_geometry(a, b, omega)
    geo = a.geometry
    union = a.union(b)
    violations: list[tuple[tuple[int, ...], int]] = []
    for axis in range(geo.d):
        lo_u, hi_u = _face_sides(union.mask, axis, union.outside)
        sep_u = lo_u != hi_u
        qual = _face_qualifier(omega, geo, axis, "touching")
        if qual is not True:
            sep_u = sep_u & qual
        lo_a, hi_a = _face_sides(a.mask, axis, a.outside)
        lo_b, hi_b = _face_sides(b.mask, axis, b.outside)
        sep_a = lo_a != hi_a
        sep_b = lo_b != hi_b
        # Outer side of the face = the side not in the union.
        a_outer = np.where(lo_u, hi_a, lo_a)
        b_outer = np.where(lo_u, hi_b, lo_b)
        good = (sep_a & ~b_outer) | (sep_b & ~a_outer) | (sep_a & sep_b)
        bad = sep_u & ~good
        for pos in np.argwhere(bad):
            cell = list(pos)
            cell[axis] -= 1
            violations.append((tuple(int(c) for c in cell), axis))
    return violations


def validate_margin(cells: GridSet, margin_cells: int) -> None:
    """Raise MarginViolation if the set intrudes into the edge margin band."""
    if margin_cells <= 0:
        return
    geo = cells.geometry
    core = [slice(margin_cells, n - margin_cells) for n in geo.shape]
    if any(s.start >= s.stop for s in core):
        raise MarginViolation(
            f"margin of {margin_cells} cells leaves no room in grid {geo.shape}"
        )
    inner = np.zeros(geo.shape, dtype=bool)
    inner[tuple(core)] = True
    if (cells.mask & ~inner).any():
        raise MarginViolation(
            f"set occupies cells within {margin_cells} cells of the box edge"
        )
