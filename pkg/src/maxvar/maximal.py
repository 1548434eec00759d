"""Local maximal operators for indicator functions on grids.

Two operators act on a cell set E inside a region omega (``None`` = free
space, i.e. all of R^d with the grid box as observation window):

* ``dyadic_maximal``: at each cell, the maximum of |E cap Q| / |Q| over the
  grid-aligned dyadic cubes Q containing the cell with Q inside omega.
  Cube averages are exact dyadic rationals, computed from a pyramid of
  cube sums in O(N log N).
* ``uncentered_maximal``: at each cell x, the maximum of |E cap B| / |B|
  over balls B = B(c, r) with r in a radius schedule, c on the cell-center
  lattice of the box, x strictly inside B, and B inside omega.  Discrete
  balls collect the cells whose centers lie strictly within r of c, so the
  stencil depends only on the integer threshold s = max{|delta|^2 : |delta|
  * h < r}; radii sharing a stencil are deduplicated (keeping the smallest,
  whose admissibility constraint is weakest) without changing the result.

Ball membership in omega is decided by the squared Euclidean distance
transform of omega's complement: B(c, r) lies inside omega iff no
complement cell center sits strictly within r of c.  Everything is
integer-exact up to the final count/size division.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage

from .grid import GridGeometry, GridSet, ScalarField, _require_same_geometry

__all__ = [
    "Ball",
    "DyadicCube",
    "RadiusSchedule",
    "dyadic_maximal",
    "uncentered_maximal",
    "superlevel_family",
    "superlevel_cubes",
    "mf_geq_f_check",
    "ball_cells",
    "stencil_threshold",
    "stencil_offsets",
    "stencil_size",
]


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball in world coordinates."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains_point(self, point) -> bool:
        return (
            sum((p - c) ** 2 for p, c in zip(point, self.center)) < self.radius**2
        )


@dataclass(frozen=True)
class DyadicCube:
    """Grid-aligned dyadic cube: side ``2**level`` cells at block ``index``."""

    level: int
    index: tuple[int, ...]

    @property
    def side_cells(self) -> int:
        return 1 << self.level

    def cell_slices(self) -> tuple[slice, ...]:
        s = self.side_cells
        return tuple(slice(i * s, (i + 1) * s) for i in self.index)


@dataclass(frozen=True)
class RadiusSchedule:
    """Strictly increasing list of ball radii for the uncentered operator.

    ``kind`` is "geometric" (r, r*ratio, ...) or "arithmetic" (r, r+step,
    ...), always starting at ``r_min`` and never exceeding ``r_max``.
    """

    r_min: float
    r_max: float
    kind: str = "geometric"
    ratio: float = 1.05
    step: float = 0.0

    def __post_init__(self) -> None:
        if not (0 < self.r_min <= self.r_max):
            raise ValueError(f"need 0 < r_min <= r_max, got {self.r_min}, {self.r_max}")
        if self.kind == "geometric":
            if self.ratio <= 1.0:
                raise ValueError("geometric schedule needs ratio > 1")
        elif self.kind == "arithmetic":
            if self.step <= 0.0:
                raise ValueError("arithmetic schedule needs step > 0")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def default(cls, geometry: GridGeometry) -> "RadiusSchedule":
        """Geometric radii, ratio 1.05, from h up to half the box diagonal."""
        return cls(r_min=geometry.h, r_max=max(geometry.diameter / 2, geometry.h))

    def radii(self) -> np.ndarray:
        vals = [self.r_min]
        while True:
            nxt = (
                vals[-1] * self.ratio
                if self.kind == "geometric"
                else vals[-1] + self.step
            )
            if nxt > self.r_max * (1 + 1e-12):
                break
            vals.append(nxt)
        return np.asarray(vals)

    def validate_for(self, geometry: GridGeometry) -> None:
        if self.r_min < geometry.h * (1 - 1e-12):
            raise ValueError(
                f"r_min {self.r_min} below the cell size {geometry.h}"
            )
        if self.r_max > geometry.diameter * (1 + 1e-12):
            raise ValueError(
                f"r_max {self.r_max} exceeds the grid diameter {geometry.diameter}"
            )


# ---------------------------------------------------------------------------
# ball stencils
# ---------------------------------------------------------------------------


def stencil_threshold(radius: float, h: float) -> int:
    """Largest integer s with s < (radius/h)^2, i.e. max |delta|^2 in the stencil.

    Cell offsets delta belong to the open ball of radius r iff
    |delta| * h < r iff |delta|^2 <= s.  Exact squared-integer arithmetic
    keeps strictness decisions away from float noise.
    """
    rho_sq = (radius / h) ** 2
    near = round(rho_sq)
    if abs(rho_sq - near) < 1e-9 * max(rho_sq, 1.0):
        return int(near) - 1
    return int(math.floor(rho_sq))


def _perp_offsets(s: int, d: int) -> list[tuple[tuple[int, ...], int]]:
    """(perpendicular offset, axis-0 halfwidth) pairs describing the stencil.

    The stencil {|delta|^2 <= s} is a union of axis-0 runs: for each offset
    j in the remaining axes with |j|^2 <= s the run halfwidth is
    floor(sqrt(s - |j|^2)).
    """
    if s < 0:
        return []
    if d == 1:
        return [((), math.isqrt(s))]
    w = math.isqrt(s)
    out: list[tuple[tuple[int, ...], int]] = []
    if d == 2:
        for j in range(-w, w + 1):
            rem = s - j * j
            out.append(((j,), math.isqrt(rem)))
        return out
    for j1 in range(-w, w + 1):
        for j2 in range(-math.isqrt(s - j1 * j1), math.isqrt(s - j1 * j1) + 1):
            rem = s - j1 * j1 - j2 * j2
            out.append(((j1, j2), math.isqrt(rem)))
    return out


def stencil_size(s: int, d: int) -> int:
    return sum(2 * w + 1 for _, w in _perp_offsets(s, d))


def stencil_offsets(s: int, d: int) -> np.ndarray:
    """All integer offsets of the stencil, shape (m, d)."""
    rows = []
    for j, w in _perp_offsets(s, d):
        run = np.arange(-w, w + 1)
        block = np.empty((run.size, d), dtype=np.int64)
        block[:, 0] = run
        for k, jk in enumerate(j):
            block[:, k + 1] = jk
        rows.append(block)
    return np.concatenate(rows) if rows else np.empty((0, d), dtype=np.int64)


def ball_cells(geometry: GridGeometry, ball: Ball) -> GridSet:
    """Rasterize an open ball: cells whose centers lie strictly inside.

    Balls centered on the cell-center lattice are rasterized through the
    integer stencil, bit-for-bit the discrete ball used by the operators
    (exact strictness at tie distances).  Off-lattice centers fall back to
    the geometric comparison, clipped to the ball's bounding box.
    """
    idx = (np.asarray(ball.center) - np.asarray(geometry.origin)) / geometry.h - 0.5
    near = np.rint(idx)
    if np.all(np.abs(idx - near) <= 1e-9):
        mask = np.zeros(geometry.shape, dtype=bool)
        s = stencil_threshold(ball.radius, geometry.h)
        if s >= 0:
            cells = stencil_offsets(s, geometry.d) + near.astype(np.int64)
            keep = np.all(
                (cells >= 0) & (cells < np.asarray(geometry.shape)), axis=1
            )
            mask[tuple(cells[keep].T)] = True
        return GridSet(geometry, mask)
    mask = np.zeros(geometry.shape, dtype=bool)
    lo_idx = []
    hi_idx = []
    for k in range(geometry.d):
        lo = (ball.center[k] - ball.radius - geometry.origin[k]) / geometry.h - 0.5
        hi = (ball.center[k] + ball.radius - geometry.origin[k]) / geometry.h - 0.5
        lo_idx.append(max(0, int(math.floor(lo))))
        hi_idx.append(min(geometry.shape[k], int(math.ceil(hi)) + 1))
        if lo_idx[-1] >= hi_idx[-1]:
            return GridSet(geometry, mask)
    window = tuple(slice(a, b) for a, b in zip(lo_idx, hi_idx))
    dist_sq = 0.0
    for k in range(geometry.d):
        c = geometry.axis_centers(k)[window[k]] - ball.center[k]
        shape = [1] * geometry.d
        shape[k] = c.size
        dist_sq = dist_sq + (c**2).reshape(shape)
    mask[window] = dist_sq < ball.radius**2 * (1.0 - 1e-12)
    return GridSet(geometry, mask)


def _shift_into(dest: np.ndarray, src: np.ndarray, shift: tuple[int, ...], op) -> None:
    """dest <- op(dest, src translated by `shift`), missing cells untouched."""
    src_sl, dst_sl = [], []
    for n, j in zip(dest.shape, shift):
        if j >= 0:
            dst_sl.append(slice(j, n))
            src_sl.append(slice(0, n - j))
        else:
            dst_sl.append(slice(0, n + j))
            src_sl.append(slice(-j, n))
        if dst_sl[-1].start >= dst_sl[-1].stop:
            return
    dst, srv = tuple(dst_sl), tuple(src_sl)
    dest[dst] = op(dest[dst], src[srv])


def _window_sum_axis0(prefix: np.ndarray, w: int) -> np.ndarray:
    """Centered window sums of halfwidth w along axis 0 from a prefix array."""
    n = prefix.shape[0] - 1
    hi = np.minimum(np.arange(n) + w + 1, n)
    lo = np.maximum(np.arange(n) - w, 0)
    return np.take(prefix, hi, axis=0) - np.take(prefix, lo, axis=0)


def _ball_count(prefix: np.ndarray, s: int, d: int) -> np.ndarray:
    """Per-center counts of True cells within the stencil (zero padding)."""
    n0 = prefix.shape[0] - 1
    out_shape = (n0,) + prefix.shape[1:]
    out = np.zeros(out_shape, dtype=np.int64)
    for j, w in _perp_offsets(s, d):
        contrib = _window_sum_axis0(prefix, w)
        _shift_into(out, contrib, (0,) + j, np.add)
    return out


def _ball_dilate(values: np.ndarray, s: int, d: int, fill: float) -> np.ndarray:
    """Max over the stencil neighborhood of each cell (constant fill outside)."""
    out = np.full_like(values, fill)
    for j, w in _perp_offsets(s, d):
        if w == 0:
            filtered = values
        else:
            filtered = ndimage.maximum_filter1d(
                values, size=2 * w + 1, axis=0, mode="constant", cval=fill
            )
        _shift_into(out, filtered, (0,) + j, np.maximum)
    return out


def _complement_distance_sq(omega: GridSet) -> np.ndarray:
    """Squared index distance from each cell center to the nearest center
    outside omega (cells beyond the box count as outside)."""
    padded = np.pad(omega.mask, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded)
    core = tuple(slice(1, -1) for _ in omega.geometry.shape)
    return np.rint(dist[core] ** 2).astype(np.int64)


def _stencil_classes(
    schedule: RadiusSchedule, geometry: GridGeometry
) -> list[tuple[float, int]]:
    """Deduplicate schedule radii by stencil: (smallest radius, threshold s)."""
    classes: list[tuple[float, int]] = []
    seen: set[int] = set()
    for r in schedule.radii():
        s = stencil_threshold(float(r), geometry.h)
        if s < 0 or s in seen:
            continue
        seen.add(s)
        classes.append((float(r), s))
    if not classes:
        raise ValueError("radius schedule produces no usable ball stencil")
    return classes


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def _dyadic_levels(geometry: GridGeometry) -> int:
    if not geometry.is_power_of_two():
        raise ValueError(
            f"dyadic operator needs power-of-two shape, got {geometry.shape}"
        )
    return min(int(math.log2(n)) for n in geometry.shape)


def _block_sums(arr: np.ndarray) -> np.ndarray:
    """Sum over 2^d blocks, halving every axis."""
    out = arr
    for axis in range(arr.ndim):
        n = out.shape[axis]
        new_shape = out.shape[:axis] + (n // 2, 2) + out.shape[axis + 1 :]
        out = out.reshape(new_shape).sum(axis=axis + 1)
    return out


def _upsample2(arr: np.ndarray) -> np.ndarray:
    out = arr
    for axis in range(arr.ndim):
        out = np.repeat(out, 2, axis=axis)
    return out


def dyadic_maximal(cells: GridSet, omega: GridSet | None = None) -> ScalarField:
    """Local dyadic maximal field of the indicator of ``cells``.

    Value at cell x: max over dyadic cubes Q with x in Q and Q inside omega
    of the cell-count density |E cap Q| / |Q|.  Cells admitting no cube
    (those outside omega) get 0.  Densities are exact dyadic rationals.
    """
    _require_same_geometry(cells, omega)
    geo = cells.geometry
    levels = _dyadic_levels(geo)
    counts = cells.mask.astype(np.int64)
    osum = omega.mask.astype(np.int64) if omega is not None else None

    level_density: list[np.ndarray] = []
    level_admissible: list[np.ndarray | None] = []
    for lvl in range(levels + 1):
        size = (1 << lvl) ** geo.d
        level_density.append(counts / size)
        if osum is not None:
            level_admissible.append(osum == size)
        else:
            level_admissible.append(None)
        if lvl < levels:
            counts = _block_sums(counts)
            if osum is not None:
                osum = _block_sums(osum)

    acc = np.full([n >> levels for n in geo.shape], -np.inf)
    for lvl in range(levels, -1, -1):
        dens = level_density[lvl]
        adm = level_admissible[lvl]
        layer = dens if adm is None else np.where(adm, dens, -np.inf)
        acc = np.maximum(acc, layer)
        if lvl > 0:
            acc = _upsample2(acc)
    return ScalarField(geo, np.where(np.isfinite(acc), acc, 0.0))


def uncentered_maximal(
    cells: GridSet,
    omega: GridSet | None = None,
    schedule: RadiusSchedule | None = None,
    threads: int = 1,
) -> ScalarField:
    """Local uncentered maximal field of the indicator of ``cells``.

    Value at cell x: max over schedule radii r and lattice centers c with
    |c - x| < r and B(c, r) inside omega of |E cap B| / |B| (cell counts).
    Cells with no admissible ball get 0.  Monotone nondecreasing in the
    schedule; with r_min = h every E cell reaches value 1 in free space.
    """
    _require_same_geometry(cells, omega)
    if cells.outside:
        raise ValueError("maximal operators expect a set with outside=False")
    geo = cells.geometry
    if schedule is None:
        schedule = RadiusSchedule.default(geo)
    schedule.validate_for(geo)
    classes = _stencil_classes(schedule, geo)

    counts64 = cells.mask.astype(np.int64)
    prefix = np.concatenate(
        [np.zeros((1,) + geo.shape[1:], dtype=np.int64), np.cumsum(counts64, axis=0)]
    )
    dist_sq = _complement_distance_sq(omega) if omega is not None else None

    def one_class(item: tuple[float, int]) -> np.ndarray:
        _, s = item
        size = stencil_size(s, geo.d)
        ratio = _ball_count(prefix, s, geo.d) / size
        if dist_sq is not None:
            ratio = np.where(dist_sq >= s + 1, ratio, -1.0)
        return _ball_dilate(ratio, s, geo.d, -np.inf)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            dilated = list(pool.map(one_class, classes))
    else:
        dilated = [one_class(c) for c in classes]
    acc = dilated[0]
    for layer in dilated[1:]:
        acc = np.maximum(acc, layer)
    return ScalarField(geo, np.clip(acc, 0.0, 1.0))


def superlevel_cubes(
    cells: GridSet, lam: float, omega: GridSet | None = None
) -> list[DyadicCube]:
    """Maximal admissible dyadic cubes of density > lam.

    The union of their cells equals the strict superlevel set of the dyadic
    maximal field at lam, exactly.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {lam}")
    _require_same_geometry(cells, omega)
    geo = cells.geometry
    levels = _dyadic_levels(geo)
    counts = cells.mask.astype(np.int64)
    osum = omega.mask.astype(np.int64) if omega is not None else None
    qualifying: list[np.ndarray] = []
    for lvl in range(levels + 1):
        size = (1 << lvl) ** geo.d
        good = counts / size > lam
        if osum is not None:
            good &= osum == size
        qualifying.append(good)
        if lvl < levels:
            counts = _block_sums(counts)
            if osum is not None:
                osum = _block_sums(osum)

    out: list[DyadicCube] = []
    ancestor = np.zeros([n >> levels for n in geo.shape], dtype=bool)
    for lvl in range(levels, -1, -1):
        fresh = qualifying[lvl] & ~ancestor
        for pos in np.argwhere(fresh):
            out.append(DyadicCube(lvl, tuple(int(p) for p in pos)))
        ancestor |= qualifying[lvl]
        if lvl > 0:
            ancestor = _upsample2(ancestor)
    return out


def superlevel_family(
    cells: GridSet,
    lam: float,
    omega: GridSet | None = None,
    schedule: RadiusSchedule | None = None,
) -> list[Ball]:
    """All admissible schedule balls with density > lam.

    The union of the rasterized balls equals the strict superlevel set of
    the uncentered maximal field at lam, exactly (same stencils, same
    count/size ratios).  Deduplicated stencil classes are reported at their
    smallest schedule radius.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {lam}")
    _require_same_geometry(cells, omega)
    if cells.outside:
        raise ValueError("maximal operators expect a set with outside=False")
    geo = cells.geometry
    if schedule is None:
        schedule = RadiusSchedule.default(geo)
    schedule.validate_for(geo)
    counts64 = cells.mask.astype(np.int64)
    prefix = np.concatenate(
        [np.zeros((1,) + geo.shape[1:], dtype=np.int64), np.cumsum(counts64, axis=0)]
    )
    dist_sq = _complement_distance_sq(omega) if omega is not None else None
    out: list[Ball] = []
    for r, s in _stencil_classes(schedule, geo):
        size = stencil_size(s, geo.d)
        good = _ball_count(prefix, s, geo.d) / size > lam
        if dist_sq is not None:
            good &= dist_sq >= s + 1
        for pos in np.argwhere(good):
            out.append(Ball(geo.cell_center(tuple(int(p) for p in pos)), r))
    return out


def mf_geq_f_check(
    cells: GridSet,
    field: ScalarField,
    operator: str,
    omega: GridSet | None = None,
    schedule: RadiusSchedule | None = None,
) -> list[tuple[int, ...]]:
    """Cells violating M 1_E >= 1_E; the returned list is expected empty.

    For the dyadic operator the field must equal 1 on every cell of
    E cap omega.  For the uncentered operator the guarantee holds on the
    erosion of E by the smallest schedule ball (the cell's own minimal ball
    must be full), intersected with the admissible centers when omega is
    restricted.
    """
    _require_same_geometry(cells, field, omega)
    geo = cells.geometry
    if operator == "dyadic":
        domain = cells.mask.copy()
        if omega is not None:
            domain &= omega.mask
    elif operator == "uncentered":
        if schedule is None:
            schedule = RadiusSchedule.default(geo)
        schedule.validate_for(geo)
        s = stencil_threshold(float(schedule.radii()[0]), geo.h)
        size = stencil_size(s, geo.d)
        counts64 = cells.mask.astype(np.int64)
        prefix = np.concatenate(
            [
                np.zeros((1,) + geo.shape[1:], dtype=np.int64),
                np.cumsum(counts64, axis=0),
            ]
        )
        domain = _ball_count(prefix, s, geo.d) == size
        if omega is not None:
            domain &= _complement_distance_sq(omega) >= s + 1
    else:
        raise ValueError(f"unknown operator {operator!r}")
    bad = domain & (field.values != 1.0)
    return [tuple(int(c) for c in pos) for pos in np.argwhere(bad)]
