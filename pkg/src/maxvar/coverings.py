"""Ball-family covering constructions.

Vitali disjoint subfamilies, half-density boxing balls found along
continuous ball paths, surface-distance boxing covers of a shape boundary,
multi-scale covers organized by dyadic diameter buckets, and discrete
perimeter ratios for unions of balls.

Scale buckets follow diam in [1/2, 1) * 2^n  <->  bucket n, computed with
math.frexp so bucketing is exact for every float diameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .grid import (
    GridGeometry,
    GridSet,
    boundary_faces,
    perimeter,
)
from .maximal import Ball, ball_cells
from .geometry import Cube, ball_intersection_volume, rasterize_region, unit_ball_volume, unit_sphere_area

__all__ = [
    "BallFamily",
    "scale_bucket",
    "union_raster",
    "vitali_subfamily",
    "BoxedBall",
    "boxing_ball",
    "BoxingCover",
    "boxing_cover",
    "SurfaceBall",
    "SurfaceCover",
    "surface_boxing_cover",
    "MultiscaleReport",
    "multiscale_covers",
    "LargeBallRatio",
    "large_ball_boundary_ratio",
    "UnionPerimeterResult",
    "intersecting_union_perimeter_check",
]


def scale_bucket(diameter: float) -> int:
    """Bucket n with diameter in [1/2, 1) * 2^n (exact float bucketing)."""
    if diameter <= 0:
        raise ValueError("diameter must be positive")
    return math.frexp(diameter)[1]


@dataclass
class BallFamily:
    """An ordered, finite family of balls in a common dimension."""

    balls: list[Ball]

    def __post_init__(self) -> None:
        self.balls = list(self.balls)
        dims = {b.d for b in self.balls}
        if len(dims) > 1:
            raise ValueError(f"mixed dimensions in family: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.balls)

    def __iter__(self):
        return iter(self.balls)

    def __getitem__(self, i: int) -> Ball:
        return self.balls[i]

    @property
    def d(self) -> int:
        if not self.balls:
            raise ValueError("empty family has no dimension")
        return self.balls[0].d

    def buckets(self) -> dict[int, list[Ball]]:
        out: dict[int, list[Ball]] = {}
        for b in self.balls:
            out.setdefault(scale_bucket(b.diameter), []).append(b)
        return out

    def bucket(self, n: int) -> "BallFamily":
        return BallFamily([b for b in self.balls if scale_bucket(b.diameter) == n])


def union_raster(balls, geometry: GridGeometry) -> GridSet:
    """Rasterized union of a collection of balls."""
    mask = np.zeros(geometry.shape, dtype=bool)
    for b in balls:
        mask |= ball_cells(geometry, b).mask
    return GridSet(geometry, mask)


def _ball_counts(cells: GridSet, ball: Ball) -> tuple[int, int]:
    """(# set cells inside the ball, # grid cells inside the ball).

    Works on a bounding-box view so repeated density evaluations along a
    ball path stay proportional to the ball, not the grid.
    """
    geo = cells.geometry
    h = geo.h
    lo_idx, hi_idx = [], []
    for k in range(geo.d):
        lo = (ball.center[k] - ball.radius - geo.origin[k]) / h - 0.5
        hi = (ball.center[k] + ball.radius - geo.origin[k]) / h - 0.5
        a = max(0, int(math.floor(lo)))
        b = min(geo.shape[k], int(math.ceil(hi)) + 1)
        if a >= b:
            return 0, 0
        lo_idx.append(a)
        hi_idx.append(b)
    window = tuple(slice(a, b) for a, b in zip(lo_idx, hi_idx))
    subgeo = GridGeometry(
        tuple(b - a for a, b in zip(lo_idx, hi_idx)),
        h,
        tuple(geo.origin[k] + lo_idx[k] * h for k in range(geo.d)),
    )
    m = ball_cells(subgeo, ball).mask
    return int((m & cells.mask[window]).sum()), int(m.sum())


def _ball_density(cells: GridSet, ball: Ball) -> float:
    inside, total = _ball_counts(cells, ball)
    return inside / total if total else 0.0


# ---------------------------------------------------------------------------
# Vitali
# ---------------------------------------------------------------------------


def vitali_subfamily(family: BallFamily, expansion: float = 5.0) -> BallFamily:
    """Greedy disjoint subfamily whose ``expansion``-dilates cover the union.

    Selection runs in decreasing radius (ties broken lexicographically by
    center), keeping a ball iff it is disjoint from everything kept so far
    (open balls: center distance >= radius sum).  Every input ball then
    meets a kept ball of at least its radius, so it is contained in the
    kept ball scaled by ``expansion`` whenever expansion >= 3; the classical
    factor 5 is the default.  Containment is verified exactly.
    """
    if expansion < 3.0:
        raise ValueError("expansion below 3 cannot guarantee covering")
    order = sorted(family, key=lambda b: (-b.radius, b.center))
    chosen: list[Ball] = []
    for b in order:
        if all(
            math.dist(b.center, s.center) >= b.radius + s.radius for s in chosen
        ):
            chosen.append(b)
    for b in order:
        for s in chosen:
            if math.dist(b.center, s.center) < b.radius + s.radius:
                gap = math.dist(b.center, s.center) + b.radius - expansion * s.radius
                if gap > 1e-12 * s.radius:
                    raise AssertionError(
                        f"expansion {expansion} fails to absorb a ball (gap {gap})"
                    )
                break
        else:  # pragma: no cover - impossible: b intersects itself if chosen
            raise AssertionError("input ball meets no chosen ball")
    return BallFamily(chosen)


# ---------------------------------------------------------------------------
# boxing: half-density balls along a continuous path
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxedBall:
    ball: Ball
    density: float
    tolerance: float  # 5 h / diam(ball)
    t: float          # position along the interpolation path


def boxing_ball(cells: GridSet, b1: Ball, x) -> BoxedBall:
    """A ball F with x in F, F inside b1, and set density 1/2 up to 5h/diam F.

    Starts from a sub-cell ball at the set-cell center x (density one) and
    bisects along the straight-line interpolation to b1 (density at most
    1/2 by precondition).  The discrete density moves by at most a shell of
    cells per step, hence the h/diam-shaped tolerance.
    """
    geo = cells.geometry
    h = geo.h
    x = np.asarray(x, dtype=float)
    idx = geo.cell_of_point(x)
    center = np.asarray(geo.cell_center(idx))
    if np.max(np.abs(x - center)) > 1e-9 * h:
        raise ValueError("seed point is not a cell center")
    if not cells.mask[idx]:
        raise ValueError("seed cell does not belong to the set")
    gap = b1.radius - math.dist(tuple(x), b1.center)
    if gap <= 0:
        raise ValueError("seed point lies outside the covering ball")
    dens1 = _ball_density(cells, b1)
    if dens1 > 0.5 + 1e-12:
        raise ValueError(f"covering ball density {dens1:.4f} exceeds 1/2")
    if dens1 == 0.5:
        return BoxedBall(b1, 0.5, 5.0 * h / b1.diameter, 1.0)

    r0 = min(0.999 * h, 0.5 * gap)
    x1 = np.asarray(b1.center)

    def at(t: float) -> tuple[Ball, float]:
        c = (1.0 - t) * x + t * x1
        r = (1.0 - t) * r0 + t * b1.radius
        ball = Ball(tuple(c), r)
        return ball, _ball_density(cells, ball)

    lo, hi = 0.0, 1.0
    best: tuple[float, float, Ball, float] | None = None
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        ball, dens = at(mid)
        key = abs(dens - 0.5)
        if best is None or key < best[0]:
            best = (key, dens, ball, mid)
        if dens >= 0.5:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    assert best is not None
    miss, dens, ball, t = best
    tolerance = 5.0 * h / ball.diameter
    if miss > tolerance:
        raise RuntimeError(
            f"density bisection stalled at {dens:.4f} "
            f"(radius {ball.radius:.4g}, tolerance {tolerance:.4g})"
        )
    return BoxedBall(ball, dens, tolerance, t)


@dataclass
class BoxingCover:
    family: BallFamily
    boxes: list[BoxedBall]
    hosts: list[int]            # index of the input ball that produced each box
    residual_cells: int
    residual_fraction: float


def boxing_cover(
    cells: GridSet, family: BallFamily, residual_tolerance: float = 0.01
) -> BoxingCover:
    """Cover the set cells of a union of low-density balls by boxed balls.

    Every input ball must have set density at most 1/2; input balls with no
    set cells contribute nothing.  Greedily re-seeds at the first uncovered
    set cell (row-major), so each boxed ball covers at least its seed.  The
    uncovered residual is reported and must stay below
    ``residual_tolerance`` of the set mass inside the union.
    """
    geo = cells.geometry
    covered = np.zeros(geo.shape, dtype=bool)
    stuck = np.zeros(geo.shape, dtype=bool)
    target_union = np.zeros(geo.shape, dtype=bool)
    boxes: list[BoxedBall] = []
    hosts: list[int] = []
    for bi, b in enumerate(family):
        region = ball_cells(geo, b)
        if region.count and _ball_density(cells, b) > 0.5 + 1e-12:
            raise ValueError(f"ball {bi} has density above 1/2")
        target = region.mask & cells.mask
        target_union |= target
        while True:
            todo = target & ~covered & ~stuck
            seeds = np.argwhere(todo)
            if not len(seeds):
                break
            seed = tuple(int(c) for c in seeds[0])
            boxed = boxing_ball(cells, b, geo.cell_center(seed))
            fmask = ball_cells(geo, boxed.ball).mask
            if not (fmask & todo).any():
                stuck[seed] = True  # rasterization margin too thin; skip seed
                continue
            covered |= fmask
            boxes.append(boxed)
            hosts.append(bi)
    residual = int((target_union & ~covered).sum())
    total = int(target_union.sum())
    fraction = residual / total if total else 0.0
    if fraction > residual_tolerance:
        raise RuntimeError(
            f"boxing cover leaves {fraction:.2%} of the set uncovered"
        )
    return BoxingCover(
        BallFamily([bx.ball for bx in boxes]), boxes, hosts, residual, fraction
    )


# ---------------------------------------------------------------------------
# surface-distance boxing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceBall:
    ball: Ball
    density: float          # set density of the depth-trimmed lens A(r)
    boundary_ratio: float   # sigma(dE cap A) / (lam^{(d-1)/d} sigma(dB(x,r)))
    host: int
    sample: tuple[float, ...]


@dataclass
class SurfaceCover:
    family: BallFamily
    records: list[SurfaceBall]
    skipped: list[dict]
    lam: float


def _shape_raster(shape: Ball | Cube, geometry: GridGeometry) -> GridSet:
    if isinstance(shape, Ball):
        return ball_cells(geometry, shape)
    return rasterize_region(shape, geometry)


def _depth_field(shape: Ball | Cube, geometry: GridGeometry) -> np.ndarray:
    """Continuous distance from every cell center to the shape's complement."""
    grids = geometry.center_grids()
    pts = np.stack([np.broadcast_to(g, geometry.shape) for g in grids], axis=-1)
    if isinstance(shape, Ball):
        return shape.radius - np.linalg.norm(
            pts - np.asarray(shape.center), axis=-1
        )
    half = shape.side / 2.0
    return (half - np.abs(pts - np.asarray(shape.center))).min(axis=-1)


def surface_boxing_cover(
    x_shape: Ball | Cube,
    cells: GridSet,
    lam: float,
    *,
    eta: float = 0.05,
    samples: np.ndarray | None = None,
    host: int = -1,
) -> SurfaceCover:
    """Balls centered on the shape boundary whose depth-trimmed lenses hold
    set density lam/2.

    For each sampled boundary point x away from the closure of the set, the
    radius r is bisected so that A(r) = B(x,r) cap {y : dist(y, X^c) >
    lam * diam B(x,r) / (4 d^{d/2-1})} carries discrete set density lam/2;
    each record stores the measured interface-to-sphere ratio
    sigma(dE cap A) / (lam^{(d-1)/d} sigma(dB)).  Samples are boundary-face
    midpoints thinned to an eta*diam(X) net unless given explicitly.
    Samples with no density sign change along r are skipped with a
    diagnostic entry, not an error.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"density threshold must lie in (0,1), got {lam}")
    geo = cells.geometry
    d = geo.d
    h = geo.h
    diam_x = x_shape.diameter
    xset = _shape_raster(x_shape, geo)
    n_x = xset.count
    if n_x == 0:
        raise ValueError("shape rasterizes to no cells")
    n_e = int((xset.mask & cells.mask).sum())
    if n_e < lam * n_x * (1.0 - 1e-9):
        raise ValueError(
            f"set density {n_e / n_x:.4f} in the shape is below lam={lam}"
        )

    if samples is None:
        faces = boundary_faces(xset, None, exclude_closure_of=cells)
        mids = faces.midpoints()
        kept: list[np.ndarray] = []
        net = eta * diam_x
        for p in mids:
            if all(np.linalg.norm(p - q) >= net for q in kept):
                kept.append(p)
        samples = np.array(kept).reshape(-1, d)
    else:
        samples = np.atleast_2d(np.asarray(samples, dtype=float))

    depth = _depth_field(x_shape, geo)
    coef = lam * 2.0 / (4.0 * d ** (d / 2.0 - 1.0))  # offset per unit radius
    records: list[SurfaceBall] = []
    skipped: list[dict] = []

    def lens_mask(x: np.ndarray, r: float) -> np.ndarray:
        ball = Ball(tuple(x), r)
        inside = ball_cells(geo, ball).mask
        return inside & (depth > coef * r)

    def density(x: np.ndarray, r: float) -> float:
        m = lens_mask(x, r)
        n = int(m.sum())
        return int((m & cells.mask).sum()) / n if n else 0.0

    half = lam / 2.0
    for x in samples:
        radii = np.geomspace(0.75 * h, diam_x, 25)
        dens = [density(x, r) for r in radii]
        bracket = None
        for i in range(1, len(radii)):
            if dens[i - 1] < half <= dens[i]:
                bracket = (radii[i - 1], radii[i])
                break
        if bracket is None:
            reason = "starts_above" if dens[0] >= half else "never_reaches"
            skipped.append(
                {"sample": tuple(float(v) for v in x), "reason": reason}
            )
            continue
        lo, hi = bracket
        best: tuple[float, float, float] | None = None
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            dm = density(x, mid)
            key = abs(dm - half)
            if best is None or key < best[0]:
                best = (key, dm, mid)
            if dm >= half:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-13 * diam_x:
                break
        assert best is not None
        miss, dval, r = best
        if miss > min(lam / 4.0, 2.5 * h / r):
            skipped.append(
                {
                    "sample": tuple(float(v) for v in x),
                    "reason": "no_convergence",
                    "density": dval,
                }
            )
            continue
        amask = lens_mask(x, r)
        window = GridSet(geo, amask)
        interface = perimeter(cells, window, rule="interior")
        sphere = unit_sphere_area(d) * r ** (d - 1)
        ratio = interface / (lam ** ((d - 1) / d) * sphere)
        records.append(
            SurfaceBall(
                Ball(tuple(float(v) for v in x), r), dval, ratio, host,
                tuple(float(v) for v in x),
            )
        )
    return SurfaceCover(
        BallFamily([rec.ball for rec in records]), records, skipped, lam
    )


# ---------------------------------------------------------------------------
# multi-scale covers
# ---------------------------------------------------------------------------


@dataclass
class MultiscaleReport:
    scales: dict[int, list[Ball]]
    records: list[SurfaceBall]
    skipped: list[dict]
    disjoint_violations: list[tuple[int, int, int]]   # (bucket, i, j)
    cover_violations: list[dict]                      # uncovered boundary midpoints
    proximity_max: float                              # max dist / (2 diam C)
    proximity_violations: list[dict]
    deep_constants: dict[int, list[float]]            # per-bucket interface constants
    deep_min: float
    lam: float

    @property
    def all_pass(self) -> bool:
        return (
            not self.disjoint_violations
            and not self.cover_violations
            and not self.proximity_violations
            and (self.deep_min > 0.0 or not self.deep_constants)
        )


def _face_id_set(faceset) -> set:
    return set(faceset.faces)


def multiscale_covers(
    cells: GridSet,
    family: BallFamily,
    lam: float,
    *,
    eta: float = 0.05,
    topup_rounds: int = 3,
) -> MultiscaleReport:
    """Per-scale disjoint covers of the union boundary away from the set.

    Surface-boxes every family ball, buckets the resulting balls by dyadic
    diameter, Vitali-thins each bucket, and prunes balls whose 5-dilate
    misses the union boundary.  Verifies discretely: (1) per-bucket
    disjointness, (2) boundary faces shared with each scale-m sub-union are
    covered by 5-dilates of buckets <= m+1 (with adaptive re-sampling at
    uncovered midpoints), (3) every kept ball sits within twice its
    diameter of the target boundary, and (4) the set interface deep inside
    the union (distance >= lam d^{1-d/2} 2^{n-3}, scale-n balls) is at
    least a positive multiple of lam^{(d-1)/d} times the ball's sphere
    area; the multiples are recorded.
    """
    geo = cells.geometry
    d = geo.d
    for bi, b in enumerate(family):
        inside, total = _ball_counts(cells, b)
        if total == 0 or inside <= lam * total * (1.0 - 1e-12):
            raise ValueError(
                f"ball {bi} has set density "
                f"{inside / total if total else 0.0:.4f}, needs > {lam}"
            )

    union = union_raster(family, geo)
    target_faces = boundary_faces(union, None, exclude_closure_of=cells)
    target_mids = target_faces.midpoints()
    target_ids = _face_id_set(target_faces)

    fam_buckets = family.buckets()
    bucket_face_ids: dict[int, set] = {}
    for m, balls in fam_buckets.items():
        sub = union_raster(balls, geo)
        bucket_face_ids[m] = _face_id_set(
            boundary_faces(sub, None, exclude_closure_of=cells)
        ) & target_ids

    records: list[SurfaceBall] = []
    skipped: list[dict] = []
    candidates: dict[int, list[Ball]] = {}

    def add_cover(cover: SurfaceCover) -> None:
        records.extend(cover.records)
        skipped.extend(cover.skipped)
        for rec in cover.records:
            candidates.setdefault(scale_bucket(rec.ball.diameter), []).append(
                rec.ball
            )

    for bi, b in enumerate(family):
        add_cover(surface_boxing_cover(b, cells, lam, eta=eta, host=bi))

    def select() -> dict[int, list[Ball]]:
        kept: dict[int, list[Ball]] = {}
        for n, balls in sorted(candidates.items()):
            sel = vitali_subfamily(BallFamily(balls)).balls
            if len(target_mids):
                centers = np.array([s.center for s in sel])
                radii = np.array([s.radius for s in sel])
                dmin = np.min(
                    np.linalg.norm(
                        target_mids[None, :, :] - centers[:, None, :], axis=-1
                    ),
                    axis=1,
                )
                sel = [
                    s
                    for s, dm, r in zip(sel, dmin, radii)
                    if dm <= 5.0 * r * (1.0 + 1e-12)
                ]
            else:
                sel = []
            if sel:
                kept[n] = sel
        return kept

    def uncovered(kept: dict[int, list[Ball]]) -> list[tuple[int, tuple]]:
        missing = []
        for m, ids in bucket_face_ids.items():
            if not ids:
                continue
            mids = _mids_of(geo, ids)
            cover_balls = [
                c for n, cs in kept.items() if n <= m + 1 for c in cs
            ]
            if not cover_balls:
                missing.extend((m, tuple(p)) for p in mids)
                continue
            centers = np.array([c.center for c in cover_balls])
            radii = np.array([5.0 * c.radius for c in cover_balls])
            dist = np.linalg.norm(
                mids[:, None, :] - centers[None, :, :], axis=-1
            )
            bad = ~(dist < radii[None, :] * (1.0 + 1e-12)).any(axis=1)
            missing.extend((m, tuple(p)) for p in mids[bad])
        return missing

    kept = select()
    for _ in range(topup_rounds):
        missing = uncovered(kept)
        if not missing:
            break
        for m, point in missing[:200]:
            hosts = fam_buckets.get(m, [])
            if not hosts:
                continue
            owner = min(
                range(len(hosts)),
                key=lambda i: abs(
                    math.dist(point, hosts[i].center) - hosts[i].radius
                ),
            )
            host_index = family.balls.index(hosts[owner])
            add_cover(
                surface_boxing_cover(
                    hosts[owner],
                    cells,
                    lam,
                    samples=np.array([point]),
                    host=host_index,
                )
            )
        kept = select()

    disjoint_violations = []
    for n, balls in kept.items():
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                if math.dist(balls[i].center, balls[j].center) < (
                    balls[i].radius + balls[j].radius
                ) * (1.0 - 1e-12):
                    disjoint_violations.append((n, i, j))

    cover_violations = [
        {"bucket": m, "midpoint": p} for m, p in uncovered(kept)
    ]

    proximity_max = 0.0
    proximity_violations = []
    for n, balls in kept.items():
        for c in balls:
            dmin = float(
                np.min(np.linalg.norm(target_mids - np.asarray(c.center), axis=-1))
            ) if len(target_mids) else math.inf
            gap = max(0.0, dmin - c.radius)
            ratio = gap / (2.0 * c.diameter)
            proximity_max = max(proximity_max, ratio)
            if gap > 2.0 * c.diameter * (1.0 + 1e-9):
                proximity_violations.append(
                    {"bucket": n, "ball": c, "distance": gap}
                )

    edt = ndimage.distance_transform_edt(union.mask) * geo.h
    deep_constants: dict[int, list[float]] = {}
    deep_min = math.inf
    for n, balls in kept.items():
        t_n = lam * d ** (1.0 - d / 2.0) * 2.0 ** (n - 3)
        consts = []
        for c in balls:
            region = ball_cells(geo, c).mask & union.mask & (edt >= t_n)
            interface = perimeter(cells, GridSet(geo, region), rule="interior")
            consts.append(
                interface
                / (lam ** ((d - 1) / d) * unit_sphere_area(d) * c.radius ** (d - 1))
            )
        deep_constants[n] = consts
        if consts:
            deep_min = min(deep_min, min(consts))
    if deep_min is math.inf:
        deep_min = 0.0

    return MultiscaleReport(
        scales=kept,
        records=records,
        skipped=skipped,
        disjoint_violations=disjoint_violations,
        cover_violations=cover_violations,
        proximity_max=proximity_max,
        proximity_violations=proximity_violations,
        deep_constants=deep_constants,
        deep_min=deep_min,
        lam=lam,
    )


def _mids_of(geometry: GridGeometry, ids) -> np.ndarray:
    from .grid import face_midpoints

    return face_midpoints(geometry, sorted(ids))


# ---------------------------------------------------------------------------
# union perimeter ratios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LargeBallRatio:
    ratio: float       # perimeter of the union inside C / perimeter of C
    normalized: float  # ratio * K^d
    k_factor: float


def large_ball_boundary_ratio(
    c_ball: Ball, family: BallFamily, k_factor: float, geometry: GridGeometry
) -> LargeBallRatio:
    """Interface mass of a union of K-times-larger balls inside a small ball.

    Every family member must have diameter >= k_factor * diam(C).  Returns
    perimeter(union; C) / perimeter(C) with the interior face rule for the
    numerator and the free-space perimeter of the rasterized C below, plus
    the K^d-normalized value that the decay bound predicts stays bounded.
    """
    for i, b in enumerate(family):
        if b.diameter < k_factor * c_ball.diameter * (1.0 - 1e-12):
            raise ValueError(f"ball {i} is smaller than K * diam(C)")
    window = ball_cells(geometry, c_ball)
    if window.count == 0:
        raise ValueError("C rasterizes to no cells")
    union = union_raster(family, geometry)
    num = perimeter(union, window, rule="interior")
    den = perimeter(window)
    ratio = num / den
    return LargeBallRatio(ratio, ratio * k_factor**geometry.d, k_factor)


@dataclass(frozen=True)
class UnionPerimeterResult:
    ratio: float       # perimeter(F cup union) / perimeter(F)
    envelope: float    # (1 - ln lam) * lam^{-2 + 3/(d+1)}
    normalized: float  # ratio / envelope


def intersecting_union_perimeter_check(
    f_ball: Ball, family: BallFamily, lam: float, geometry: GridGeometry
) -> UnionPerimeterResult:
    """Perimeter growth of F under a union of balls that each overlap F.

    Premise |B cap F| >= lam |B| is checked with exact continuous
    intersection volumes; violations raise with the offending indices.
    Perimeters are free-space discrete perimeters of the rasterized sets.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"overlap fraction must lie in (0,1], got {lam}")
    bad = []
    for i, b in enumerate(family):
        vol = unit_ball_volume(b.d) * b.radius**b.d
        if ball_intersection_volume(b, f_ball) < lam * vol * (1.0 - 1e-9):
            bad.append(i)
    if bad:
        raise ValueError(f"balls {bad} intersect F in less than lam of their volume")
    fset = ball_cells(geometry, f_ball)
    if fset.count == 0:
        raise ValueError("F rasterizes to no cells")
    union = GridSet(
        geometry, fset.mask | union_raster(family, geometry).mask
    )
    ratio = perimeter(union) / perimeter(fset)
    d = geometry.d
    envelope = (1.0 - math.log(lam)) * lam ** (-2.0 + 3.0 / (d + 1))
    return UnionPerimeterResult(ratio, envelope, ratio / envelope)
