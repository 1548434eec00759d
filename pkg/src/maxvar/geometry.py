"""Continuous Euclidean geometry: ball volumes, intersections, and the
quantitative lemma probes used by the covering experiments.

Unit-ball volumes follow the two-step recurrence kappa_d = kappa_{d-2} *
2*pi/d with kappa_0 = 1, kappa_1 = 2; ball-ball intersection volumes use
closed forms in dimensions 1-3 and a spherical-cap decomposition through
the regularized incomplete beta function in general.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import optimize, special

from .grid import GridGeometry, GridSet, perimeter, measure
from .maximal import Ball, ball_cells

__all__ = [
    "Cube",
    "LensRegion",
    "unit_ball_volume",
    "unit_sphere_area",
    "volume_ratio_check",
    "VolumeRatioRow",
    "ball_intersection_volume",
    "spherical_cap_volume",
    "shrink_disjoint_check",
    "ShrinkOutcome",
    "min_angle_probe",
    "AngleProbeReport",
    "lens_region",
    "rasterize_region",
    "isoperimetric_sample",
    "isoperimetric_ratio",
    "IsoperimetricSample",
    "reach_inside_check",
    "ReachOutcome",
]


# ---------------------------------------------------------------------------
# volumes
# ---------------------------------------------------------------------------


def unit_ball_volume(d: int) -> float:
    """Volume of the d-dimensional unit ball via the 2*pi/d recurrence."""
    if d < 0:
        raise ValueError("dimension must be nonnegative")
    if d == 0:
        return 1.0
    if d == 1:
        return 2.0
    return unit_ball_volume(d - 2) * 2.0 * math.pi / d


def unit_sphere_area(d: int) -> float:
    """Surface measure of the unit sphere bounding the d-ball: d * kappa_d."""
    return d * unit_ball_volume(d)


@dataclass(frozen=True)
class VolumeRatioRow:
    d: int
    ratio: float                # kappa_d / kappa_{d-1}
    sqrt_bound: float           # sqrt(d)
    ratio_ok: bool              # ratio <= sqrt(d), proved for d >= 3
    final_bound_ok: bool        # ratio <= 4 d^{3/2} / (d+1), the form the
                                # shrink-factor estimate actually consumes
    slack: float                # sqrt_bound - ratio


def volume_ratio_check(d_max: int) -> list[VolumeRatioRow]:
    """Tabulate kappa_d / kappa_{d-1} against sqrt(d) for 1 <= d <= d_max.

    The sqrt(d) comparison is recorded exactly as computed; in d = 1 and 2
    the literal ratio exceeds sqrt(d) (2 > 1 and pi/2 > sqrt(2)) while the
    weaker inequality ratio <= 4 d^{3/2}/(d+1), which is what the shrink
    bound consumes, holds in every dimension.  Both verdicts are reported.
    """
    if d_max < 3:
        raise ValueError("d_max must be at least 3")
    rows = []
    for d in range(1, d_max + 1):
        ratio = unit_ball_volume(d) / unit_ball_volume(d - 1)
        bound = math.sqrt(d)
        rows.append(
            VolumeRatioRow(
                d=d,
                ratio=ratio,
                sqrt_bound=bound,
                ratio_ok=ratio <= bound,
                final_bound_ok=ratio <= 4.0 * d**1.5 / (d + 1),
                slack=bound - ratio,
            )
        )
    return rows


def spherical_cap_volume(d: int, radius: float, plane_offset: float) -> float:
    """Volume of {x in B(0, radius) : x_1 > plane_offset}.

    ``plane_offset`` may be negative (more than a half ball).  Uses
    0.5 * kappa_d * r^d * I_{1 - (a/r)^2}((d+1)/2, 1/2) for a >= 0.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    a = plane_offset
    if a >= radius:
        return 0.0
    if a <= -radius:
        return unit_ball_volume(d) * radius**d
    if a < 0:
        return (
            unit_ball_volume(d) * radius**d
            - spherical_cap_volume(d, radius, -a)
        )
    x = 1.0 - (a / radius) ** 2
    return (
        0.5
        * unit_ball_volume(d)
        * radius**d
        * float(special.betainc((d + 1) / 2.0, 0.5, x))
    )


def _intersection_1d(r1: float, r2: float, dist: float) -> float:
    return max(0.0, min(dist + r2, r1) - max(dist - r2, -r1))


def _intersection_2d(r1: float, r2: float, dist: float) -> float:
    # standard lens area
    t1 = (dist**2 + r1**2 - r2**2) / (2 * dist * r1)
    t2 = (dist**2 + r2**2 - r1**2) / (2 * dist * r2)
    t1, t2 = min(1.0, max(-1.0, t1)), min(1.0, max(-1.0, t2))
    tri = (
        (-dist + r1 + r2)
        * (dist + r1 - r2)
        * (dist - r1 + r2)
        * (dist + r1 + r2)
    )
    return (
        r1**2 * math.acos(t1)
        + r2**2 * math.acos(t2)
        - 0.5 * math.sqrt(max(0.0, tri))
    )


def _intersection_3d(r1: float, r2: float, dist: float) -> float:
    return (
        math.pi
        * (r1 + r2 - dist) ** 2
        * (
            dist**2
            + 2 * dist * (r1 + r2)
            - 3 * (r1**2 + r2**2)
            + 6 * r1 * r2
        )
        / (12 * dist)
    )


def ball_intersection_volume(b1: Ball, b2: Ball, *, force_caps: bool = False) -> float:
    """Lebesgue volume of the intersection of two balls.

    Dimensions 1-3 use the closed forms; higher dimensions (or
    ``force_caps=True``) split the lens along the radical plane into two
    spherical caps.  Disjoint and nested configurations short-circuit.
    """
    if b1.d != b2.d:
        raise ValueError("balls live in different dimensions")
    d = b1.d
    dist = math.dist(b1.center, b2.center)
    r1, r2 = b1.radius, b2.radius
    if dist >= r1 + r2:
        return 0.0
    if dist <= abs(r1 - r2):
        return unit_ball_volume(d) * min(r1, r2) ** d
    if not force_caps:
        if d == 1:
            return _intersection_1d(r1, r2, dist)
        if d == 2:
            return _intersection_2d(r1, r2, dist)
        if d == 3:
            return _intersection_3d(r1, r2, dist)
    a1 = (dist**2 + r1**2 - r2**2) / (2 * dist)
    return spherical_cap_volume(d, r1, a1) + spherical_cap_volume(d, r2, dist - a1)


# ---------------------------------------------------------------------------
# shrink-factor disjointness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShrinkOutcome:
    """Result of one shrink-disjointness trial."""

    status: str              # "disjoint" | "violation" | "premise_not_met"
    shrink_factor: float     # 1 - 2 d^{3/(d+1)} lam^{2/(d+1)}
    gap: float               # center distance minus sum of radii (shrunken B)
    overlap_fraction: float  # |B cap C| / |B|


def shrink_disjoint_check(b: Ball, c: Ball, lam: float) -> ShrinkOutcome:
    """Check that a small mutual overlap forces the shrunken ball clear of C.

    Premises: lam <= 2^{-(d+1)/2} d^{-3/2}, diam C >= diam B, and
    |B cap C| <= lam |B|.  Conclusion checked: the concentric ball of B
    scaled by 1 - 2 d^{3/(d+1)} lam^{2/(d+1)} is disjoint from C.  Premise
    failures are reported, not raised.
    """
    d = b.d
    if c.d != d:
        raise ValueError("balls live in different dimensions")
    if not 0.0 < lam <= 2.0 ** (-(d + 1) / 2.0) * d**-1.5:
        return ShrinkOutcome("premise_not_met", math.nan, math.nan, math.nan)
    factor = 1.0 - 2.0 * d ** (3.0 / (d + 1)) * lam ** (2.0 / (d + 1))
    overlap = ball_intersection_volume(b, c) / (
        unit_ball_volume(d) * b.radius**d
    )
    if c.radius < b.radius or overlap > lam:
        return ShrinkOutcome("premise_not_met", factor, math.nan, overlap)
    dist = math.dist(b.center, c.center)
    gap = dist - (factor * b.radius + c.radius)
    # open balls are disjoint when centers are at least the radius sum apart
    scale = max(b.radius, c.radius)
    status = "disjoint" if gap >= -1e-9 * scale else "violation"
    return ShrinkOutcome(status, factor, gap, overlap)


# ---------------------------------------------------------------------------
# minimum-distance angle probe
# ---------------------------------------------------------------------------


@dataclass
class AngleProbeReport:
    n_factor: float
    trials: int
    max_angle: float           # largest sampled ang(y1-x1, y2-x2)
    worst_case_angle: float    # constructed adversarial configuration
    passes: bool               # max over both stays <= pi/2
    critical_n: float          # bisected threshold where the worst case hits pi/2
    witness: dict = dc_field(default_factory=dict)


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    cosv = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.acos(max(-1.0, min(1.0, cosv)))


def _worst_case_angle(n_factor: float, d: int = 2) -> tuple[float, dict]:
    """Adversarial configuration for the angle bound, evaluated numerically.

    Both base points sit at the distance where the tangent ball points are
    barely reachable (|x| = sqrt(N^2+1)); the target points are the tangent
    points rotated outward.  The directions of x1, x2 open at pi/4.
    """
    s = math.sqrt(n_factor**2 + 1.0)

    def deviation(s_val: float) -> float:
        # max angle between (y - x) and (-x) over y in the unit ball with
        # |y - x| >= N, by a 1d search over the boundary circle
        def neg_angle(phi: float) -> float:
            y = np.array([math.cos(phi), math.sin(phi)])
            x = np.array([s_val, 0.0])
            if np.linalg.norm(y - x) < n_factor:
                return 0.0
            return -_angle(y - x, -x)

        res = optimize.minimize_scalar(
            neg_angle, bounds=(0.0, math.pi), method="bounded"
        )
        return -float(res.fun)

    best = optimize.minimize_scalar(
        lambda t: -deviation(t),
        bounds=(max(n_factor - 1.0 + 1e-9, 1e-9), n_factor + 3.0),
        method="bounded",
    )
    s = float(best.x)
    dev = deviation(s)
    total = math.pi / 4.0 + 2.0 * dev
    witness = {"base_distance": s, "single_deviation": dev}
    return total, witness


def min_angle_probe(
    n_factor: float, trials: int = 100_000, seed: int = 0
) -> AngleProbeReport:
    """Probe the angle-rigidity bound for a separation factor N.

    Samples pairs (x_i, y_i) with ang(x1, x2) <= pi/4, y_i in the closed
    unit ball, |y_i - x_i| >= N (the ball has diameter 2, so N times half
    the diameter is N), and records the largest angle between y1 - x1 and
    y2 - x2.  Also evaluates a constructed worst case and bisects for the
    critical N where that worst case reaches pi/2.
    """
    if n_factor <= 1.0:
        raise ValueError("separation factor must exceed 1")
    rng = np.random.default_rng(seed)
    max_angle = 0.0
    witness: dict = {}
    d = 2
    for _ in range(trials):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        base = np.array([math.cos(theta), math.sin(theta)])
        delta = rng.uniform(0.0, math.pi / 4.0)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        rot = np.array(
            [
                [math.cos(sign * delta), -math.sin(sign * delta)],
                [math.sin(sign * delta), math.cos(sign * delta)],
            ]
        )
        dirs = (base, rot @ base)
        pts = []
        for u in dirs:
            s = rng.uniform(n_factor - 1.0, n_factor + 3.0)
            x = s * u
            for _ in range(64):
                y = rng.normal(size=d)
                y *= rng.random() ** (1.0 / d) / np.linalg.norm(y)
                if np.linalg.norm(y - x) >= n_factor:
                    break
            else:
                y = -x / np.linalg.norm(x)  # antipode always satisfies the bound
            pts.append((x, y))
        ang = _angle(pts[0][1] - pts[0][0], pts[1][1] - pts[1][0])
        if ang > max_angle:
            max_angle = ang
            witness = {
                "x1": pts[0][0].tolist(),
                "y1": pts[0][1].tolist(),
                "x2": pts[1][0].tolist(),
                "y2": pts[1][1].tolist(),
            }
    worst, worst_info = _worst_case_angle(n_factor)

    def crossing(nv: float) -> float:
        return _worst_case_angle(nv)[0] - math.pi / 2.0

    lo, hi = 1.01, 100.0
    critical = math.nan
    if crossing(lo) > 0 > crossing(hi):
        critical = float(optimize.brentq(crossing, lo, hi, xtol=1e-6))
    witness.update(worst_info)
    return AngleProbeReport(
        n_factor=n_factor,
        trials=trials,
        max_angle=max_angle,
        worst_case_angle=worst,
        passes=max(max_angle, worst) <= math.pi / 2.0 + 1e-12,
        critical_n=critical,
        witness=witness,
    )


# ---------------------------------------------------------------------------
# lens regions and relative isoperimetry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube given by center and side length."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self) -> None:
        if self.side <= 0:
            raise ValueError("cube side must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.d)

    def distance_to_complement(self, pts: np.ndarray) -> np.ndarray:
        half = self.side / 2.0
        gaps = half - np.abs(pts - np.asarray(self.center))
        return gaps.min(axis=-1)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.distance_to_complement(pts) > 0


def _shape_distance_to_complement(shape: Ball | Cube, pts: np.ndarray) -> np.ndarray:
    if isinstance(shape, Ball):
        return shape.radius - np.linalg.norm(
            pts - np.asarray(shape.center), axis=-1
        )
    return shape.distance_to_complement(pts)


def _shape_diameter(shape: Ball | Cube) -> float:
    return shape.diameter


@dataclass(frozen=True)
class LensRegion:
    """X cap C cap {y : dist(y, complement of X) > level * diam C}.

    X is a ball or an axis-aligned cube, C a ball centered on the boundary
    of X; the region is convex as an intersection of convex sets (the
    inward-offset set of a convex X is convex).
    """

    host: Ball | Cube
    cap: Ball
    level: float

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        margin = self.level * self.cap.diameter
        inside_host = _shape_distance_to_complement(self.host, pts) > margin
        dist_cap = np.linalg.norm(pts - np.asarray(self.cap.center), axis=-1)
        return inside_host & (dist_cap < self.cap.radius)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.cap.center)
        return c - self.cap.radius, c + self.cap.radius


def lens_region(host: Ball | Cube, cap: Ball, level: float) -> LensRegion:
    """Validated lens region; see LensRegion.

    Requires level in (0, 1/4], diam C <= 2 diam X, and the cap centered on
    the boundary of X (within a relative tolerance, so rasterized or
    slightly perturbed constructions are accepted).
    """
    if not 0.0 < level <= 0.25:
        raise ValueError(f"level must lie in (0, 1/4], got {level}")
    if cap.diameter > 2.0 * _shape_diameter(host) * (1 + 1e-9):
        raise ValueError("cap ball diameter exceeds twice the host diameter")
    dist = float(
        _shape_distance_to_complement(host, np.asarray(cap.center)[None, :])[0]
    )
    if abs(dist) > 1e-6 * _shape_diameter(host):
        raise ValueError(
            f"cap ball must be centered on the host boundary (offset {dist:.3g})"
        )
    return LensRegion(host, cap, level)


def rasterize_region(region, geometry: GridGeometry) -> GridSet:
    """Cells whose centers satisfy ``region.contains`` (any region object)."""
    grids = geometry.center_grids()
    stacked = np.stack(
        [np.broadcast_to(g, geometry.shape) for g in grids], axis=-1
    )
    mask = region.contains(stacked.reshape(-1, geometry.d)).reshape(geometry.shape)
    return GridSet(geometry, mask)


@dataclass(frozen=True)
class IsoperimetricSample:
    ratio: float
    small_side: float       # min(|E cap A|, |A \ E|)
    interface: float        # perimeter of E inside the open window A
    degenerate: bool        # both sides positive but no interface


def isoperimetric_sample(domain, cells: GridSet) -> IsoperimetricSample:
    """Relative isoperimetric ratio min(|E cap A|, |A-E|)^{d-1} / Per(E; A)^d.

    ``domain`` is a GridSet on the same geometry or an object with a
    ``contains`` predicate to rasterize.  The interface is measured with the
    interior face rule (both cells inside A), matching perimeter relative
    to an open window.  A vanishing interface with both sides of positive
    measure is degenerate and reported as ratio +inf.
    """
    if isinstance(domain, GridSet):
        window = domain
    else:
        window = rasterize_region(domain, cells.geometry)
    inter = measure(cells.intersection(window))
    rest = measure(window.difference(cells))
    small = min(inter, rest)
    interface = perimeter(cells, window, rule="interior")
    d = cells.geometry.d
    if interface == 0.0:
        degenerate = small > 0.0
        return IsoperimetricSample(
            math.inf if degenerate else 0.0, small, interface, degenerate
        )
    return IsoperimetricSample(
        small ** (d - 1) / interface**d, small, interface, False
    )


def isoperimetric_ratio(domain, cells: GridSet) -> float:
    return isoperimetric_sample(domain, cells).ratio


# ---------------------------------------------------------------------------
# reach-inside witness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReachOutcome:
    status: str              # "witness" | "violation" | "premise_not_met"
    witness_index: int       # index into the family, -1 if none
    covered_fraction: float  # discrete |union(F) cap B| / |B|
    shrink_factor: float     # 1 - lam/d


def _local_geometry(ball: Ball, cells_per_axis: int) -> GridGeometry:
    pad = 1.02 * ball.radius
    h = 2.0 * pad / cells_per_axis
    origin = tuple(c - pad for c in ball.center)
    return GridGeometry((cells_per_axis,) * ball.d, h, origin)


def reach_inside_check(
    ball: Ball,
    family: list[Ball],
    lam: float,
    geometry: GridGeometry | None = None,
) -> ReachOutcome:
    """If the family covers a lam-fraction of B, some member must reach the
    concentric ball shrunk by 1 - lam/d.

    The coverage premise is measured discretely (rasterized on ``geometry``
    or a local grid over B); the reach conclusion is the exact open-ball
    intersection test |x_F - x_B| < r_F + (1 - lam/d) r_B.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"coverage fraction must lie in (0, 1], got {lam}")
    if geometry is None:
        per_axis = {1: 4096, 2: 192, 3: 48}[ball.d]
        geometry = _local_geometry(ball, per_axis)
    target = ball_cells(geometry, ball)
    covered = np.zeros(geometry.shape, dtype=bool)
    for member in family:
        covered |= ball_cells(geometry, member).mask
    n_ball = target.count
    if n_ball == 0:
        raise ValueError("ball rasterizes to no cells on the given geometry")
    fraction = float((covered & target.mask).sum()) / n_ball
    factor = 1.0 - lam / ball.d
    if fraction < lam:
        return ReachOutcome("premise_not_met", -1, fraction, factor)
    inner_radius = factor * ball.radius
    for idx, member in enumerate(family):
        if math.dist(member.center, ball.center) < member.radius + inner_radius:
            return ReachOutcome("witness", idx, fraction, factor)
    return ReachOutcome("violation", -1, fraction, factor)
