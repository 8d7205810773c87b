"""Parametrized curves for obstacle boundaries and unit-cell walls.

Every parametrization maps a parameter array ``t`` to positions together with
first and second derivatives. Closed curves are 2*pi periodic; walls are open
curves that become the vertical line ``x = x0`` (with ``y`` affine in ``t``)
outside a bounded region around the obstacles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

CLOSED = "closed"
WALL = "wall"


class GeometryError(ValueError):
    """Raised for invalid or intersecting geometry."""


@dataclass(frozen=True)
class CurvePoint:
    """Samples of a parametrized curve.

    All fields are arrays over the sampled parameters; vectors have a
    trailing axis of length 2.

    Attributes:
        position: Points r(t).
        tangent: Derivatives r'(t).
        normal: Unit normals (y', -x')/|r'|; outward for positively oriented curves.
        jacobian: Speeds |r'(t)|.
        bend: x'y'' - y'x'', i.e. the signed curvature times |r'|^3.
    """

    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    jacobian: np.ndarray
    bend: np.ndarray

    def __len__(self) -> int:
        return self.position.shape[0]

    def shifted(self, dx: float, dy: float = 0.0) -> "CurvePoint":
        return CurvePoint(self.position + np.array([dx, dy]), self.tangent,
                          self.normal, self.jacobian, self.bend)

    def take(self, index) -> "CurvePoint":
        return CurvePoint(self.position[index], self.tangent[index], self.normal[index],
                          self.jacobian[index], self.bend[index])

    @staticmethod
    def concat(points: Sequence["CurvePoint"]) -> "CurvePoint":
        return CurvePoint(*(np.concatenate([getattr(p, f) for p in points])
                            for f in ("position", "tangent", "normal", "jacobian", "bend")))


def _curve_point(r: np.ndarray, dr: np.ndarray, ddr: np.ndarray) -> CurvePoint:
    jac = np.hypot(dr[:, 0], dr[:, 1])
    if np.any(jac <= 0.0):
        raise GeometryError("parametrization has a vanishing derivative")
    normal = np.stack([dr[:, 1], -dr[:, 0]], axis=1) / jac[:, None]
    bend = dr[:, 0] * ddr[:, 1] - dr[:, 1] * ddr[:, 0]
    return CurvePoint(r, dr, normal, jac, bend)


def _stack(x, y):
    return np.column_stack(np.broadcast_arrays(x, y)).astype(float)


# ---------------------------------------------------------------------------
# elementary parametrizations: callables t -> (r, r', r'')


@dataclass(frozen=True)
class Kite:
    """The kite r(t) = (cos t/2 + 13/40 cos 2t - 13/40, 3/4 sin t)."""

    def __call__(self, t):
        c, s = np.cos(t), np.sin(t)
        c2, s2 = np.cos(2 * t), np.sin(2 * t)
        r = _stack(0.5 * c + 0.325 * c2 - 0.325, 0.75 * s)
        dr = _stack(-0.5 * s - 0.65 * s2, 0.75 * c)
        ddr = _stack(-0.5 * c - 1.3 * c2, -0.75 * s)
        return r, dr, ddr


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __call__(self, t):
        c, s = np.cos(t), np.sin(t)
        a = self.radius
        r = _stack(self.center[0] + a * c, self.center[1] + a * s)
        return r, _stack(-a * s, a * c), _stack(-a * c, -a * s)


@dataclass(frozen=True)
class VerticalLine:
    x0: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        zero, one = np.zeros_like(t), np.ones_like(t)
        return _stack(self.x0 + zero, t), _stack(zero, one), _stack(zero, zero)


def window_with_derivatives(y, y0: float, y1: float):
    """Window chi(y, y0, y1) and its first two derivatives in y."""
    y = np.asarray(y, dtype=float)
    ay = np.abs(y)
    sgn = np.sign(y)
    val = np.where(ay <= y0, 1.0, 0.0)
    d1 = np.zeros_like(y)
    d2 = np.zeros_like(y)
    mid = (ay > y0) & (ay < y1)
    if np.any(mid):
        scale = 1.0 / (y1 - y0)
        u = (ay[mid] - y0) * scale
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            g = np.exp(-1.0 / u)
            p = 1.0 / (u - 1.0)
            f = 2.0 * g * p
            chi = np.exp(f)
            g1 = g / u**2
            g2 = g * (1.0 / u**4 - 2.0 / u**3)
            p1 = -p * p
            p2 = 2.0 * p**3
            f1 = 2.0 * (g1 * p + g * p1)
            f2 = 2.0 * (g2 * p + 2.0 * g1 * p1 + g * p2)
            c1 = chi * f1 * scale
            c2 = chi * (f1 * f1 + f2) * scale**2
        dead = chi == 0.0
        c1[dead] = 0.0
        c2[dead] = 0.0
        val[mid] = chi
        d1[mid] = c1 * sgn[mid]
        d2[mid] = c2
    return val, d1, d2


@dataclass(frozen=True)
class BumpLine:
    """x = x0 + amplitude*(sin(frequency*t + phase) - offset)*chi(t, plateau, support), y = t."""

    x0: float
    amplitude: float
    plateau: float
    support: float
    frequency: float
    phase: float = 0.0
    offset: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        w, w1, w2 = window_with_derivatives(t, self.plateau, self.support)
        arg = self.frequency * t + self.phase
        s, c = np.sin(arg), np.cos(arg)
        om = self.frequency
        a = self.amplitude
        x = self.x0 + a * (s - self.offset) * w
        s0 = s - self.offset
        dx = a * (om * c * w + s0 * w1)
        ddx = a * (-om * om * s * w + 2 * om * c * w1 + s0 * w2)
        zero, one = np.zeros_like(t), np.ones_like(t)
        return _stack(x, t), _stack(dx, one), _stack(ddx, zero)


def _logcosh(z):
    az = np.abs(z)
    return az + np.log1p(np.exp(-2.0 * az)) - np.log(2.0)


@dataclass(frozen=True)
class Graded:
    """Reparametrizes a wall given in its height y so that a uniform t-grid
    is denser by the factor 1/ratio inside |y| < zone.

    The map is y(t) = t - (1-ratio)(width/2)[logcosh((t+T)/width) - logcosh((t-T)/width)]
    with T = zone/ratio, so dy/dt is close to ``ratio`` in the zone and tends to 1
    far away, where y(t) = t -+ (1-ratio)T.
    """

    base: object
    ratio: float
    zone: float
    width: float

    @property
    def offset(self) -> float:
        return (1.0 - self.ratio) * self.zone / self.ratio

    def height(self, t):
        t = np.asarray(t, dtype=float)
        big_t = self.zone / self.ratio
        w = self.width
        q = 1.0 - self.ratio
        y = t - q * 0.5 * w * (_logcosh((t + big_t) / w) - _logcosh((t - big_t) / w))
        dy = 1.0 - q * 0.5 * (np.tanh((t + big_t) / w) - np.tanh((t - big_t) / w))
        ddy = -q * 0.5 / w * (1.0 / np.cosh((t + big_t) / w) ** 2
                              - 1.0 / np.cosh((t - big_t) / w) ** 2)
        return y, dy, ddy

    def parameter_of_height(self, y: float) -> float:
        guess = y + np.sign(y) * self.offset
        lo, hi = guess - 10 * self.width - 1.0, guess + 10 * self.width + 1.0
        return brentq(lambda s: float(self.height(s)[0]) - y, lo, hi, xtol=1e-14, rtol=1e-15)

    def __call__(self, t):
        y, dy, ddy = self.height(t)
        r, dr, ddr = self.base(y)
        return r, dr * dy[:, None], ddr * (dy**2)[:, None] + dr * ddy[:, None]


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Curve:
    """A closed (possibly multi-component) curve or an open wall.

    Attributes:
        kind: ``"closed"`` or ``"wall"``.
        parts: One parametrization per component (walls have exactly one).
        shift: Horizontal translation applied to every evaluated point.
        vertical: True when the wall is the straight line x = const.
    """

    kind: str
    parts: tuple
    shift: float = 0.0
    vertical: bool = False
    name: str = ""

    def __post_init__(self):
        if self.kind not in (CLOSED, WALL):
            raise GeometryError(f"unknown curve kind {self.kind!r}")
        if self.kind == WALL and len(self.parts) != 1:
            raise GeometryError("a wall has exactly one component")

    @property
    def n_components(self) -> int:
        return len(self.parts)

    def evaluate(self, t, component: int = 0) -> CurvePoint:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        r, dr, ddr = self.parts[component](t)
        pts = _curve_point(np.array(r, dtype=float), np.array(dr, dtype=float),
                           np.array(ddr, dtype=float))
        return pts.shifted(self.shift) if self.shift else pts

    __call__ = evaluate

    def translated(self, dx: float) -> "Curve":
        return Curve(self.kind, self.parts, self.shift + dx, self.vertical, self.name)

    def height_map(self, t):
        """Height y(t) of a wall and its derivative."""
        part = self.parts[0]
        if isinstance(part, Graded):
            y, dy, _ = part.height(t)
            return y, dy
        t = np.asarray(t, dtype=float)
        return t, np.ones_like(t)

    def parameter_of_height(self, y: float) -> float:
        part = self.parts[0]
        if isinstance(part, Graded):
            return part.parameter_of_height(y)
        return float(y)


def kite_curve() -> Curve:
    """The kite-shaped obstacle used in the validation experiments."""
    return Curve(CLOSED, (Kite(),), name="kite")


def circle_curve(center=(0.0, 0.0), radius: float = 1.0) -> Curve:
    return Curve(CLOSED, (Circle(tuple(center), float(radius)),), name="circle")


def vertical_wall(x0: float) -> Curve:
    """The straight wall r(t) = (x0, t), normal (1, 0)."""
    return Curve(WALL, (VerticalLine(float(x0)),), vertical=True, name="vertical")


def bump_wall(x0: float, amplitude: float, support_halfwidth: float, *,
              frequency: float = 1.0, phase: float = 0.0, plateau: float | None = None,
              offset: float = 0.0, obstacle: Curve | None = None, period: float | None = None) -> Curve:
    """A wall that weaves sinusoidally around x0 and is straight outside the support.

    Args:
        x0: Asymptotic abscissa of the wall.
        amplitude: Horizontal excursion of the sine.
        support_halfwidth: The wall equals x = x0 for |y| >= this value.
        frequency: Angular frequency of the sine in y.
        phase: Phase of the sine.
        plateau: Height up to which the sine has full amplitude; defaults to
            three quarters of the support.
        offset: Subtracted from the sine, so the bump is amplitude*(sin - offset).
            With offset 1 and phase pi/2 the wall only moves left of x0.
        obstacle: When given, the wall and its translate by ``period`` are checked
            for intersections with this curve.
        period: Cell period used for the translated check.

    Raises:
        GeometryError: If the wall crosses or touches the obstacle.
    """
    if amplitude == 0.0:
        wall = vertical_wall(x0)
    else:
        if plateau is None:
            plateau = 0.75 * support_halfwidth
        if not 0.0 < plateau < support_halfwidth:
            raise GeometryError("bump plateau must lie inside the support")
        wall = Curve(WALL, (BumpLine(float(x0), float(amplitude), float(plateau),
                                     float(support_halfwidth), float(frequency), float(phase),
                                     float(offset)),),
                     name="bump")
    if obstacle is not None:
        check_wall_clearance(wall, obstacle, period, extent=support_halfwidth)
    return wall


def graded_wall(wall: Curve, zone: float, ratio: float, width: float) -> Curve:
    """Same wall, reparametrized so that uniform t-nodes crowd into |y| < zone."""
    if not 0.0 < ratio <= 1.0:
        raise GeometryError("grading ratio must lie in (0, 1]")
    if ratio == 1.0:
        return wall
    return Curve(WALL, (Graded(wall.parts[0], float(ratio), float(zone), float(width)),),
                 wall.shift, wall.vertical, wall.name)


def lattice_centers(a1: float, a2: float, rows: int) -> np.ndarray:
    ells = np.arange(1, 2 * rows)
    xs = np.where(ells % 2 == 1, 1.0, -1.0) * a1 / 4.0
    ys = (rows - ells) * a2 / 2.0
    return np.stack([xs, ys], axis=1)


def circle_lattice(a1: float, a2: float, r: float, rows: int) -> Curve:
    """Centered rectangular lattice of 2*rows - 1 circular pores.

    Pore l (l = 1 .. 2*rows-1) is centered at ((-1)^(l-1) a1/4, (rows - l) a2/2).

    Raises:
        GeometryError: If neighbouring pores overlap or touch, including pores of
            adjacent cells (horizontal period a1).
    """
    if r <= 0 or rows < 1:
        raise GeometryError("radius and row count must be positive")
    centers = lattice_centers(a1, a2, rows)
    images = np.concatenate([centers + [dx, 0.0] for dx in (-a1, 0.0, a1)])
    diff = centers[:, None, :] - images[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    dist[dist == 0.0] = np.inf
    if np.min(dist) <= 2 * r:
        raise GeometryError(f"pores of radius {r} overlap (center spacing {np.min(dist):.6g})")
    parts = tuple(Circle((float(cx), float(cy)), float(r)) for cx, cy in centers)
    return Curve(CLOSED, parts, name="circle_lattice")


def sample_closed(curve: Curve, n: int = 4096) -> list[CurvePoint]:
    t = 2 * np.pi * np.arange(n) / n
    return [curve(t, c) for c in range(curve.n_components)]


def bounding_heights(curve: Curve, margin: float = 1e-3) -> tuple[float, float]:
    """Widened extremes (h_plus, h_minus) of y over a closed curve."""
    ys = np.concatenate([p.position[:, 1] for p in sample_closed(curve)])
    top, bottom = float(ys.max()), float(ys.min())
    return top + margin * abs(top), bottom - margin * abs(bottom)


def _inside_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    # even-odd crossing test
    x, y = points[:, 0][:, None], points[:, 1][:, None]
    x1, y1 = poly[:, 0][None, :], poly[:, 1][None, :]
    x2, y2 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    return np.sum(straddle & (x < xc), axis=1) % 2 == 1


def inside(curve: Curve, points: np.ndarray, n: int = 2048) -> np.ndarray:
    """Boolean mask of points enclosed by any component of a closed curve."""
    points = np.atleast_2d(points)
    mask = np.zeros(len(points), dtype=bool)
    for p in sample_closed(curve, n):
        lo, hi = p.position.min(axis=0), p.position.max(axis=0)
        box = np.all((points >= lo) & (points <= hi), axis=1)
        if np.any(box):
            mask[box] |= _inside_polygon(points[box], p.position)
    return mask


def min_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest distance between two point clouds."""
    dist, _ = cKDTree(np.asarray(b, dtype=float)).query(np.asarray(a, dtype=float))
    return float(np.min(dist))


def check_wall_clearance(wall: Curve, obstacle: Curve, period: float | None,
                         extent: float | None = None, n: int = 4096) -> float:
    """Minimum sampled distance between the wall (and its period translate)
    and the obstacle. Raises GeometryError on contact or crossing."""
    top, bottom = bounding_heights(obstacle)
    reach = max(abs(top), abs(bottom), extent or 0.0) * 1.1
    t_lo, t_hi = wall.parameter_of_height(-reach), wall.parameter_of_height(reach)
    walls = [wall(np.linspace(t_lo, t_hi, n)).position]
    if period is not None:
        walls.append(walls[0] + [period, 0.0])
    obstacle_pts = np.concatenate([p.position for p in sample_closed(obstacle, 1024)])
    clearance = np.inf
    for pts in walls:
        if np.any(inside(obstacle, pts)):
            raise GeometryError("wall crosses the obstacle")
        clearance = min(clearance, min_distance(pts, obstacle_pts))
    if clearance <= 0.0:
        raise GeometryError("wall touches the obstacle")
    return clearance


@dataclass(frozen=True)
class UnitCell:
    """Obstacle and left wall of one period; the right wall is the left one shifted by L."""

    obstacle: Curve
    wall: Curve
    period: float
    heights: tuple[float, float] = field(default=None)

    def __post_init__(self):
        if self.obstacle.kind != CLOSED or self.wall.kind != WALL:
            raise GeometryError("unit cell needs a closed obstacle and a wall")
        if self.heights is None:
            object.__setattr__(self, "heights", bounding_heights(self.obstacle))

    @property
    def right_wall(self) -> Curve:
        return self.wall.translated(self.period)

    @property
    def clearance_height(self) -> float:
        """max(h+, -h-): the window plateau and the measurement lines must clear it."""
        return max(self.heights[0], -self.heights[1])
