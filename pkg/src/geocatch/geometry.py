"""Flat-plane primitives, scene construction, and zone/ball membership tests.

All scenes live in the Euclidean plane. The obstacle scene consists of three
circular scatterers of radius r0 whose centers form an equilateral triangle of
side 1 + 2*r0 (so the gap between any two circles is exactly 1), enclosed by a
circular outer wall. Zones are the pairwise convex hulls (stadiums) of the
scatterers.

Everything here is an immutable value; all functions are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Tuple


TWO_PI = 2.0 * math.pi

# Scene kind tags (also the JSON "kind" field values).
TORUS = "torus"
RECTANGLE = "rectangle"
DISK = "disk"
OBSTACLE = "obstacle"


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __iter__(self):
        return iter((self.x, self.y))


def norm_angle(a: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:  # fmod can return exactly 2*pi after the += above
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class Direction:
    """A unit-speed heading with angle in [0, 2*pi).

    When built from a vector, the exact normalized components are kept so that
    axis-aligned headings stay bitwise axis-aligned through reflections
    (cos/sin of the stored angle would reintroduce ~1e-16 cross-axis noise,
    which dispersing walls amplify)."""
    angle: float
    _vx: float = field(default=math.nan, repr=False, compare=False)
    _vy: float = field(default=math.nan, repr=False, compare=False)

    def __post_init__(self):
        a = norm_angle(float(self.angle))
        object.__setattr__(self, "angle", a)
        if math.isnan(self._vx):
            object.__setattr__(self, "_vx", math.cos(a))
            object.__setattr__(self, "_vy", math.sin(a))

    @property
    def vec(self) -> Tuple[float, float]:
        return (self._vx, self._vy)

    @staticmethod
    def from_vec(dx: float, dy: float) -> "Direction":
        n = math.hypot(dx, dy)
        if n == 0.0:
            raise ValueError("zero direction vector")
        return Direction(math.atan2(dy, dx), dx / n, dy / n)


@dataclass(frozen=True)
class Scene:
    """A flat 2D domain: torus, rectangle, disk, or three-disc scattering domain.

    For the obstacle domain, ``centers`` holds the three scatterer centers with
    centroid at the origin and center 1 on the positive y-axis; the outer wall
    is the circle of radius ``outer_radius`` about the origin.
    """
    kind: str
    # torus
    side: float = 0.0
    # rectangle
    width: float = 0.0
    height: float = 0.0
    # disk / obstacle outer wall
    radius: float = 0.0
    # obstacle domain
    r0: float = 0.0
    outer_radius: float = 0.0
    centers: Tuple[Point2, ...] = ()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def to_dict(self) -> dict:
        if self.kind == TORUS:
            return {"kind": TORUS, "side": self.side}
        if self.kind == RECTANGLE:
            return {"kind": RECTANGLE, "width": self.width, "height": self.height}
        if self.kind == DISK:
            return {"kind": DISK, "radius": self.radius}
        return {"kind": OBSTACLE, "r0": self.r0, "outer_radius": self.outer_radius}

    @staticmethod
    def from_dict(d: dict) -> "Scene":
        kind = d.get("kind")
        if kind == TORUS:
            return torus(float(d["side"]))
        if kind == RECTANGLE:
            return rectangle(float(d["width"]), float(d["height"]))
        if kind == DISK:
            return disk(float(d["radius"]))
        if kind == OBSTACLE:
            return build_obstacle_scene(float(d.get("r0", 0.05)),
                                        float(d.get("outer_radius", 2.0)))
        raise SceneError(f"unknown scene kind: {kind!r}")

    @staticmethod
    def from_json(s: str) -> "Scene":
        return Scene.from_dict(json.loads(s))


class SceneError(ValueError):
    """Raised when scene parameters violate a construction invariant."""


def torus(side: float) -> Scene:
    if side <= 0:
        raise SceneError("torus side must be positive")
    return Scene(kind=TORUS, side=side)


def rectangle(width: float, height: float) -> Scene:
    if width <= 0 or height <= 0:
        raise SceneError("rectangle sides must be positive")
    return Scene(kind=RECTANGLE, width=width, height=height)


def disk(radius: float) -> Scene:
    if radius <= 0:
        raise SceneError("disk radius must be positive")
    return Scene(kind=DISK, radius=radius)


def build_obstacle_scene(r0: float, outer_radius: float = 2.0) -> Scene:
    """Three scatterers of radius r0 at the vertices of an equilateral triangle
    of side 1 + 2*r0, centroid at the origin, center 1 on the positive y-axis.

    The outer wall must strictly enclose the convex hull of the circles.
    """
    if not (0.0 < r0 <= 0.2):
        raise SceneError(f"obstacle radius must satisfy 0 < r0 <= 0.2, got {r0}")
    side = 1.0 + 2.0 * r0
    circum = side / math.sqrt(3.0)
    if outer_radius <= circum + r0:
        raise SceneError(
            f"outer_radius {outer_radius} too small: needs > {circum + r0}")
    # explicit symmetric coordinates (no trig) so that mirror-image pairs are
    # bitwise symmetric; the C2-C3 axis is then exactly horizontal
    half = side / 2.0
    low = circum / 2.0
    centers = (Point2(0.0, circum), Point2(-half, -low), Point2(half, -low))
    return Scene(kind=OBSTACLE, r0=r0, outer_radius=outer_radius, centers=centers)


def triangle_side(scene: Scene) -> float:
    return 1.0 + 2.0 * scene.r0


# --- small vector helpers (tuples, to keep hot paths allocation-light) ---

def dist(p: Point2, q: Point2) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def point_segment_distance(p: Point2, a: Point2, b: Point2) -> float:
    """Distance from p to the closed segment [a, b]."""
    ax, ay = a.x, a.y
    ux, uy = b.x - ax, b.y - ay
    L2 = ux * ux + uy * uy
    if L2 == 0.0:
        return math.hypot(p.x - ax, p.y - ay)
    t = ((p.x - ax) * ux + (p.y - ay) * uy) / L2
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.hypot(p.x - (ax + t * ux), p.y - (ay + t * uy))


# Zone a is the convex hull (stadium) of the two circles with indices != a.
ZONE_PAIRS = {1: (2, 3), 2: (1, 3), 3: (1, 2)}


@dataclass(frozen=True)
class Zone:
    """Closed stadium region: all points within r0 of the axis segment."""
    index: int
    axis_a: Point2
    axis_b: Point2
    r0: float

    def contains(self, p: Point2) -> bool:
        return point_segment_distance(p, self.axis_a, self.axis_b) <= self.r0

    def distance(self, p: Point2) -> float:
        return max(0.0, point_segment_distance(p, self.axis_a, self.axis_b)
                   - self.r0)


def zone(scene: Scene, a: int) -> Zone:
    ca, cb = zone_segment(scene, a)
    return Zone(index=a, axis_a=ca, axis_b=cb, r0=scene.r0)


def zone_segment(scene: Scene, a: int) -> Tuple[Point2, Point2]:
    """Axis segment of zone a: the segment joining its two defining centers."""
    i, j = ZONE_PAIRS[a]
    return scene.centers[i - 1], scene.centers[j - 1]


def zone_distance(scene: Scene, p: Point2, a: int) -> float:
    """Distance from p to the closed stadium Z_a (0 inside)."""
    ca, cb = zone_segment(scene, a)
    return max(0.0, point_segment_distance(p, ca, cb) - scene.r0)


def zone_membership(scene: Scene, p: Point2) -> set:
    """Indices a with p in the closed zone Z_a."""
    if scene.kind != OBSTACLE:
        raise SceneError("zones are defined only for the obstacle domain")
    out = set()
    for a in (1, 2, 3):
        ca, cb = zone_segment(scene, a)
        if point_segment_distance(p, ca, cb) <= scene.r0:
            out.add(a)
    return out


def ball_intersects_zone(scene: Scene, center: Point2, eps: float, a: int) -> bool:
    """True iff the open ball B(center, eps) meets the closed zone Z_a."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return zone_distance(scene, center, a) < eps


def in_domain(scene: Scene, p: Point2, tol: float = 1e-12) -> bool:
    """Is p in the closed domain?  (Torus: always.)"""
    if scene.kind == TORUS:
        return True
    if scene.kind == RECTANGLE:
        return -tol <= p.x <= scene.width + tol and -tol <= p.y <= scene.height + tol
    if scene.kind == DISK:
        return math.hypot(p.x, p.y) <= scene.radius + tol
    if math.hypot(p.x, p.y) > scene.outer_radius + tol:
        return False
    return all(dist(p, c) >= scene.r0 - tol for c in scene.centers)


def torus_delta(dx: float, L: float) -> float:
    """Representative of dx mod L in [-L/2, L/2)."""
    dx = math.fmod(dx, L)
    if dx < -L / 2:
        dx += L
    elif dx >= L / 2:
        dx -= L
    return dx


def torus_distance(p: Point2, q: Point2, L: float) -> float:
    return math.hypot(torus_delta(p.x - q.x, L), torus_delta(p.y - q.y, L))


def scene_distance(scene: Scene, p: Point2, q: Point2) -> float:
    """Geodesic distance between points of the scene's ambient space."""
    if scene.kind == TORUS:
        return torus_distance(p, q, scene.side)
    return dist(p, q)
