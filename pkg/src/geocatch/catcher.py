"""Moving-ball catcher synthesis on recurrence-friendly scenes.

The ball visits a dense site sequence in blocks 1,2; 1..4; 1..8; ... and the
dwell at the j-th step equals (arrival time) * 2^j, so the fraction of time
spent parked tends to one and every site eventually hosts arbitrarily long
parks late in any horizon window.  Transits run at speed exactly v along
straight legs (shortest modular legs on the torus, ties broken toward
positive coordinates).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .geometry import (
    DISK,
    OBSTACLE,
    RECTANGLE,
    TORUS,
    Point2,
    Scene,
    torus_delta,
)

T_INIT = 1.0  # initial parking at site 1 before the dwell rule engages


class CatcherError(ValueError):
    pass


class HorizonTooShort(CatcherError):
    pass


@dataclass(frozen=True)
class Step:
    site_index: int       # 1-based index into the dense site list
    arrival_time: float
    departure_time: float


@dataclass
class StepSchedule:
    steps: List[Step]
    sites: List[Point2]
    horizon: float

    def b_window(self, site_index: int, K: float, T: float) -> Optional[Tuple[float, float]]:
        """A parked window [T', T''] at the site with T' > T and
        (T'' - T')/T'' > K, if one exists within the schedule."""
        for s in self.steps:
            if s.site_index != site_index or s.arrival_time <= T:
                continue
            if (s.departure_time - s.arrival_time) / s.departure_time > K:
                return (s.arrival_time, s.departure_time)
        return None


@dataclass
class CatcherPath:
    """Piecewise-linear center path with ball radius eps and speed bound v.

    Waypoint coordinates are unwrapped plane coordinates even on the torus
    (interpolation must follow the shortest modular leg, not the long way
    around); reduce modulo the side when comparing with scene points.
    """
    waypoints: List[Tuple[float, Point2]]
    eps: float
    v: float
    scene: Scene

    @property
    def end_time(self) -> float:
        return self.waypoints[-1][0]

    def center(self, t: float) -> Point2:
        """Unwrapped center position at time t (clamped to the path's span)."""
        wp = self.waypoints
        if t <= wp[0][0]:
            return wp[0][1]
        if t >= wp[-1][0]:
            return wp[-1][1]
        lo, hi = 0, len(wp) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if wp[mid][0] <= t:
                lo = mid
            else:
                hi = mid
        t0, p0 = wp[lo]
        t1, p1 = wp[hi]
        if t1 == t0:
            return p0
        lam = (t - t0) / (t1 - t0)
        return Point2(p0.x + lam * (p1.x - p0.x), p0.y + lam * (p1.y - p0.y))

    def to_csv(self) -> str:
        def f(x):
            return format(x, ".17g")
        lines = ["t,cx,cy"]
        for t, p in self.waypoints:
            lines.append(f"{f(t)},{f(p.x)},{f(p.y)}")
        return "\n".join(lines) + "\n"

    def header_json(self) -> str:
        return json.dumps({"eps": self.eps, "v": self.v,
                           "scene": self.scene.to_dict()},
                          sort_keys=True, separators=(",", ":"))


def ball_contains(path: CatcherPath, t: float, p: Point2, scene: Scene) -> bool:
    """Is p inside the open ball at time t?  (Torus: modular metric.)"""
    if t < 0 or t > path.end_time:
        from .flow import OutOfRange
        raise OutOfRange(f"t={t} outside [0, {path.end_time}]")
    c = path.center(t)
    if scene.kind == TORUS:
        L = scene.side
        d = math.hypot(torus_delta(p.x - c.x, L), torus_delta(p.y - c.y, L))
    else:
        d = math.hypot(p.x - c.x, p.y - c.y)
    return d < path.eps


def dense_sites(scene: Scene, count: int) -> List[Point2]:
    """Deterministic dense enumeration: dyadic grid refinement, coarse levels
    first, row-major within a level, restricted to the domain interior."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if scene.kind == TORUS:
        L = scene.side
        box = (0.0, 0.0, L, L)
        wrap = True
    elif scene.kind == RECTANGLE:
        box = (0.0, 0.0, scene.width, scene.height)
        wrap = False
    elif scene.kind == DISK:
        R = scene.radius
        box = (-R, -R, R, R)
        wrap = False
    else:
        R = scene.outer_radius
        box = (-R, -R, R, R)
        wrap = False
    x0, y0, x1, y1 = box
    out: List[Point2] = []
    level = 0
    while len(out) < count:
        m = 1 << level
        top = m if wrap else m + 1
        for i in range(top):
            for j in range(top):
                if level > 0 and i % 2 == 0 and j % 2 == 0:
                    continue  # appeared at a coarser level
                p = Point2(x0 + (x1 - x0) * i / m, y0 + (y1 - y0) * j / m)
                if not wrap and not _strict_interior(scene, p):
                    continue
                out.append(p)
                if len(out) == count:
                    return out
        level += 1
        if level > 24:
            raise CatcherError("site enumeration failed to fill the domain")
    return out


def _strict_interior(scene: Scene, p: Point2) -> bool:
    if scene.kind == RECTANGLE:
        return 0 < p.x < scene.width and 0 < p.y < scene.height
    if scene.kind == DISK:
        return math.hypot(p.x, p.y) < scene.radius
    if scene.kind == OBSTACLE:
        if math.hypot(p.x, p.y) >= scene.outer_radius:
            return False
        return all(math.hypot(p.x - c.x, p.y - c.y) > scene.r0
                   for c in scene.centers)
    return True


def _site_order(n_sites: int):
    """1,2, 1..4, 1..8, ... capped at n_sites, forever."""
    block = 2
    while True:
        for i in range(1, min(block, n_sites) + 1):
            yield i
        block *= 2


def _leg(scene: Scene, a: Point2, b: Point2) -> Tuple[float, float]:
    """Displacement of the transit leg a -> b (shortest modular leg on the
    torus, ties broken toward the positive direction)."""
    dx, dy = b.x - a.x, b.y - a.y
    if scene.kind == TORUS:
        L = scene.side
        dx = torus_delta(dx, L)
        dy = torus_delta(dy, L)
        if dx == -L / 2:
            dx = L / 2
        if dy == -L / 2:
            dy = L / 2
    return dx, dy


def synthesize_schedule(sites: int, v: float, scene: Scene, horizon: float) -> StepSchedule:
    """Visiting order with transit legs at speed v and the doubling dwell rule,
    truncated at the horizon."""
    if v <= 0:
        raise CatcherError("speed bound must be positive")
    if horizon <= 0:
        raise CatcherError("horizon must be positive")
    pts = dense_sites(scene, sites)
    steps: List[Step] = []
    t = T_INIT  # step 1 arrives after the initial parking
    j = 0
    prev = None
    for site in _site_order(sites):
        j += 1
        if prev is not None:
            dx, dy = _leg(scene, prev, pts[site - 1])
            t += math.hypot(dx, dy) / v
        if t > horizon:
            break
        dwell = t * (2.0 ** j)
        steps.append(Step(site_index=site, arrival_time=t,
                          departure_time=min(t + dwell, horizon)))
        if t + dwell >= horizon:
            break
        t += dwell
        prev = pts[site - 1]
    if len(steps) < 2:
        raise HorizonTooShort(
            f"horizon {horizon} does not fit the first two steps")
    return StepSchedule(steps=steps, sites=pts, horizon=horizon)


def build_catcher(scene: Scene, eps: float, v: float, horizon: float,
                  sites: int = 16) -> CatcherPath:
    """CatcherPath realizing the schedule with straight constant-speed legs."""
    if eps <= 0:
        raise CatcherError("ball radius must be positive")
    if scene.kind == OBSTACLE:
        raise CatcherError("no catcher is synthesized on the obstacle domain")
    sched = synthesize_schedule(sites, v, scene, horizon)
    pts = sched.sites
    wps: List[Tuple[float, Point2]] = []
    # unwrapped coordinates accumulate the modular legs
    cur = pts[sched.steps[0].site_index - 1]
    wps.append((0.0, cur))
    for k, s in enumerate(sched.steps):
        if k > 0:
            prev_site = pts[sched.steps[k - 1].site_index - 1]
            site = pts[s.site_index - 1]
            dx, dy = _leg(scene, prev_site, site)
            cur = Point2(cur.x + dx, cur.y + dy)
        wps.append((s.arrival_time, cur))
        wps.append((s.departure_time, cur))
    if wps[-1][0] < horizon:
        # horizon cuts a transit: extend the last leg at speed v
        last_idx = sched.steps[-1].site_index
        nxt = None
        gen = _site_order(len(pts))
        seen = 0
        for site in gen:
            seen += 1
            if seen == len(sched.steps) + 1:
                nxt = site
                break
        if nxt is not None:
            dx, dy = _leg(scene, pts[last_idx - 1], pts[nxt - 1])
            dist = math.hypot(dx, dy)
            dt = horizon - wps[-1][0]
            frac = min(1.0, v * dt / dist) if dist > 0 else 0.0
            cur = Point2(cur.x + dx * frac, cur.y + dy * frac)
        wps.append((horizon, cur))
    path = CatcherPath(waypoints=_dedup(wps), eps=eps, v=v, scene=scene)
    return path


def _dedup(wps):
    out = [wps[0]]
    for t, p in wps[1:]:
        if t > out[-1][0]:
            out.append((t, p))
        elif p != out[-1][1]:
            out.append((t + 1e-12, p))
    return out


def max_leg_speed(path: CatcherPath) -> float:
    best = 0.0
    for (t0, p0), (t1, p1) in zip(path.waypoints, path.waypoints[1:]):
        if t1 > t0:
            best = max(best, math.hypot(p1.x - p0.x, p1.y - p0.y) / (t1 - t0))
    return best
