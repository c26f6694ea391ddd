"""Construction of a geodesic avoiding a given slow moving ball on the
three-disc scattering domain.

The planner sweeps the ball's known future, keeping the evader inside a zone
(stadium hull of two scatterers) that the widened avoidance window shows the
ball cannot touch, and switches zones through the circle the two zones share.
The realizer turns the planned zone blocks into an explicit bounce chain by
relaxing bounce points on their circles until the equal-angle reflection law
holds at every node; bounce counts per block are chosen adaptively, reading
the realized block-end time off the partial orbit before sizing the next
block, so realized switch times land within 3 seconds of the planned ones
(shared-prefix time stability keeps those readings meaningful).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import (
    OBSTACLE,
    Direction,
    Point2,
    Scene,
    ZONE_PAIRS,
    zone_distance,
)
from .flow import BounceEvent, RayState, Trajectory, billiard_coordinates
from .catcher import CatcherPath
from .symbolic import Itinerary

SWITCH_SLACK = 3.0   # allowed |T'_j - T_j|
MIN_GAP = 10.0       # minimal spacing of planned switch times
LOOKAHEAD = 20.0     # clean-window horizon secured at each switch
PLAN_MARGIN = 0.02   # plan against a ball fattened by this margin
SWEEP_DT = 0.25


class PlanningFailure(Exception):
    """No admissible zone exists at some switch (ball too large or fast)."""


class RealizationFailure(Exception):
    pass


@dataclass
class ZoneSchedule:
    times: List[float]          # 0 = T_0 < T_1 < ... < T_{n-1}
    zones: List[int]            # a_0 ... a_{n-1}, consecutive entries differ
    T: float

    def to_dict(self) -> dict:
        return {"times": self.times, "zones": self.zones, "T": self.T}


def _center_at(path: CatcherPath, t: float) -> Point2:
    return path.center(min(max(t, 0.0), path.end_time))


def prohibited_zones(path: CatcherPath, t: float, scene: Scene) -> set:
    """Indices of the zones the ball intersects at time t (the map f)."""
    c = _center_at(path, t)
    return {a for a in (1, 2, 3) if zone_distance(scene, c, a) < path.eps}


def _min_zone_distance(path: CatcherPath, scene: Scene, a: int, t_lo: float,
                       t_hi: float, step: float) -> float:
    """Lower bound for dist(center(t), Z_a) over [t_lo, t_hi]: sampled minimum
    minus the v-Lipschitz drift between samples."""
    worst = math.inf
    t = t_lo
    while True:
        worst = min(worst, zone_distance(scene, _center_at(path, t), a))
        if t >= t_hi:
            break
        t = min(t + step, t_hi)
    return worst - path.v * step / 2


def validate_schedule(schedule: ZoneSchedule, path: CatcherPath, scene: Scene,
                      eps: Optional[float] = None) -> List[str]:
    """Independent check of the three schedule invariants; returns a list of
    violation messages (empty when the schedule is sound)."""
    errs = []
    ts, zs = schedule.times, schedule.zones
    if len(ts) != len(zs) or not ts or ts[0] != 0.0:
        return ["times/zones malformed"]
    for a, b in zip(ts, ts[1:]):
        if b - a < MIN_GAP - 1e-9:
            errs.append(f"switch gap {b - a:.3f} < {MIN_GAP}")
    for a, b in zip(zs, zs[1:]):
        if a == b:
            errs.append("consecutive zones equal")
    if eps is None:
        eps = path.eps
    ends = ts[1:] + [schedule.T]
    for j, (t0, t1, a) in enumerate(zip(ts, ends, zs)):
        lo, hi = t0 - SWITCH_SLACK, t1 + SWITCH_SLACK
        d = _min_zone_distance(path, scene, a, lo, hi, step=0.125)
        if d >= eps:
            continue
        d_fine = _min_zone_distance(path, scene, a, lo, hi, step=0.002)
        if d_fine < eps:
            errs.append(f"ball touches zone {a} during block {j}")
    return errs


def _first_threat(path: CatcherPath, scene: Scene, a: int, t_from: float,
                  t_to: float, eps_eff: float) -> Optional[float]:
    """Earliest certified time in [t_from, t_to] at which the fattened ball
    touches zone a, or None; steps adapt to the Lipschitz slack."""
    v = max(path.v, 1e-12)
    t = t_from
    while t <= t_to:
        d = zone_distance(scene, _center_at(path, t), a) - eps_eff
        if d <= 0:
            return t
        t += max(SWEEP_DT / 4, 0.5 * d / v)
    return None


def _zone_clean(path: CatcherPath, scene: Scene, a: int, t_lo: float,
                t_hi: float, eps_eff: float) -> bool:
    return _first_threat(path, scene, a, t_lo, t_hi, eps_eff) is None


def _zone_preference(path: CatcherPath, scene: Scene, t: float) -> List[int]:
    """Planner tie-break: first the zone whose defining circles exclude the
    obstacle nearest the ball's forecast position, then lowest index."""
    c = _center_at(path, t + LOOKAHEAD)
    nearest = min(((math.hypot(c.x - sc.x, c.y - sc.y), j + 1)
                   for j, sc in enumerate(scene.centers)))[1]
    return sorted((1, 2, 3), key=lambda a: (a != nearest, a))


def plan_schedule(path: CatcherPath, T: float, scene: Scene) -> ZoneSchedule:
    """Greedy zone segmentation: stay in the current zone until the widened
    avoidance window is about to fail, then switch to a zone that is clean
    over the lookahead."""
    if scene.kind != OBSTACLE:
        raise ValueError("evader planning requires the obstacle scene")
    if T <= 0:
        raise ValueError("T must be positive")
    eps_eff = path.eps + PLAN_MARGIN
    cur = None
    for a in _zone_preference(path, scene, 0.0):
        if _zone_clean(path, scene, a, -SWITCH_SLACK, LOOKAHEAD, eps_eff):
            cur = a
            break
    if cur is None:
        raise PlanningFailure("no clean zone at t = 0")
    times, zones = [0.0], [cur]
    t_cur = 0.0
    while True:
        threat = _first_threat(path, scene, cur, t_cur, T + SWITCH_SLACK,
                               eps_eff)
        if threat is None:
            return ZoneSchedule(times=times, zones=zones, T=T)
        t_switch = threat - SWITCH_SLACK - SWEEP_DT
        if t_switch >= T:
            return ZoneSchedule(times=times, zones=zones, T=T)
        if t_switch < t_cur + MIN_GAP:
            raise PlanningFailure(
                f"zone {cur} threatened at {threat:.2f}, too soon after the "
                f"switch at {t_cur:.2f} (ball too large or too fast)")
        nxt = None
        for b in _zone_preference(path, scene, t_switch):
            if b != cur and _zone_clean(path, scene, b,
                                        t_switch - SWITCH_SLACK,
                                        t_switch + LOOKAHEAD, eps_eff):
                nxt = b
                break
        if nxt is None:
            raise PlanningFailure(f"no admissible zone at t = {t_switch:.2f}")
        times.append(t_switch)
        zones.append(nxt)
        cur, t_cur = nxt, t_switch


# --- zone-block word assembly and shadowing realization ---------------------

def _pair(a: int) -> Tuple[int, int]:
    return ZONE_PAIRS[a]


def _pivot(a: int, b: int) -> int:
    (rest,) = {1, 2, 3} - {a, b}
    return rest


def _shadow_orbit(scene: Scene, word: Sequence[int],
                  tol: float = 1e-13, max_sweeps: int = 300):
    """Bounce points on the prescribed circles with the equal-angle reflection
    law at every interior node (node 0 pinned at the gap point of its circle
    facing the second circle; the final node is length-minimizing).

    Returns (points (m, 2), cumulative times (m,))."""
    m = len(word)
    if m < 2:
        raise RealizationFailure("need at least two bounces to shadow")
    centers = np.array([[c.x, c.y] for c in scene.centers])
    r0 = scene.r0
    C = centers[np.array(word) - 1]
    P = C - r0 * C / np.linalg.norm(C, axis=1, keepdims=True)
    u0 = centers[word[1] - 1] - centers[word[0] - 1]
    P[0] = centers[word[0] - 1] + r0 * u0 / np.linalg.norm(u0)
    for _ in range(max_sweeps):
        mid = P[1:-1]
        up = P[:-2] - mid
        up /= np.linalg.norm(up, axis=1, keepdims=True)
        un = P[2:] - mid
        un /= np.linalg.norm(un, axis=1, keepdims=True)
        b = up + un
        nb = np.linalg.norm(b, axis=1, keepdims=True)
        newmid = np.where(nb > 1e-14, C[1:-1] + r0 * b / np.maximum(nb, 1e-300),
                          mid)
        last_dir = P[-2] - C[-1]
        last = C[-1] + r0 * last_dir / np.linalg.norm(last_dir)
        move = float(np.linalg.norm(last - P[-1]))
        if len(newmid):
            move = max(move, float(np.max(np.linalg.norm(newmid - mid, axis=1))))
        P[1:-1] = newmid
        P[-1] = last
        if move < tol:
            break
    legs = np.linalg.norm(np.diff(P, axis=0), axis=1)
    times = np.concatenate([[0.0], np.cumsum(legs)])
    return P, times


def _alternating(first: int, other: int, count: int) -> List[int]:
    return [first if k % 2 == 0 else other for k in range(count)]


def _assemble_word(schedule: ZoneSchedule, scene: Scene):
    """Zone blocks to a bounce word.  Each interior block is sized by
    realizing the assembled prefix, reading the block-end time off it, and
    adjusting the bounce count in parity-preserving steps of two until the
    end lands near the planned switch.  Returns (word, block_starts)."""
    ts, zs, T = schedule.times, schedule.zones, schedule.T
    n = len(zs)
    word: List[int] = []
    starts: List[int] = []
    t_now = 0.0
    leg_est = 1.001  # alternating legs equal the unit gap up to the wobble
    for j in range(n):
        starts.append(len(word))
        p, q = _pair(zs[j])
        if j + 1 < n:
            piv = _pivot(zs[j], zs[j + 1])
            oth = p if piv == q else q
            target = ts[j + 1]
            span = target - t_now
            m = max(1, round(span / leg_est))
            if j == 0:
                first = piv if m % 2 == 1 else oth  # free choice fixes parity
            else:
                prev = word[-1]
                first = p if prev == q else q
                want_odd = (piv == first)  # last symbol must be the pivot
                if (m % 2 == 1) != want_odd:
                    m = m + 1 if span / leg_est >= m else max(1, m - 1)
                    if (m % 2 == 1) != want_odd:
                        m += 2
            second = q if first == p else p
            for _ in range(8):
                cand = word + _alternating(first, second, m)
                _, times = _shadow_orbit(scene, cand)
                t_end = float(times[-1])
                dev = t_end - target
                if abs(dev) <= 1.5:
                    break
                leg_meas = t_end / (len(cand) - 1)
                shift = 2 * round(dev / (2 * leg_meas))
                if shift == 0:
                    shift = 2 if dev > 0 else -2
                if m - shift < 1:
                    break
                m -= shift
            word = cand
            t_now = t_end
        else:
            # every leg is at least the inter-circle gap of 1, so this count
            # certainly carries the orbit past T
            m = max(2, math.ceil(T - t_now) + 4)
            if j == 0:
                first = p
            else:
                prev = word[-1]
                first = p if prev == q else q
            second = q if first == p else p
            word = word + _alternating(first, second, m)
    return word, starts


@dataclass
class EvasionCertificate:
    geodesic: Trajectory
    schedule: ZoneSchedule
    word: Itinerary
    realized_switches: List[float]
    min_distance: float = math.nan
    margin: float = math.nan

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule.to_dict(),
            "itinerary": self.word.to_string(),
            "realized_switches": self.realized_switches,
            "min_distance": self.min_distance,
            "margin": self.margin,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def start_state(self) -> RayState:
        return self.geodesic.start


def realize_schedule(schedule: ZoneSchedule, scene: Scene) -> EvasionCertificate:
    """Bounce word and explicit geodesic realizing the zone schedule with
    switch times within SWITCH_SLACK of the planned ones."""
    if scene.kind != OBSTACLE:
        raise ValueError("evader realization requires the obstacle scene")
    ts, zs, T = schedule.times, schedule.zones, schedule.T
    word, starts = _assemble_word(schedule, scene)
    P, times = _shadow_orbit(scene, word)
    realized = [0.0] + [float(times[starts[j + 1] - 1])
                        for j in range(len(zs) - 1)]
    worst = max((abs(r - t) for r, t in zip(realized, ts)), default=0.0)
    if worst > SWITCH_SLACK:
        raise RealizationFailure(
            f"switch deviation {worst:.3f} exceeds {SWITCH_SLACK}: "
            f"planned {ts}, realized {realized}")
    if float(times[-1]) < T:
        raise RealizationFailure(
            f"assembled word covers {float(times[-1]):.2f} < T = {T}")
    tr = _orbit_to_trajectory(scene, word, P, times, horizon=T)
    return EvasionCertificate(
        geodesic=tr, schedule=schedule, word=Itinerary(tuple(word)),
        realized_switches=realized)


def _orbit_to_trajectory(scene: Scene, word, P, times, horizon: float) -> Trajectory:
    events: List[BounceEvent] = []
    m = len(word)

    def mirror(d: Direction, pt: Point2, j: int) -> Direction:
        c = scene.centers[j - 1]
        nx, ny = (pt.x - c.x) / scene.r0, (pt.y - c.y) / scene.r0
        dx, dy = d.vec
        dot = dx * nx + dy * ny
        return Direction.from_vec(dx - 2 * dot * nx, dy - 2 * dot * ny)

    for k in range(m):
        pt = Point2(float(P[k][0]), float(P[k][1]))
        if k > 0:
            seg_in = P[k] - P[k - 1]
            inc = Direction.from_vec(float(seg_in[0]), float(seg_in[1]))
        if k + 1 < m:
            seg = P[k + 1] - P[k]
            out = Direction.from_vec(float(seg[0]), float(seg[1]))
            if k == 0:
                # the start is itself a bounce: synthesize its incoming leg
                # as the mirror image of the outgoing one (involution)
                inc = mirror(out, pt, word[0])
        else:
            out = mirror(inc, pt, word[k])
        e = BounceEvent(time=float(times[k]), point=pt,
                        wall=f"obstacle{word[k]}", tangential=False,
                        in_dir=inc, out_dir=out)
        _, e.r, e.phi = billiard_coordinates(scene, e)
        events.append(e)
    start = RayState(pos=events[0].point, dir=events[0].out_dir, time=0.0)
    return Trajectory(scene=scene, start=start, events=events, horizon=horizon)


def verify_evasion(cert: EvasionCertificate, path: CatcherPath, T: float,
                   grid_dt: float = 0.005) -> bool:
    """Certified separation check: samples the geodesic-to-center distance on
    a grid and subtracts the (1 + v) * dt drift bound; updates the
    certificate's min_distance/margin and returns the verdict."""
    tr = cert.geodesic
    ts = np.arange(0.0, T + grid_dt, grid_dt)
    ev_t = np.array([tr.start.time] + [e.time for e in tr.events])
    ev_x = np.array([tr.start.pos.x] + [e.point.x for e in tr.events])
    ev_y = np.array([tr.start.pos.y] + [e.point.y for e in tr.events])
    gx = np.interp(ts, ev_t, ev_x)
    gy = np.interp(ts, ev_t, ev_y)
    wp_t = np.array([t for t, _ in path.waypoints])
    wp_x = np.array([p.x for _, p in path.waypoints])
    wp_y = np.array([p.y for _, p in path.waypoints])
    cx = np.interp(ts, wp_t, wp_x)
    cy = np.interp(ts, wp_t, wp_y)
    dist = np.hypot(gx - cx, gy - cy)
    certified = float(np.min(dist)) - (1.0 + path.v) * grid_dt
    cert.min_distance = certified
    cert.margin = certified - path.eps
    return certified >= path.eps


def evade(path: CatcherPath, T: float, scene: Scene) -> EvasionCertificate:
    """Plan, realize, and verify in one call."""
    schedule = plan_schedule(path, T, scene)
    cert = realize_schedule(schedule, scene)
    verify_evasion(cert, path, T)
    return cert


def random_slow_path(scene: Scene, eps: float, v: float, T: float,
                     seed: int) -> CatcherPath:
    """Seeded random center path on the obstacle domain: piecewise linear,
    speed at most v, kept clear of the scatterers and the outer wall."""
    import random as _random
    rng = _random.Random(seed)
    # keep the walk in the central region so it actually menaces the zones
    r_max = min(scene.outer_radius - eps - 0.1, 1.0)

    def admissible(px, py):
        return math.hypot(px, py) < r_max and all(
            math.hypot(px - c.x, py - c.y) > scene.r0 + eps + 0.05
            for c in scene.centers)

    def step_toward(px, py, tx, ty, dist):
        ang = math.atan2(ty - py, tx - px)
        for _ in range(40):
            nx, ny = px + dist * math.cos(ang), py + dist * math.sin(ang)
            if admissible(nx, ny):
                return nx, ny
            ang = rng.uniform(0, 2 * math.pi)
        return px, py

    while True:
        x = rng.uniform(-r_max, r_max)
        y = rng.uniform(-r_max, r_max)
        if admissible(x, y):
            break
    mode = seed % 3  # 0: commit to a crossing, 1: orbit the triangle, 2: walk
    if mode == 1:
        # start on the orbital ring
        ring = 0.45 + 0.2 * rng.random()
        phase = rng.uniform(0, 2 * math.pi)
        x, y = ring * math.cos(phase), ring * math.sin(phase)
        if not admissible(x, y):
            ring = 0.9
            x, y = ring * math.cos(phase), ring * math.sin(phase)
    wps: List[Tuple[float, Point2]] = [(0.0, Point2(x, y))]
    t = 0.0
    target = (-x * (0.8 + 0.4 * rng.random()), -y * (0.8 + 0.4 * rng.random()))
    while t < T:
        dt = rng.uniform(10.0, 30.0)
        speed = rng.uniform(0.5, 1.0) * v
        if mode == 0:
            nx, ny = step_toward(x, y, target[0], target[1], speed * dt)
            if math.hypot(nx - target[0], ny - target[1]) < 0.05:
                target = (rng.gauss(0, 0.4), rng.gauss(0, 0.4))
        elif mode == 1:
            phase += speed * dt / max(ring, 0.2)
            cand = (ring * math.cos(phase), ring * math.sin(phase))
            nx, ny = step_toward(x, y, cand[0], cand[1], speed * dt)
        else:
            if rng.random() < 0.5:
                nx, ny = step_toward(x, y, rng.gauss(0, 0.25),
                                     rng.gauss(0, 0.25), speed * dt)
            else:
                ang = rng.uniform(0, 2 * math.pi)
                nx, ny = step_toward(x, y, x + math.cos(ang), y + math.sin(ang),
                                     speed * dt)
        t += dt
        x, y = nx, ny
        wps.append((t, Point2(x, y)))
    return CatcherPath(waypoints=wps, eps=eps, v=v, scene=scene)
