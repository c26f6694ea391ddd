"""Itinerary coding of scattering trajectories and the nested-interval solver.

A length-n itinerary pins the initial angle down to an interval whose width
shrinks by a factor of roughly 1/(1 + 2*gap/r0) ~ 1/40 per symbol, far below
float64 resolution beyond a dozen symbols.  The solver therefore runs in
extended precision (gmpy2's mpfr when available, mpmath otherwise), allocating
bits proportionally to the word length.  Realized trajectories are rounded to
float64 events; they satisfy the flow invariants to well below 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

from .geometry import OBSTACLE, Direction, Point2, Scene
from .flow import BounceEvent, RayState, Trajectory, billiard_coordinates

try:  # gmpy2 is ~7x faster; mpmath is the always-available fallback
    import gmpy2 as _g

    _BACKEND = "gmpy2"

    def _workctx(bits):
        return _g.context(precision=bits)

    _mpfr = _g.mpfr
    _sqrt = _g.sqrt
    _atan2 = _g.atan2
    _asin = _g.asin
    _cos = _g.cos
    _sin = _g.sin
except ImportError:  # pragma: no cover - exercised only without gmpy2
    import mpmath as _mp

    _BACKEND = "mpmath"

    def _workctx(bits):
        return _mp.workprec(bits)

    _mpfr = lambda x: _mp.mpf(x)
    _sqrt = lambda x: _mp.sqrt(x)
    _atan2 = lambda y, x: _mp.atan2(y, x)
    _asin = lambda x: _mp.asin(x)
    _cos = lambda x: _mp.cos(x)
    _sin = lambda x: _mp.sin(x)


class InadmissibleWord(ValueError):
    pass


class TouchesOuterWall(Exception):
    pass


class EmptyInterval(Exception):
    pass


class NumericFailure(Exception):
    """The working precision cannot resolve the requested interval."""


class StabilityViolation(AssertionError):
    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


@dataclass(frozen=True)
class Itinerary:
    word: Tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(s) for s in self.word)
        object.__setattr__(self, "word", w)
        for s in w:
            if s not in (1, 2, 3):
                raise InadmissibleWord(f"symbol {s} not in {{1,2,3}}")
        for a, b in zip(w, w[1:]):
            if a == b:
                raise InadmissibleWord(f"immediate repetition {a}{b}")

    def __len__(self):
        return len(self.word)

    def __getitem__(self, k):
        return self.word[k]

    def to_string(self) -> str:
        return "".join(str(s) for s in self.word)

    @staticmethod
    def from_string(s: str) -> "Itinerary":
        return Itinerary(tuple(int(ch) for ch in s))


def rho_for(r0: float) -> float:
    """Contraction rate of the coding metric for obstacle radius r0."""
    return r0 / (1.0 + r0)


def d_rho(xi: Itinerary, eta: Itinerary, rho: float) -> float:
    """Ultrametric rho**n with n the first index of disagreement on the common
    range; 0.0 when the words agree on all shared indices."""
    if not (0.0 < rho < 1.0):
        raise ValueError("rho must be in (0, 1)")
    n_common = min(len(xi), len(eta))
    for n in range(n_common):
        if xi[n] != eta[n]:
            return rho ** n
    return 0.0


def itinerary_of(tr: Trajectory, n: int) -> Itinerary:
    """Obstacle indices of the first n bounces of the trajectory's event list."""
    symbols = []
    for e in tr.events:
        if len(symbols) == n:
            break
        j = e.obstacle_index
        if j is None:
            raise TouchesOuterWall(
                f"wall {e.wall!r} hit after {len(symbols)} obstacle bounces")
        symbols.append(j)
    if len(symbols) < n:
        raise ValueError(f"trajectory has only {len(symbols)} obstacle bounces")
    return Itinerary(tuple(symbols))


@dataclass
class AngleInterval:
    """Angles [lo, hi] (extended-precision scalars, possibly unnormalized
    representatives) whose geodesics from the anchor point realize a fixed
    itinerary prefix; the endpoints graze the final circle tangentially."""
    lo: Any
    hi: Any
    bits: int = 53

    def __post_init__(self):
        if not self.lo < self.hi:
            raise EmptyInterval(f"[{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return (self.lo + self.hi) / 2

    def contains(self, other: "AngleInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def as_floats(self) -> Tuple[float, float]:
        return float(self.lo), float(self.hi)


# --- extended-precision mini-tracer over the obstacle scene ----------------

class _HPScene:
    __slots__ = ("centers", "r0", "r0sq", "Rsq")

    def __init__(self, scene: Scene):
        self.centers = [(_mpfr(c.x), _mpfr(c.y)) for c in scene.centers]
        self.r0 = _mpfr(scene.r0)
        self.r0sq = self.r0 * self.r0
        R = _mpfr(scene.outer_radius)
        self.Rsq = R * R


def _hp_advance(sc: _HPScene, px, py, dx, dy, nb: int):
    """First nb bounces: (symbols, times, final outgoing state).

    symbols[k] is the obstacle index, or 0 if the outer wall was reached
    (tracing stops there)."""
    symbols: List[int] = []
    times: List[Any] = []
    t_acc = px - px  # zero at working precision
    for _ in range(nb):
        best_t = None
        best_j = 0
        for j in (0, 1, 2):
            cx, cy = sc.centers[j]
            rx = px - cx
            ry = py - cy
            b = dx * rx + dy * ry
            if b >= 0:  # not approaching this circle
                continue
            disc = b * b - (rx * rx + ry * ry - sc.r0sq)
            if disc <= 0:
                continue
            tt = -b - _sqrt(disc)
            if tt > 0 and (best_t is None or tt < best_t):
                best_t = tt
                best_j = j + 1
        if best_t is None:
            b = dx * px + dy * py
            disc = b * b - (px * px + py * py - sc.Rsq)
            t_out = -b + _sqrt(disc)
            t_acc = t_acc + t_out
            symbols.append(0)
            times.append(t_acc)
            px, py = px + t_out * dx, py + t_out * dy
            return symbols, times, (px, py, dx, dy)
        t_acc = t_acc + best_t
        qx, qy = px + best_t * dx, py + best_t * dy
        cx, cy = sc.centers[best_j - 1]
        nx, ny = (qx - cx) / sc.r0, (qy - cy) / sc.r0
        dot = dx * nx + dy * ny
        dx, dy = dx - 2 * dot * nx, dy - 2 * dot * ny
        px, py = qx, qy
        symbols.append(best_j)
        times.append(t_acc)
    return symbols, times, (px, py, dx, dy)


def _solver_bits(n: int) -> int:
    # per-symbol contraction is at most ~2^6.2 here; 8 bits/symbol is ample
    return 96 + 8 * n


def _refine_endpoint(miss, good, eta_in, g_in, side_end, r0, rel_tol):
    """Angle where the next bounce becomes tangent, between eta_in (which
    realizes the extended prefix, |miss| < r0) and side_end (which does not).

    The miss-distance is close to linear across the admissible band, so a
    secant through two in-band points converges in a handful of steps; every
    proposal stays bracketed, with bisection as the degenerate fallback.
    Returns a point on the in-band side of the tangency, within rel_tol of it.
    """
    span = side_end - eta_in
    tol = abs(span) * rel_tol
    # second in-band sample toward the target side, for the secant slope
    step = _mpfr(1) / 64
    e1 = g1 = None
    for _ in range(7):
        cand = eta_in + span * step
        g = miss(cand)
        if g is not None and abs(g) < r0 and g != g_in:
            e1, g1 = cand, g
            break
        step = step / 4
    if e1 is None:
        # band thinner than resolution of the probe ladder: plain bisection
        e_in, e_out = eta_in, side_end
        while abs(e_out - e_in) > tol:
            m = (e_in + e_out) / 2
            if good(m):
                e_in = m
            else:
                e_out = m
        return e_in

    tgt = r0 if g1 > g_in else -r0  # boundary value approached on this side
    e_prev, g_prev = eta_in, g_in
    e_cur, g_cur = e1, g1
    e_out = side_end  # invariant: tangency lies in (e_cur-ish, e_out)
    e_best = e1
    g_stop = r0 * rel_tol * 16
    for _ in range(200):
        if abs(e_out - e_best) <= tol:
            break
        if abs(e_cur - e_prev) <= tol and abs(g_cur - tgt) < g_stop:
            break  # secant landed on the tangency to working tolerance
        e_next = None
        if g_cur != g_prev:
            e_next = e_cur - (g_cur - tgt) * (e_cur - e_prev) / (g_cur - g_prev)
            lo_b, hi_b = (e_best, e_out) if e_best < e_out else (e_out, e_best)
            if not (lo_b < e_next < hi_b):
                e_next = None
        if e_next is None:
            e_next = (e_best + e_out) / 2
        g_next = miss(e_next)
        if g_next is not None and abs(g_next) < r0:
            e_prev, g_prev = e_cur, g_cur
            e_cur, g_cur = e_next, g_next
            e_best = e_next
        else:
            # out of band: tighten the outer bound; the stale secant pair then
            # fails the bracket clamp and the next step bisects
            e_out = e_next
    return e_best


def solve_itinerary(scene: Scene, A: Point2, prefix: Itinerary,
                    rel_tol: float = 1e-9) -> AngleInterval:
    """Interval of initial angles at A realizing the itinerary prefix.

    Endpoints are refined to rel_tol of the bracket width via bracketed secant
    on the signed miss-distance of the next bounce (with predicate bisection
    as fallback); every returned interval is verified by re-tracing its
    midpoint."""
    if scene.kind != OBSTACLE:
        raise ValueError("itineraries require the obstacle scene")
    n = len(prefix)
    if n < 1:
        raise ValueError("prefix must have length >= 1")
    bits = _solver_bits(n)
    if bits > 6000:
        raise NumericFailure(f"word length {n} needs {bits} bits; cap exceeded")

    # step 0: tangent cone from A to the first circle
    with _workctx(_solver_bits(1)):
        sc = _HPScene(scene)
        ax, ay = _mpfr(A.x), _mpfr(A.y)
        c0x, c0y = sc.centers[prefix[0] - 1]
        d0 = _sqrt((c0x - ax) ** 2 + (c0y - ay) ** 2)
        theta_c = _atan2(c0y - ay, c0x - ax)
        half = _asin(sc.r0 / d0)
        lo, hi = theta_c - half, theta_c + half
        px, py, dx, dy = ax, ay, _cos((lo + hi) / 2), _sin((lo + hi) / 2)
        s0, _, _ = _hp_advance(sc, px, py, dx, dy, 1)
        if s0 != [prefix[0]]:
            raise EmptyInterval(f"first symbol {prefix[0]} unreachable from {A}")

    for i in range(1, n):
        # working precision grows with depth; scene constants are exact
        # float64 images, so per-depth contexts stay mutually consistent
        with _workctx(_solver_bits(i + 1)):
            sc = _HPScene(scene)
            ax, ay = _mpfr(A.x), _mpfr(A.y)

            def launch(eta):
                return ax, ay, _cos(eta), _sin(eta)

            def symbols_at(eta, k):
                px, py, dx, dy = launch(eta)
                s, _, _ = _hp_advance(sc, px, py, dx, dy, k)
                return s

            def miss(eta, i=i):
                """Signed perpendicular offset of bounce i's outgoing ray to
                the next target circle, or None when the prefix breaks."""
                px, py, dx, dy = launch(eta)
                s, _, (qx, qy, ux, uy) = _hp_advance(sc, px, py, dx, dy, i)
                if s != list(prefix.word[:i]):
                    return None
                cx, cy = sc.centers[prefix[i] - 1]
                wx, wy = cx - qx, cy - qy
                if ux * wx + uy * wy <= 0:  # target behind the ray
                    return None
                return ux * wy - uy * wx

            width = hi - lo
            target = prefix[i]

            def good(eta):
                return symbols_at(eta, i + 1) == list(prefix.word[: i + 1])

            # seed: an angle whose bounce i hits the target
            eta_in = None
            mid = (lo + hi) / 2
            g_mid = miss(mid, i)
            if g_mid is not None and abs(g_mid) < sc.r0 and good(mid):
                eta_in = mid
            if eta_in is None and g_mid is not None:
                # secant toward miss = 0
                e0, g0 = mid, g_mid
                e1 = mid + width / 64
                g1 = miss(e1, i)
                for _ in range(24):
                    if g1 is None or g1 == g0:
                        break
                    e2 = e1 - g1 * (e1 - e0) / (g1 - g0)
                    if not (lo < e2 < hi):
                        break
                    g2 = miss(e2, i)
                    e0, g0, e1, g1 = e1, g1, e2, g2
                    if g2 is not None and abs(g2) < sc.r0 / 2:
                        if good(e2):
                            eta_in = e2
                        break
            if eta_in is None:
                # scan fallback (the miss function need not be monotone)
                found = False
                for npts in (17, 65, 257, 1025):
                    for k in range(1, npts):
                        eta = lo + width * k / npts
                        if good(eta):
                            eta_in = eta
                            found = True
                            break
                    if found:
                        break
                if not found:
                    raise EmptyInterval(
                        f"no extension to symbol {target} at depth {i}")

            g_in = miss(eta_in)
            new_ends = [
                _refine_endpoint(miss, good, eta_in, g_in, side_end, sc.r0,
                                 _mpfr(rel_tol))
                for side_end in (lo, hi)
            ]
            lo, hi = min(new_ends), max(new_ends)
            if not lo < hi:
                raise NumericFailure(
                    f"interval collapsed at depth {i} (bits={bits})")

    with _workctx(bits):
        sc = _HPScene(scene)
        px, py = _mpfr(A.x), _mpfr(A.y)
        eta = (lo + hi) / 2
        s, _, _ = _hp_advance(sc, px, py, _cos(eta), _sin(eta), n)
        if s != list(prefix.word):
            raise NumericFailure("midpoint fails to realize the prefix")
    return AngleInterval(lo=lo, hi=hi, bits=bits)


def realize(scene: Scene, A: Point2, prefix: Itinerary) -> Trajectory:
    """Trajectory from A at the midpoint angle of the solved interval, traced
    through the prefix's last bounce (events rounded to float64)."""
    interval = solve_itinerary(scene, A, prefix)
    n = len(prefix)
    with _workctx(interval.bits):
        sc = _HPScene(scene)
        eta = interval.mid
        return _hp_trajectory(scene, sc, A, eta, n)


def _hp_trajectory(scene: Scene, sc: _HPScene, A: Point2, eta, n: int) -> Trajectory:
    px, py, dx, dy = _mpfr(A.x), _mpfr(A.y), _cos(eta), _sin(eta)
    events = []
    t_acc = px - px
    in_dir = Direction.from_vec(float(dx), float(dy))
    start = RayState(pos=A, dir=in_dir, time=0.0)
    for k in range(n):
        symbols, times, (qx, qy, ox, oy) = _hp_advance(sc, px, py, dx, dy, 1)
        if symbols[0] == 0:
            raise TouchesOuterWall(f"outer wall reached at bounce {k}")
        t_acc = t_acc + times[0]
        e = BounceEvent(
            time=float(t_acc),
            point=Point2(float(qx), float(qy)),
            wall=f"obstacle{symbols[0]}",
            tangential=False,
            in_dir=Direction.from_vec(float(dx), float(dy)),
            out_dir=Direction.from_vec(float(ox), float(oy)),
        )
        _, e.r, e.phi = billiard_coordinates(scene, e)
        events.append(e)
        px, py, dx, dy = qx, qy, ox, oy
    tr = Trajectory(scene=scene, start=start, events=events,
                    horizon=events[-1].time if events else 0.0)
    return tr


def _hp_bounce_times(scene: Scene, A: Point2, eta, n: int, bits: int) -> List[float]:
    """Times of the first n bounces from A at angle eta (floats)."""
    with _workctx(bits):
        sc = _HPScene(scene)
        px, py = _mpfr(A.x), _mpfr(A.y)
        dx, dy = _cos(eta), _sin(eta)
        symbols, times, _ = _hp_advance(sc, px, py, dx, dy, n)
        if any(s == 0 for s in symbols) or len(times) < n:
            raise TouchesOuterWall("outer wall before requested depth")
        return [float(t) for t in times]


@dataclass
class StabilityReport:
    word: Itinerary
    trials: int
    spread_final: float          # spread of (t_n - t_0) across the sample
    bound: float                 # 3 * C * r0 with C = 1
    per_depth_spread: List[float]  # spread of flight time tau_k, k = 0..n-2
    fit_slope: float             # log(spread) per unit (n - k)
    log_rho: float
    rho: float

    def to_dict(self) -> dict:
        return {
            "word": self.word.to_string(),
            "trials": self.trials,
            "spread_final": self.spread_final,
            "bound": self.bound,
            "per_depth_spread": self.per_depth_spread,
            "fit_slope": self.fit_slope,
            "log_rho": self.log_rho,
            "rho": self.rho,
        }


def stability_report(scene: Scene, w: Itinerary, trials: int = 50,
                     seed: int = 0, A: Optional[Point2] = None) -> StabilityReport:
    """Empirical check of the shared-prefix bounce-time stability bound.

    Samples pairs of geodesics from the same start point whose itineraries
    agree exactly on w (continuations forced to differ at index len(w)),
    measures the spread of the last shared bounce time relative to the first,
    and raises StabilityViolation if it exceeds 3*r0."""
    import random as _random

    if len(w) < 2:
        raise ValueError("word must have length >= 2")
    if A is None:
        A = Point2(0.0, 0.0)
    n = len(w) - 1  # bounce indices 0..n; t_0 normalized out
    last = w[len(w) - 1]
    conts = [s for s in (1, 2, 3) if s != last]
    branch_a = Itinerary(w.word + (conts[0],))
    branch_b = Itinerary(w.word + (conts[1],))
    iv_a = solve_itinerary(scene, A, branch_a)
    iv_b = solve_itinerary(scene, A, branch_b)
    rng = _random.Random(seed)
    bits = max(iv_a.bits, iv_b.bits)

    all_times = []
    pairs = []
    for _ in range(trials):
        ua = 0.05 + 0.9 * rng.random()
        ub = 0.05 + 0.9 * rng.random()
        with _workctx(bits):  # the offsets underflow at float precision
            eta_a = iv_a.lo + iv_a.width * _mpfr(ua)
            eta_b = iv_b.lo + iv_b.width * _mpfr(ub)
        ta = _hp_bounce_times(scene, A, eta_a, len(w), bits)
        tb = _hp_bounce_times(scene, A, eta_b, len(w), bits)
        all_times.append(ta)
        all_times.append(tb)
        pairs.append((float(eta_a), float(eta_b)))

    # spreads of t_k - t_0 and of flight intervals tau_k = t_{k+1} - t_k
    rel = [[t[k] - t[0] for k in range(len(w))] for t in all_times]
    spread_final = max(r[n] for r in rel) - min(r[n] for r in rel)
    per_depth = []
    for k in range(len(w) - 1):
        taus = [t[k + 1] - t[k] for t in all_times]
        per_depth.append(max(taus) - min(taus))

    rho = rho_for(scene.r0)
    bound = 3.0 * scene.r0
    # log-linear fit of spread_k against distance from the disagreement index
    xs, ys = [], []
    for k, s in enumerate(per_depth):
        if s > 1e-13:  # ignore the numeric floor
            xs.append(float(len(w) - 1 - k))
            ys.append(math.log(s))
    slope = float("nan")
    if len(xs) >= 3:
        mx = sum(xs) / len(xs)
        my = sum(ys) / len(ys)
        var = sum((x - mx) ** 2 for x in xs)
        if var > 0:
            slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / var

    report = StabilityReport(
        word=w, trials=trials, spread_final=spread_final, bound=bound,
        per_depth_spread=per_depth, fit_slope=slope,
        log_rho=math.log(rho), rho=rho)
    if spread_final > bound:
        worst = max(range(len(rel)), key=lambda i: rel[i][n])
        best = min(range(len(rel)), key=lambda i: rel[i][n])
        raise StabilityViolation(
            f"bounce-time spread {spread_final:.6f} exceeds {bound:.6f}",
            pair=(worst, best))
    return report
