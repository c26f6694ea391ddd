import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geocatch.geometry import (
    Point2,
    Direction,
    Scene,
    SceneError,
    build_obstacle_scene,
    ball_intersects_zone,
    dist,
    point_segment_distance,
    torus,
    torus_distance,
    zone_distance,
    zone_membership,
    zone_segment,
)


def brute_segment_distance(p, a, b, n=20001):
    # independent oracle: dense sampling along the segment
    best = float("inf")
    for k in range(n):
        t = k / (n - 1)
        x = a.x + t * (b.x - a.x)
        y = a.y + t * (b.y - a.y)
        best = min(best, math.hypot(p.x - x, p.y - y))
    return best


@pytest.fixture(scope="module")
def scene():
    return build_obstacle_scene(0.05, 2.0)


def test_centers_form_triangle_of_side_one_plus_two_r0(scene):
    c = scene.centers
    for i in range(3):
        assert dist(c[i], c[(i + 1) % 3]) == pytest.approx(1.1, abs=1e-12)


def test_gap_between_circles_is_one(scene):
    c = scene.centers
    for i in range(3):
        gap = dist(c[i], c[(i + 1) % 3]) - 2 * scene.r0
        assert gap == pytest.approx(1.0, abs=1e-12)


def test_centroid_at_origin_and_first_center_on_y_axis(scene):
    cx = sum(c.x for c in scene.centers) / 3
    cy = sum(c.y for c in scene.centers) / 3
    assert abs(cx) < 1e-12 and abs(cy) < 1e-12
    assert abs(scene.centers[0].x) < 1e-12 and scene.centers[0].y > 0


def test_degenerate_r0_rejected():
    with pytest.raises(SceneError):
        build_obstacle_scene(0.0, 2.0)
    with pytest.raises(SceneError):
        build_obstacle_scene(-0.1, 2.0)
    with pytest.raises(SceneError):
        build_obstacle_scene(0.3, 2.0)


def test_outer_radius_too_small_rejected():
    # circumradius + r0 = 1.1/sqrt(3) + 0.05 ~ 0.685
    with pytest.raises(SceneError):
        build_obstacle_scene(0.05, 0.6)


def test_gap_midpoint_belongs_to_single_zone(scene):
    c2, c3 = scene.centers[1], scene.centers[2]
    mid = Point2((c2.x + c3.x) / 2, (c2.y + c3.y) / 2)
    assert zone_membership(scene, mid) == {1}


def test_centroid_in_no_zone(scene):
    # oracle: the centroid sits at the triangle inradius from every side
    centroid = Point2(0.0, 0.0)
    for a in (1, 2, 3):
        ca, cb = zone_segment(scene, a)
        d = brute_segment_distance(centroid, ca, cb)
        assert d == pytest.approx(1.1 / (2 * math.sqrt(3)), abs=1e-6)
        assert d > scene.r0
    assert zone_membership(scene, centroid) == set()


def test_circle_center_belongs_to_its_two_hulls(scene):
    assert zone_membership(scene, scene.centers[0]) == {2, 3}
    assert zone_membership(scene, scene.centers[1]) == {1, 3}
    assert zone_membership(scene, scene.centers[2]) == {1, 2}


def test_zone_distance_matches_brute_force(scene):
    pts = [Point2(0.3, 0.1), Point2(-0.4, -0.2), Point2(0.0, 0.5),
           Point2(0.9, 0.9), Point2(-0.01, -0.3)]
    for p in pts:
        for a in (1, 2, 3):
            ca, cb = zone_segment(scene, a)
            want = max(0.0, brute_segment_distance(p, ca, cb) - scene.r0)
            assert zone_distance(scene, p, a) == pytest.approx(want, abs=1e-6)


def test_ball_intersects_zone_on_axis(scene):
    c2, c3 = scene.centers[1], scene.centers[2]
    mid = Point2((c2.x + c3.x) / 2, (c2.y + c3.y) / 2)
    assert ball_intersects_zone(scene, mid, 0.05, 1)


def test_ball_at_centroid_misses_all_zones_for_small_eps(scene):
    centroid = Point2(0.0, 0.0)
    d = min(zone_distance(scene, centroid, a) for a in (1, 2, 3))
    for a in (1, 2, 3):
        assert not ball_intersects_zone(scene, centroid, d * 0.99, a)
        assert ball_intersects_zone(scene, centroid, d * 1.01 + 1e-9, a)


def test_ball_far_outside_misses(scene):
    assert not ball_intersects_zone(scene, Point2(1.9, 0.0), 0.05, 1)


def test_ball_intersects_zone_monotone_in_eps(scene):
    p = Point2(0.2, -0.1)
    for a in (1, 2, 3):
        hits = [ball_intersects_zone(scene, p, e, a) for e in (0.01, 0.1, 0.5, 1.0)]
        # once true, stays true
        assert hits == sorted(hits)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-1.5, 1.5), y=st.floats(-1.5, 1.5))
def test_membership_equivariant_under_three_fold_rotation(x, y):
    scene = build_obstacle_scene(0.05, 2.0)
    p = Point2(x, y)
    rot = 2 * math.pi / 3
    q = Point2(p.x * math.cos(rot) - p.y * math.sin(rot),
               p.x * math.sin(rot) + p.y * math.cos(rot))
    # rotating by 2*pi/3 maps C1->C2->C3->C1, hence permutes zones 1->2->3->1
    perm = {1: 2, 2: 3, 3: 1}
    got = {perm[a] for a in zone_membership(scene, p)}
    want = zone_membership(scene, q)
    if got != want:
        # tolerate boundary-of-zone disagreements at float precision
        for a in got ^ want:
            assert abs(zone_distance(scene, q, a)) < 1e-9


def test_membership_subset_of_indices(scene):
    for p in [Point2(0, 0), Point2(0.55, -0.31), Point2(-2, 1)]:
        assert zone_membership(scene, p) <= {1, 2, 3}


def test_scene_json_round_trip(scene):
    s = scene.to_json()
    assert '"kind":"obstacle"' in s
    back = Scene.from_json(s)
    assert back == scene
    t = torus(1.0)
    assert Scene.from_json(t.to_json()) == t


def test_torus_distance_wraps():
    assert torus_distance(Point2(0.95, 0.0), Point2(0.05, 0.0), 1.0) == pytest.approx(0.1, abs=1e-12)
    assert torus_distance(Point2(0.2, 0.9), Point2(0.2, 0.1), 1.0) == pytest.approx(0.2, abs=1e-12)


def test_direction_normalizes():
    d = Direction(7.0)
    assert 0.0 <= d.angle < 2 * math.pi
    assert d.angle == pytest.approx(7.0 - 2 * math.pi, abs=1e-12)
    v = Direction.from_vec(0.0, -1.0)
    assert v.angle == pytest.approx(3 * math.pi / 2, abs=1e-12)


def test_point_segment_distance_against_oracle():
    a, b = Point2(-0.3, 0.2), Point2(0.7, -0.5)
    for p in [Point2(0, 0), Point2(1, 1), Point2(-1, 0.2), Point2(0.2, -0.15)]:
        assert point_segment_distance(p, a, b) == pytest.approx(
            brute_segment_distance(p, a, b), abs=1e-6)
