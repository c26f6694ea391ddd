from geocatch.geometry import Point2, Zone, build_obstacle_scene, zone, zone_membership


def test_zone_object_agrees_with_membership():
    scene = build_obstacle_scene(0.05, 2.0)
    pts = [Point2(0.0, 0.0), Point2(0.0, -0.3175426480542942),
           Point2(0.3, 0.2), scene.centers[0]]
    for p in pts:
        members = zone_membership(scene, p)
        for a in (1, 2, 3):
            z = zone(scene, a)
            assert z.index == a
            assert z.contains(p) == (a in members)
            if not z.contains(p):
                assert z.distance(p) > 0.0
