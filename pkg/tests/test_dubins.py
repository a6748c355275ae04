import math

import numpy as np
import pytest

from windroute.dubins import (
    Obstacle,
    Pose,
    collision_free,
    dubins_shortest,
    max_step_turn,
    polyline_max_turn,
    refine_route,
    segment_clear,
)


def test_straight_aligned():
    p = dubins_shortest(Pose(0, 0, 0.3), Pose(100 * math.cos(0.3), 100 * math.sin(0.3), 0.3), 20.0)
    assert p.total_length == pytest.approx(100.0, abs=1e-9)


def test_u_turn_semicircle():
    R = 25.0
    p = dubins_shortest(Pose(0, 0, 0), Pose(0, 2 * R, math.pi), R)
    assert p.total_length == pytest.approx(math.pi * R, abs=1e-6)


def test_endpoint_reached():
    rng = np.random.default_rng(1)
    for _ in range(200):
        q0 = Pose(*rng.uniform(-100, 100, 2), rng.uniform(0, 2 * math.pi))
        q1 = Pose(*rng.uniform(-100, 100, 2), rng.uniform(0, 2 * math.pi))
        p = dubins_shortest(q0, q1, 15.0)
        end = p.sample(np.array([p.total_length]))[0]
        assert end[0] == pytest.approx(q1.x, abs=1e-6)
        assert end[1] == pytest.approx(q1.y, abs=1e-6)
        assert math.cos(end[2] - q1.heading) == pytest.approx(1.0, abs=1e-9)


def test_obstacle_checks():
    ob = [Obstacle((50.0, 0.0), 10.0)]
    assert not segment_clear((0, 0), (100, 0), ob)
    assert segment_clear((0, 30), (100, 30), ob)
    p = dubins_shortest(Pose(0, 0, 0), Pose(100, 0, 0), 20.0)
    assert not collision_free(p, ob)


def test_refined_route_smooths_corners():
    pts = [(0, 0), (1000, 0), (1000, 1000), (2000, 1000)]
    r = refine_route(pts, 150.0, step=30.0)
    assert polyline_max_turn(pts) == pytest.approx(90.0)
    assert max_step_turn(r.resample(30.0)) < 15.0
    assert r.total_length >= 3000.0 - 1e-9


def test_blocked_piece_falls_back_to_chord():
    r = refine_route([(0, 0), (200, 0)], 50.0, [Obstacle((100.0, 0.0), 5.0)])
    assert r.blocked == [0]
