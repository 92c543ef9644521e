import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon

from pedisim.geometry import (
    ContactParams,
    Cuboid,
    Heightfield,
    ScriptedMotion,
    WorldState,
    raycast_down,
    raycast_down_batch,
    scene_from_dict,
    scene_to_dict,
    step_obstacles,
)


def flat_world(obstacles=(), height=0.0):
    return WorldState(terrain=Heightfield.flat(20.0, 0.05, height), obstacles=list(obstacles))


def shapely_covers(ob: Cuboid, xy) -> bool:
    """Independent footprint oracle: point-in-rotated-rectangle via shapely."""
    poly = Polygon(ob.corners_xy())
    return poly.covers(Point(xy[0], xy[1]))


class TestRaycast:
    def test_empty_flat_scene(self):
        assert raycast_down(flat_world(), (0.0, 0.0)) == 0.0

    def test_cuboid_top(self):
        # center at z = hz: resting on flat ground, top at 1.2
        ob = Cuboid(half_extents=(0.3, 0.3, 0.6), position=(0.0, 0.0, 0.6))
        w = flat_world([ob])
        assert shapely_covers(ob, (0.1, 0.1))
        assert raycast_down(w, (0.1, 0.1)) == pytest.approx(1.2, abs=0)

    def test_outside_footprint(self):
        ob = Cuboid(half_extents=(0.3, 0.3, 0.6), position=(0.0, 0.0, 0.6))
        w = flat_world([ob])
        assert not shapely_covers(ob, (0.31, 0.0))
        assert raycast_down(w, (0.31, 0.0)) == 0.0

    def test_matches_shapely_footprint_oracle(self):
        rng = np.random.default_rng(7)
        ob = Cuboid(half_extents=(0.45, 0.3, 0.5), position=(0.4, -0.2, 0.5), yaw=0.6)
        w = flat_world([ob])
        pts = rng.uniform(-1.5, 1.5, size=(500, 2))
        for xy in pts:
            expected = 1.0 if shapely_covers(ob, xy) else 0.0
            assert raycast_down(w, xy) == expected

    def test_batch_agrees_with_scalar(self):
        ob = Cuboid(half_extents=(0.3, 0.2, 0.4), position=(0.5, 0.5, 0.4), yaw=1.1)
        w = flat_world([ob])
        pts = np.random.default_rng(0).uniform(-1, 2, size=(200, 2))
        batch = raycast_down_batch(w, pts)
        for xy, h in zip(pts, batch):
            assert h == raycast_down(w, xy)

    def test_outside_terrain_returns_boundary(self):
        terrain = Heightfield(origin=np.array([0.0, 0.0]), cell_size=0.1, cells=np.array([[0.2, 0.3], [0.4, 0.5]]))
        w = WorldState(terrain=terrain, obstacles=[])
        assert raycast_down(w, (-50.0, -50.0)) == 0.2
        assert raycast_down(w, (50.0, 50.0)) == 0.5

    @settings(max_examples=60, deadline=None)
    @given(x=st.floats(-3, 3), y=st.floats(-3, 3))
    def test_at_least_terrain_and_pure(self, x, y):
        ob = Cuboid(half_extents=(0.4, 0.4, 0.3), position=(0.2, 0.1, 0.3), yaw=0.4)
        w = flat_world([ob], height=0.0)
        h1 = raycast_down(w, (x, y))
        h2 = raycast_down(w, (x, y))
        assert h1 == h2
        assert h1 >= w.terrain.height_at((x, y))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            raycast_down(flat_world(), (np.nan, 0.0))


class TestObstacleDynamics:
    def test_untouched_obstacle_is_fixed_point(self):
        ob = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(1.0, 2.0, 0.3), mass=10.0)
        w = flat_world([ob])
        before = ob.position.copy()
        for _ in range(100):
            step_obstacles(w, 0.005)
        np.testing.assert_array_equal(ob.position, before)
        assert ob.yaw == 0.0

    def test_coulomb_acceleration(self):
        # oracle: a = (F - mu*m*g)/m for sustained push above the static cone
        mu, m, g, F = 0.5, 20.0, 9.81, 100.0
        expected_acc = (F - mu * m * g) / m
        assert expected_acc == pytest.approx(0.095)
        params = ContactParams(obstacle_ground_friction=mu)
        ob = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(0.0, 0.0, 0.3), mass=m)
        w = WorldState(terrain=Heightfield.flat(20.0, 0.05), obstacles=[ob], contact_params=params)
        dt, steps = 0.001, 1000
        for _ in range(steps):
            ob.ext_force = np.array([F, 0.0, 0.0])
            step_obstacles(w, dt)
        assert ob.linear_velocity[0] == pytest.approx(expected_acc * dt * steps, rel=1e-2)

    def test_subthreshold_force_static(self):
        params = ContactParams(obstacle_ground_friction=0.5)
        ob = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(0.0, 0.0, 0.3), mass=20.0)
        w = WorldState(terrain=Heightfield.flat(20.0, 0.05), obstacles=[ob], contact_params=params)
        ob.ext_force = np.array([50.0, 0.0, 0.0])  # below mu*m*g = 98.1
        step_obstacles(w, 0.01)
        assert np.all(ob.linear_velocity == 0.0)

    def test_friction_stops_sliding(self):
        ob = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(0.0, 0.0, 0.3), mass=10.0,
                    linear_velocity=(0.5, 0.0, 0.0))
        w = flat_world([ob])
        for _ in range(1000):
            step_obstacles(w, 0.01)
        assert np.all(ob.linear_velocity == 0.0)

    def test_scripted_motion(self):
        ob = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(0.0, 0.0, 0.3),
                    scripted=ScriptedMotion(velocity=(-0.5, 0.0, 0.0)))
        w = flat_world([ob])
        step_obstacles(w, 0.1)
        assert ob.position[0] == pytest.approx(-0.05, abs=1e-12)

    def test_scripted_window(self):
        ob = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(0.0, 0.0, 0.3),
                    scripted=ScriptedMotion(velocity=(1.0, 0.0, 0.0), start_time=1.0, stop_time=2.0))
        w = flat_world([ob])
        w.time = 0.0
        step_obstacles(w, 0.1)
        assert ob.position[0] == 0.0

    def test_overlap_projection_separates(self):
        a = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(0.0, 0.0, 0.3), obstacle_id=0)
        b = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(0.4, 0.0, 0.3), obstacle_id=1)
        w = flat_world([a, b])
        step_obstacles(w, 0.01)
        gap = b.position[0] - a.position[0]
        assert gap == pytest.approx(0.6, abs=1e-9)


class TestSceneFiles:
    def test_round_trip(self):
        ob = Cuboid(half_extents=(0.3, 0.2, 0.5), position=(1.0, -0.5, 0.5), yaw=0.3, mass=12.0,
                    obstacle_id=3, scripted=ScriptedMotion(velocity=(0.1, 0.0, 0.0), stop_time=4.0))
        w = flat_world([ob], height=0.0)
        d = scene_to_dict(w, spawn=((0.0, 0.0, 0.6), 0.1))
        w2 = scene_from_dict(d)
        np.testing.assert_allclose(w2.obstacles[0].position, ob.position)
        assert w2.obstacles[0].scripted.stop_time == 4.0
        np.testing.assert_allclose(w2.terrain.cells, w.terrain.cells)
        assert d["version"] == 1

    def test_bad_version_rejected(self):
        d = scene_to_dict(flat_world())
        d["version"] = 99
        with pytest.raises(ValueError):
            scene_from_dict(d)

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            Cuboid(half_extents=(0.0, 0.1, 0.1), position=(0, 0, 0))
        with pytest.raises(ValueError):
            Cuboid(half_extents=(0.1, 0.1, 0.1), position=(0, 0, 0), mass=0.0)
        with pytest.raises(ValueError):
            Heightfield(origin=np.zeros(2), cell_size=0.0, cells=np.zeros((2, 2)))
