import numpy as np
import pytest
from shapely.geometry import Polygon

from pedisim.mdp import RandomizationConfig, SpawnExhausted, draw_randomization, sample_spawn, spawn_patch_is_flat
from pedisim.scenarios import (
    EVAL_SCENE_NAMES,
    SCENARIO_IDS,
    CommandTrajectory,
    ConstraintViolation,
    ScenarioSpec,
    assign_scenarios,
    build_eval_scene,
    default_scenarios,
    face_gap_y,
    instantiate_scenario,
    spawn_between_pair,
)

RAND = RandomizationConfig()


def make_scene(sid, seed=0):
    rng = np.random.default_rng(seed)
    draw = draw_randomization(RAND, rng)
    return instantiate_scenario(default_scenarios()[sid], draw, rng, RAND), draw


class TestInstantiation:
    def test_single_obstacle_in_C(self):
        scene, _ = make_scene("C")
        assert len(scene.world.obstacles) == 1

    def test_F_gap_range_and_base_exclusion(self):
        # footprint oracle: the measured face-to-face gap must match the draw,
        # stay in the declared range and never admit the base cuboid
        for seed in range(50):
            scene, _ = make_scene("F", seed)
            a, b = scene.world.obstacles
            gap = face_gap_y(a, b)
            assert 0.22 - 1e-9 <= gap <= 0.38 + 1e-9
            assert gap < 0.40
            assert abs(gap - scene.gaps[0]) < 1e-9
            pa = Polygon(a.corners_xy())
            pb = Polygon(b.corners_xy())
            assert pa.distance(pb) == pytest.approx(gap, abs=1e-9)

    def test_E_gap_fits_robot(self):
        for seed in range(20):
            scene, _ = make_scene("E", seed)
            assert scene.gaps[0] >= 1.1

    def test_G_three_obstacles_two_gaps(self):
        scene, _ = make_scene("G")
        assert len(scene.world.obstacles) == 3
        assert len(scene.gaps) == 2
        for g in scene.gaps:
            assert 0.3 - 1e-9 <= g <= 0.45 + 1e-9

    def test_dims_from_draw(self):
        scene, draw = make_scene("C", 7)
        ob = scene.world.obstacles[0]
        np.testing.assert_allclose(2 * ob.half_extents,
                                   [draw.obstacle_dims[0][0], draw.obstacle_dims[0][1], draw.obstacle_dims[0][2]])
        assert ob.mass == draw.obstacle_masses[0]

    def test_seeded_instantiation_identical(self):
        a, _ = make_scene("G", 3)
        b, _ = make_scene("G", 3)
        for oa, ob in zip(a.world.obstacles, b.world.obstacles):
            np.testing.assert_array_equal(oa.position, ob.position)
            assert oa.yaw == ob.yaw
        np.testing.assert_array_equal(a.world.terrain.cells, b.world.terrain.cells)

    def test_constraint_violation_on_bad_spec(self):
        spec = default_scenarios()["F"]
        bad = ScenarioSpec(
            scenario_id="F", kind="pair_gap", obstacle_indices=(1, 2), anchor=spec.anchor,
            gap_range=(0.5, 0.6), max_gap=0.40,
            spawn_space=spec.spawn_space, command_space=spec.command_space,
        )
        rng = np.random.default_rng(0)
        with pytest.raises(ConstraintViolation):
            instantiate_scenario(bad, draw_randomization(RAND, rng), rng, RAND)


class TestAssignment:
    def test_uniform_frequencies(self):
        ids = assign_scenarios(50_000, np.random.default_rng(0))
        for sid in SCENARIO_IDS:
            assert abs(ids.count(sid) / 50_000 - 0.2) < 0.01

    def test_single_env(self):
        assert assign_scenarios(1, np.random.default_rng(1))[0] in SCENARIO_IDS

    def test_seeded_reproducible(self):
        a = assign_scenarios(100, np.random.default_rng(5))
        b = assign_scenarios(100, np.random.default_rng(5))
        assert a == b

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            assign_scenarios(0, np.random.default_rng(0))


class TestSpawns:
    def test_every_scenario_admits_spawns(self):
        rng = np.random.default_rng(11)
        for sid in SCENARIO_IDS:
            for k in range(20):
                draw = draw_randomization(RAND, rng)
                scene = instantiate_scenario(default_scenarios()[sid], draw, rng, RAND)
                xy, yaw = sample_spawn(scene.world, scene.spawn_space, rng)  # must not raise
                assert spawn_patch_is_flat(scene.world, xy, yaw, __import__("pedisim.mdp", fromlist=["SpawnConfig"]).SpawnConfig())

    def test_E_spawns_between(self):
        rng = np.random.default_rng(2)
        between = total = 0
        for k in range(150):
            draw = draw_randomization(RAND, rng)
            scene = instantiate_scenario(default_scenarios()["E"], draw, rng, RAND)
            try:
                xy, _ = sample_spawn(scene.world, scene.spawn_space, rng)
            except SpawnExhausted:
                continue
            total += 1
            if spawn_between_pair(scene, xy):
                between += 1
        assert total > 140
        assert between / total >= 0.05


class TestEvalScenes:
    def test_all_names_build(self):
        for name in EVAL_SCENE_NAMES:
            scene = build_eval_scene(name)
            assert scene.trajectory is not None
            assert scene.trajectory.duration > 0

    def test_through_command_inside_obstacle(self):
        scene = build_eval_scene("single_sweep_through")
        ob = scene.world.obstacles[0]
        traj = scene.trajectory
        inside = 0
        for t in np.linspace(0, traj.duration, 400):
            cmd = traj.at(t)
            if ob.covers(cmd.target[:2]) and cmd.target[2] < ob.top:
                inside += 1
        assert inside > 0

    def test_ring_1p3m_gap(self):
        scene = build_eval_scene("ring_1p3m")
        obs = scene.world.obstacles
        # adjacent corner obstacles: face-to-face gap exactly 1.3 m
        d = np.linalg.norm(obs[0].position[:2] - obs[1].position[:2])
        gap = d - obs[0].half_extents[1] - obs[1].half_extents[1]
        assert gap == pytest.approx(1.3, abs=1e-9)

    def test_dynamic_front_scripted(self):
        scene = build_eval_scene("dynamic_front")
        ob = scene.world.obstacles[0]
        assert ob.scripted is not None
        np.testing.assert_allclose(ob.scripted.velocity, [-0.3, 0.0, 0.0])

    def test_round_bin_is_polygonal_ring(self):
        scene = build_eval_scene("round_bin")
        assert len(scene.world.obstacles) == 16

    def test_switch_demo_toggles(self):
        traj = build_eval_scene("switch_demo").trajectory
        assert traj.at(1.0).switch == 0
        assert traj.at(12.0).switch == 1

    def test_eval_scenes_seed_independent(self):
        a = build_eval_scene("ring_wide")
        b = build_eval_scene("ring_wide")
        for oa, ob in zip(a.world.obstacles, b.world.obstacles):
            np.testing.assert_array_equal(oa.position, ob.position)

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            build_eval_scene("bogus")


class TestCommandTrajectory:
    def test_interpolation_and_clipping(self):
        traj = CommandTrajectory(times=[0.0, 1.0, 2.0],
                                 targets=[[0, 0, 0], [1, 0, 0], [1, 1, 0]],
                                 switches=[0, 0, 1])
        np.testing.assert_allclose(traj.at(0.5).target, [0.5, 0, 0])
        np.testing.assert_allclose(traj.at(1.5).target, [1, 0.5, 0])
        assert traj.at(0.5).switch == 0
        assert traj.at(1.5).switch == 0
        assert traj.at(5.0).switch == 1
        np.testing.assert_allclose(traj.at(99.0).target, [1, 1, 0])

    def test_constant_speed_waypoints(self):
        traj = CommandTrajectory.from_waypoints([[0, 0, 0], [1, 0, 0]], speed=0.5, hold=2.0)
        assert traj.duration == pytest.approx(4.0)
        np.testing.assert_allclose(traj.at(3.0).target, [0.5, 0, 0])

    def test_validation(self):
        with pytest.raises(ValueError):
            CommandTrajectory(times=[1.0, 0.0], targets=[[0, 0, 0], [1, 1, 1]], switches=[0, 0])
        with pytest.raises(ValueError):
            CommandTrajectory(times=[0.0], targets=[[0, 0, 0], [1, 1, 1]], switches=[0])
