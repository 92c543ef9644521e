import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pedisim.geometry import Cuboid, Heightfield, WorldState, query_contacts
from pedisim.robot import (
    FOOT_BODIES,
    JOINT_NAMES,
    LEG_NAMES,
    Morphology,
    RobotState,
    apply_actions_pd,
    clamp_action,
    forward_kinematics,
    quat_from_yaw,
    quat_to_mat,
    step_dynamics,
)


def hom(R=np.eye(3), t=np.zeros(3)):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = t
    return T


def rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def fk_oracle(m: Morphology, base_pos, base_quat, q):
    """Independent FK: explicit homogeneous-transform chain per leg."""
    R = quat_to_mat(np.asarray(base_quat))
    T_base = hom(R, np.asarray(base_pos))
    sx = [1, 1, -1, -1]
    sy = [1, -1, 1, -1]
    feet = []
    for leg in range(4):
        q1, q2, q3 = np.asarray(q).reshape(4, 3)[leg]
        T = T_base
        T = T @ hom(t=np.array([sx[leg] * m.hip_x, sy[leg] * m.hip_y, 0.0]))
        T = T @ hom(rx(q1))
        T = T @ hom(t=np.array([0.0, sy[leg] * m.hip_offset, 0.0]))
        T = T @ hom(ry(q2))
        T = T @ hom(t=np.array([0.0, 0.0, -m.thigh]))
        T = T @ hom(ry(q3))
        T = T @ hom(t=np.array([0.0, 0.0, -m.shank]))
        feet.append(T[:3, 3])
    return np.array(feet)


def world_with_robot(m=None, obstacles=(), xy=(0.0, 0.0), yaw=0.0):
    m = m or Morphology()
    w = WorldState(terrain=Heightfield.flat(20.0, 0.05), obstacles=list(obstacles))
    w.morphology = m
    w.robot = RobotState.at_default(m, xy=xy, yaw=yaw)
    return w


class TestForwardKinematics:
    def test_default_pose_feet(self):
        m = Morphology()
        s = RobotState.at_default(m)
        feet = forward_kinematics(m, s)
        expected = s.base_pos + m.foot_positions_base(m.default_joint_pos)
        np.testing.assert_allclose(feet, expected, atol=1e-12)
        # nominal stance: symmetric footprint, feet near the ground
        assert feet[0, 1] == pytest.approx(-feet[1, 1])
        assert np.all(np.abs(feet[:, 2] - m.foot_radius + m.base_mass * 9.81 / (4 * 5000.0)) < 1e-9)

    def test_matches_transform_chain_oracle(self):
        m = Morphology()
        rng = np.random.default_rng(3)
        for _ in range(50):
            q = rng.uniform(m.joint_lower, m.joint_upper)
            pos = rng.uniform(-1, 1, 3)
            ax = rng.normal(size=3)
            ax /= np.linalg.norm(ax)
            ang = rng.uniform(0, np.pi)
            quat = np.concatenate(([np.cos(ang / 2)], np.sin(ang / 2) * ax))
            s = RobotState(pos, quat, np.zeros(3), np.zeros(3), q, np.zeros(12), np.zeros(12), np.zeros(12))
            np.testing.assert_allclose(
                forward_kinematics(m, s), fk_oracle(m, pos, quat, q), atol=1e-9
            )

    def test_rigid_translation_equivariance(self):
        m = Morphology()
        s0 = RobotState.at_default(m)
        s1 = s0.copy()
        s1.base_pos = s1.base_pos + np.array([1.0, 2.0, 0.0])
        np.testing.assert_allclose(
            forward_kinematics(m, s1) - forward_kinematics(m, s0),
            np.tile([1.0, 2.0, 0.0], (4, 1)),
            atol=1e-12,
        )

    @settings(max_examples=40, deadline=None)
    @given(yaw=st.floats(-np.pi, np.pi), dx=st.floats(-2, 2), dy=st.floats(-2, 2))
    def test_rigid_transform_equivariance(self, yaw, dx, dy):
        m = Morphology()
        q = m.default_joint_pos + 0.1
        s0 = RobotState(np.zeros(3), quat_from_yaw(0.0), np.zeros(3), np.zeros(3), q,
                        np.zeros(12), np.zeros(12), np.zeros(12))
        s1 = RobotState(np.array([dx, dy, 0.0]), quat_from_yaw(yaw), np.zeros(3), np.zeros(3), q,
                        np.zeros(12), np.zeros(12), np.zeros(12))
        R = quat_to_mat(quat_from_yaw(yaw))
        expected = np.array([dx, dy, 0.0]) + forward_kinematics(m, s0) @ R.T
        np.testing.assert_allclose(forward_kinematics(m, s1), expected, atol=1e-9)

    def test_ik_round_trip(self):
        m = Morphology()
        rng = np.random.default_rng(11)
        hits = 0
        for _ in range(300):
            q = rng.uniform(m.joint_lower, m.joint_upper).reshape(4, 3)
            for leg in range(4):
                p = m.foot_positions_base(q.ravel())[leg]
                sol = m.leg_ik(p, leg)
                if sol is None:
                    continue
                p2 = m.foot_positions_base(
                    np.concatenate([q[i] if i != leg else sol for i in range(4)])
                )[leg]
                np.testing.assert_allclose(p2, p, atol=1e-8)
                hits += 1
        assert hits > 600  # IK recovers the reachable bulk of the sampled workspace

    def test_ik_out_of_reach(self):
        m = Morphology()
        assert m.leg_ik(np.array([5.0, 0.0, 0.0]), 1) is None


class TestPD:
    def test_equilibrium_zero_torque(self):
        m = Morphology()
        s = RobotState.at_default(m)
        tau = apply_actions_pd(m, s, np.zeros(12))
        np.testing.assert_allclose(tau, np.zeros(12), atol=1e-12)

    def test_single_joint_offset(self):
        m = Morphology()
        s = RobotState.at_default(m)
        a = np.zeros(12)
        a[4] = 0.1
        tau = apply_actions_pd(m, s, a, gains=(80.0, 2.0))
        expected = np.zeros(12)
        expected[4] = 8.0
        np.testing.assert_allclose(tau, expected, atol=1e-12)

    def test_torque_clamped(self):
        m = Morphology()
        s = RobotState.at_default(m)
        a = np.zeros(12)
        a[0] = 1.4  # kp*1.4 = 112 > limit
        tau = apply_actions_pd(m, s, a)
        assert tau[0] == 80.0

    def test_gains_positive_required(self):
        m = Morphology()
        s = RobotState.at_default(m)
        with pytest.raises(ValueError):
            apply_actions_pd(m, s, np.zeros(12), gains=(0.0, 1.0))

    def test_action_clamp(self):
        m = Morphology()
        a = clamp_action(m, np.full(12, 99.0))
        assert np.all(a == m.action_bound)
        assert np.all(clamp_action(m, np.full(12, np.nan)) == 0.0)


class TestContacts:
    def test_standing_four_foot_contacts(self):
        w = world_with_robot()
        contacts = query_contacts(w)
        ground = [c for c in contacts if c.is_ground]
        assert len(ground) == 4
        assert sorted(c.body_id for c in ground) == sorted(FOOT_BODIES)
        for c in ground:
            assert c.force[2] > 0

    def test_no_overlap_empty(self):
        m = Morphology()
        w = world_with_robot(m)
        w.robot.base_pos[2] += 1.0  # lift clear of the ground
        assert query_contacts(w) == []

    def test_penalty_force_linear_in_depth(self):
        # static sphere overlapping an obstacle face by 0.01 m at k=5000 -> 50 N
        m = Morphology()
        w = world_with_robot(m)
        w.robot.base_pos[2] += 1.0
        feet = forward_kinematics(m, w.robot)
        rf = feet[1]
        depth = 0.01
        ob = Cuboid(half_extents=(0.3, 0.3, 0.3),
                    position=(rf[0] + 0.3 + m.foot_radius - depth, rf[1], rf[2]),
                    obstacle_id=0)
        w.obstacles = [ob]
        contacts = [c for c in query_contacts(w) if c.is_obstacle]
        assert len(contacts) == 1
        assert contacts[0].body_id == "RF_FOOT"
        assert contacts[0].magnitude == pytest.approx(5000.0 * depth, rel=1e-9)

    def test_newton_consistent_reaction(self):
        from pedisim.geometry import apply_reaction_to_obstacle

        m = Morphology()
        w = world_with_robot(m)
        w.robot.base_pos[2] += 1.0
        feet = forward_kinematics(m, w.robot)
        rf = feet[1]
        ob = Cuboid(half_extents=(0.3, 0.3, 0.3), position=(rf[0] + 0.31, rf[1], rf[2]), obstacle_id=0)
        w.obstacles = [ob]
        contacts = [c for c in query_contacts(w) if c.is_obstacle]
        total = np.zeros(3)
        for c in contacts:
            apply_reaction_to_obstacle(ob, c.force, c.point)
            total += c.force
        np.testing.assert_allclose(ob.ext_force, -total, atol=1e-12)


class TestStepDynamics:
    def test_rejects_bad_dt(self):
        w = world_with_robot()
        with pytest.raises(ValueError):
            step_dynamics(w, np.zeros(12), 0.0)
        with pytest.raises(ValueError):
            step_dynamics(w, np.zeros(12), 0.05)

    def test_zero_torque_stance_equilibrium(self):
        w = world_with_robot()
        z0 = w.robot.base_pos[2]
        for _ in range(200):  # 1 s at dt = 5 ms
            step_dynamics(w, np.zeros(12), 0.005)
        assert abs(w.robot.base_pos[2] - z0) < 1e-3

    def test_free_fall_ballistic(self):
        m = Morphology()
        w = world_with_robot(m)
        w.robot.base_pos[2] += 50.0  # clear of the ground for the whole window
        z0 = w.robot.base_pos[2]
        dt, n = 0.005, 20
        for _ in range(n):
            step_dynamics(w, np.zeros(12), dt)
        t = dt * n
        # semi-implicit Euler overshoots the closed form by g*dt*t/2
        expected_drop = 0.5 * 9.81 * t * t
        assert w.robot.base_pos[2] - z0 == pytest.approx(-expected_drop, abs=9.81 * dt * t)

    def test_joint_acc_finite_difference_consistency(self):
        m = Morphology()
        w = world_with_robot(m)
        rng = np.random.default_rng(0)
        dt = 0.005
        qv_prev = w.robot.joint_vel.copy()
        for _ in range(50):
            tau = rng.uniform(-20, 20, 12)
            step_dynamics(w, tau, dt)
            np.testing.assert_allclose(
                qv_prev + w.robot.joint_acc * dt, w.robot.joint_vel, atol=1e-6
            )
            qv_prev = w.robot.joint_vel.copy()

    def test_pd_work_bounded(self):
        m = Morphology()
        w = world_with_robot(m)
        dt = 0.005
        a = np.full(12, 0.3)
        for _ in range(100):
            qv = w.robot.joint_vel.copy()
            tau = apply_actions_pd(m, w.robot, a)
            step_dynamics(w, tau, dt)
            work = float(np.dot(tau, w.robot.joint_vel) * dt)
            bound = 12 * m.torque_limit * max(np.max(np.abs(w.robot.joint_vel)), np.max(np.abs(qv))) * dt
            assert work <= bound + 1e-12

    def test_deterministic(self):
        def run():
            w = world_with_robot()
            rng = np.random.default_rng(5)
            for _ in range(100):
                step_dynamics(w, rng.uniform(-10, 10, 12), 0.005)
            return w.robot.base_pos.copy(), w.robot.joint_pos.copy(), w.robot.base_quat.copy()

        a, b = run(), run()
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_fall_detection_low_base(self):
        m = Morphology()
        w = world_with_robot(m)
        w.robot.base_pos[2] = 0.1
        _, fell = step_dynamics(w, np.zeros(12), 0.005)
        assert fell

    def test_fall_detection_tilt(self):
        m = Morphology()
        w = world_with_robot(m)
        ang = np.deg2rad(80)
        w.robot.base_quat = np.array([np.cos(ang / 2), np.sin(ang / 2), 0.0, 0.0])
        w.robot.base_pos[2] = 1.0
        _, fell = step_dynamics(w, np.zeros(12), 0.005)
        assert fell

    def test_push_disturbs_base(self):
        m = Morphology()
        w = world_with_robot(m)
        for _ in range(20):
            tau = apply_actions_pd(m, w.robot, np.zeros(12))
            step_dynamics(w, tau, 0.005, pushes=[(w.robot.base_pos, np.array([30.0, 0.0, 0.0]))])
        assert w.robot.lin_vel[0] > 0.01


class TestNaming:
    def test_joint_and_leg_order(self):
        assert len(JOINT_NAMES) == 12
        assert JOINT_NAMES[0] == "LF_HAA"
        assert JOINT_NAMES[3] == "RF_HAA"
        assert LEG_NAMES[1] == "RF"

    def test_morphology_round_trip(self, tmp_path):
        m = Morphology(thigh=0.3)
        p = tmp_path / "morph.json"
        m.save(p)
        m2 = Morphology.load(p)
        assert m2.thigh == 0.3
        np.testing.assert_array_equal(m2.default_joint_pos, m.default_joint_pos)

    def test_morphology_invariants(self):
        with pytest.raises(ValueError):
            Morphology(default_joint_pos=np.zeros(11))
        with pytest.raises(ValueError):
            Morphology(joint_lower=np.full(12, 1.0), joint_upper=np.full(12, -1.0))
