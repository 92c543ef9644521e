"""Independent reference implementations used by the test suite.

These deliberately do not share code with the package: forward kinematics as
an explicit homogeneous-transform chain and the reward table coded term by
term from its definition.
"""
import numpy as np


def _hom(R=np.eye(3), t=np.zeros(3)):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = t
    return T


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _quat_mat(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def fk_chain(m, base_pos, base_quat, q):
    """Foot world positions via an explicit transform chain, (4, 3)."""
    T_base = _hom(_quat_mat(np.asarray(base_quat)), np.asarray(base_pos))
    sx = [1, 1, -1, -1]
    sy = [1, -1, 1, -1]
    feet = []
    for leg in range(4):
        q1, q2, q3 = np.asarray(q).reshape(4, 3)[leg]
        T = T_base
        T = T @ _hom(t=np.array([sx[leg] * m.hip_x, sy[leg] * m.hip_y, 0.0]))
        T = T @ _hom(_rx(q1))
        T = T @ _hom(t=np.array([0.0, sy[leg] * m.hip_offset, 0.0]))
        T = T @ _hom(_ry(q2))
        T = T @ _hom(t=np.array([0.0, 0.0, -m.thigh]))
        T = T @ _hom(_ry(q3))
        T = T @ _hom(t=np.array([0.0, 0.0, -m.shank]))
        feet.append(T[:3, 3])
    return np.array(feet)


# reward table constants, restated here on purpose
W_TRACK, TRACK_SCALE = 14.0, 0.8
W_TERM, F_BASE_THRESH = -500.0, 1.0
W_LINZ, W_ANGXY = -2.0, -0.05
W_TAU, W_QD, W_QDD, W_RATE = -2.0e-5, -0.04, -2.5e-7, -0.02
W_EVENTS, EVENT_THRESH = -2.0, 0.1
W_OA_EV_PEDIP, W_OA_EV_FEET, W_OA_EV_HK = -80.0, -20.0, -40.0
W_OA_F_PEDIP, W_OA_F_FEET, W_OA_F_HK = -40.0, -0.2, -0.2
OA_THRESH = 0.001

FEET = ("LF_FOOT", "RF_FOOT", "LH_FOOT", "RH_FOOT")
OTHER_FEET = ("LF_FOOT", "LH_FOOT", "RH_FOOT")
HIPS_KNEES = tuple(f"{l}_KNEE" for l in ("LF", "RF", "LH", "RH")) + tuple(
    f"{l}_HIP" for l in ("LF", "RF", "LH", "RH")
)
ALL = FEET + HIPS_KNEES + ("BASE",)


def table_reward_terms(m, state, contacts, command_target_world, switch, ramp, fell,
                       action, prev_action, dt):
    """Every weighted reward term, keyed by the names the package reports."""
    # force bookkeeping: sum vectors per body, split by partner kind
    ext = {b: np.zeros(3) for b in ALL}
    from_obstacle = {b: np.zeros(3) for b in ALL}
    everything = {b: np.zeros(3) for b in ALL}
    for c in contacts:
        everything[c.body_id] = everything[c.body_id] + c.force
        if c.other == "ground" or c.other.startswith("obstacle:"):
            ext[c.body_id] = ext[c.body_id] + c.force
        if c.other.startswith("obstacle:"):
            from_obstacle[c.body_id] = from_obstacle[c.body_id] + c.force

    terms = {}
    foot_w = fk_chain(m, state.base_pos, state.base_quat, state.joint_pos)[1]  # RF
    err = np.linalg.norm(np.asarray(command_target_world) - foot_w)
    terms["command_tracking"] = W_TRACK * np.exp(-err / TRACK_SCALE)

    f_base = np.linalg.norm(ext["BASE"])
    terms["termination"] = W_TERM if (fell or f_base > F_BASE_THRESH) else 0.0

    R = _quat_mat(state.base_quat)
    v_b = R.T @ state.lin_vel
    w_b = R.T @ state.ang_vel
    terms["base_lin_vel_z"] = W_LINZ * v_b[2] ** 2
    terms["base_ang_vel_xy"] = W_ANGXY * (w_b[0] ** 2 + w_b[1] ** 2)
    terms["torques"] = W_TAU * float(state.joint_torque @ state.joint_torque)
    terms["joint_vel"] = W_QD * float(state.joint_vel @ state.joint_vel)
    terms["joint_acc"] = W_QDD * float(state.joint_acc @ state.joint_acc)
    rate = (np.asarray(action) - np.asarray(prev_action)) / dt
    terms["action_rate"] = W_RATE * float(rate @ rate)

    terms["contact_events"] = W_EVENTS * sum(
        1.0 for b in ALL if np.linalg.norm(everything[b]) > EVENT_THRESH
    )

    gate = 0.0 if switch else 1.0
    f_pedip = np.linalg.norm(ext["RF_FOOT"])
    terms["oa_contact_event_pedip"] = ramp * gate * W_OA_EV_PEDIP * (1.0 if f_pedip > OA_THRESH else 0.0)
    terms["oa_force_pedip"] = ramp * gate * W_OA_F_PEDIP * f_pedip
    terms["oa_contact_event_feet"] = ramp * W_OA_EV_FEET * sum(
        1.0 for b in OTHER_FEET if np.linalg.norm(from_obstacle[b]) > OA_THRESH
    )
    terms["oa_force_feet"] = ramp * W_OA_F_FEET * sum(np.linalg.norm(from_obstacle[b]) for b in OTHER_FEET)
    terms["oa_contact_event_hipknee"] = ramp * W_OA_EV_HK * sum(
        1.0 for b in HIPS_KNEES if np.linalg.norm(ext[b]) > OA_THRESH
    )
    terms["oa_force_hipknee"] = ramp * W_OA_F_HK * sum(np.linalg.norm(ext[b]) for b in HIPS_KNEES)
    return terms


def random_reward_tuple(rng, m):
    """One random (state, contacts, command, switch, ramp, fell, actions) tuple."""
    from pedisim.geometry import Contact
    from pedisim.robot import RobotState

    ax = rng.normal(size=3)
    ax /= np.linalg.norm(ax)
    ang = rng.uniform(0, np.pi)
    quat = np.concatenate(([np.cos(ang / 2)], np.sin(ang / 2) * ax))
    state = RobotState(
        base_pos=rng.uniform(-2, 2, 3),
        base_quat=quat,
        lin_vel=rng.uniform(-2, 2, 3),
        ang_vel=rng.uniform(-3, 3, 3),
        joint_pos=rng.uniform(m.joint_lower, m.joint_upper),
        joint_vel=rng.uniform(-8, 8, 12),
        joint_acc=rng.uniform(-100, 100, 12),
        joint_torque=rng.uniform(-80, 80, 12),
    )
    contacts = []
    partners = ["ground", "obstacle:0", "obstacle:1", "self:LF_KNEE"]
    for body in ALL:
        for other in partners:
            if rng.uniform() < 0.25:
                contacts.append(
                    Contact(
                        body_id=body,
                        other=other,
                        force=rng.uniform(-1, 1, 3) * 10 ** rng.uniform(-4, 2),
                        point=rng.uniform(-2, 2, 3),
                    )
                )
    target = rng.uniform(-2, 2, 3)
    switch = int(rng.uniform() < 0.5)
    ramp = float(rng.choice([0.0, 0.33, 0.7, 1.0]))
    fell = bool(rng.uniform() < 0.1)
    action = rng.uniform(-1.5, 1.5, 12)
    prev_action = rng.uniform(-1.5, 1.5, 12)
    return state, contacts, target, switch, ramp, fell, action, prev_action
