"""Quadruped morphology, analytic leg kinematics, PD actuation and base dynamics.

The dynamics are deliberately simple: a floating 6-DoF base with massless legs.
Joints integrate PD torque plus viscous damping (contact forces do not
back-drive them), feet are kinematic points whose contact forces act on the
base. That keeps every step deterministic and cheap while preserving the
contact structure the reward engine needs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    GRAVITY,
    CollisionPrimitive,
    WorldState,
    apply_reaction_to_obstacle,
    query_contacts,
)

MORPHOLOGY_SCHEMA_VERSION = 1

LEG_NAMES = ("LF", "RF", "LH", "RH")
JOINT_SUFFIXES = ("HAA", "HFE", "KFE")
JOINT_NAMES = tuple(f"{leg}_{j}" for leg in LEG_NAMES for j in JOINT_SUFFIXES)
PEDIP_FOOT = "RF_FOOT"
FOOT_BODIES = tuple(f"{leg}_FOOT" for leg in LEG_NAMES)
KNEE_BODIES = tuple(f"{leg}_KNEE" for leg in LEG_NAMES)
HIP_BODIES = tuple(f"{leg}_HIP" for leg in LEG_NAMES)
BASE_BODY = "BASE"

# leg placement signs: (front/back, left/right)
_LEG_SX = np.array([1.0, 1.0, -1.0, -1.0])
_LEG_SY = np.array([1.0, -1.0, 1.0, -1.0])


# --- quaternion helpers (w, x, y, z) -----------------------------------------

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_from_yaw(yaw: float) -> np.ndarray:
    return np.array([np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)])


def quat_to_mat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_integrate(q: np.ndarray, omega_world: np.ndarray, dt: float) -> np.ndarray:
    """Rotate q by the world-frame angular velocity over dt (exponential map)."""
    angle = float(np.linalg.norm(omega_world)) * dt
    if angle < 1e-12:
        return q / np.linalg.norm(q)
    axis = omega_world / np.linalg.norm(omega_world)
    dq = np.concatenate(([np.cos(angle / 2)], np.sin(angle / 2) * axis))
    out = quat_mul(dq, q)
    return out / np.linalg.norm(out)


def yaw_of_quat(q: np.ndarray) -> float:
    R = quat_to_mat(q)
    return float(np.arctan2(R[1, 0], R[0, 0]))


@dataclass
class Morphology:
    """Kinematic and collision description of the quadruped.

    Default numbers are plausible placeholders for a mid-size quadruped, fully
    overridable from a morphology file; none of them are calibrated data.
    """

    hip_x: float = 0.30
    hip_y: float = 0.104
    hip_offset: float = 0.11   # lateral offset from HAA axis to the leg plane
    thigh: float = 0.285
    shank: float = 0.33
    base_half_extents: np.ndarray = field(default_factory=lambda: np.array([0.465, 0.20, 0.125]))
    base_mass: float = 50.0
    foot_radius: float = 0.03
    knee_radius: float = 0.06
    hip_radius: float = 0.08
    default_joint_pos: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.4, -0.8, 0.0, 0.4, -0.8, 0.0, -0.4, 0.8, 0.0, -0.4, 0.8])
    )
    joint_lower: np.ndarray = field(
        default_factory=lambda: np.array([-0.8, -3.0, -3.0, -0.8, -3.0, -3.0, -0.8, -3.0, 0.05, -0.8, -3.0, 0.05])
    )
    joint_upper: np.ndarray = field(
        default_factory=lambda: np.array([0.8, 3.0, -0.05, 0.8, 3.0, -0.05, 0.8, 3.0, 3.0, 0.8, 3.0, 3.0])
    )
    kp: float = 80.0
    kd: float = 2.0
    torque_limit: float = 80.0
    action_bound: float = 2.5      # rad, offsets from defaults
    joint_inertia: float = 0.04    # kg*m^2, lumped per joint
    joint_damping: float = 0.5     # N*m*s/rad, viscous
    fall_height: float = 0.15      # m above terrain
    fall_tilt: float = np.deg2rad(70.0)

    def __post_init__(self):
        for name in ("base_half_extents", "default_joint_pos", "joint_lower", "joint_upper"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.default_joint_pos.shape != (12,):
            raise ValueError("expected 12 actuated joints (4 legs x HAA/HFE/KFE)")
        if not np.all(self.joint_lower < self.joint_upper):
            raise ValueError("joint limits must satisfy lower < upper")
        if np.any(self.default_joint_pos < self.joint_lower) or np.any(self.default_joint_pos > self.joint_upper):
            raise ValueError("default joint positions must lie within limits")

    @property
    def joint_names(self):
        return JOINT_NAMES

    @property
    def pedip_leg(self) -> int:
        return LEG_NAMES.index("RF")

    def hip_mounts(self) -> np.ndarray:
        """Hip mount points on the base, base frame, (4, 3)."""
        return np.stack([_LEG_SX * self.hip_x, _LEG_SY * self.hip_y, np.zeros(4)], axis=1)

    def leg_points_base(self, q: np.ndarray):
        """Hip, knee and foot points of all legs in the base frame, each (4, 3)."""
        q = np.asarray(q, dtype=float).reshape(4, 3)
        q1, q2, q3 = q[:, 0], q[:, 1], q[:, 2]
        hips = self.hip_mounts()
        c1, s1 = np.cos(q1), np.sin(q1)
        d = _LEG_SY * self.hip_offset
        # leg-plane coordinates: x forward, z down the leg
        ux_knee = -self.thigh * np.sin(q2)
        uz_knee = -self.thigh * np.cos(q2)
        ux_foot = ux_knee - self.shank * np.sin(q2 + q3)
        uz_foot = uz_knee - self.shank * np.cos(q2 + q3)

        def roll(y, z):
            return y * c1 - z * s1, y * s1 + z * c1

        ky, kz = roll(d, uz_knee)
        fy, fz = roll(d, uz_foot)
        knees = hips + np.stack([ux_knee, ky, kz], axis=1)
        feet = hips + np.stack([ux_foot, fy, fz], axis=1)
        return hips, knees, feet

    def foot_positions_base(self, q: np.ndarray) -> np.ndarray:
        return self.leg_points_base(q)[2]

    def _point_jacobian(self, q_leg: np.ndarray, leg: int, lt: float, ls: float) -> np.ndarray:
        """Analytic d p_base / d q_leg for a point at link lengths (lt, ls) down the chain."""
        q1, q2, q3 = q_leg
        c1, s1 = np.cos(q1), np.sin(q1)
        d = _LEG_SY[leg] * self.hip_offset
        uz = -lt * np.cos(q2) - ls * np.cos(q2 + q3)
        dux_dq2 = -lt * np.cos(q2) - ls * np.cos(q2 + q3)
        duz_dq2 = lt * np.sin(q2) + ls * np.sin(q2 + q3)
        dux_dq3 = -ls * np.cos(q2 + q3)
        duz_dq3 = ls * np.sin(q2 + q3)
        J = np.zeros((3, 3))
        # p = hip + (ux, d*c1 - uz*s1, d*s1 + uz*c1)
        J[:, 0] = [0.0, -d * s1 - uz * c1, d * c1 - uz * s1]
        J[:, 1] = [dux_dq2, -duz_dq2 * s1, duz_dq2 * c1]
        J[:, 2] = [dux_dq3, -duz_dq3 * s1, duz_dq3 * c1]
        return J

    def leg_jacobian(self, q_leg: np.ndarray, leg: int) -> np.ndarray:
        """d foot_base / d q_leg for one leg, (3, 3)."""
        return self._point_jacobian(q_leg, leg, self.thigh, self.shank)

    def knee_jacobian(self, q_leg: np.ndarray, leg: int) -> np.ndarray:
        return self._point_jacobian(q_leg, leg, self.thigh, 0.0)

    def leg_ik(self, p_base: np.ndarray, leg: int) -> Optional[np.ndarray]:
        """Joint angles placing the leg's foot at p_base, or None when out of reach.

        Uses the knee-bend branch of the leg's default pose (front legs bend
        backward, hind legs forward).
        """
        hip = self.hip_mounts()[leg]
        r = np.asarray(p_base, dtype=float) - hip
        d = _LEG_SY[leg] * self.hip_offset
        ryz_sq = r[1] ** 2 + r[2] ** 2
        if ryz_sq < d ** 2:
            return None
        lt, ls = self.thigh, self.shank
        lo = self.joint_lower.reshape(4, 3)[leg]
        hi = self.joint_upper.reshape(4, 3)[leg]
        knee_sign = -1.0 if _LEG_SX[leg] > 0 else 1.0
        # two roll branches place the leg plane; prefer the usual downward one
        for zp in (-np.sqrt(ryz_sq - d ** 2), np.sqrt(ryz_sq - d ** 2)):
            q1 = np.arctan2(r[2], r[1]) - np.arctan2(zp, d)
            q1 = np.arctan2(np.sin(q1), np.cos(q1))
            u, w = -r[0], -zp  # planar 2-link: u = Lt*s2 + Ls*s23, w = Lt*c2 + Ls*c23
            cos_q3 = (u ** 2 + w ** 2 - lt ** 2 - ls ** 2) / (2 * lt * ls)
            if cos_q3 > 1.0 or cos_q3 < -1.0:
                continue
            q3 = knee_sign * np.arccos(np.clip(cos_q3, -1.0, 1.0))
            q2 = np.arctan2(u, w) - np.arctan2(ls * np.sin(q3), lt + ls * np.cos(q3))
            q2 = np.arctan2(np.sin(q2), np.cos(q2))
            q = np.array([q1, q2, q3])
            if np.all(q >= lo - 1e-9) and np.all(q <= hi + 1e-9):
                return q
        return None

    def max_reach(self) -> float:
        return self.thigh + self.shank

    def stance_height(self, contact_stiffness: float = 5000.0) -> float:
        """Equilibrium base height above flat terrain at the default joint pose."""
        feet = self.foot_positions_base(self.default_joint_pos)
        sink = self.base_mass * GRAVITY / (4.0 * contact_stiffness)
        return float(-feet[:, 2].mean() + self.foot_radius - sink)

    def base_inertia(self) -> np.ndarray:
        """Diagonal box inertia of the base in the body frame."""
        m = self.base_mass
        ex, ey, ez = 2 * self.base_half_extents
        return np.diag([m / 12 * (ey**2 + ez**2), m / 12 * (ex**2 + ez**2), m / 12 * (ex**2 + ey**2)])

    def primitives(self) -> list:
        prims = [CollisionPrimitive("cuboid", BASE_BODY, half_extents=self.base_half_extents)]
        for leg in LEG_NAMES:
            prims.append(CollisionPrimitive("sphere", f"{leg}_FOOT", radius=self.foot_radius))
            prims.append(CollisionPrimitive("sphere", f"{leg}_KNEE", radius=self.knee_radius))
            prims.append(CollisionPrimitive("sphere", f"{leg}_HIP", radius=self.hip_radius))
        return prims

    def self_pairs(self):
        """Declared self-collision sphere pairs: foot-foot, cross-leg foot-knee, knee-knee."""
        pairs = []
        # sphere order below matches collision_state: feet 0-3, knees 4-7
        for i in range(4):
            for j in range(i + 1, 4):
                pairs.append((i, j))          # foot-foot
                pairs.append((4 + i, 4 + j))  # knee-knee
        for i in range(4):
            for j in range(4):
                if i != j:
                    pairs.append((i, 4 + j))  # foot vs other leg's knee
        return pairs

    def collision_state(self, state: "RobotState") -> "CollisionState":
        R = quat_to_mat(state.base_quat)
        hips_b, knees_b, feet_b = self.leg_points_base(state.joint_pos)
        qdot = state.joint_vel.reshape(4, 3)
        spheres = []
        centers_b = {"FOOT": feet_b, "KNEE": knees_b, "HIP": hips_b}
        radii = {"FOOT": self.foot_radius, "KNEE": self.knee_radius, "HIP": self.hip_radius}
        world_pts = {}
        for kind in ("FOOT", "KNEE", "HIP"):
            world_pts[kind] = state.base_pos + centers_b[kind] @ R.T
        q_legs = state.joint_pos.reshape(4, 3)
        for kind in ("FOOT", "KNEE", "HIP"):
            for leg in range(4):
                p_w = world_pts[kind][leg]
                if kind == "FOOT":
                    v_joint = R @ (self.leg_jacobian(q_legs[leg], leg) @ qdot[leg])
                elif kind == "KNEE":
                    v_joint = R @ (self.knee_jacobian(q_legs[leg], leg) @ qdot[leg])
                else:
                    v_joint = np.zeros(3)
                v = state.lin_vel + np.cross(state.ang_vel, p_w - state.base_pos) + v_joint
                spheres.append((f"{LEG_NAMES[leg]}_{kind}", p_w, v, radii[kind]))
        return CollisionState(
            spheres=spheres,
            base=(state.base_pos, R, self.base_half_extents, state.lin_vel, state.ang_vel),
            base_id=BASE_BODY,
            self_pairs=self.self_pairs(),
        )

    def to_dict(self) -> dict:
        return {
            "version": MORPHOLOGY_SCHEMA_VERSION,
            "hip_x": self.hip_x,
            "hip_y": self.hip_y,
            "hip_offset": self.hip_offset,
            "thigh": self.thigh,
            "shank": self.shank,
            "base_half_extents": self.base_half_extents.tolist(),
            "base_mass": self.base_mass,
            "foot_radius": self.foot_radius,
            "knee_radius": self.knee_radius,
            "hip_radius": self.hip_radius,
            "default_joint_pos": self.default_joint_pos.tolist(),
            "joint_lower": self.joint_lower.tolist(),
            "joint_upper": self.joint_upper.tolist(),
            "kp": self.kp,
            "kd": self.kd,
            "torque_limit": self.torque_limit,
            "action_bound": self.action_bound,
            "joint_inertia": self.joint_inertia,
            "joint_damping": self.joint_damping,
            "fall_height": self.fall_height,
            "fall_tilt": self.fall_tilt,
        }

    @staticmethod
    def from_dict(d: dict) -> "Morphology":
        d = dict(d)
        version = d.pop("version", MORPHOLOGY_SCHEMA_VERSION)
        if version != MORPHOLOGY_SCHEMA_VERSION:
            raise ValueError(f"unsupported morphology schema version {version!r}")
        return Morphology(**d)

    @staticmethod
    def load(path) -> "Morphology":
        with open(path) as f:
            return Morphology.from_dict(json.load(f))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


@dataclass
class CollisionState:
    spheres: list   # (body_id, center(3,), velocity(3,), radius)
    base: tuple     # (center, R, half_extents, lin_vel, ang_vel)
    base_id: str
    self_pairs: list


@dataclass
class RobotState:
    base_pos: np.ndarray
    base_quat: np.ndarray  # (w, x, y, z), unit
    lin_vel: np.ndarray    # world frame
    ang_vel: np.ndarray    # world frame
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    joint_acc: np.ndarray
    joint_torque: np.ndarray

    def __post_init__(self):
        for name in ("base_pos", "base_quat", "lin_vel", "ang_vel", "joint_pos", "joint_vel", "joint_acc", "joint_torque"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = float(np.linalg.norm(self.base_quat))
        if abs(n - 1.0) > 1e-6:
            raise ValueError("base quaternion must be unit")
        self.base_quat = self.base_quat / n

    @staticmethod
    def at_default(m: Morphology, xy=(0.0, 0.0), yaw: float = 0.0, ground_height: float = 0.0,
                   contact_stiffness: float = 5000.0) -> "RobotState":
        pos = np.array([xy[0], xy[1], ground_height + m.stance_height(contact_stiffness)])
        return RobotState(
            base_pos=pos,
            base_quat=quat_from_yaw(yaw),
            lin_vel=np.zeros(3),
            ang_vel=np.zeros(3),
            joint_pos=m.default_joint_pos.copy(),
            joint_vel=np.zeros(12),
            joint_acc=np.zeros(12),
            joint_torque=np.zeros(12),
        )

    def rotation(self) -> np.ndarray:
        return quat_to_mat(self.base_quat)

    def base_lin_vel_b(self) -> np.ndarray:
        return self.rotation().T @ self.lin_vel

    def base_ang_vel_b(self) -> np.ndarray:
        return self.rotation().T @ self.ang_vel

    def projected_gravity(self) -> np.ndarray:
        """Unit gravity direction expressed in the base frame."""
        return self.rotation().T @ np.array([0.0, 0.0, -1.0])

    def world_to_base(self, p_world: np.ndarray) -> np.ndarray:
        return self.rotation().T @ (np.asarray(p_world) - self.base_pos)

    def base_to_world(self, p_base: np.ndarray) -> np.ndarray:
        return self.base_pos + self.rotation() @ np.asarray(p_base)

    def copy(self) -> "RobotState":
        return RobotState(
            base_pos=self.base_pos.copy(),
            base_quat=self.base_quat.copy(),
            lin_vel=self.lin_vel.copy(),
            ang_vel=self.ang_vel.copy(),
            joint_pos=self.joint_pos.copy(),
            joint_vel=self.joint_vel.copy(),
            joint_acc=self.joint_acc.copy(),
            joint_torque=self.joint_torque.copy(),
        )


def forward_kinematics(m: Morphology, s: RobotState) -> np.ndarray:
    """World-frame foot positions, (4, 3), legs ordered LF, RF, LH, RH."""
    feet_b = m.foot_positions_base(s.joint_pos)
    return s.base_pos + feet_b @ quat_to_mat(s.base_quat).T


def clamp_action(m: Morphology, action: np.ndarray) -> np.ndarray:
    a = np.nan_to_num(np.asarray(action, dtype=float), nan=0.0, posinf=0.0, neginf=0.0)
    return np.clip(a, -m.action_bound, m.action_bound)


def apply_actions_pd(m: Morphology, s: RobotState, action: np.ndarray, gains=None) -> np.ndarray:
    """PD torques toward (defaults + action), clamped to the torque limit."""
    kp, kd = gains if gains is not None else (m.kp, m.kd)
    if kp <= 0 or kd <= 0:
        raise ValueError("PD gains must be positive")
    target = m.default_joint_pos + np.asarray(action, dtype=float)
    tau = kp * (target - s.joint_pos) - kd * s.joint_vel
    return np.clip(tau, -m.torque_limit, m.torque_limit)


def external_forces_wrench(state: RobotState, pushes) -> tuple:
    """Net world force/torque about the base from (point_world, force) disturbance pairs."""
    f = np.zeros(3)
    tq = np.zeros(3)
    for point, force in pushes:
        f = f + force
        tq = tq + np.cross(point - state.base_pos, force)
    return f, tq


def step_dynamics(world: WorldState, torques: np.ndarray, dt: float, pushes=()) -> tuple:
    """One semi-implicit integration step. Returns (world, fell).

    Contact forces are evaluated at the current configuration, applied to the
    floating base, and their reactions accumulated on obstacles before those
    integrate. Reported joint accelerations are the finite difference of joint
    velocities over this step.
    """
    if not (0.0 < dt <= 0.02):
        raise ValueError("dt must be in (0, 0.02]")
    m: Morphology = world.morphology
    s: RobotState = world.robot
    torques = np.clip(np.asarray(torques, dtype=float), -m.torque_limit, m.torque_limit)

    # joint dynamics: PD torque + viscous damping, no contact back-drive
    qdd = (torques - m.joint_damping * s.joint_vel) / m.joint_inertia
    new_qvel = s.joint_vel + dt * qdd
    new_qpos = s.joint_pos + dt * new_qvel
    below = new_qpos < m.joint_lower
    above = new_qpos > m.joint_upper
    new_qpos = np.clip(new_qpos, m.joint_lower, m.joint_upper)
    new_qvel = np.where(below & (new_qvel < 0), 0.0, new_qvel)
    new_qvel = np.where(above & (new_qvel > 0), 0.0, new_qvel)
    s.joint_acc = (new_qvel - s.joint_vel) / dt
    s.joint_vel = new_qvel
    s.joint_pos = new_qpos
    s.joint_torque = torques

    contacts = query_contacts(world, advance_anchors=True)
    world.contacts = contacts

    force = np.array([0.0, 0.0, -m.base_mass * GRAVITY])
    torque = np.zeros(3)
    for c in contacts:
        if c.is_self:
            continue  # internal pair, zero net wrench on the robot
        force = force + c.force
        torque = torque + np.cross(c.point - s.base_pos, c.force)
        if c.is_obstacle:
            ob_id = int(c.other.split(":", 1)[1])
            for ob in world.obstacles:
                if ob.obstacle_id == ob_id:
                    apply_reaction_to_obstacle(ob, c.force, c.point)
                    break
    if pushes:
        f_ext, tq_ext = external_forces_wrench(s, pushes)
        force = force + f_ext
        torque = torque + tq_ext

    R = quat_to_mat(s.base_quat)
    inertia_w = R @ m.base_inertia() @ R.T
    s.lin_vel = s.lin_vel + dt * force / m.base_mass
    s.ang_vel = s.ang_vel + dt * np.linalg.solve(inertia_w, torque)
    s.base_pos = s.base_pos + dt * s.lin_vel
    s.base_quat = quat_integrate(s.base_quat, s.ang_vel, dt)

    from .geometry import step_obstacles

    step_obstacles(world, dt)
    world.time += dt

    terrain_h = world.terrain.height_at(s.base_pos[:2])
    up = quat_to_mat(s.base_quat)[:, 2]
    tilt = float(np.arccos(np.clip(up[2], -1.0, 1.0)))
    fell = bool(s.base_pos[2] - terrain_h < m.fall_height or tilt > m.fall_tilt)
    return world, fell
