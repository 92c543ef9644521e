"""Observation assembly, reward engine, termination, spawn/command sampling,
curriculum staging and per-episode domain randomization.

Reward terms and their weights follow the contact-structured design: a dense
exponential foot-tracking reward, motion and actuation regularizers, a generic
contact-event penalty over all robot bodies, and the obstacle-avoidance (OA)
contact/force penalties per body group. OA penalties on the pedipulating foot
are gated by the contact switch; those on the other feet exempt ground
contacts. Self-collision forces feed only the generic contact-event term.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import Contact, WorldState, raycast_down_batch
from .robot import (
    BASE_BODY,
    FOOT_BODIES,
    HIP_BODIES,
    KNEE_BODIES,
    PEDIP_FOOT,
    Morphology,
    RobotState,
    forward_kinematics,
)

OBS_LAYOUT = (
    ("base_lin_vel", 3),
    ("base_ang_vel", 3),
    ("projected_gravity", 3),
    ("joint_pos", 12),
    ("joint_vel", 12),
    ("foot_command", 3),
    ("prev_actions", 12),
    ("height_scan", 384),
    ("contact_switch", 1),
)
OBS_DIM = sum(n for _, n in OBS_LAYOUT)

HIPKNEE_BODIES = KNEE_BODIES + HIP_BODIES
NON_PEDIP_FEET = tuple(b for b in FOOT_BODIES if b != PEDIP_FOOT)
ALL_BODIES = FOOT_BODIES + KNEE_BODIES + HIP_BODIES + (BASE_BODY,)


def obs_slices() -> dict:
    out = {}
    start = 0
    for name, n in OBS_LAYOUT:
        out[name] = slice(start, start + n)
        start += n
    return out


OBS_SLICES = obs_slices()


@dataclass(frozen=True)
class ObservationNoise:
    """Additive uniform noise half-widths for the proprioceptive observation terms."""

    base_lin_vel: float = 0.1
    base_ang_vel: float = 0.2
    projected_gravity: float = 0.05
    joint_pos: float = 0.01
    joint_vel: float = 1.5


@dataclass
class FootCommand:
    """Target position for the pedipulating foot plus the contact switch.

    frame "world": the target is a fixed world point. frame "base": the target
    is interpreted in the current base frame every step (teleop semantics).
    """

    target: np.ndarray
    switch: int = 0
    frame: str = "base"

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        if self.frame not in ("base", "world"):
            raise ValueError("command frame must be 'base' or 'world'")
        if self.switch not in (0, 1):
            raise ValueError("contact switch must be 0 or 1")

    def target_world(self, state: RobotState) -> np.ndarray:
        return self.target if self.frame == "world" else state.base_to_world(self.target)

    def target_base(self, state: RobotState) -> np.ndarray:
        return state.world_to_base(self.target) if self.frame == "world" else self.target


def assemble_observation(
    state: RobotState,
    command: FootCommand,
    prev_actions: np.ndarray,
    scan: np.ndarray,
    noise_on: bool,
    rng: Optional[np.random.Generator] = None,
    noise: ObservationNoise = ObservationNoise(),
) -> np.ndarray:
    """Stack the observation vector in its fixed layout; length OBS_DIM.

    When noise_on, uniform noise is added to the proprioceptive terms only;
    command, previous actions, scan and switch pass through unchanged (the
    scan carries its own corruption model upstream).
    """
    parts = [
        state.base_lin_vel_b(),
        state.base_ang_vel_b(),
        state.projected_gravity(),
        state.joint_pos,
        state.joint_vel,
        command.target_base(state),
        np.asarray(prev_actions, dtype=float),
        np.asarray(scan, dtype=float),
        np.array([float(command.switch)]),
    ]
    if noise_on:
        if rng is None:
            raise ValueError("noisy observation assembly needs an RNG")
        widths = (noise.base_lin_vel, noise.base_ang_vel, noise.projected_gravity,
                  noise.joint_pos, noise.joint_vel)
        for i, w in enumerate(widths):
            parts[i] = parts[i] + rng.uniform(-w, w, size=parts[i].shape)
    obs = np.concatenate(parts)
    if obs.shape[0] != OBS_DIM:
        raise AssertionError(f"observation length {obs.shape[0]} != {OBS_DIM}")
    return obs


# --- reward engine ------------------------------------------------------------

@dataclass(frozen=True)
class RewardConfig:
    """Weights and thresholds of every reward term (overridable defaults)."""

    command_tracking: float = 14.0
    tracking_scale: float = 0.8
    termination: float = -500.0
    base_force_threshold: float = 1.0
    base_lin_vel_z: float = -2.0
    base_ang_vel_xy: float = -0.05
    torques: float = -2.0e-5
    joint_vel: float = -0.04
    joint_acc: float = -2.5e-7
    action_rate: float = -0.02
    contact_events: float = -2.0
    contact_event_threshold: float = 0.1
    oa_contact_event_pedip: float = -80.0
    oa_contact_event_feet: float = -20.0
    oa_contact_event_hipknee: float = -40.0
    oa_force_pedip: float = -40.0
    oa_force_feet: float = -0.2
    oa_force_hipknee: float = -0.2
    oa_threshold: float = 0.001


REWARD_TERM_NAMES = (
    "command_tracking",
    "termination",
    "base_lin_vel_z",
    "base_ang_vel_xy",
    "torques",
    "joint_vel",
    "joint_acc",
    "action_rate",
    "contact_events",
    "oa_contact_event_pedip",
    "oa_contact_event_feet",
    "oa_contact_event_hipknee",
    "oa_force_pedip",
    "oa_force_feet",
    "oa_force_hipknee",
)


@dataclass
class RewardBreakdown:
    """Weighted (and, for OA terms, ramped) contribution of each term; total is their sum."""

    command_tracking: float = 0.0
    termination: float = 0.0
    base_lin_vel_z: float = 0.0
    base_ang_vel_xy: float = 0.0
    torques: float = 0.0
    joint_vel: float = 0.0
    joint_acc: float = 0.0
    action_rate: float = 0.0
    contact_events: float = 0.0
    oa_contact_event_pedip: float = 0.0
    oa_contact_event_feet: float = 0.0
    oa_contact_event_hipknee: float = 0.0
    oa_force_pedip: float = 0.0
    oa_force_feet: float = 0.0
    oa_force_hipknee: float = 0.0
    total: float = 0.0

    def finalize(self) -> "RewardBreakdown":
        self.total = float(sum(getattr(self, n) for n in REWARD_TERM_NAMES))
        return self

    def to_dict(self) -> dict:
        d = {n: getattr(self, n) for n in REWARD_TERM_NAMES}
        d["total"] = self.total
        return d

    @staticmethod
    def from_dict(d: dict) -> "RewardBreakdown":
        out = RewardBreakdown(**{n: float(d[n]) for n in REWARD_TERM_NAMES})
        out.total = float(d["total"])
        return out


def body_contact_forces(contacts) -> dict:
    """Per-body force sums partitioned by partner kind.

    Returns {body_id: (external, obstacle_only, all_including_self)}, each a
    summed 3-vector. "external" counts ground and obstacle partners.
    """
    out: dict = {}
    for c in contacts:
        ext, obs, tot = out.setdefault(c.body_id, (np.zeros(3), np.zeros(3), np.zeros(3)))
        if not c.is_self:
            ext = ext + c.force
        if c.is_obstacle:
            obs = obs + c.force
        tot = tot + c.force
        out[c.body_id] = (ext, obs, tot)
    return out


def base_external_force(contacts) -> float:
    """Norm of the summed ground+obstacle contact force on the base body."""
    forces = body_contact_forces(contacts)
    if BASE_BODY not in forces:
        return 0.0
    return float(np.linalg.norm(forces[BASE_BODY][0]))


def check_termination(contacts, fell: bool, threshold: float = 1.0) -> bool:
    """Terminate when the external force on the base exceeds the threshold, or the robot fell."""
    return bool(fell or base_external_force(contacts) > threshold)


def compute_reward(
    state: RobotState,
    contacts,
    command: FootCommand,
    curriculum: "CurriculumState",
    fell: bool,
    *,
    morphology: Morphology,
    action: np.ndarray,
    prev_action: np.ndarray,
    dt: float,
    cfg: RewardConfig = RewardConfig(),
) -> RewardBreakdown:
    """Evaluate every reward term for one control step."""
    rb = RewardBreakdown()
    ramp = curriculum.oa_ramp
    switch_gate = 0.0 if command.switch == 1 else 1.0

    foot_w = forward_kinematics(morphology, state)[morphology.pedip_leg]
    err = float(np.linalg.norm(command.target_world(state) - foot_w))
    rb.command_tracking = cfg.command_tracking * float(np.exp(-err / cfg.tracking_scale))

    forces = body_contact_forces(contacts)

    def ext(body):
        return float(np.linalg.norm(forces[body][0])) if body in forces else 0.0

    def obstacle(body):
        return float(np.linalg.norm(forces[body][1])) if body in forces else 0.0

    def total(body):
        return float(np.linalg.norm(forces[body][2])) if body in forces else 0.0

    if fell or ext(BASE_BODY) > cfg.base_force_threshold:
        rb.termination = cfg.termination

    vb = state.base_lin_vel_b()
    wb = state.base_ang_vel_b()
    rb.base_lin_vel_z = cfg.base_lin_vel_z * float(vb[2] ** 2)
    rb.base_ang_vel_xy = cfg.base_ang_vel_xy * float(wb[0] ** 2 + wb[1] ** 2)
    rb.torques = cfg.torques * float(np.dot(state.joint_torque, state.joint_torque))
    rb.joint_vel = cfg.joint_vel * float(np.dot(state.joint_vel, state.joint_vel))
    rb.joint_acc = cfg.joint_acc * float(np.dot(state.joint_acc, state.joint_acc))
    rate = (np.asarray(action, dtype=float) - np.asarray(prev_action, dtype=float)) / dt
    rb.action_rate = cfg.action_rate * float(np.dot(rate, rate))

    rb.contact_events = cfg.contact_events * float(
        sum(1 for b in ALL_BODIES if total(b) > cfg.contact_event_threshold)
    )

    pedip_f = ext(PEDIP_FOOT)
    rb.oa_contact_event_pedip = ramp * switch_gate * cfg.oa_contact_event_pedip * float(pedip_f > cfg.oa_threshold)
    rb.oa_force_pedip = ramp * switch_gate * cfg.oa_force_pedip * pedip_f
    rb.oa_contact_event_feet = ramp * cfg.oa_contact_event_feet * float(
        sum(1 for b in NON_PEDIP_FEET if obstacle(b) > cfg.oa_threshold)
    )
    rb.oa_force_feet = ramp * cfg.oa_force_feet * float(sum(obstacle(b) for b in NON_PEDIP_FEET))
    rb.oa_contact_event_hipknee = ramp * cfg.oa_contact_event_hipknee * float(
        sum(1 for b in HIPKNEE_BODIES if ext(b) > cfg.oa_threshold)
    )
    rb.oa_force_hipknee = ramp * cfg.oa_force_hipknee * float(sum(ext(b) for b in HIPKNEE_BODIES))
    return rb.finalize()


# --- curriculum ----------------------------------------------------------------

@dataclass(frozen=True)
class CurriculumConfig:
    initial_scale: float = 0.2
    growth: float = 0.1            # command-space scale increment per good window
    error_threshold: float = 0.1   # m, mean tracking error gate
    ramp_steps: int = 5000         # OA weight ramp duration after entering stage 2
    stage2_duration: int = 20000   # steps before stage 2 -> 3


@dataclass(frozen=True)
class CurriculumState:
    """Stage, accumulated step counts, and the stage-1 command-space scale."""

    stage: int = 1
    step_count: int = 0
    command_scale: float = 0.2
    steps_since_stage2: int = 0
    ramp_steps: int = 5000

    def __post_init__(self):
        if self.stage not in (1, 2, 3):
            raise ValueError("stage must be 1, 2 or 3")

    @property
    def oa_ramp(self) -> float:
        if self.stage == 1:
            return 0.0
        return min(self.steps_since_stage2 / self.ramp_steps, 1.0)

    @staticmethod
    def for_stage(stage: int, cfg: CurriculumConfig = CurriculumConfig()) -> "CurriculumState":
        """Entry state for a given stage; stages 2/3 start with a converged command space."""
        scale = cfg.initial_scale if stage == 1 else 1.0
        since = 0 if stage < 3 else cfg.ramp_steps  # stage 3 implies a completed ramp
        return CurriculumState(stage=stage, command_scale=scale, steps_since_stage2=since,
                               ramp_steps=cfg.ramp_steps)


@dataclass(frozen=True)
class EpisodeStats:
    """Aggregated rollout window statistics driving curriculum updates."""

    mean_tracking_error: float
    steps: int


def update_curriculum(state: CurriculumState, stats: EpisodeStats,
                      cfg: CurriculumConfig = CurriculumConfig()) -> CurriculumState:
    """Advance the curriculum by one reporting window."""
    step_count = state.step_count + stats.steps
    stage = state.stage
    scale = state.command_scale
    since2 = state.steps_since_stage2
    if stage == 1:
        if stats.mean_tracking_error < cfg.error_threshold:
            scale = min(1.0, scale + cfg.growth)
            if scale >= 1.0:
                stage = 2
                since2 = 0
    else:
        since2 = since2 + stats.steps
        if stage == 2 and since2 >= cfg.stage2_duration:
            stage = 3
    return replace(state, stage=stage, step_count=step_count, command_scale=scale,
                   steps_since_stage2=since2)


# --- command sampling -----------------------------------------------------------

@dataclass(frozen=True)
class CommandSpace:
    """Axis-aligned box of foot targets. frame "spawn" anchors the box to the
    spawn base pose (converted to a fixed world point at sampling time)."""

    lo: tuple
    hi: tuple
    frame: str = "spawn"  # "spawn" | "world"

    def __post_init__(self):
        if not all(l <= h for l, h in zip(self.lo, self.hi)):
            raise ValueError("command space bounds need lo <= hi")

    def scaled(self, factor: float) -> "CommandSpace":
        """Shrink the box about its center; factor 0 degenerates to the center point."""
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        c = (lo + hi) / 2
        half = (hi - lo) / 2 * factor
        return CommandSpace(tuple(c - half), tuple(c + half), self.frame)


DEFAULT_STAGE1_BOX = CommandSpace(lo=(-0.3, -0.9, 0.1), hi=(0.9, 0.5, 1.1), frame="spawn")


def sample_command(space: CommandSpace, curriculum: CurriculumState, rng: np.random.Generator,
                   p_switch: float = 0.5, spawn_state: Optional[RobotState] = None) -> FootCommand:
    """Uniform draw from the stage-appropriate command space.

    Stage 1 scales the box by the curriculum factor. Spawn-anchored boxes are
    resolved against the spawn base pose into a fixed world-frame target.
    """
    box = space.scaled(curriculum.command_scale) if curriculum.stage == 1 else space
    target = rng.uniform(np.asarray(box.lo, dtype=float), np.asarray(box.hi, dtype=float))
    switch = int(rng.uniform() < p_switch)
    if box.frame == "spawn":
        if spawn_state is None:
            raise ValueError("spawn-anchored command space needs the spawn state")
        return FootCommand(target=spawn_state.base_to_world(target), switch=switch, frame="world")
    return FootCommand(target=target, switch=switch, frame="world")


# --- spawn sampling ---------------------------------------------------------------

class SpawnExhausted(RuntimeError):
    """No sufficiently flat spawn patch found; the scenario is over-constrained."""


@dataclass(frozen=True)
class SpawnConfig:
    rect_length: float = 1.1
    rect_width: float = 0.8
    perimeter_spacing: float = 0.05
    interior_spacing: float = 0.1   # interior samples guarantee no obstacle hides inside the outline
    flatness_tol: float = 0.1
    max_attempts: int = 100


def _patch_points_local(cfg: SpawnConfig) -> np.ndarray:
    hx, hy = cfg.rect_length / 2, cfg.rect_width / 2
    xs = np.arange(-hx, hx + 1e-9, cfg.perimeter_spacing)
    ys = np.arange(-hy, hy + 1e-9, cfg.perimeter_spacing)
    pts = [np.stack([xs, np.full_like(xs, -hy)], axis=1),
           np.stack([xs, np.full_like(xs, hy)], axis=1),
           np.stack([np.full_like(ys, -hx), ys], axis=1),
           np.stack([np.full_like(ys, hx), ys], axis=1)]
    xi = np.arange(-hx + cfg.interior_spacing, hx - 1e-9, cfg.interior_spacing)
    yi = np.arange(-hy + cfg.interior_spacing, hy - 1e-9, cfg.interior_spacing)
    gx, gy = np.meshgrid(xi, yi, indexing="ij")
    pts.append(np.stack([gx.ravel(), gy.ravel()], axis=1))
    return np.concatenate(pts, axis=0)


_PATCH_CACHE: dict = {}


def spawn_patch_heights(world: WorldState, xy, yaw: float, cfg: SpawnConfig) -> np.ndarray:
    key = (cfg.rect_length, cfg.rect_width, cfg.perimeter_spacing, cfg.interior_spacing)
    if key not in _PATCH_CACHE:
        _PATCH_CACHE[key] = _patch_points_local(cfg)
    local = _PATCH_CACHE[key]
    c, s = np.cos(yaw), np.sin(yaw)
    pts = np.stack(
        [xy[0] + c * local[:, 0] - s * local[:, 1], xy[1] + s * local[:, 0] + c * local[:, 1]], axis=1
    )
    return raycast_down_batch(world, pts)


def spawn_patch_is_flat(world: WorldState, xy, yaw: float, cfg: SpawnConfig) -> bool:
    """Patch validity: height spread within tolerance AND the patch lies at
    terrain level (a perfectly flat obstacle top is not a spawnable patch)."""
    h = spawn_patch_heights(world, xy, yaw, cfg)
    ground = float(world.terrain.height_at(np.asarray(xy, dtype=float)))
    return float(h.max() - h.min()) <= cfg.flatness_tol and float(h.max() - ground) <= cfg.flatness_tol


@dataclass(frozen=True)
class SpawnSpace:
    """Union of axis-aligned world rectangles (x_lo, x_hi, y_lo, y_hi) with a yaw range."""

    rects: tuple
    yaw_range: tuple = (-np.pi, np.pi)

    def sample_pose(self, rng: np.random.Generator):
        areas = np.array([(r[1] - r[0]) * (r[3] - r[2]) for r in self.rects])
        total = areas.sum()
        idx = int(rng.choice(len(self.rects), p=areas / total)) if len(self.rects) > 1 else 0
        r = self.rects[idx]
        xy = np.array([rng.uniform(r[0], r[1]), rng.uniform(r[2], r[3])])
        yaw = float(rng.uniform(*self.yaw_range))
        return xy, yaw


def sample_spawn(world: WorldState, space: SpawnSpace, rng: np.random.Generator,
                 cfg: SpawnConfig = SpawnConfig()):
    """Rejection-sample a spawn pose whose footprint patch is sufficiently flat.

    Returns (xy, yaw). Raises SpawnExhausted after max_attempts rejections.
    """
    for _ in range(cfg.max_attempts):
        xy, yaw = space.sample_pose(rng)
        if spawn_patch_is_flat(world, xy, yaw, cfg):
            return xy, yaw
    raise SpawnExhausted(f"no flat {cfg.rect_length}x{cfg.rect_width} patch in {cfg.max_attempts} attempts")


# --- per-episode randomization -------------------------------------------------

@dataclass(frozen=True)
class RandomizationConfig:
    """Obstacle size/mass ranges plus friction, mass and disturbance ranges."""

    obstacle1_width: tuple = (0.6, 1.0)
    obstacle1_length: float = 0.6
    obstacle23_width: float = 0.6
    obstacle23_length: float = 0.6
    obstacle_height: tuple = (0.5, 1.2)
    obstacle_mass: tuple = (10.0, 30.0)
    robot_friction: tuple = (0.4, 1.0)
    obstacle_friction: tuple = (0.4, 0.6)
    base_mass_offset: tuple = (-5.0, 5.0)
    push_interval: tuple = (5.0, 10.0)
    push_duration: float = 0.5
    base_push_force: tuple = (0.0, 50.0)
    foot_push_force: tuple = (0.0, 20.0)
    terrain_roughness: tuple = (-0.05, 0.05)


@dataclass
class RandomizationDraw:
    """One episode's randomization: obstacle dims (length, width, height) and masses
    for obstacles 1..3, contact frictions, base-mass offset, push schedule, terrain seed."""

    obstacle_dims: np.ndarray   # (3, 3)
    obstacle_masses: np.ndarray # (3,)
    robot_friction: float
    obstacle_friction: float
    base_mass_offset: float
    push_interval: float
    base_push_force: float
    foot_push_force: float
    terrain_seed: int


def draw_randomization(cfg: RandomizationConfig, rng: np.random.Generator) -> RandomizationDraw:
    dims = np.zeros((3, 3))
    dims[0] = [cfg.obstacle1_length, rng.uniform(*cfg.obstacle1_width), rng.uniform(*cfg.obstacle_height)]
    for k in (1, 2):
        dims[k] = [cfg.obstacle23_length, cfg.obstacle23_width, rng.uniform(*cfg.obstacle_height)]
    masses = rng.uniform(cfg.obstacle_mass[0], cfg.obstacle_mass[1], size=3)
    return RandomizationDraw(
        obstacle_dims=dims,
        obstacle_masses=masses,
        robot_friction=float(rng.uniform(*cfg.robot_friction)),
        obstacle_friction=float(rng.uniform(*cfg.obstacle_friction)),
        base_mass_offset=float(rng.uniform(*cfg.base_mass_offset)),
        push_interval=float(rng.uniform(*cfg.push_interval)),
        base_push_force=float(rng.uniform(*cfg.base_push_force)),
        foot_push_force=float(rng.uniform(*cfg.foot_push_force)),
        terrain_seed=int(rng.integers(0, 2**63 - 1)),
    )
