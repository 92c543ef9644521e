"""Episode orchestration: the training environment, its vectorized wrapper, and
the lean simulation session used by the eval harness and teleoperation.

A control step runs several physics substeps with PD torques recomputed each
substep, then senses, rewards and checks termination. All randomness flows
through explicit per-env generators, so identical seeds give bit-identical
episodes.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import ContactParams, Heightfield, WorldState, query_contacts
from .mdp import (
    DEFAULT_STAGE1_BOX,
    CommandSpace,
    CurriculumConfig,
    CurriculumState,
    FootCommand,
    ObservationNoise,
    RandomizationConfig,
    RandomizationDraw,
    RewardBreakdown,
    RewardConfig,
    SpawnConfig,
    SpawnSpace,
    assemble_observation,
    check_termination,
    compute_reward,
    draw_randomization,
    sample_command,
    sample_spawn,
)
from .perception import HeightScanSpec, ScanNoiseSpec, corrupt_scan, sample_height_scan
from .robot import Morphology, RobotState, apply_actions_pd, clamp_action, forward_kinematics, step_dynamics
from .scenarios import Scene, default_scenarios, instantiate_scenario

STAGE1_SPAWN = SpawnSpace(rects=((-2.0, 2.0, -2.0, 2.0),))


@dataclass(frozen=True)
class EnvConfig:
    stage: int = 1
    scenario_id: Optional[str] = None   # fixed per env for stages 2/3; None = free space
    control_dt: float = 0.02
    substeps: int = 4
    episode_seconds: float = 10.0
    p_switch: float = 0.5
    obs_noise_on: bool = True
    pushes_enabled: bool = True
    stage1_box: CommandSpace = DEFAULT_STAGE1_BOX
    morphology: Morphology = field(default_factory=Morphology)
    reward: RewardConfig = RewardConfig()
    obs_noise: ObservationNoise = ObservationNoise()
    scan_spec: HeightScanSpec = HeightScanSpec()
    scan_noise: ScanNoiseSpec = ScanNoiseSpec()
    spawn: SpawnConfig = SpawnConfig()
    randomization: RandomizationConfig = RandomizationConfig()
    curriculum: CurriculumConfig = CurriculumConfig()

    @property
    def physics_dt(self) -> float:
        return self.control_dt / self.substeps

    @property
    def max_episode_steps(self) -> int:
        return int(round(self.episode_seconds / self.control_dt))


@dataclass
class EpisodeConfig:
    """Everything that determined one episode: seeds, stage, curriculum state
    and the randomization draws."""

    seed: int
    stage: int
    scenario_id: Optional[str]
    curriculum: CurriculumState
    draw: RandomizationDraw
    spawn_xy: np.ndarray
    spawn_yaw: float
    command: FootCommand
    scan_drift: float


class PedipulationEnv:
    """One robot, one episode at a time; resets draw a fresh world and command."""

    def __init__(self, cfg: EnvConfig, seed: int, curriculum: Optional[CurriculumState] = None):
        self.cfg = cfg
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.curriculum = curriculum or CurriculumState.for_stage(cfg.stage, cfg.curriculum)
        self._scenarios = default_scenarios()
        self.world: Optional[WorldState] = None
        self.command: Optional[FootCommand] = None
        self.episode: Optional[EpisodeConfig] = None
        self.prev_action = np.zeros(12)
        self.action = np.zeros(12)
        self.step_count = 0
        self.episode_tracking_errors: list = []
        self._push_until = -1.0
        self._next_push = np.inf
        self._push_force = np.zeros(3)
        self._foot_push = np.zeros(3)

    # -- episode setup ---------------------------------------------------------

    def reset(self) -> np.ndarray:
        cfg = self.cfg
        draw = draw_randomization(cfg.randomization, self.rng)
        morph = dataclasses.replace(cfg.morphology, base_mass=cfg.morphology.base_mass + draw.base_mass_offset)

        if cfg.stage >= 2 and cfg.scenario_id is not None:
            scene = instantiate_scenario(self._scenarios[cfg.scenario_id], draw, self.rng,
                                         cfg.randomization, base_width=2 * morph.base_half_extents[1])
            world, spawn_space, command_space = scene.world, scene.spawn_space, scene.command_space
        else:
            terrain = Heightfield.rough(
                20.0, 0.05, cfg.randomization.terrain_roughness[0], cfg.randomization.terrain_roughness[1],
                np.random.default_rng(draw.terrain_seed),
            )
            world = WorldState(terrain=terrain, obstacles=[],
                               contact_params=ContactParams(friction_robot=draw.robot_friction,
                                                            obstacle_ground_friction=draw.obstacle_friction))
            spawn_space, command_space = STAGE1_SPAWN, cfg.stage1_box

        spawn_xy, spawn_yaw = sample_spawn(world, spawn_space, self.rng, cfg.spawn)
        ground = float(world.terrain.height_at(np.asarray(spawn_xy)))
        robot = RobotState.at_default(morph, xy=spawn_xy, yaw=spawn_yaw, ground_height=ground,
                                      contact_stiffness=world.contact_params.stiffness)
        world.robot = robot
        world.morphology = morph
        self.world = world

        self.command = sample_command(command_space, self.curriculum, self.rng,
                                      p_switch=cfg.p_switch, spawn_state=robot)
        drift = cfg.scan_noise.draw_drift(self.rng) if cfg.stage >= 3 else 0.0
        self.episode = EpisodeConfig(
            seed=self.seed, stage=cfg.stage, scenario_id=cfg.scenario_id, curriculum=self.curriculum,
            draw=draw, spawn_xy=np.asarray(spawn_xy), spawn_yaw=spawn_yaw, command=self.command,
            scan_drift=drift,
        )
        self.prev_action = np.zeros(12)
        self.action = np.zeros(12)
        self.step_count = 0
        self.episode_tracking_errors = []
        self._schedule_push(first=True)
        return self._observe()

    def _schedule_push(self, first: bool = False) -> None:
        if not self.cfg.pushes_enabled:
            self._next_push = np.inf
            return
        interval = self.episode.draw.push_interval
        base = self.world.time if not first else 0.0
        self._next_push = base + interval
        self._push_until = -1.0

    def _active_pushes(self):
        t = self.world.time
        if t >= self._next_push and self._push_until < t:
            # new push window: fixed direction and magnitude for its duration
            d = self.episode.draw
            dir_b = self.rng.normal(size=3)
            dir_b /= np.linalg.norm(dir_b)
            dir_f = self.rng.normal(size=3)
            dir_f /= np.linalg.norm(dir_f)
            self._push_force = d.base_push_force * dir_b
            self._foot_push = d.foot_push_force * dir_f
            self._push_until = t + self.cfg.randomization.push_duration
            self._next_push = t + d.push_interval
        if t < self._push_until:
            foot = forward_kinematics(self.world.morphology, self.world.robot)[self.world.morphology.pedip_leg]
            return [(self.world.robot.base_pos, self._push_force), (foot, self._foot_push)]
        return []

    # -- sensing ----------------------------------------------------------------

    def scan(self) -> np.ndarray:
        s = sample_height_scan(self.world, self.world.robot.base_pos, self.world.robot.base_quat,
                               self.cfg.scan_spec)
        if self.cfg.stage >= 3:
            s = corrupt_scan(s, self.cfg.scan_noise, self.rng, drift=self.episode.scan_drift)
        return s

    def _observe(self) -> np.ndarray:
        return assemble_observation(
            self.world.robot, self.command, self.prev_action, self.scan(),
            noise_on=self.cfg.obs_noise_on, rng=self.rng, noise=self.cfg.obs_noise,
        )

    def tracking_error(self) -> float:
        foot = forward_kinematics(self.world.morphology, self.world.robot)[self.world.morphology.pedip_leg]
        return float(np.linalg.norm(self.command.target_world(self.world.robot) - foot))

    # -- stepping ----------------------------------------------------------------

    def step(self, action: np.ndarray):
        """Advance one control step. Returns (obs, reward, done, info); on done
        the returned observation comes from the already-reset next episode."""
        cfg = self.cfg
        morph = self.world.morphology
        self.prev_action = self.action
        self.action = clamp_action(morph, action)
        fell = False
        for _ in range(cfg.substeps):
            tau = apply_actions_pd(morph, self.world.robot, self.action)
            _, sub_fell = step_dynamics(self.world, tau, cfg.physics_dt, pushes=self._active_pushes())
            fell = fell or sub_fell
        contacts = self.world.contacts
        breakdown = compute_reward(
            self.world.robot, contacts, self.command, self.curriculum, fell,
            morphology=morph, action=self.action, prev_action=self.prev_action,
            dt=cfg.control_dt, cfg=cfg.reward,
        )
        terminated = check_termination(contacts, fell, cfg.reward.base_force_threshold)
        self.step_count += 1
        timeout = self.step_count >= cfg.max_episode_steps
        done = terminated or timeout
        err = self.tracking_error()
        self.episode_tracking_errors.append(err)
        info = {
            "breakdown": breakdown,
            "tracking_error": err,
            "terminated": terminated,
            "timeout": timeout,
        }
        if done:
            info["episode_mean_tracking_error"] = float(np.mean(self.episode_tracking_errors))
            obs = self.reset()
        else:
            obs = self._observe()
        return obs, breakdown.total, done, info


class VecEnv:
    """Fixed set of environments stepped synchronously (sequential, deterministic)."""

    def __init__(self, envs: list):
        self.envs = envs

    def __len__(self):
        return len(self.envs)

    def reset(self) -> np.ndarray:
        return np.stack([e.reset() for e in self.envs])

    def step(self, actions: np.ndarray):
        obs, rewards, dones, infos = [], [], [], []
        for env, a in zip(self.envs, actions):
            o, r, d, i = env.step(a)
            obs.append(o)
            rewards.append(r)
            dones.append(d)
            infos.append(i)
        return np.stack(obs), np.array(rewards), np.array(dones, dtype=bool), infos

    def set_curriculum(self, curriculum: CurriculumState) -> None:
        for e in self.envs:
            e.curriculum = curriculum


# --- lean session for eval and teleop -------------------------------------------

@dataclass
class StepRecord:
    time: float
    base_pos: np.ndarray
    base_quat: np.ndarray
    joint_pos: np.ndarray
    foot_positions: np.ndarray
    command: np.ndarray        # world-frame target
    switch: int
    breakdown: RewardBreakdown
    contacts: list
    tracking_error: float
    fell: bool
    # full dynamic state so a log replays exactly through the reward engine
    lin_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ang_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    joint_vel: np.ndarray = field(default_factory=lambda: np.zeros(12))
    joint_acc: np.ndarray = field(default_factory=lambda: np.zeros(12))
    joint_torque: np.ndarray = field(default_factory=lambda: np.zeros(12))
    action: np.ndarray = field(default_factory=lambda: np.zeros(12))
    prev_action: np.ndarray = field(default_factory=lambda: np.zeros(12))


class SimSession:
    """Deterministic single-robot loop over a fixed scene with a settable command.

    Used by the eval harness (commands from a trajectory) and the teleop
    service (commands from an operator). No episode randomization, OA reward
    ramp fixed at 1.
    """

    def __init__(self, scene: Scene, morphology: Optional[Morphology] = None,
                 spawn_xy=(0.0, 0.0), spawn_yaw: float = 0.0,
                 control_dt: float = 0.02, substeps: int = 4,
                 reward_cfg: RewardConfig = RewardConfig(),
                 scan_spec: HeightScanSpec = HeightScanSpec()):
        self.scene = scene
        self.morphology = morphology or Morphology()
        self.control_dt = control_dt
        self.substeps = substeps
        self.reward_cfg = reward_cfg
        self.scan_spec = scan_spec
        self.spawn_xy = np.asarray(spawn_xy, dtype=float)
        self.spawn_yaw = float(spawn_yaw)
        self.curriculum = CurriculumState.for_stage(3)
        self.world: Optional[WorldState] = None
        self.command: Optional[FootCommand] = None
        self.prev_action = np.zeros(12)
        self.reset()

    def reset(self) -> None:
        import copy

        self.world = copy.deepcopy(self.scene.world)
        ground = float(self.world.terrain.height_at(self.spawn_xy))
        self.world.robot = RobotState.at_default(
            self.morphology, xy=self.spawn_xy, yaw=self.spawn_yaw, ground_height=ground,
            contact_stiffness=self.world.contact_params.stiffness,
        )
        self.world.morphology = self.morphology
        self.world.time = 0.0
        foot = forward_kinematics(self.morphology, self.world.robot)[self.morphology.pedip_leg]
        self.command = FootCommand(target=foot.copy(), switch=0, frame="world")
        self.prev_action = np.zeros(12)

    @property
    def time(self) -> float:
        return self.world.time

    def set_command(self, command: FootCommand) -> None:
        self.command = command

    def scan(self) -> np.ndarray:
        return sample_height_scan(self.world, self.world.robot.base_pos, self.world.robot.base_quat,
                                  self.scan_spec)

    def foot_positions(self) -> np.ndarray:
        return forward_kinematics(self.morphology, self.world.robot)

    def tracking_error(self) -> float:
        foot = self.foot_positions()[self.morphology.pedip_leg]
        return float(np.linalg.norm(self.command.target_world(self.world.robot) - foot))

    def step(self, action: np.ndarray) -> StepRecord:
        action = clamp_action(self.morphology, action)
        prev_action = self.prev_action
        fell = False
        for _ in range(self.substeps):
            tau = apply_actions_pd(self.morphology, self.world.robot, action)
            _, sub_fell = step_dynamics(self.world, tau, self.control_dt / self.substeps)
            fell = fell or sub_fell
        contacts = self.world.contacts
        breakdown = compute_reward(
            self.world.robot, contacts, self.command, self.curriculum, fell,
            morphology=self.morphology, action=action, prev_action=prev_action,
            dt=self.control_dt, cfg=self.reward_cfg,
        )
        self.prev_action = action
        feet = self.foot_positions()
        robot = self.world.robot
        rec = StepRecord(
            time=self.time,
            base_pos=robot.base_pos.copy(),
            base_quat=robot.base_quat.copy(),
            joint_pos=robot.joint_pos.copy(),
            foot_positions=feet,
            command=self.command.target_world(robot).copy(),
            switch=self.command.switch,
            breakdown=breakdown,
            contacts=contacts,
            tracking_error=float(np.linalg.norm(self.command.target_world(robot)
                                                - feet[self.morphology.pedip_leg])),
            fell=fell,
            lin_vel=robot.lin_vel.copy(),
            ang_vel=robot.ang_vel.copy(),
            joint_vel=robot.joint_vel.copy(),
            joint_acc=robot.joint_acc.copy(),
            joint_torque=robot.joint_torque.copy(),
            action=action.copy(),
            prev_action=np.asarray(prev_action).copy(),
        )
        return rec
