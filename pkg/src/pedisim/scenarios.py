"""Declarative library of the five training scenarios and the evaluation scenes.

Training scenarios (ids C..G) bundle obstacle templates, a spawn space and a
command space; instantiation applies the per-episode randomization draw.
Nominal offsets and command-space extents are reconstructions with stated
defaults, config-exposed, not calibrated data.

Eval scenes are fully deterministic: a fixed world plus a dense command
trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import ContactParams, Cuboid, Heightfield, ScriptedMotion, WorldState
from .mdp import CommandSpace, FootCommand, RandomizationConfig, RandomizationDraw, SpawnSpace

SCENARIO_IDS = ("C", "D", "E", "F", "G")

TERRAIN_EXTENT = 20.0
TERRAIN_CELL = 0.05


class ConstraintViolation(ValueError):
    """Scenario layout cannot satisfy its gap constraints (configuration error)."""


@dataclass(frozen=True)
class ScenarioSpec:
    """One training scenario: which obstacles, how they are laid out, where the
    robot spawns and where commands are drawn from.

    kind "single": one obstacle at the anchor. kind "pair_gap": two obstacles
    separated along the anchor's y by a drawn gap. kind "row_two_gaps": a
    three-obstacle row with two drawn gaps. Anchor jitter moves (and yaw-jitter
    rotates) the whole layout so gap widths stay exact.
    """

    scenario_id: str
    kind: str
    obstacle_indices: tuple
    anchor: tuple = (1.0, 0.0)
    anchor_jitter: tuple = (0.3, 0.4)
    yaw_jitter: float = np.pi
    gap_range: Optional[tuple] = None
    min_gap: Optional[float] = None   # validated lower bound (e.g. robot width + margin)
    max_gap: Optional[float] = None   # validated upper bound (e.g. base width)
    spawn_space: SpawnSpace = SpawnSpace(rects=((-1.2, 0.0, -1.0, 1.0),))
    command_space: CommandSpace = CommandSpace((-0.5, -1.0, 0.1), (1.0, 1.0, 1.1), frame="world")

    def __post_init__(self):
        if self.kind not in ("single", "pair_gap", "row_two_gaps"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")


def default_scenarios() -> dict:
    """The five training scenario specs keyed by id."""
    return {
        # close-range single obstacle
        "C": ScenarioSpec(
            scenario_id="C",
            kind="single",
            obstacle_indices=(0,),
            anchor=(1.0, 0.0),
            anchor_jitter=(0.25, 0.4),
            yaw_jitter=np.pi,
            spawn_space=SpawnSpace(rects=((-1.4, -0.1, -1.1, 1.1),)),
            command_space=CommandSpace((-0.2, -1.2, 0.1), (1.8, 1.2, 1.1), frame="world"),
        ),
        # far-range single obstacle
        "D": ScenarioSpec(
            scenario_id="D",
            kind="single",
            obstacle_indices=(0,),
            anchor=(2.0, 0.0),
            anchor_jitter=(0.3, 0.5),
            yaw_jitter=np.pi,
            spawn_space=SpawnSpace(rects=((-1.4, 0.4, -1.3, 1.3),)),
            command_space=CommandSpace((0.8, -1.4, 0.1), (3.0, 1.4, 1.1), frame="world"),
        ),
        # two obstacles, wide enough to spawn in between
        "E": ScenarioSpec(
            scenario_id="E",
            kind="pair_gap",
            obstacle_indices=(1, 2),
            anchor=(0.0, 0.0),
            anchor_jitter=(0.2, 0.15),
            yaw_jitter=0.4,
            gap_range=(1.3, 1.6),
            min_gap=1.1,  # robot spawn-rectangle width 0.8 plus margin
            spawn_space=SpawnSpace(rects=((-1.1, 1.1, -1.3, 1.3),)),
            command_space=CommandSpace((-1.4, -1.1, 0.1), (1.4, 1.1, 1.1), frame="world"),
        ),
        # tight gap, foot-reach only
        "F": ScenarioSpec(
            scenario_id="F",
            kind="pair_gap",
            obstacle_indices=(1, 2),
            anchor=(0.6, 0.0),
            anchor_jitter=(0.2, 0.2),
            yaw_jitter=0.4,
            gap_range=(0.22, 0.38),
            max_gap=0.40,  # must never admit the base cuboid
            spawn_space=SpawnSpace(rects=((-1.6, -0.5, -0.9, 0.9),)),
            command_space=CommandSpace((-0.4, -0.9, 0.1), (1.2, 0.9, 0.9), frame="world"),
        ),
        # three obstacles, two reach-through gaps, room to turn behind
        "G": ScenarioSpec(
            scenario_id="G",
            kind="row_two_gaps",
            obstacle_indices=(0, 1, 2),
            anchor=(1.1, 0.0),
            anchor_jitter=(0.2, 0.2),
            yaw_jitter=0.3,
            gap_range=(0.3, 0.45),
            spawn_space=SpawnSpace(rects=((-1.7, -0.3, -1.0, 1.0),)),
            command_space=CommandSpace((-2.6, -1.3, 0.1), (1.7, 1.3, 1.1), frame="world"),
        ),
    }


@dataclass
class Scene:
    """An instantiated world bundled with its sampling spaces or trajectory."""

    name: str
    world: WorldState
    spawn_space: Optional[SpawnSpace] = None
    command_space: Optional[CommandSpace] = None
    trajectory: Optional["CommandTrajectory"] = None
    gaps: tuple = ()


def _rot2(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s], [s, c]])


def _shift_command_space(space: CommandSpace, delta_xy) -> CommandSpace:
    lo = (space.lo[0] + delta_xy[0], space.lo[1] + delta_xy[1], space.lo[2])
    hi = (space.hi[0] + delta_xy[0], space.hi[1] + delta_xy[1], space.hi[2])
    return CommandSpace(lo, hi, space.frame)


def _shift_spawn_space(space: SpawnSpace, delta_xy) -> SpawnSpace:
    rects = tuple(
        (r[0] + delta_xy[0], r[1] + delta_xy[0], r[2] + delta_xy[1], r[3] + delta_xy[1])
        for r in space.rects
    )
    return SpawnSpace(rects=rects, yaw_range=space.yaw_range)


def face_gap_y(a: Cuboid, b: Cuboid) -> float:
    """Face-to-face clearance of two equal-yaw cuboids separated along their local y."""
    R = _rot2(a.yaw)
    d = R.T @ (b.position[:2] - a.position[:2])
    return float(abs(d[1]) - a.half_extents[1] - b.half_extents[1])


def instantiate_scenario(
    spec: ScenarioSpec,
    draw: RandomizationDraw,
    rng: np.random.Generator,
    rand_cfg: RandomizationConfig = RandomizationConfig(),
    base_width: float = 0.40,
) -> Scene:
    """Build a world for one episode of a training scenario.

    Obstacle dims come from the randomization draw; placement jitter, layout
    yaw and gap widths come from rng. Deterministic given (draw, rng state).
    """
    terrain = Heightfield.rough(
        TERRAIN_EXTENT, TERRAIN_CELL,
        rand_cfg.terrain_roughness[0], rand_cfg.terrain_roughness[1],
        np.random.default_rng(draw.terrain_seed),
    )
    anchor = np.asarray(spec.anchor, dtype=float) + rng.uniform(-1.0, 1.0, 2) * np.asarray(spec.anchor_jitter)
    layout_yaw = float(rng.uniform(-spec.yaw_jitter, spec.yaw_jitter))
    R = _rot2(layout_yaw)

    def make(idx: int, local_xy, oid: int) -> Cuboid:
        length, width, height = draw.obstacle_dims[idx]
        he = np.array([length / 2, width / 2, height / 2])
        xy = anchor + R @ np.asarray(local_xy, dtype=float)
        z = float(terrain.height_at(xy)) + he[2]
        return Cuboid(half_extents=he, position=np.array([xy[0], xy[1], z]), yaw=layout_yaw,
                      mass=float(draw.obstacle_masses[idx]), obstacle_id=oid)

    gaps: tuple = ()
    if spec.kind == "single":
        obstacles = [make(spec.obstacle_indices[0], (0.0, 0.0), 0)]
    elif spec.kind == "pair_gap":
        gap = float(rng.uniform(*spec.gap_range))
        ia, ib = spec.obstacle_indices
        wa = draw.obstacle_dims[ia][1] / 2
        wb = draw.obstacle_dims[ib][1] / 2
        obstacles = [
            make(ia, (0.0, gap / 2 + wa), 0),
            make(ib, (0.0, -(gap / 2 + wb)), 1),
        ]
        gaps = (gap,)
        measured = face_gap_y(obstacles[0], obstacles[1])
        if abs(measured - gap) > 1e-9:
            raise ConstraintViolation(f"gap layout inconsistent: drew {gap}, measured {measured}")
        if spec.min_gap is not None and gap < spec.min_gap:
            raise ConstraintViolation(f"scenario {spec.scenario_id}: gap {gap:.3f} below minimum {spec.min_gap}")
        if spec.max_gap is not None and gap >= min(spec.max_gap, base_width):
            raise ConstraintViolation(
                f"scenario {spec.scenario_id}: gap {gap:.3f} admits the base (width {base_width})"
            )
    else:  # row_two_gaps
        i1, i2, i3 = spec.obstacle_indices
        g1 = float(rng.uniform(*spec.gap_range))
        g2 = float(rng.uniform(*spec.gap_range))
        w1 = draw.obstacle_dims[i1][1] / 2
        w2 = draw.obstacle_dims[i2][1] / 2
        w3 = draw.obstacle_dims[i3][1] / 2
        obstacles = [
            make(i1, (0.0, 0.0), 0),
            make(i2, (0.0, w1 + g1 + w2), 1),
            make(i3, (0.0, -(w1 + g2 + w3)), 2),
        ]
        gaps = (g1, g2)

    world = WorldState(
        terrain=terrain,
        obstacles=obstacles,
        contact_params=ContactParams(
            friction_robot=draw.robot_friction,
            obstacle_ground_friction=draw.obstacle_friction,
        ),
    )
    delta = anchor - np.asarray(spec.anchor)
    return Scene(
        name=spec.scenario_id,
        world=world,
        spawn_space=_shift_spawn_space(spec.spawn_space, delta),
        command_space=_shift_command_space(spec.command_space, delta),
        gaps=gaps,
    )


def spawn_between_pair(scene: Scene, xy) -> bool:
    """Is a spawn point inside the corridor between a pair-gap scenario's obstacles?"""
    if len(scene.world.obstacles) < 2 or not scene.gaps:
        return False
    a, b = scene.world.obstacles[0], scene.world.obstacles[1]
    center = 0.5 * (a.position[:2] + b.position[:2])
    axis = b.position[:2] - a.position[:2]
    axis = axis / np.linalg.norm(axis)
    perp = np.array([-axis[1], axis[0]])
    d = np.asarray(xy, dtype=float) - center
    return bool(abs(float(d @ axis)) < scene.gaps[0] / 2 and abs(float(d @ perp)) < a.half_extents[0])


def assign_scenarios(num_envs: int, rng: np.random.Generator, ids=SCENARIO_IDS) -> list:
    """Independent uniform scenario id per environment."""
    if num_envs < 1:
        raise ValueError("num_envs must be >= 1")
    return [ids[int(k)] for k in rng.integers(0, len(ids), size=num_envs)]


# --- evaluation scenes ----------------------------------------------------------

@dataclass
class CommandTrajectory:
    """Piecewise-linear world-frame foot target over time with a stepwise switch."""

    times: np.ndarray
    targets: np.ndarray
    switches: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        self.switches = np.asarray(self.switches, dtype=int)
        if not (len(self.times) == len(self.targets) == len(self.switches)):
            raise ValueError("trajectory arrays must share length")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("trajectory times must be non-decreasing")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> FootCommand:
        t = float(np.clip(t, self.times[0], self.times[-1]))
        raw = int(np.searchsorted(self.times, t, side="right") - 1)
        k_switch = min(max(raw, 0), len(self.times) - 1)
        k = min(max(raw, 0), len(self.times) - 2) if len(self.times) > 1 else 0
        if len(self.times) == 1 or self.times[k + 1] == self.times[k]:
            target = self.targets[k_switch]
        else:
            a = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
            target = (1 - a) * self.targets[k] + a * self.targets[k + 1]
        return FootCommand(target=target, switch=int(self.switches[k_switch]), frame="world")

    @staticmethod
    def from_waypoints(points, speed: float, hold: float = 2.0, switches=None) -> "CommandTrajectory":
        """Constant-speed linear interpolation through waypoints after an initial hold."""
        pts = np.asarray(points, dtype=float)
        times = [0.0, hold]
        targets = [pts[0], pts[0]]
        for k in range(1, len(pts)):
            seg = float(np.linalg.norm(pts[k] - pts[k - 1]))
            times.append(times[-1] + max(seg / speed, 1e-6))
            targets.append(pts[k])
        if switches is None:
            sw = np.zeros(len(times), dtype=int)
        else:
            sw = np.asarray([switches[0], switches[0]] + list(switches[1:]), dtype=int)
        return CommandTrajectory(np.array(times), np.array(targets), sw)


EVAL_SCENE_NAMES = (
    "single_sweep_clear",
    "single_sweep_through",
    "single_sweep_low",
    "single_sweep_deep",
    "ring_wide",
    "ring_narrow",
    "ring_1p3m",
    "ring_clockwise",
    "dynamic_front",
    "dynamic_side",
    "round_bin",
    "corner_reach",
    "switch_demo",
)

SWEEP_SPEED = 0.25   # m/s, side-to-side sweeps
RING_SPEED = 0.4     # m/s, square-ring paths


def _flat_world(obstacles) -> WorldState:
    return WorldState(terrain=Heightfield.flat(TERRAIN_EXTENT, TERRAIN_CELL), obstacles=list(obstacles))


def _box(xy, he, oid=0, yaw=0.0, mass=12.0, scripted=None) -> Cuboid:
    he = np.asarray(he, dtype=float)
    return Cuboid(half_extents=he, position=np.array([xy[0], xy[1], he[2]]), yaw=yaw,
                  mass=mass, obstacle_id=oid, scripted=scripted)


def _sweep(points, speed=SWEEP_SPEED, passes=2, switches=None):
    """Back-and-forth sweep: A -> B -> A repeated `passes` times."""
    a, b = np.asarray(points[0], dtype=float), np.asarray(points[1], dtype=float)
    pts = [a]
    for _ in range(passes):
        pts += [b, a]
    return CommandTrajectory.from_waypoints(pts, speed, switches=switches)


def _ring(center, radius, z, clockwise=False, speed=RING_SPEED):
    """Square ring (diamond) through the four gap centers around `center`."""
    cx, cy = center
    verts = [(cx + radius, cy), (cx, cy + radius), (cx - radius, cy), (cx, cy - radius)]
    if clockwise:
        verts = verts[::-1]
    pts = [np.array([x, y, z]) for x, y in verts] + [np.array([verts[0][0], verts[0][1], z])]
    return CommandTrajectory.from_waypoints(pts, speed)


def build_eval_scene(name: str) -> Scene:
    """Deterministic world + dense command trajectory for one eval scene."""
    if name == "single_sweep_clear":
        # sweep fully out of collision: obstacle well off the command line
        world = _flat_world([_box((1.6, -0.22), (0.04, 0.07, 0.22))])
        traj = _sweep([(0.35, -0.22, 0.4), (0.80, -0.22, 0.4)])
    elif name == "single_sweep_through":
        # command passes through the obstacle interior at z = 0.4 (top at 0.5)
        world = _flat_world([_box((0.68, -0.22), (0.04, 0.07, 0.22))])
        traj = _sweep([(0.35, -0.22, 0.4), (0.80, -0.22, 0.4)])
    elif name == "single_sweep_low":
        # low obstacle: passing above is cheaper than going around
        world = _flat_world([_box((0.68, -0.22), (0.04, 0.07, 0.15))])
        traj = _sweep([(0.35, -0.22, 0.4), (0.80, -0.22, 0.4)])
    elif name == "single_sweep_deep":
        # command deep inside a tall wide obstacle: conservative one-side behavior
        world = _flat_world([_box((0.68, -0.26), (0.20, 0.3, 0.4))])
        traj = _sweep([(0.30, -0.26, 0.4), (0.85, -0.26, 0.4)], passes=2)
    elif name in ("ring_wide", "ring_narrow", "ring_1p3m", "ring_clockwise"):
        gap = {"ring_wide": 2.0, "ring_narrow": 1.5, "ring_1p3m": 1.3, "ring_clockwise": 1.5}[name]
        c = (gap + 0.6) / 2  # corner obstacles 0.6 x 0.6: adjacent face gap = 2c - 0.6
        world = _flat_world(
            [_box((sx * c, sy * c), (0.3, 0.3, 0.35), oid=i)
             for i, (sx, sy) in enumerate([(1, 1), (-1, 1), (-1, -1), (1, -1)])]
        )
        traj = _ring((0.0, 0.0), c, 0.4, clockwise=(name == "ring_clockwise"))
    elif name == "dynamic_front":
        ob = _box((3.0, -0.1), (0.3, 0.3, 0.4), scripted=ScriptedMotion(velocity=(-0.3, 0.0, 0.0),
                                                                        start_time=2.0, stop_time=9.0))
        world = _flat_world([ob])
        traj = CommandTrajectory.from_waypoints([(0.6, -0.22, 0.45), (0.6, -0.22, 0.45)], 0.25, hold=12.0)
    elif name == "dynamic_side":
        ob = _box((0.7, 2.5), (0.3, 0.3, 0.4), scripted=ScriptedMotion(velocity=(0.0, -0.3, 0.0),
                                                                       start_time=2.0, stop_time=9.0))
        world = _flat_world([ob])
        traj = CommandTrajectory.from_waypoints([(0.6, -0.22, 0.45), (0.6, -0.22, 0.45)], 0.25, hold=12.0)
    elif name == "round_bin":
        # 16-gon bin: geometry unseen during training, 2.5D footprint of a cylinder
        r, n, oid = 0.35, 16, 0
        walls = []
        for k in range(n):
            ang = 2 * np.pi * k / n
            seg = r * np.tan(np.pi / n) + 0.02
            walls.append(
                Cuboid(half_extents=np.array([0.04, seg, 0.2]),
                       position=np.array([1.1 + r * np.cos(ang), -0.2 + r * np.sin(ang), 0.2]),
                       yaw=ang, mass=8.0, obstacle_id=oid)
            )
            oid += 1
        world = _flat_world(walls)
        traj = _sweep([(0.35, -0.2, 0.4), (1.9, -0.2, 0.4)], passes=2)
    elif name == "corner_reach":
        # reach around a protruding corner to a target behind it
        world = _flat_world([_box((0.55, -0.05), (0.12, 0.25, 0.35))])
        traj = CommandTrajectory.from_waypoints(
            [(0.25, -0.38, 0.4), (0.85, -0.25, 0.45), (0.85, -0.25, 0.45)], 0.25, hold=3.0)
    elif name == "switch_demo":
        # constant command inside the obstacle; switch flips on halfway
        ob = _box((0.55, -0.26), (0.10, 0.10, 0.25), mass=10.0)
        world = _flat_world([ob])
        target = np.array([0.55, -0.26, 0.4])
        times = np.array([0.0, 8.0, 8.0, 16.0])
        targets = np.stack([target] * 4)
        switches = np.array([0, 0, 1, 1])
        traj = CommandTrajectory(times, targets, switches)
    else:
        raise KeyError(f"unknown eval scene {name!r}; known: {EVAL_SCENE_NAMES}")
    return Scene(name=name, world=world, trajectory=traj)
