"""Terrain, movable cuboid obstacles, collision primitives and contact queries.

Everything here is 2.5D-consistent: obstacles translate and yaw but never tip,
terrain is a heightfield, and the vertical ray-cast is the single source of
truth for "what is the top surface at (x, y)".
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

GRAVITY = 9.81

SCENE_SCHEMA_VERSION = 1


def rot_z(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s], [s, c]])


@dataclass
class ContactParams:
    """Penalty contact model constants.

    Linear spring-damper normal force; tangentially an anchored spring gives
    true static friction (no creep under sustained load) and slips along the
    Coulomb cone once saturated. Cheap and deterministic; force resolution is
    well below the 0.001/0.1 N reward thresholds.
    """

    stiffness: float = 5000.0          # N/m
    damping: float = 50.0              # N*s/m
    friction_robot: float = 0.7        # robot primitive vs ground/obstacle
    tangential_stiffness: float = 4000.0  # N/m, stick-phase anchor spring
    tangential_damping: float = 60.0      # N*s/m
    obstacle_ground_friction: float = 0.5
    obstacle_spin_radius_factor: float = 0.4  # effective lever arm = factor*(hx+hy)


@dataclass
class Heightfield:
    """Piecewise-constant terrain grid. origin is the world xy of cell (0,0)'s center."""

    origin: np.ndarray
    cell_size: float
    cells: np.ndarray  # (nx, ny) heights in m

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.cells.ndim != 2 or self.cells.shape[0] < 1 or self.cells.shape[1] < 1:
            raise ValueError("heightfield grid must be at least 1x1")
        if not np.all(np.isfinite(self.cells)):
            raise ValueError("heightfield heights must be finite")

    def height_at(self, xy) -> Union[float, np.ndarray]:
        """Terrain height at one (2,) point or a batch (N, 2). Out-of-extent clamps to the boundary cell."""
        xy = np.asarray(xy, dtype=float)
        ij = np.rint((xy - self.origin) / self.cell_size).astype(int)
        i = np.clip(ij[..., 0], 0, self.cells.shape[0] - 1)
        j = np.clip(ij[..., 1], 0, self.cells.shape[1] - 1)
        out = self.cells[i, j]
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def flat(extent: float = 20.0, cell_size: float = 0.05, height: float = 0.0) -> "Heightfield":
        n = max(1, int(round(extent / cell_size)))
        origin = np.array([-extent / 2 + cell_size / 2, -extent / 2 + cell_size / 2])
        return Heightfield(origin, cell_size, np.full((n, n), height))

    @staticmethod
    def rough(extent: float, cell_size: float, lo: float, hi: float, rng: np.random.Generator) -> "Heightfield":
        n = max(1, int(round(extent / cell_size)))
        origin = np.array([-extent / 2 + cell_size / 2, -extent / 2 + cell_size / 2])
        return Heightfield(origin, cell_size, rng.uniform(lo, hi, size=(n, n)))


@dataclass
class ScriptedMotion:
    """Constant-velocity trajectory for a kinematic obstacle; forces are ignored."""

    velocity: np.ndarray  # (3,) m/s, z ignored
    yaw_rate: float = 0.0
    start_time: float = 0.0
    stop_time: float = np.inf

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=float)


@dataclass
class Cuboid:
    """Movable yaw-aligned box obstacle. position is the box center."""

    half_extents: np.ndarray  # (3,)
    position: np.ndarray      # (3,) center
    yaw: float = 0.0
    mass: float = 10.0
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw_rate: float = 0.0
    obstacle_id: int = 0
    scripted: Optional[ScriptedMotion] = None
    # contact reactions accumulated by query/step_dynamics, consumed by step_obstacles
    ext_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ext_yaw_torque: float = 0.0

    def __post_init__(self):
        self.half_extents = np.asarray(self.half_extents, dtype=float)
        self.position = np.asarray(self.position, dtype=float)
        self.linear_velocity = np.asarray(self.linear_velocity, dtype=float)
        self.ext_force = np.asarray(self.ext_force, dtype=float)
        if not np.all(self.half_extents > 0):
            raise ValueError("cuboid half_extents must be positive")
        if self.mass <= 0:
            raise ValueError("cuboid mass must be positive")

    @property
    def top(self) -> float:
        return float(self.position[2] + self.half_extents[2])

    def covers(self, xy) -> Union[bool, np.ndarray]:
        """Footprint test: does the yaw-aligned rectangle contain (x, y)? Batched over (N, 2)."""
        xy = np.asarray(xy, dtype=float)
        d = xy - self.position[:2]
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        lx = c * d[..., 0] + s * d[..., 1]
        ly = -s * d[..., 0] + c * d[..., 1]
        out = (np.abs(lx) <= self.half_extents[0]) & (np.abs(ly) <= self.half_extents[1])
        return bool(out) if out.ndim == 0 else out

    def corners_xy(self) -> np.ndarray:
        """World xy of the 4 footprint corners, counterclockwise."""
        hx, hy = self.half_extents[0], self.half_extents[1]
        local = np.array([[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]])
        return self.position[:2] + local @ rot_z(self.yaw).T


@dataclass(frozen=True)
class CollisionPrimitive:
    """One robot collision body: a sphere attached to a kinematic point, or the base cuboid."""

    shape: str          # "sphere" | "cuboid"
    body_id: str
    radius: float = 0.0
    half_extents: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.shape == "sphere" and self.radius <= 0:
            raise ValueError(f"sphere primitive {self.body_id} needs a positive radius")
        if self.shape == "cuboid" and (self.half_extents is None or not np.all(np.asarray(self.half_extents) > 0)):
            raise ValueError(f"cuboid primitive {self.body_id} needs positive half extents")


GROUND = "ground"


@dataclass
class Contact:
    """Net contact force on one robot body from one partner, summed over the step."""

    body_id: str
    other: str          # "ground" | "obstacle:<id>" | "self:<body_id>"
    force: np.ndarray   # (3,) N, acting on the robot body
    point: np.ndarray   # (3,) m, world

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.force))

    @property
    def is_ground(self) -> bool:
        return self.other == GROUND

    @property
    def is_obstacle(self) -> bool:
        return self.other.startswith("obstacle:")

    @property
    def is_self(self) -> bool:
        return self.other.startswith("self:")


@dataclass
class WorldState:
    """Mutable simulation state: terrain, obstacles, robot, last contact set.

    One stepping context mutates a WorldState at a time; pure queries
    (raycast, footprint tests) are safe for concurrent readers.
    friction_anchors hold the tangential stick points per contact pair and are
    advanced only by the dynamics step.
    """

    terrain: Heightfield
    obstacles: list
    robot: "object" = None      # RobotState, attached by the robot module
    morphology: "object" = None
    contacts: list = field(default_factory=list)
    time: float = 0.0
    contact_params: ContactParams = field(default_factory=ContactParams)
    friction_anchors: dict = field(default_factory=dict)


def raycast_down(world: WorldState, xy) -> float:
    """Height of the top surface under a vertical ray at xy.

    max over terrain and every obstacle whose footprint covers the point.
    Points outside the terrain extent return the boundary cell height.
    """
    xy = np.asarray(xy, dtype=float)
    if not np.all(np.isfinite(xy)):
        raise ValueError("raycast point must be finite")
    h = world.terrain.height_at(xy)
    for ob in world.obstacles:
        if ob.covers(xy):
            h = max(h, ob.top)
    return float(h)


def raycast_down_batch(world: WorldState, xys: np.ndarray) -> np.ndarray:
    """Vectorized raycast_down over an (N, 2) array of query points."""
    xys = np.asarray(xys, dtype=float)
    h = np.asarray(world.terrain.height_at(xys), dtype=float).copy()
    for ob in world.obstacles:
        mask = ob.covers(xys)
        if np.any(mask):
            h[mask] = np.maximum(h[mask], ob.top)
    return h


def _sphere_terrain(center, vel, radius, terrain, params, key, anchors, new_anchors):
    """Normal+friction force of a sphere resting on the heightfield, or None."""
    h = terrain.height_at(center[:2])
    depth = h + radius - center[2]
    if depth <= 0.0:
        return None
    n = np.array([0.0, 0.0, 1.0])
    point = np.array([center[0], center[1], h])
    force = _penalty_force(depth, n, point, vel, np.zeros(3), params, params.friction_robot,
                           key, anchors, new_anchors)
    return force, point


def _sphere_cuboid(center, vel, radius, ob: Cuboid, params, key, anchors, new_anchors):
    """Sphere vs yaw-aligned box. Returns (force_on_sphere, point) or None."""
    R = rot_z(ob.yaw)
    d = center - ob.position
    local = np.array([R[0, 0] * d[0] + R[1, 0] * d[1], R[0, 1] * d[0] + R[1, 1] * d[1], d[2]])
    he = ob.half_extents
    clamped = np.clip(local, -he, he)
    delta = local - clamped
    dist = np.linalg.norm(delta)
    if dist >= radius:
        return None
    if dist > 1e-12:
        n_local = delta / dist
        depth = radius - dist
    else:
        # center inside the box: push out along the least-penetration face
        gaps = he - np.abs(local)
        axis = int(np.argmin(gaps))
        n_local = np.zeros(3)
        n_local[axis] = np.sign(local[axis]) if local[axis] != 0 else 1.0
        depth = radius + gaps[axis]
    n_world = np.array(
        [R[0, 0] * n_local[0] + R[0, 1] * n_local[1], R[1, 0] * n_local[0] + R[1, 1] * n_local[1], n_local[2]]
    )
    point = center - n_world * radius
    ob_vel = np.array([ob.linear_velocity[0], ob.linear_velocity[1], 0.0])
    r = point - ob.position
    ob_vel[0] += -ob.yaw_rate * r[1]
    ob_vel[1] += ob.yaw_rate * r[0]
    force = _penalty_force(depth, n_world, point, vel, ob_vel, params, params.friction_robot,
                           key, anchors, new_anchors)
    return force, point


def _penalty_force(depth, n, point, vel, other_vel, params, mu, key=None, anchors=None, new_anchors=None):
    """Spring-damper normal force plus anchored stick-slip Coulomb friction.

    While the tangential spring force stays inside the friction cone the
    contact sticks to its anchor point; when it saturates, the anchor slips so
    the spring carries exactly the cone force.
    """
    rel = vel - other_vel
    vn = float(np.dot(rel, n))
    fn = max(params.stiffness * depth - params.damping * vn, 0.0)
    if fn <= 0.0:
        return np.zeros(3)
    vt = rel - vn * n
    kt, ct = params.tangential_stiffness, params.tangential_damping
    if key is not None and anchors is not None:
        a = anchors.get(key, point)
        stretch = point - a
        stretch_t = stretch - np.dot(stretch, n) * n
        raw = -kt * stretch_t - ct * vt
    else:
        raw = -ct * vt
    mag = float(np.linalg.norm(raw))
    fmax = mu * fn
    if mag > fmax:
        ft = raw * (fmax / mag)
        anchor = point + ft / kt
    else:
        ft = raw
        anchor = anchors.get(key, point) if (key is not None and anchors is not None) else None
    if key is not None and new_anchors is not None:
        new_anchors[key] = anchor if anchor is not None else point
    return fn * n + ft


def _obb_overlap_xy(ca, hea, ya, cb, heb, yb):
    """2D SAT for two yaw-aligned rectangles. Returns (depth, axis unit vector a->b) or None."""
    axes = []
    for yaw in (ya, yb):
        c, s = np.cos(yaw), np.sin(yaw)
        axes.append(np.array([c, s]))
        axes.append(np.array([-s, c]))
    d = cb - ca
    best_depth, best_axis = np.inf, None
    for ax in axes:
        ra = hea[0] * abs(np.cos(ya) * ax[0] + np.sin(ya) * ax[1]) + hea[1] * abs(
            -np.sin(ya) * ax[0] + np.cos(ya) * ax[1]
        )
        rb = heb[0] * abs(np.cos(yb) * ax[0] + np.sin(yb) * ax[1]) + heb[1] * abs(
            -np.sin(yb) * ax[0] + np.cos(yb) * ax[1]
        )
        sep = abs(float(np.dot(d, ax)))
        depth = ra + rb - sep
        if depth <= 0:
            return None
        if depth < best_depth:
            best_depth = depth
            best_axis = ax if np.dot(d, ax) >= 0 else -ax
    return best_depth, best_axis


def cuboid_cuboid_contact(ca_pos, ca_he, ca_yaw, ob: Cuboid):
    """Overlap between a yaw-aligned cuboid (e.g. robot base) and an obstacle.

    Returns (depth, normal pointing from obstacle into the cuboid, point) or None.
    """
    za0, za1 = ca_pos[2] - ca_he[2], ca_pos[2] + ca_he[2]
    zb0, zb1 = ob.position[2] - ob.half_extents[2], ob.position[2] + ob.half_extents[2]
    z_overlap = min(za1, zb1) - max(za0, zb0)
    if z_overlap <= 0:
        return None
    xy = _obb_overlap_xy(ca_pos[:2], ca_he[:2], ca_yaw, ob.position[:2], ob.half_extents[:2], ob.yaw)
    if xy is None:
        return None
    xy_depth, xy_axis = xy
    if z_overlap < xy_depth:
        nz = 1.0 if ca_pos[2] >= ob.position[2] else -1.0
        normal = np.array([0.0, 0.0, nz])
        depth = z_overlap
    else:
        normal = np.array([-xy_axis[0], -xy_axis[1], 0.0])  # axis points a->b; normal pushes a away from b
        depth = xy_depth
    point = 0.5 * (np.asarray(ca_pos) + ob.position)
    point = np.array([point[0], point[1], max(za0, zb0) + z_overlap / 2])
    return depth, normal, point


def apply_reaction_to_obstacle(ob: Cuboid, force_on_robot: np.ndarray, point: np.ndarray) -> None:
    """Accumulate the Newton reaction of a robot contact onto an obstacle."""
    f = -force_on_robot
    ob.ext_force = ob.ext_force + f
    r = point - ob.position
    ob.ext_yaw_torque += float(r[0] * f[1] - r[1] * f[0])


def step_obstacles(world: WorldState, dt: float) -> WorldState:
    """Integrate obstacle point-mass + yaw dynamics with Coulomb ground friction.

    Scripted obstacles follow their trajectory exactly. Accumulated contact
    reactions are consumed and cleared. Obstacle-obstacle overlap is resolved
    by position projection only.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = world.contact_params
    for ob in world.obstacles:
        if ob.scripted is not None:
            sm = ob.scripted
            if sm.start_time <= world.time < sm.stop_time:
                ob.linear_velocity = sm.velocity.copy()
                ob.yaw_rate = sm.yaw_rate
            else:
                ob.linear_velocity = np.zeros(3)
                ob.yaw_rate = 0.0
            ob.position = ob.position + ob.linear_velocity * dt
            ob.yaw += ob.yaw_rate * dt
            ob.ext_force = np.zeros(3)
            ob.ext_yaw_torque = 0.0
        else:
            mu_n = p.obstacle_ground_friction * ob.mass * GRAVITY
            f = ob.ext_force[:2]
            v = ob.linear_velocity[:2]
            speed = np.linalg.norm(v)
            if speed < 1e-9:
                if np.linalg.norm(f) > mu_n:
                    fdir = f / np.linalg.norm(f)
                    a = (f - mu_n * fdir) / ob.mass
                    v = v + a * dt
                else:
                    v = np.zeros(2)
            else:
                vdir = v / speed
                a = (f - mu_n * vdir) / ob.mass
                v_new = v + a * dt
                # friction must not reverse the motion it damps
                if np.dot(v_new, v) < 0 and np.linalg.norm(f) <= mu_n:
                    v_new = np.zeros(2)
                v = v_new
            ob.linear_velocity = np.array([v[0], v[1], 0.0])
            ob.position = ob.position + ob.linear_velocity * dt

            i_z = ob.mass * (ob.half_extents[0] ** 2 + ob.half_extents[1] ** 2) / 3.0
            r_eff = p.obstacle_spin_radius_factor * (ob.half_extents[0] + ob.half_extents[1])
            tq_max = p.obstacle_ground_friction * ob.mass * GRAVITY * r_eff
            tq = ob.ext_yaw_torque
            w = ob.yaw_rate
            if abs(w) < 1e-9:
                if abs(tq) > tq_max:
                    w = w + (tq - np.sign(tq) * tq_max) / i_z * dt
                else:
                    w = 0.0
            else:
                w_new = w + (tq - np.sign(w) * tq_max) / i_z * dt
                if w_new * w < 0 and abs(tq) <= tq_max:
                    w_new = 0.0
                w = w_new
            ob.yaw_rate = w
            ob.yaw += w * dt
            # obstacles stay seated on the terrain
            ground = world.terrain.height_at(ob.position[:2])
            ob.position = np.array([ob.position[0], ob.position[1], ground + ob.half_extents[2]])
            ob.ext_force = np.zeros(3)
            ob.ext_yaw_torque = 0.0

    _project_obstacle_overlaps(world.obstacles)
    return world


def _project_obstacle_overlaps(obstacles) -> None:
    for i in range(len(obstacles)):
        for j in range(i + 1, len(obstacles)):
            a, b = obstacles[i], obstacles[j]
            res = _obb_overlap_xy(a.position[:2], a.half_extents[:2], a.yaw, b.position[:2], b.half_extents[:2], b.yaw)
            if res is None:
                continue
            depth, axis = res
            shift = 0.5 * depth * axis
            if a.scripted is None:
                a.position = a.position - np.array([shift[0], shift[1], 0.0])
            if b.scripted is None:
                b.position = b.position + np.array([shift[0], shift[1], 0.0])


def query_contacts(world: WorldState, advance_anchors: bool = False) -> list:
    """All robot contacts this instant, one Contact per touching (body, partner) pair.

    Pure by default: friction anchors are read but not written. The dynamics
    step passes advance_anchors=True to commit stick-point updates. The robot
    module supplies primitive poses via world.morphology.collision_state.
    """
    cs = world.morphology.collision_state(world.robot)
    p = world.contact_params
    anchors = world.friction_anchors
    new_anchors: dict = {}
    raw = []  # (body_id, other, force, point)

    for body_id, center, vel, radius in cs.spheres:
        hit = _sphere_terrain(center, vel, radius, world.terrain, p,
                              (body_id, GROUND), anchors, new_anchors)
        if hit is not None:
            raw.append((body_id, GROUND, hit[0], hit[1]))
        for ob in world.obstacles:
            other = f"obstacle:{ob.obstacle_id}"
            hit = _sphere_cuboid(center, vel, radius, ob, p, (body_id, other), anchors, new_anchors)
            if hit is not None:
                raw.append((body_id, other, hit[0], hit[1]))

    # base cuboid: yaw-projected box against obstacles, exact corners against terrain
    base_center, base_R, base_he, base_vel, base_w = cs.base
    base_yaw = float(np.arctan2(base_R[1, 0], base_R[0, 0]))
    for ob in world.obstacles:
        res = cuboid_cuboid_contact(base_center, base_he, base_yaw, ob)
        if res is None:
            continue
        depth, normal, point = res
        r = point - base_center
        vel_at = base_vel + np.cross(base_w, r)
        ob_vel = np.array([ob.linear_velocity[0], ob.linear_velocity[1], 0.0])
        ro = point - ob.position
        ob_vel[0] += -ob.yaw_rate * ro[1]
        ob_vel[1] += ob.yaw_rate * ro[0]
        other = f"obstacle:{ob.obstacle_id}"
        force = _penalty_force(depth, normal, point, vel_at, ob_vel, p, p.friction_robot,
                               (cs.base_id, other), anchors, new_anchors)
        raw.append((cs.base_id, other, force, point))
    corners = base_center + (base_R @ (np.array(
        [[1, 1, -1], [1, -1, -1], [-1, 1, -1], [-1, -1, -1]], dtype=float) * base_he).T).T
    for ci, corner in enumerate(corners):
        h = world.terrain.height_at(corner[:2])
        depth = h - corner[2]
        if depth > 0:
            r = corner - base_center
            vel_at = base_vel + np.cross(base_w, r)
            force = _penalty_force(depth, np.array([0.0, 0.0, 1.0]), corner, vel_at, np.zeros(3),
                                   p, p.friction_robot, (cs.base_id, GROUND, ci), anchors, new_anchors)
            raw.append((cs.base_id, GROUND, force, corner))

    # declared self-collision pairs (no anchors), reported symmetrically on both bodies
    spheres = cs.spheres
    for i, j in cs.self_pairs:
        bi, ci, vi, ri = spheres[i]
        bj, cj, vj, rj = spheres[j]
        d = ci - cj
        dist = float(np.linalg.norm(d))
        if dist >= ri + rj or dist < 1e-12:
            continue
        n = d / dist
        depth = ri + rj - dist
        point = cj + n * rj
        force = _penalty_force(depth, n, point, vi, vj, p, p.friction_robot)
        raw.append((bi, f"self:{bj}", force, point))
        raw.append((bj, f"self:{bi}", -force, point))

    if advance_anchors:
        world.friction_anchors = new_anchors

    merged: dict = {}
    for body_id, other, force, point in raw:
        key = (body_id, other)
        if key in merged:
            f0, p0, w0 = merged[key]
            w = float(np.linalg.norm(force))
            tot = w0 + w
            merged[key] = (f0 + force, (p0 * w0 + point * w) / tot if tot > 0 else p0, tot)
        else:
            merged[key] = (force, point, float(np.linalg.norm(force)))
    return [Contact(body_id=k[0], other=k[1], force=v[0], point=v[1]) for k, v in merged.items()]


# --- scene-description files -------------------------------------------------

def scene_to_dict(world: WorldState, spawn=None) -> dict:
    t = world.terrain
    d = {
        "version": SCENE_SCHEMA_VERSION,
        "terrain": {
            "origin": t.origin.tolist(),
            "cell_size": t.cell_size,
            "shape": list(t.cells.shape),
            "heights": t.cells.ravel().tolist(),
        },
        "obstacles": [
            {
                "id": ob.obstacle_id,
                "half_extents": ob.half_extents.tolist(),
                "position": ob.position.tolist(),
                "yaw": ob.yaw,
                "mass": ob.mass,
                "scripted": None
                if ob.scripted is None
                else {
                    "velocity": ob.scripted.velocity.tolist(),
                    "yaw_rate": ob.scripted.yaw_rate,
                    "start_time": ob.scripted.start_time,
                    "stop_time": None if np.isinf(ob.scripted.stop_time) else ob.scripted.stop_time,
                },
            }
            for ob in world.obstacles
        ],
    }
    if spawn is not None:
        d["robot_spawn"] = {"position": list(spawn[0]), "yaw": float(spawn[1])}
    return d


def scene_from_dict(d: dict, contact_params: Optional[ContactParams] = None) -> WorldState:
    if d.get("version") != SCENE_SCHEMA_VERSION:
        raise ValueError(f"unsupported scene schema version {d.get('version')!r}")
    t = d["terrain"]
    cells = np.asarray(t["heights"], dtype=float).reshape(t["shape"])
    terrain = Heightfield(np.asarray(t["origin"]), float(t["cell_size"]), cells)
    obstacles = []
    for o in d["obstacles"]:
        scripted = None
        if o.get("scripted"):
            s = o["scripted"]
            scripted = ScriptedMotion(
                np.asarray(s["velocity"]),
                yaw_rate=float(s.get("yaw_rate", 0.0)),
                start_time=float(s.get("start_time", 0.0)),
                stop_time=np.inf if s.get("stop_time") is None else float(s["stop_time"]),
            )
        obstacles.append(
            Cuboid(
                half_extents=np.asarray(o["half_extents"]),
                position=np.asarray(o["position"]),
                yaw=float(o["yaw"]),
                mass=float(o["mass"]),
                obstacle_id=int(o["id"]),
                scripted=scripted,
            )
        )
    return WorldState(terrain=terrain, obstacles=obstacles, contact_params=contact_params or ContactParams())


def save_scene(path, world: WorldState, spawn=None) -> None:
    with open(path, "w") as f:
        json.dump(scene_to_dict(world, spawn), f)


def load_scene(path, contact_params: Optional[ContactParams] = None) -> WorldState:
    with open(path) as f:
        return scene_from_dict(json.load(f), contact_params)
