"""Scripted whole-body baseline controller.

An analytic stand-in for a trained policy so the eval harness and teleop
cockpit run out of the box: the pedipulating leg tracks the command through
inverse kinematics with a waypoint router that detours over or around
occupied height-scan columns; the other three legs hold stance and, when the
target leaves reach, skate the base toward it without ever lifting a support
foot (sliding resets keep three contacts at all times).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mdp import FootCommand
from ..perception import HeightScanSpec
from ..robot import Morphology, RobotState


@dataclass(frozen=True)
class BaselineConfig:
    track_speed: float = 0.55        # m/s commanded-foot slew toward the waypoint
    occupied_height: float = 0.08   # scan value above which a column counts as occupied
    occupancy_ttl: float = 0.5      # s, world-frame occupancy memory (rides out scan flicker)
    inflate_radius: float = 0.20    # xy inflation around an occupied cell center
    clear_over: float = 0.15        # climb margin above a blocking column
    clear_pass: float = 0.13        # z margin used when testing whether a path point clears
    standoff: float = 0.05          # extra stop distance when no route exists
    base_safety: float = 0.55       # m, base-center keep-out radius from occupied columns
    comfort_offset: tuple = (0.45, -0.24, -0.10)  # sweet-spot foot point, base frame
    gait_engage_dist: float = 0.18  # base-goal error that wakes the gait up
    gait_disengage_dist: float = 0.08
    gait_engage_yaw: float = 0.5
    gait_disengage_yaw: float = 0.2
    crouch: float = 0.03            # stance shortening for reach headroom
    base_speed: float = 0.07       # m/s rail creep while walking
    base_yaw_rate: float = 0.3      # rad/s rail yaw creep
    workspace_radius: float = 0.14  # slot deviation that triggers a step
    preshift_time: float = 0.45     # s, trunk shift toward the keepers before a step
    step_time: float = 0.2          # s, foot flight time
    step_lift: float = 0.04         # m, swing apex
    preshift_gain: float = 0.7      # trunk-shift feedback during a step cycle
    stance_authority: float = 0.09  # m, cap on slot-induced stance displacement
    stance_return_speed: float = 0.2
    stance_bias: float = 0.7        # trunk shift toward the 3-foot support centroid
    lean_tau: float = 0.15          # s, stance-foot lead against base velocity
    attitude_tau: float = 0.1       # s, foot-height lead against base roll/pitch rate
    lean_cap: float = 0.06          # m, stabilization overlay limit
    hold_gain: float = 0.6          # base-position servo through the stance feet while standing


class BaselineController:
    """Stateful controller; call per control step with (state, scan, command)."""

    def __init__(self, morphology: Morphology | None = None,
                 scan_spec: HeightScanSpec = HeightScanSpec(),
                 cfg: BaselineConfig = BaselineConfig(),
                 control_dt: float = 0.02):
        self.m = morphology or Morphology()
        self.scan_spec = scan_spec
        self.cfg = cfg
        self.dt = control_dt
        self._cell_centers = scan_spec.cell_centers_base()
        self.reset()

    def reset(self) -> None:
        self.cmd_foot_w: np.ndarray | None = None   # persistent commanded foot point, world
        stance = self.m.foot_positions_base(self.m.default_joint_pos)  # base frame
        # trunk over the 3-foot support centroid: pedipulation lifts one corner,
        # so the steady-state stance targets carry a constant bias. Targets start
        # unbiased and glide there slowly; a fast retarget would saturate foot
        # friction and slide the feet instead of shifting the trunk.
        support = [l for l in range(4) if l != self.m.pedip_leg]
        centroid = stance[support, :2].mean(axis=0)
        self._bias_shift = self.cfg.stance_bias * centroid  # base displaces by R @ shift
        biased = stance.copy()
        biased[:, :2] -= self._bias_shift
        biased[:, 2] += self.cfg.crouch  # keep the legs short of full extension
        self.stance_targets = stance.copy()
        self._stance_default = biased
        self.gait_active = False
        self._lift_ok = False                       # trunk shifted enough to unload the pedip foot
        self._stance_world: np.ndarray | None = None  # (4,3): world xy + swing lift per stance slot
        self._ground_est = 0.0
        self._hold_xy: np.ndarray | None = None     # world base position held while standing
        self._stance_unbiased = self.m.foot_positions_base(self.m.default_joint_pos).copy()
        self._rail = (np.zeros(2), 0.0)             # kinematic walking reference pose
        self._com_ref: np.ndarray | None = None     # trunk pre-shift target during a step
        self._step_leg = -1
        self._step_phase = ""
        self._step_t = 0.0
        self._step_from = np.zeros(2)
        self._last_action = np.zeros(12)
        self.debug_branch = "init"
        self._occ_memory: dict = {}                 # world 0.1 m grid -> [top_z, expiry]
        self._clock = 0.0
        self._descended = True                      # over-route hysteresis state
        self._detour_side = 0.0                     # latched lateral detour side

    # --- occupancy from the height scan -----------------------------------------

    def _occupied_columns(self, state: RobotState, scan: np.ndarray):
        """Base-frame xy centers and world top heights of occupied columns.

        Occupancy is remembered in a world-frame grid for a short TTL so that
        scan cells flickering with base motion cannot toggle the router.
        """
        mask = np.asarray(scan) > self.cfg.occupied_height
        # ground datum from the planted feet, robust to crouch and trunk shift
        feet_b = self.m.foot_positions_base(state.joint_pos)
        feet_z = (state.base_pos + feet_b @ state.rotation().T)[:, 2]
        support = [l for l in range(4) if l != self.m.pedip_leg]
        ground = float(np.min(feet_z[support])) - 0.005
        self._ground_est = ground
        R = state.rotation()[:2, :2]
        if np.any(mask):
            cells = self._cell_centers[mask]
            tops = np.asarray(scan)[mask] + ground
            world = state.base_pos[:2] + cells @ R.T
            for (wx, wy), top in zip(world, tops):
                key = (int(round(wx / 0.1)), int(round(wy / 0.1)))
                prev = self._occ_memory.get(key)
                expiry = self._clock + self.cfg.occupancy_ttl
                if prev is None or prev[1] < expiry or prev[0] < top:
                    self._occ_memory[key] = [float(top), expiry]
        if self._occ_memory:
            self._occ_memory = {k: v for k, v in self._occ_memory.items() if v[1] >= self._clock}
        if not self._occ_memory:
            return np.zeros((0, 2)), np.zeros(0)
        keys = np.array(list(self._occ_memory.keys()), dtype=float) * 0.1
        tops = np.array([v[0] for v in self._occ_memory.values()])
        cols_b = (keys - state.base_pos[:2]) @ R
        return cols_b, tops

    def _blocked(self, p_b: np.ndarray, z_w: float, cols_xy, cols_top, margin: float | None = None) -> bool:
        if len(cols_xy) == 0:
            return False
        d = np.linalg.norm(cols_xy - p_b[:2], axis=1)
        near = d < self.cfg.inflate_radius
        z_margin = self.cfg.clear_pass if margin is None else margin
        return bool(np.any(near & (cols_top + z_margin > z_w)))

    def _segment_blocked(self, a_b, a_zw, b_b, b_zw, cols_xy, cols_top, margin: float | None = None):
        for t in np.linspace(0.0, 1.0, 9):
            p = (1 - t) * a_b + t * b_b
            z = (1 - t) * a_zw + t * b_zw
            if self._blocked(p, z, cols_xy, cols_top, margin=margin):
                return True
        return False

    def _reachable(self, p_b) -> bool:
        return self.m.leg_ik(np.asarray(p_b), self.m.pedip_leg) is not None

    def _knee_clear(self, state: RobotState, foot_b, cols_xy, cols_top) -> bool:
        """Would the pedipulating knee clear all occupied columns at this foot pose?"""
        leg = self.m.pedip_leg
        q_leg = self.m.leg_ik(np.asarray(foot_b), leg)
        if q_leg is None:
            return False
        q_full = self.m.default_joint_pos.copy()
        q_full.reshape(4, 3)[leg] = q_leg
        knee_b = self.m.leg_points_base(q_full)[1][leg]
        knee_w = state.base_to_world(knee_b)
        if len(cols_xy) == 0:
            return True
        # the knee is a point test: its own radius plus half a cell, not the
        # foot-path inflation
        d = np.linalg.norm(cols_xy - knee_b[:2], axis=1)
        near = d < self.m.knee_radius + 0.07
        return not bool(np.any(near & (cols_top + self.m.knee_radius + 0.06 > knee_w[2])))

    def _clamp_reachable(self, p_b: np.ndarray) -> np.ndarray:
        """Shrink toward the comfort point until IK succeeds."""
        sweet = np.asarray(self.cfg.comfort_offset)
        p = np.asarray(p_b, dtype=float)
        for _ in range(25):
            if self._reachable(p):
                return p
            p = sweet + 0.92 * (p - sweet)
        return sweet.copy()

    # --- pedipulating-foot routing ------------------------------------------------

    def _route(self, state: RobotState, cmd_w, target_w, cols_xy, cols_top, switch: int):
        """Next world-frame waypoint for the commanded foot point.

        Works from the commanded point (not the sagging measured foot) with
        full-pose transforms. Direct when clear; otherwise climb-and-traverse
        above the blocking columns when reachable, else a lateral detour, else
        a stand-off short of the blockage.
        """
        cfg = self.cfg

        def blocked_w(p_w, margin=None):
            return self._blocked(state.world_to_base(p_w), p_w[2], cols_xy, cols_top, margin=margin)

        def seg_blocked_w(a_w, b_w, margin=None):
            for t in np.linspace(0.0, 1.0, 9):
                if blocked_w((1 - t) * a_w + t * b_w, margin):
                    return True
            return False

        if switch == 1 or len(cols_xy) == 0:
            self._descended = True
            self._detour_side = 0.0
            self.debug_branch = "direct"
            return np.asarray(target_w, dtype=float)
        if not seg_blocked_w(cmd_w, target_w):
            # while in flight, drop back to direct only with the full climb margin
            if self._descended or not seg_blocked_w(cmd_w, target_w, margin=cfg.clear_over):
                self._descended = True
                self._detour_side = 0.0
                self.debug_branch = "direct"
                return np.asarray(target_w, dtype=float)

        # blocking set near the straight segment, world xy
        R = state.rotation()[:2, :2]
        cols_w = state.base_pos[:2] + cols_xy @ R.T
        seg = target_w[:2] - cmd_w[:2]
        seg_len = float(np.linalg.norm(seg))
        seg_dir = seg / seg_len if seg_len > 1e-9 else np.array([1.0, 0.0])
        rel = cols_w - cmd_w[:2]
        along = np.clip(rel @ seg_dir, 0.0, seg_len)
        perp = rel - np.outer(along, seg_dir)
        near_path = np.linalg.norm(perp, axis=1) < cfg.inflate_radius + 0.1
        relevant = near_path & (cols_top + cfg.clear_pass > min(cmd_w[2], target_w[2]))
        if not np.any(relevant):
            relevant = np.ones(len(cols_w), dtype=bool)
        top = float(np.max(cols_top[relevant]))
        z_over = top + cfg.clear_over

        # over-the-top: climb in place, traverse at altitude; the direct check
        # above descends once past the blockage. The altitude must clear the
        # columns with the KNEE as well as the foot, so raise it until the
        # folded leg's knee also passes.
        for extra in (0.0, 0.06, 0.12, 0.18, 0.24):
            zo = z_over + extra
            over_w = np.array([target_w[0], target_w[1], max(zo, target_w[2])])
            over_b = state.world_to_base(over_w)
            clamped_b = self._clamp_reachable(over_b)
            clamped_w = state.base_to_world(clamped_b)
            if float(np.linalg.norm(clamped_b - over_b)) >= 0.10 or clamped_w[2] < top + 0.10:
                continue
            if not self._knee_clear(state, clamped_b, cols_xy, cols_top):
                continue
            self._descended = False
            if cmd_w[2] < zo - 0.02:
                self.debug_branch = "climb"
                return np.array([cmd_w[0], cmd_w[1], zo])
            self.debug_branch = "over"
            return clamped_w

        # lateral detour around the blocking centroid, side latched per episode
        centroid = cols_w[relevant].mean(axis=0)
        spread = float(np.max(np.linalg.norm(cols_w[relevant] - centroid, axis=1)))
        radius = spread + cfg.inflate_radius + 0.05
        perp_dir = np.array([-seg_dir[1], seg_dir[0]])
        if self._detour_side == 0.0:
            self._detour_side = float(np.sign(float(np.dot(cmd_w[:2] - centroid, perp_dir))) or 1.0)
        for s in (self._detour_side, -self._detour_side):
            wp_xy = centroid + s * perp_dir * radius
            wp_w = np.array([wp_xy[0], wp_xy[1], target_w[2]])
            wp_b = state.world_to_base(wp_w)
            if self.m.leg_ik(wp_b, self.m.pedip_leg) is not None and not blocked_w(wp_w):
                self._detour_side = s
                self._descended = False
                self.debug_branch = "lateral"
                return wp_w

        # no route: stop short of the inflated blockage on the near side
        d_centroid = float(np.linalg.norm(centroid - cmd_w[:2]))
        stop = max(d_centroid - radius - cfg.standoff, 0.0)
        wp_xy = cmd_w[:2] + seg_dir * min(stop, seg_len)
        self.debug_branch = "standoff"
        return np.array([wp_xy[0], wp_xy[1], cmd_w[2]])

    def _base_goal(self, state: RobotState, target_w: np.ndarray):
        """Desired base xy and yaw placing the comfort point on the target."""
        c = np.asarray(self.cfg.comfort_offset)
        delta = target_w[:2] - state.base_pos[:2]
        dist = float(np.linalg.norm(delta))
        yaw_now = float(np.arctan2(state.rotation()[1, 0], state.rotation()[0, 0]))
        bearing = np.arctan2(c[1], c[0])
        yaw_des = np.arctan2(delta[1], delta[0]) - bearing if dist > 0.25 else yaw_now
        cy, sy = np.cos(yaw_des), np.sin(yaw_des)
        offset = np.array([cy * c[0] - sy * c[1], sy * c[0] + cy * c[1]])
        # the stance bias deliberately displaces the trunk; the goal carries it too
        shift = np.array([cy * self._bias_shift[0] - sy * self._bias_shift[1],
                          sy * self._bias_shift[0] + cy * self._bias_shift[1]])
        pos_des = target_w[:2] - offset + shift
        return pos_des, float(yaw_des)

    def _update_gait(self, state: RobotState, target_w: np.ndarray, cols_xy, cols_top) -> None:
        cfg = self.cfg
        pos_des, yaw_des = self._base_goal(state, target_w)
        # base keep-out: walk no closer to an occupied column than base_safety
        if len(cols_xy):
            R2 = state.rotation()[:2, :2]
            cols_w = state.base_pos[:2] + cols_xy @ R2.T
            span = pos_des - state.base_pos[:2]
            n_steps = max(int(np.linalg.norm(span) / 0.05), 1)
            safe = state.base_pos[:2]
            for k in range(1, n_steps + 1):
                p = state.base_pos[:2] + span * (k / n_steps)
                if np.min(np.linalg.norm(cols_w - p, axis=1)) < cfg.base_safety:
                    break
                safe = p
            pos_des = safe
        yaw_now = float(np.arctan2(state.rotation()[1, 0], state.rotation()[0, 0]))
        pos_err_w = pos_des - state.base_pos[:2]
        yaw_err = float(np.arctan2(np.sin(yaw_des - yaw_now), np.cos(yaw_des - yaw_now)))
        dist = float(np.linalg.norm(pos_err_w))
        # walk only when the target is genuinely awkward: not reachable even
        # after pulling most of the way toward the comfort point, or badly yawed
        sweet = np.asarray(cfg.comfort_offset)
        target_b = state.world_to_base(target_w)
        shrunk = sweet + 0.9 * (target_b - sweet)
        comfortable = self._reachable(shrunk) and abs(yaw_err) <= cfg.gait_engage_yaw
        if not self._lift_ok:
            self.gait_active = False
        elif self.gait_active:
            if dist < cfg.gait_disengage_dist and abs(yaw_err) < cfg.gait_disengage_yaw:
                self.gait_active = False
                self._stance_world = None
                self._step_leg = -1
                self._com_ref = None
                self._hold_xy = state.base_pos[:2].copy()
                # feet stay where the walk left them; base-frame targets resume
                # from the actual pose and glide home
                feet_now = self.m.foot_positions_base(state.joint_pos)
                for leg in range(4):
                    if leg != self.m.pedip_leg:
                        self.stance_targets[leg] = feet_now[leg].copy()
        else:
            if not comfortable and dist > cfg.gait_disengage_dist:
                self.gait_active = True
                self._hold_xy = None
                yaw0 = float(np.arctan2(state.rotation()[1, 0], state.rotation()[0, 0]))
                self._rail = (state.base_pos[:2].copy(), yaw0)
                feet_b2 = self.m.foot_positions_base(state.joint_pos)
                feet_w = (state.base_pos + feet_b2 @ state.rotation().T)[:, :2]
                self._stance_world = np.concatenate([feet_w, np.zeros((4, 1))], axis=1)

        if not self.gait_active or self._stance_world is None:
            return

        # rail: kinematic reference pose creeping toward the goal while walking
        if self.gait_active and self._step_leg < 0:
            rail_xy, rail_yaw = self._rail
            err = pos_des - rail_xy
            n = float(np.linalg.norm(err))
            if n > 1e-9:
                rail_xy = rail_xy + err / n * min(cfg.base_speed * self.dt, n)
            yerr = float(np.arctan2(np.sin(yaw_des - rail_yaw), np.cos(yaw_des - rail_yaw)))
            rail_yaw = rail_yaw + float(np.clip(yerr, -cfg.base_yaw_rate * self.dt, cfg.base_yaw_rate * self.dt))
            self._rail = (rail_xy, rail_yaw)

        # step cycle: pre-shift the trunk toward the keepers' midpoint, then
        # re-place the most deviated stance foot onto its rail slot
        legs = [l for l in range(4) if l != self.m.pedip_leg]
        slots = self._rail_slots()
        if self._step_leg < 0 and self.gait_active:
            devs = {l: float(np.linalg.norm(slots[l] - self._stance_world[l][:2])) for l in legs}
            worst = max(devs, key=devs.get)
            if devs[worst] > cfg.workspace_radius:
                self._step_leg = worst
                self._step_phase = "preshift"
                self._step_t = 0.0
        if self._step_leg >= 0:
            self._step_t += self.dt
            keepers = [l for l in legs if l != self._step_leg]
            mid = 0.5 * (self._stance_world[keepers[0]][:2] + self._stance_world[keepers[1]][:2])
            if self._step_phase == "preshift":
                self._com_ref = mid
                if self._step_t >= cfg.preshift_time:
                    self._step_phase = "step"
                    self._step_t = 0.0
                    self._step_from = self._stance_world[self._step_leg][:2].copy()
            elif self._step_phase == "step":
                a = min(self._step_t / cfg.step_time, 1.0)
                xy = (1 - a) * self._step_from + a * slots[self._step_leg]
                lift = cfg.step_lift * np.sin(np.pi * a)
                self._stance_world[self._step_leg] = np.array([xy[0], xy[1], lift])
                self._com_ref = mid
                if a >= 1.0:
                    self._stance_world[self._step_leg][2] = 0.0
                    self._step_leg = -1
                    self._step_phase = ""
                    self._com_ref = None
        else:
            self._com_ref = None

    def _rail_slots(self) -> np.ndarray:
        """World xy where each stance foot should stand for the rail pose, (4, 2)."""
        rail_xy, rail_yaw = self._rail
        c, s = np.cos(rail_yaw), np.sin(rail_yaw)
        R = np.array([[c, -s], [s, c]])
        local = self._stance_unbiased[:, :2] - self._bias_shift  # trunk bias carried by the slots
        return rail_xy + local @ R.T

    def _stance_command(self, state: RobotState, leg: int) -> np.ndarray:
        """Base-frame target for one stance leg from its world slot, displacement-capped.

        The slot is treated as a 3D ground point and transformed with the full
        base pose; a yaw-only conversion would couple base tilt into xy."""
        sw = self._stance_world[leg]
        slot3 = np.array([sw[0], sw[1], self._ground_est + 0.005])
        p_b3 = state.world_to_base(slot3)
        home = self._stance_default[leg]
        d = p_b3[:2] - home[:2]
        n = float(np.linalg.norm(d))
        if n > self.cfg.stance_authority:
            d = d / n * self.cfg.stance_authority
        out = home.copy()
        out[:2] = home[:2] + d
        out[2] = home[2] + sw[2]  # step lift rides on the commanded z
        # trunk pre-shift during a step: bias the commanded xy so the base leans
        # over the keepers' midpoint before the foot unloads
        if self._com_ref is not None and leg != self._step_leg:
            err_b = state.rotation()[:2, :2].T @ (self._com_ref - state.base_pos[:2])
            out[:2] -= np.clip(self.cfg.preshift_gain * err_b, -0.05, 0.05)
        return out

    # --- main entry ------------------------------------------------------------------

    def __call__(self, state: RobotState, scan: np.ndarray, command: FootCommand) -> np.ndarray:
        """Joint-position offsets from defaults (12,), the action vector."""
        m = self.m
        target_w = command.target_world(state)
        feet_b = m.foot_positions_base(state.joint_pos)
        foot_b = feet_b[m.pedip_leg]
        if self.cmd_foot_w is None:
            self.cmd_foot_w = state.base_to_world(foot_b)

        cols_xy, cols_top = self._occupied_columns(state, scan)

        # prep phase: hold the pedip foot down until the trunk has shifted over
        # the three-foot support centroid, otherwise lifting it tips the base
        if not self._lift_ok:
            support = [l for l in range(4) if l != m.pedip_leg]
            shift_err = max(float(np.linalg.norm(self._stance_default[l][:2] - feet_b[l][:2]))
                            for l in support)
            if shift_err < 0.03:
                self._lift_ok = True
                self._hold_xy = state.base_pos[:2].copy()
        if self._lift_ok:
            wp_w = self._route(state, self.cmd_foot_w, target_w, cols_xy, cols_top, command.switch)
        else:
            wp_w = state.base_to_world(foot_b)

        # slew the persistent commanded point toward the waypoint
        d = wp_w - self.cmd_foot_w
        n = float(np.linalg.norm(d))
        max_step = self.cfg.track_speed * self.dt
        if n > max_step:
            d = d / n * max_step
        self.cmd_foot_w = self.cmd_foot_w + d

        self._update_gait(state, target_w, cols_xy, cols_top)
        self._clock += self.dt

        # stabilization overlay: stance feet lead the base velocity (damps the
        # translation limit cycle the friction ratchet would otherwise pump),
        # servo the base back to its hold position while standing, and modulate
        # foot height against roll/pitch rate; while walking the world slots
        # hold position instead
        cfg = self.cfg
        v_b = state.base_lin_vel_b()
        w_b = state.base_ang_vel_b()
        lean = cfg.lean_tau * v_b[:2]
        if self._hold_xy is not None and not self.gait_active:
            err_hold = state.world_to_base(np.array([self._hold_xy[0], self._hold_xy[1],
                                                     self._ground_est + self.m.stance_height()]))
            lean = lean - cfg.hold_gain * err_hold[:2]
        lean = np.clip(lean, -cfg.lean_cap, cfg.lean_cap)

        action = np.zeros(12)
        cmd_b = self._clamp_reachable(state.world_to_base(self.cmd_foot_w))
        q_pedip = m.leg_ik(cmd_b, m.pedip_leg)
        defaults = m.default_joint_pos.reshape(4, 3)
        if q_pedip is not None:
            action.reshape(4, 3)[m.pedip_leg] = q_pedip - defaults[m.pedip_leg]
        else:
            action.reshape(4, 3)[m.pedip_leg] = self._last_action.reshape(4, 3)[m.pedip_leg]
        walking = self.gait_active and self._stance_world is not None
        if not walking:
            # standing (or prep): glide the base-frame targets toward the biased stance
            for leg in range(4):
                if leg == m.pedip_leg:
                    continue
                d = self._stance_default[leg] - self.stance_targets[leg]
                step = cfg.stance_return_speed * self.dt
                n2 = float(np.linalg.norm(d))
                self.stance_targets[leg] = (
                    self._stance_default[leg] if n2 < step else self.stance_targets[leg] + d / n2 * step
                )
        for leg in range(4):
            if leg == m.pedip_leg:
                continue
            if walking:
                p = self._stance_command(state, leg)
            else:
                p = self.stance_targets[leg].copy()
            p[:2] += lean
            p[2] += float(np.clip(cfg.attitude_tau * np.cross(w_b, p)[2], -cfg.lean_cap, cfg.lean_cap))
            q_leg = m.leg_ik(p, leg)
            if q_leg is None:
                q_leg = m.leg_ik(self.stance_targets[leg], leg)  # drop the overlay
            if q_leg is None:
                # shrink toward the hip column until reachable; never freeze a stance leg
                hip = m.hip_mounts()[leg] + np.array([0.0, 0.0, -0.3])
                p2 = self.stance_targets[leg].copy()
                for _ in range(20):
                    p2 = hip + 0.9 * (p2 - hip)
                    q_leg = m.leg_ik(p2, leg)
                    if q_leg is not None:
                        break
            if q_leg is not None:
                action.reshape(4, 3)[leg] = q_leg - defaults[leg]
            else:
                action.reshape(4, 3)[leg] = self._last_action.reshape(4, 3)[leg]
        action = np.clip(action, -m.action_bound, m.action_bound)
        self._last_action = action
        return action
