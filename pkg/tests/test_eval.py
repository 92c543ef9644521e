import numpy as np
import pytest

from pedisim.evalrun import (
    COLLISION_GROUPS,
    REFERENCE_TRACKING,
    TrajectoryLog,
    classify_collisions,
    run_free_space_eval,
    run_scene_eval,
    summarize,
    write_summary_csv,
)
from pedisim.geometry import Contact
from pedisim.robot import Morphology, RobotState, forward_kinematics, quat_from_yaw


class TeleportController:
    """Test oracle: commands zero actions; the override pins the robot so the
    pedipulating foot sits exactly on the command."""

    def __call__(self, state, scan, command):
        return np.zeros(12)

    @staticmethod
    def override(sess):
        m = sess.morphology
        s = sess.world.robot
        s.base_quat = np.array([1.0, 0.0, 0.0, 0.0])
        s.joint_pos = m.default_joint_pos.copy()
        foot_offset = m.foot_positions_base(m.default_joint_pos)[m.pedip_leg]
        s.base_pos = sess.command.target_world(s) - foot_offset
        s.lin_vel = np.zeros(3)
        s.ang_vel = np.zeros(3)
        s.joint_vel = np.zeros(12)


class TestFreeSpace:
    def test_oracle_controller_zero_error(self):
        report = run_free_space_eval(TeleportController(), n_commands=8, settle_seconds=0.2,
                                     state_override=TeleportController.override)
        assert report.mean_tracking_error < 1e-12

    def test_seeded_runs_identical(self):
        a = run_free_space_eval("baseline", n_commands=2, settle_seconds=0.5, seed=3)
        b = run_free_space_eval("baseline", n_commands=2, settle_seconds=0.5, seed=3)
        assert a.to_dict() == b.to_dict()

    def test_reference_annotations_attached(self):
        report = run_free_space_eval(TeleportController(), n_commands=1, settle_seconds=0.1,
                                     state_override=TeleportController.override)
        assert report.reference == REFERENCE_TRACKING
        assert report.reference["free_space_switch_off_m"] == 0.057
        assert report.reference["free_space_switch_on_m"] == 0.047


class TestSceneEval:
    def test_sweep_clear_baseline(self):
        log, report = run_scene_eval("single_sweep_clear", "baseline")
        assert sum(report.collisions.values()) == 0
        assert report.mean_tracking_error < 0.10
        assert report.passed is True
        assert len(log) > 100

    def test_unknown_scene(self):
        with pytest.raises(KeyError):
            run_scene_eval("nope", "baseline")


class TestCollisions:
    def test_classification(self):
        contacts = [
            Contact("RF_FOOT", "obstacle:0", np.array([1.0, 0, 0]), np.zeros(3)),
            Contact("LF_FOOT", "ground", np.array([0, 0, 100.0]), np.zeros(3)),  # support, not a collision
            Contact("LH_FOOT", "obstacle:1", np.array([0.5, 0, 0]), np.zeros(3)),
            Contact("RF_KNEE", "ground", np.array([2.0, 0, 0]), np.zeros(3)),
            Contact("BASE", "obstacle:0", np.array([3.0, 0, 0]), np.zeros(3)),
            Contact("RF_FOOT", "self:LF_KNEE", np.array([0.1, 0, 0]), np.zeros(3)),
            Contact("LF_HIP", "obstacle:0", np.array([0.0005, 0, 0]), np.zeros(3)),  # below threshold
        ]
        counts = classify_collisions(contacts)
        assert counts == {"pedip_foot": 1, "other_feet": 1, "hips_knees": 1, "base": 1, "self": 1}

    def test_groups_stable(self):
        assert COLLISION_GROUPS == ("pedip_foot", "other_feet", "hips_knees", "base", "self")


class TestLogsAndSummaries:
    def _small_log(self):
        log, _ = run_scene_eval("single_sweep_clear", "baseline")
        return log

    def test_log_round_trip(self, tmp_path):
        log = self._small_log()
        p = tmp_path / "run.jsonl"
        log.save(p)
        loaded = TrajectoryLog.load(p)
        assert len(loaded) == len(log)
        assert loaded.records[0] == log.records[0]
        assert loaded.scene == "single_sweep_clear"

    def test_summarize_row_count_and_recomputed_error(self, tmp_path):
        log = self._small_log()
        tables = summarize([log])
        rows = tables["single_sweep_clear"]
        assert len(rows) == len(log)
        for row in rows:
            assert abs(row[7] - row[8]) < 1e-9  # logged vs recomputed error
        paths = write_summary_csv(tables, tmp_path)
        assert paths[0].exists()
        header = paths[0].read_text().splitlines()[0]
        assert header.startswith("t,cmd_x")

    def test_summarize_rejects_empty(self):
        with pytest.raises(ValueError):
            summarize([])

    def test_log_time_monotonic(self):
        log = TrajectoryLog(dt=0.02, scene="x")
        from pedisim.env import StepRecord
        from pedisim.mdp import RewardBreakdown

        def rec(t):
            return StepRecord(
                time=t, base_pos=np.zeros(3), base_quat=np.array([1.0, 0, 0, 0]),
                joint_pos=np.zeros(12), foot_positions=np.zeros((4, 3)), command=np.zeros(3),
                switch=0, breakdown=RewardBreakdown().finalize(), contacts=[],
                tracking_error=0.0, fell=False,
            )

        log.append(rec(0.02))
        with pytest.raises(ValueError):
            log.append(rec(0.02))
