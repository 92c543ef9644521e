"""Live teleoperation service: one simulated session, a websocket message
interface, and a browser cockpit served as static files.

Messages are JSON, one per websocket frame, versioned with a "v" field:
  server -> client: hello{v, scan_dims, joint_names, scene}, snapshot{...}, error{message}
  client -> server: command{target, frame, switch}, control{action, scene?}

Any number of observers may connect; the first client to send a command or
control message takes the commander lease until it disconnects. Commands latch
(latest wins) and are applied only at control-step boundaries; control actions
queue. The stepping loop is deterministic: wall clock decides when to step,
never what the step computes.
"""
import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .env import SimSession
from .evalrun import TrajectoryLog, make_controller
from .mdp import FootCommand
from .robot import JOINT_NAMES, Morphology
from .scenarios import EVAL_SCENE_NAMES, build_eval_scene

MESSAGE_VERSION = 1

CONTROL_ACTIONS = ("pause", "resume", "reset", "load_scene")


class TeleopError(ValueError):
    pass


@dataclass
class TeleopConfig:
    snapshot_every: int = 2          # control steps between snapshots (50 Hz / 2 -> ~20 Hz underlying budget)
    safety_lo: tuple = (-2.0, -2.0, 0.0)
    safety_hi: tuple = (2.0, 2.0, 1.3)


class TeleopHub:
    """Transport-independent session core: mailbox in, snapshots out.

    submit() is safe to call from network threads; tick() is called by exactly
    one stepping context and advances one control step.
    """

    def __init__(self, scene_name: str = "switch_demo", controller="baseline",
                 morphology: Optional[Morphology] = None, cfg: TeleopConfig = TeleopConfig()):
        self.cfg = cfg
        self.morphology = morphology or Morphology()
        self.controller_spec = controller
        self._lock = threading.Lock()
        self._controls: deque = deque()
        self._pending_command: Optional[FootCommand] = None
        self.commander: Optional[str] = None
        self.paused = False
        self.snapshot_seq = 0
        self._snapshots: deque = deque(maxlen=8)
        self._step_count = 0
        self._load(scene_name)

    # -- session lifecycle -------------------------------------------------------

    def _load(self, scene_name: str) -> None:
        if scene_name not in EVAL_SCENE_NAMES:
            raise TeleopError(f"unknown scene {scene_name!r}")
        self.scene_name = scene_name
        self.scene = build_eval_scene(scene_name)
        self.session = SimSession(self.scene, morphology=self.morphology)
        self.controller = make_controller(self.controller_spec, self.morphology,
                                          self.session.scan_spec, self.session.control_dt)
        self.log = TrajectoryLog(dt=self.session.control_dt, scene=scene_name)
        self._step_count = 0

    def _reset(self) -> None:
        self.session.reset()
        if hasattr(self.controller, "reset"):
            self.controller.reset()
        self.log = TrajectoryLog(dt=self.session.control_dt, scene=self.scene_name)
        self._step_count = 0

    # -- message handling ----------------------------------------------------------

    def submit(self, client_id: str, message) -> Optional[dict]:
        """Handle one client message; returns an error/ack dict or None."""
        try:
            msg = json.loads(message) if isinstance(message, (str, bytes)) else message
            if not isinstance(msg, dict):
                raise TeleopError("message must be a JSON object")
            kind = msg.get("type")
            if kind == "command":
                return self._handle_command(client_id, msg)
            if kind == "control":
                return self._handle_control(client_id, msg)
            raise TeleopError(f"unknown message type {msg.get('type')!r}")
        except TeleopError as e:
            return {"type": "error", "v": MESSAGE_VERSION, "message": str(e)}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            return {"type": "error", "v": MESSAGE_VERSION, "message": f"malformed message: {e}"}

    def _acquire_lease(self, client_id: str) -> None:
        with self._lock:
            if self.commander is None:
                self.commander = client_id
            if self.commander != client_id:
                raise TeleopError("another client holds the commander lease")

    def release(self, client_id: str) -> None:
        with self._lock:
            if self.commander == client_id:
                self.commander = None

    def _handle_command(self, client_id: str, msg: dict) -> Optional[dict]:
        self._acquire_lease(client_id)
        target = np.asarray(msg["target"], dtype=float)
        if target.shape != (3,) or not np.all(np.isfinite(target)):
            raise TeleopError("command target must be a finite 3-vector")
        frame = msg.get("frame", "base")
        switch = int(msg.get("switch", 0))
        command = FootCommand(target=target, switch=switch, frame=frame)
        target_b = target if frame == "base" else self.session.world.robot.world_to_base(target)
        lo, hi = np.asarray(self.cfg.safety_lo), np.asarray(self.cfg.safety_hi)
        if np.any(target_b < lo) or np.any(target_b > hi):
            raise TeleopError("command target outside the safety box")
        with self._lock:
            self._pending_command = command
        return None

    def _handle_control(self, client_id: str, msg: dict) -> Optional[dict]:
        self._acquire_lease(client_id)
        action = msg.get("action")
        if action not in CONTROL_ACTIONS:
            raise TeleopError(f"unknown control action {action!r}")
        if action == "load_scene" and msg.get("scene") not in EVAL_SCENE_NAMES:
            raise TeleopError(f"unknown scene {msg.get('scene')!r}")
        with self._lock:
            self._controls.append((action, msg.get("scene")))
        return None

    # -- stepping ---------------------------------------------------------------

    def tick(self) -> Optional[dict]:
        """Advance one control step (unless paused) and maybe emit a snapshot.

        Pending control actions and the latched command apply atomically at
        this boundary, never mid-step.
        """
        with self._lock:
            controls = list(self._controls)
            self._controls.clear()
            pending = self._pending_command
            self._pending_command = None
        for action, scene in controls:
            if action == "pause":
                self.paused = True
            elif action == "resume":
                self.paused = False
            elif action == "reset":
                self._reset()
            elif action == "load_scene":
                self._load(scene)
        if pending is not None:
            self.session.set_command(pending)
        if not self.paused:
            scan = self.session.scan()
            action_vec = self.controller(self.session.world.robot, scan, self.session.command)
            rec = self.session.step(action_vec)
            self.log.append(rec)
            self._step_count += 1
        if self._step_count % self.cfg.snapshot_every == 0 or self.paused:
            snap = self.snapshot()
            with self._lock:
                self.snapshot_seq += 1
                self._snapshots.append((self.snapshot_seq, snap))
            return snap
        return None

    def snapshots_since(self, seq: int):
        with self._lock:
            return [(s, snap) for s, snap in self._snapshots if s > seq]

    def snapshot(self) -> dict:
        """Serializable state snapshot for observers."""
        s = self.session.world.robot
        feet = self.session.foot_positions()
        cmd = self.session.command
        last = self.log.records[-1] if self.log.records else None
        return {
            "type": "snapshot",
            "v": MESSAGE_VERSION,
            "t": self.session.time,
            "scene": self.scene_name,
            "paused": self.paused,
            "base_pos": s.base_pos.tolist(),
            "base_quat": s.base_quat.tolist(),
            "joint_pos": s.joint_pos.tolist(),
            "feet": feet.tolist(),
            "command": cmd.target_world(s).tolist(),
            "switch": cmd.switch,
            "tracking_error": self.session.tracking_error(),
            "scan": self.session.scan().tolist(),
            "obstacles": [
                {
                    "id": ob.obstacle_id,
                    "half_extents": ob.half_extents.tolist(),
                    "position": ob.position.tolist(),
                    "yaw": ob.yaw,
                }
                for ob in self.session.world.obstacles
            ],
            "reward": last["reward"] if last else None,
        }

    def hello(self) -> dict:
        spec = self.session.scan_spec
        return {
            "type": "hello",
            "v": MESSAGE_VERSION,
            "scan_dims": [spec.nx, spec.ny],
            "joint_names": list(JOINT_NAMES),
            "scene": self.scene_name,
            "snapshot_every": self.cfg.snapshot_every,
            "control_dt": self.session.control_dt,
        }


def run_scripted_session(hub: TeleopHub, script, steps: int):
    """Drive a hub headlessly: script maps step index -> message dict or None.

    Returns (TrajectoryLog, [message dicts]) with every emitted snapshot
    captured, exactly as a websocket observer would have seen them.
    """
    captured = [hub.hello()]
    for k in range(steps):
        msg = script(k) if callable(script) else script.get(k)
        if msg is not None:
            reply = hub.submit("scripted", json.dumps(msg))
            if reply is not None:
                captured.append(reply)
        snap = hub.tick()
        if snap is not None:
            captured.append(snap)
    return hub.log, captured


def record_session(hub: TeleopHub) -> TrajectoryLog:
    """The session's trajectory log so far (same schema as the eval harness)."""
    return hub.log


# --- transport ---------------------------------------------------------------

def create_app(hub: TeleopHub):
    """FastAPI app exposing /ws plus the static cockpit."""
    import asyncio

    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(title="pedisim teleop")
    app.state.hub = hub

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket):
        await ws.accept()
        client_id = f"{ws.client.host}:{ws.client.port}" if ws.client else str(id(ws))
        await ws.send_json(hub.hello())
        seq = 0

        async def pump_snapshots():
            nonlocal seq
            while True:
                for s, snap in hub.snapshots_since(seq):
                    seq = s
                    await ws.send_json(snap)
                await asyncio.sleep(0.01)

        pump = asyncio.create_task(pump_snapshots())
        try:
            while True:
                text = await ws.receive_text()
                reply = hub.submit(client_id, text)
                if reply is not None:
                    await ws.send_json(reply)
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            hub.release(client_id)

    static_dir = Path(__file__).parent / "static"
    if static_dir.exists():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="cockpit")
    return app


def serve_session(scene_name: str, controller="baseline", port: int = 8720, run_cfg=None) -> None:
    """Run the stepping loop and the websocket server until shutdown.

    Real-time pacing uses a fixed-step accumulator; when compute falls behind,
    simulation time stretches instead of skipping steps.
    """
    import uvicorn

    morphology = run_cfg.env.morphology if run_cfg is not None else None
    cfg = TeleopConfig()
    if run_cfg is not None:
        cfg = TeleopConfig(safety_lo=run_cfg.teleop.safety_lo, safety_hi=run_cfg.teleop.safety_hi)
    hub = TeleopHub(scene_name, controller, morphology=morphology, cfg=cfg)
    app = create_app(hub)
    stop = threading.Event()

    def stepper():
        dt = hub.session.control_dt
        debt = 0.0
        last = time.monotonic()
        while not stop.is_set():
            now = time.monotonic()
            debt = min(debt + (now - last), 0.25)  # cap: stretch time, never skip
            last = now
            while debt >= dt:
                hub.tick()
                debt -= dt
            time.sleep(0.002)

    thread = threading.Thread(target=stepper, daemon=True)
    thread.start()
    try:
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    finally:
        stop.set()
        thread.join(timeout=2.0)
