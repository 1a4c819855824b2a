"""Teleoperation service.

Runs the simulated compliant end-effector at 200 Hz, applies velocity-style
operator commands to the desired pose, switches gain profiles on operator
keys, broadcasts state at 30 Hz, and records demonstrations.

Wire protocol: JSON frames.  Over raw TCP each frame is length-prefixed
with a 4-byte big-endian size; over the WebSocket endpoint the same JSON
payloads ride text messages (the WS layer does its own framing, so
browsers can consume the protocol directly).  Frame types:

    client -> server:
      {"type": "cmd", "v_sm": [6], "mode_key": "free|contact|insertion|compliant"?,
       "speed_level": "low|med|high"?, "frame_toggle": "base|ee"?,
       "gripper_toggle": bool?, "home": bool?, "randomize": bool?}
      {"type": "rebias"}
      {"type": "record_start", "name": str}
      {"type": "record_stop"}
    server -> client:
      {"type": "hello", "schema": ..., "scene": {...}, "geom": {...}}
      {"type": "state", "t": s, "g_ee": {...}, "g_d": {...}, "f_ext": [6],
       "mode": str, "speed": str, "frame": str, "gripper": str,
       "recording": bool, "rebias_active": bool, "tip": [3], "target": {...}}
      {"type": "error", "message": str}

Commands are sampled latest-wins: the control loop consumes at most one
command per tick and never interpolates.  One loop thread owns the
simulator and filter state; network threads only exchange immutable
snapshots through queues.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .admittance import (
    FtFilterState,
    GainProfile,
    Gains,
    ft_filter_step,
    ft_rebias,
)
from .liegroup import BODY, Pose, Twist, Wrench, euler_xyz_to_matrix
from .sim import (
    GRIPPER_OPEN,
    ContactParams,
    FtNoise,
    PegHoleGeom,
    ScenarioSpec,
    Scene,
    SimState,
    build_scenario,
    ft_sense,
    step,
    success_check,
    try_close_gripper,
)

log = logging.getLogger("equicontact.teleopd")

SCHEMA = "equicontact-demo/1"

CONTROL_HZ = 200.0
STATE_HZ = 30.0
RECORD_HZ = 30.0

SPEED_SCALE = {"low": 0.25, "med": 1.0, "high": 2.5}
DEFAULT_POS_OFFSET = 0.0005    # m per unit stick deflection per tick (med)
DEFAULT_ROT_OFFSET = 0.005     # rad per unit stick deflection per tick (med)

REBIAS_SAMPLES = 400


@dataclass(frozen=True)
class TeleopCommand:
    """One operator input sample (normalized stick units in [-1, 1])."""

    v_sm: np.ndarray
    mode_key: str | None = None
    speed_level: str | None = None       # low | med | high
    frame_toggle: str | None = None      # base | ee
    gripper_toggle: bool = False
    home: bool = False
    randomize: bool = False

    def __post_init__(self):
        v = np.asarray(self.v_sm, dtype=float).reshape(6)
        if np.any(np.abs(v) > 1.0 + 1e-9):
            raise ValueError("stick components must lie in [-1, 1]")
        object.__setattr__(self, "v_sm", v)
        if self.speed_level is not None and self.speed_level not in SPEED_SCALE:
            raise ValueError(f"unknown speed level {self.speed_level!r}")
        if self.frame_toggle not in (None, "base", "ee"):
            raise ValueError(f"unknown frame {self.frame_toggle!r}")

    @staticmethod
    def from_dict(d: dict) -> "TeleopCommand":
        return TeleopCommand(
            v_sm=d.get("v_sm", [0.0] * 6),
            mode_key=d.get("mode_key"),
            speed_level=d.get("speed_level"),
            frame_toggle=d.get("frame_toggle"),
            gripper_toggle=bool(d.get("gripper_toggle", False)),
            home=bool(d.get("home", False)),
            randomize=bool(d.get("randomize", False)),
        )


def teleop_update(p_d: np.ndarray, R_d: np.ndarray, cmd: TeleopCommand,
                  pos_offset: float = DEFAULT_POS_OFFSET,
                  rot_offset: float = DEFAULT_ROT_OFFSET,
                  speed_level: str = "med",
                  frame: str = "base") -> tuple[np.ndarray, np.ndarray]:
    """Incremental desired-pose update from one stick sample.

    Translation integrates in the base frame (or the end-effector frame
    when toggled); rotation always composes on the right, i.e. about the
    end-effector's own axes.
    """
    if pos_offset <= 0 or rot_offset <= 0:
        raise ValueError("offsets must be positive")
    scale = SPEED_SCALE[speed_level]
    dp = cmd.v_sm[:3] * pos_offset * scale
    dth = cmd.v_sm[3:] * rot_offset * scale
    if frame == "ee":
        dp = R_d @ dp
    p_new = p_d + dp
    R_new = R_d @ euler_xyz_to_matrix(dth)
    return p_new, R_new


def set_gain_mode(mode_key: str) -> Gains:
    """Operator gain profiles by key name."""
    try:
        profile = GainProfile(mode_key)
    except ValueError:
        raise ValueError(f"unknown gain mode {mode_key!r}") from None
    return profile.gains()


# ---------------------------------------------------------------------------
# demo records
# ---------------------------------------------------------------------------


@dataclass
class DemoRecord:
    """A recorded demonstration: 30 Hz samples plus the dense command track.

    The dense (200 Hz) track of (g_d, gains) is what makes bit-faithful
    replay possible; the 30 Hz samples are the dataset view and the replay
    checkpoints.
    """

    header: dict
    samples: list = field(default_factory=list)   # 30 Hz dicts
    ctrl: list = field(default_factory=list)      # 200 Hz command dicts

    def validate(self) -> None:
        ts = [s["t"] for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample timestamps must be strictly increasing")
        period = 1.0 / RECORD_HZ
        tick = 1.0 / CONTROL_HZ
        for a, b in zip(ts, ts[1:]):
            if abs((b - a) - period) > tick + 1e-9:
                raise ValueError(f"sample spacing {b - a:.4f}s outside "
                                 f"{period:.4f}s +- one tick")

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps({"type": "header", **self.header}) + "\n")
            for c in self.ctrl:
                fh.write(json.dumps({"type": "ctrl", **c}) + "\n")
            for s in self.samples:
                fh.write(json.dumps({"type": "sample", **s}) + "\n")

    @staticmethod
    def load(path) -> "DemoRecord":
        header, samples, ctrl = None, [], []
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                kind = rec.pop("type", None)
                if kind == "header":
                    header = rec
                elif kind == "sample":
                    samples.append(rec)
                elif kind == "ctrl":
                    ctrl.append(rec)
                else:
                    raise ValueError(f"unknown record type {kind!r}")
        if header is None or header.get("schema") != SCHEMA:
            raise ValueError("missing or incompatible demo header")
        return DemoRecord(header, samples, ctrl)


@dataclass(frozen=True)
class ReplayReport:
    ok: bool
    max_pose_err: float
    first_divergence_t: float | None
    outcome: str
    samples_checked: int


def record_replay(demo: DemoRecord, tol: float = 1e-6) -> ReplayReport:
    """Drive the seeded simulator with the recorded command track and check
    that the recorded end-effector path is reproduced at every sample."""
    demo.validate()
    if not demo.ctrl:
        return ReplayReport(True, 0.0, None, "in-progress", 0)
    spec = ScenarioSpec.from_dict(demo.header["scenario"])
    scene = build_scenario(spec)
    geom = PegHoleGeom(**demo.header.get("geom", {}))
    cp = ContactParams.from_dict(demo.header.get("contact", ContactParams().to_dict()))
    v0 = demo.header.get("v_b0", [0.0] * 6)
    state = SimState(Pose.from_dict(demo.header["g_ee0"]),
                     Twist.from_vec(v0, BODY),
                     gripper=demo.header.get("gripper0", GRIPPER_OPEN),
                     t=float(demo.header.get("t0", 0.0)))

    sample_iter = iter(demo.samples)
    pending = next(sample_iter, None)
    max_err = 0.0
    first_div = None
    checked = 0
    for c in demo.ctrl:
        gains = Gains.from_stiffness(c["kp"], c["kr"])
        g_d = Pose.from_dict(c["g_d"])
        if c.get("gripper_close"):
            state = try_close_gripper(state, scene, geom)
        if c.get("gripper_open"):
            state = SimState(state.g_ee, state.v_b, gripper=GRIPPER_OPEN,
                             t=state.t, contact_active=state.contact_active)
        state, _ = step(state, scene, geom, cp, g_d, gains)
        while pending is not None and state.t >= pending["t"] - 1e-9:
            g_rec = Pose.from_dict(pending["g_ee"])
            err = float(np.max(np.abs(g_rec.p - state.g_ee.p)))
            err = max(err, float(np.max(np.abs(g_rec.R - state.g_ee.R))))
            max_err = max(max_err, err)
            if err > tol and first_div is None:
                first_div = pending["t"]
            checked += 1
            pending = next(sample_iter, None)
    return ReplayReport(first_div is None, max_err, first_div,
                        success_check(state, scene, geom, timeout_s=float("inf")),
                        checked)


# ---------------------------------------------------------------------------
# framing
# ---------------------------------------------------------------------------


def send_frame(sock: socket.socket, obj: dict) -> None:
    data = json.dumps(obj).encode("utf-8")
    sock.sendall(struct.pack(">I", len(data)) + data)


def recv_frame(sock: socket.socket) -> dict | None:
    head = _recv_exact(sock, 4)
    if head is None:
        return None
    (size,) = struct.unpack(">I", head)
    if size > 1 << 20:
        raise ValueError("frame too large")
    body = _recv_exact(sock, size)
    if body is None:
        return None
    return json.loads(body.decode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


# ---------------------------------------------------------------------------
# server
# ---------------------------------------------------------------------------


class TeleopServer:
    """200 Hz teleoperation loop with TCP and WebSocket frontends.

    The control loop owns all mutable simulation state.  Clients feed a
    latest-wins command slot; outbound state snapshots fan out through
    per-client queues (a slow client drops frames rather than stalling
    the loop).
    """

    def __init__(self, scenario: ScenarioSpec | None = None,
                 bind: str = "127.0.0.1:0", ws_bind: str | None = "127.0.0.1:0",
                 record_dir=None, seed: int = 0, realtime: bool = True,
                 ft_noise: FtNoise | None = None):
        self.scenario = scenario or ScenarioSpec()
        self.scene: Scene = build_scenario(self.scenario)
        self.geom = PegHoleGeom()
        self.cp = ContactParams()
        self.record_dir = record_dir
        self.seed = seed
        self.realtime = realtime

        self._cmd_lock = threading.Lock()
        self._latest_cmd: TeleopCommand | None = None
        self._requests: queue.Queue = queue.Queue()
        self._clients: list[queue.Queue] = []
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._tick_errors: list[float] = []
        self.last_demo: DemoRecord | None = None

        rng = np.random.default_rng(seed)
        self.ft_noise = ft_noise if ft_noise is not None else FtNoise(
            bias=rng.uniform(-2.0, 2.0, 6) * np.array([1, 1, 1, 0.1, 0.1, 0.1]))
        self._ft_rng = np.random.default_rng(seed + 1)
        self._home_rng = np.random.default_rng(seed + 2)

        host, port = bind.rsplit(":", 1)
        self._tcp_sock = socket.create_server((host, int(port)))
        self.tcp_address = self._tcp_sock.getsockname()
        self._ws_server = None
        self._ws_bind = ws_bind
        self.ws_address = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        t = threading.Thread(target=self._control_loop, name="teleop-loop",
                             daemon=True)
        t.start()
        self._threads.append(t)
        t = threading.Thread(target=self._tcp_accept_loop, name="teleop-tcp",
                             daemon=True)
        t.start()
        self._threads.append(t)
        if self._ws_bind is not None:
            self._start_ws()

    def stop(self) -> None:
        self._stop.set()
        try:
            self._tcp_sock.close()
        except OSError:
            pass
        if self._ws_server is not None:
            self._ws_server.shutdown()
        for t in self._threads:
            t.join(timeout=2.0)

    def _start_ws(self) -> None:
        from websockets.sync.server import serve as ws_serve

        host, port = self._ws_bind.rsplit(":", 1)
        self._ws_server = ws_serve(self._ws_session, host, int(port))
        self.ws_address = ("127.0.0.1" if host in ("0.0.0.0", "") else host,
                           self._ws_server.socket.getsockname()[1])
        t = threading.Thread(target=self._ws_server.serve_forever,
                             name="teleop-ws", daemon=True)
        t.start()
        self._threads.append(t)

    # -- client plumbing ----------------------------------------------------

    def _hello(self) -> dict:
        return {
            "type": "hello",
            "schema": SCHEMA,
            "scenario": self.scenario.to_dict(),
            "scene": {
                "g_platform": self.scene.g_platform.to_dict(),
                "g_hole": self.scene.g_hole.to_dict(),
                "g_peg_initial": self.scene.g_peg_initial.to_dict(),
                "tilt_deg": self.scene.tilt_deg,
            },
            "geom": {
                "peg_diameter": self.geom.peg_diameter,
                "hole_diameter": self.geom.hole_diameter,
                "hole_depth": self.geom.hole_depth,
                "chamfer": self.geom.chamfer,
                "peg_length": self.geom.peg_length,
                "tip_offset": self.geom.tip_offset,
                "platform_radius": self.geom.platform_radius,
            },
            "rates": {"control_hz": CONTROL_HZ, "state_hz": STATE_HZ},
        }

    def _register_client(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=8)
        with self._clients_lock:
            self._clients.append(q)
        return q

    def _drop_client(self, q: queue.Queue) -> None:
        with self._clients_lock:
            if q in self._clients:
                self._clients.remove(q)

    def _broadcast(self, frame: dict) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for q in clients:
            try:
                q.put_nowait(frame)
            except queue.Full:
                try:                      # slow client: drop the oldest frame
                    q.get_nowait()
                    q.put_nowait(frame)
                except (queue.Empty, queue.Full):
                    pass

    def _handle_frame(self, frame: dict) -> tuple[dict | None, bool]:
        """Client frame -> (optional reply, fatal).  Unknown frame types are
        protocol violations and close the session; semantically bad commands
        only earn an error frame."""
        kind = frame.get("type")
        if kind == "cmd":
            try:
                cmd = TeleopCommand.from_dict(frame)
            except (ValueError, TypeError) as exc:
                return {"type": "error", "message": f"bad cmd: {exc}"}, False
            with self._cmd_lock:
                self._latest_cmd = cmd
            return None, False
        if kind in ("rebias", "record_start", "record_stop"):
            self._requests.put(frame)
            return None, False
        return {"type": "error",
                "message": f"unknown frame type {kind!r}"}, True

    def _tcp_accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._tcp_sock.accept()
            except OSError:
                return
            threading.Thread(target=self._tcp_session, args=(conn,),
                             daemon=True).start()

    def _tcp_session(self, conn: socket.socket) -> None:
        outbox = self._register_client()
        stop_writer = threading.Event()

        def writer():
            while not (stop_writer.is_set() or self._stop.is_set()):
                try:
                    frame = outbox.get(timeout=0.1)
                except queue.Empty:
                    continue
                try:
                    send_frame(conn, frame)
                except OSError:
                    return

        wt = threading.Thread(target=writer, daemon=True)
        wt.start()
        try:
            send_frame(conn, self._hello())
            while not self._stop.is_set():
                try:
                    frame = recv_frame(conn)
                except (ValueError, json.JSONDecodeError) as exc:
                    send_frame(conn, {"type": "error",
                                      "message": f"protocol violation: {exc}"})
                    break
                if frame is None:
                    break
                reply, fatal = self._handle_frame(frame)
                if reply is not None:
                    send_frame(conn, reply)
                if fatal:
                    break
        except OSError:
            pass
        finally:
            stop_writer.set()
            self._drop_client(outbox)
            try:
                conn.close()
            except OSError:
                pass

    def _ws_session(self, ws) -> None:
        outbox = self._register_client()
        stop_writer = threading.Event()

        def writer():
            while not (stop_writer.is_set() or self._stop.is_set()):
                try:
                    frame = outbox.get(timeout=0.1)
                except queue.Empty:
                    continue
                try:
                    ws.send(json.dumps(frame))
                except Exception:
                    return

        wt = threading.Thread(target=writer, daemon=True)
        wt.start()
        try:
            ws.send(json.dumps(self._hello()))
            while not self._stop.is_set():
                try:
                    raw = ws.recv(timeout=0.5)
                except TimeoutError:
                    continue
                except Exception:
                    break
                try:
                    frame = json.loads(raw)
                except json.JSONDecodeError as exc:
                    ws.send(json.dumps({"type": "error",
                                        "message": f"protocol violation: {exc}"}))
                    break
                reply, fatal = self._handle_frame(frame)
                if reply is not None:
                    ws.send(json.dumps(reply))
                if fatal:
                    break
        finally:
            stop_writer.set()
            self._drop_client(outbox)

    # -- control loop --------------------------------------------------------

    def loop_stats(self) -> dict:
        errs = np.abs(np.array(self._tick_errors)) if self._tick_errors else np.zeros(1)
        return {
            "ticks": len(self._tick_errors),
            "mean_abs_jitter_s": float(errs.mean()),
            "p95_jitter_s": float(np.percentile(errs, 95)),
            "max_jitter_s": float(errs.max()),
        }

    def _control_loop(self) -> None:
        import sys
        if self.realtime:
            # default 5 ms GIL switch interval starves the 5 ms control tick
            sys.setswitchinterval(0.0005)
        geom, cp, scene = self.geom, self.cp, self.scene
        state = SimState.initial(scene)
        g_d = state.g_ee
        mode = GainProfile.FREE
        gains = mode.gains()
        speed = "med"
        frame_mode = "base"

        filt = FtFilterState.fresh()
        f_filtered = Wrench.zero(BODY)
        rebias_buf: list | None = list()       # fill at startup, then on request
        recording: DemoRecord | None = None
        record_path = None
        next_state_t = 0.0
        next_sample_t = 0.0

        dt = 1.0 / CONTROL_HZ
        t0 = time.perf_counter()
        tick = 0
        while not self._stop.is_set():
            # latest-wins command sampling: at most one per tick
            with self._cmd_lock:
                cmd, self._latest_cmd = self._latest_cmd, None

            grip_close = grip_open = False
            if cmd is not None:
                if cmd.mode_key:
                    try:
                        gains = set_gain_mode(cmd.mode_key)
                        mode = GainProfile(cmd.mode_key)
                    except ValueError:
                        self._broadcast({"type": "error",
                                         "message": f"unknown mode {cmd.mode_key!r}"})
                if cmd.speed_level:
                    speed = cmd.speed_level
                if cmd.frame_toggle:
                    frame_mode = cmd.frame_toggle
                if cmd.home or cmd.randomize:
                    pose = scene.g_ee_start
                    if cmd.randomize:
                        jitter = self._home_rng.uniform(-0.05, 0.05, 3)
                        pose = Pose(pose.p + jitter, pose.R)
                    state = SimState(pose, Twist.zero(), gripper=state.gripper)
                    g_d = pose
                if cmd.gripper_toggle:
                    if state.gripper == GRIPPER_OPEN:
                        grip_close = True
                        state = try_close_gripper(state, scene, geom)
                    else:
                        grip_open = True
                        state = SimState(state.g_ee, state.v_b,
                                         gripper=GRIPPER_OPEN, t=state.t)
                p, R = teleop_update(g_d.p, g_d.R, cmd, speed_level=speed,
                                     frame=frame_mode)
                g_d = Pose(p, R)

            # service queued requests
            while True:
                try:
                    req = self._requests.get_nowait()
                except queue.Empty:
                    break
                kind = req.get("type")
                if kind == "rebias":
                    rebias_buf = []
                elif kind == "record_start":
                    recording = DemoRecord(header={
                        "schema": SCHEMA,
                        "name": req.get("name", "demo"),
                        "scenario": self.scenario.to_dict(),
                        "geom": {},
                        "contact": cp.to_dict(),
                        "seed": self.seed,
                        "g_ee0": state.g_ee.to_dict(),
                        "v_b0": state.v_b.as_vec().tolist(),
                        "gripper0": state.gripper,
                        "t0": state.t,
                    })
                    next_sample_t = state.t
                elif kind == "record_stop" and recording is not None:
                    if self.record_dir is not None:
                        from pathlib import Path
                        out = Path(self.record_dir)
                        out.mkdir(parents=True, exist_ok=True)
                        record_path = out / f"{recording.header['name']}.jsonl"
                        recording.save(record_path)
                        log.info("demo saved to %s", record_path)
                    self.last_demo = recording
                    recording = None

            state, f_raw = step(state, scene, geom, cp, g_d, gains)
            sensed = ft_sense(f_raw, self.ft_noise, self._ft_rng)
            if rebias_buf is not None:
                rebias_buf.append(sensed)
                if len(rebias_buf) >= REBIAS_SAMPLES:
                    filt = FtFilterState.fresh(bias=ft_rebias(rebias_buf))
                    rebias_buf = None
            filt, f_filtered = ft_filter_step(filt, sensed)

            if recording is not None:
                recording.ctrl.append({
                    "t": state.t, "g_d": g_d.to_dict(),
                    "kp": gains.kp.tolist(), "kr": gains.kr.tolist(),
                    **({"gripper_close": True} if grip_close else {}),
                    **({"gripper_open": True} if grip_open else {}),
                })
                if state.t >= next_sample_t - 1e-9:
                    recording.samples.append({
                        "t": state.t,
                        "g_ee": state.g_ee.to_dict(),
                        "g_d": g_d.to_dict(),
                        "mode": mode.value,
                        "f_ext": f_filtered.as_vec().tolist(),
                        "gripper": state.gripper,
                    })
                    next_sample_t += 1.0 / RECORD_HZ

            if state.t >= next_state_t - 1e-9:
                tip = geom.tip_pose(state.g_ee)
                self._broadcast({
                    "type": "state",
                    "t": state.t,
                    "g_ee": state.g_ee.to_dict(),
                    "g_d": g_d.to_dict(),
                    "f_ext": f_filtered.as_vec().tolist(),
                    "mode": mode.value,
                    "speed": speed,
                    "frame": frame_mode,
                    "gripper": state.gripper,
                    "recording": recording is not None,
                    "rebias_active": rebias_buf is not None,
                    "tip": tip.p.tolist(),
                    "outcome": success_check(state, scene, geom,
                                             timeout_s=float("inf")),
                })
                next_state_t += 1.0 / STATE_HZ

            tick += 1
            if self.realtime:
                deadline = t0 + tick * dt
                self._sleep_until(deadline)
                if tick > 20:      # steady-state jitter, past thread warmup
                    self._tick_errors.append(time.perf_counter() - deadline)
                    if len(self._tick_errors) > 20000:
                        del self._tick_errors[:10000]

    @staticmethod
    def _sleep_until(deadline: float) -> None:
        # coarse sleep, then spin for the final stretch: sub-ms wakeups
        while True:
            remaining = deadline - time.perf_counter()
            if remaining <= 0:
                return
            if remaining > 0.0015:
                time.sleep(remaining - 0.001)
            else:
                pass  # spin


def serve(bind: str = "127.0.0.1:7643", ws_bind: str | None = "127.0.0.1:7644",
          scenario: ScenarioSpec | None = None, record_dir=None,
          seed: int = 0) -> None:
    """Blocking entry point used by the CLI."""
    server = TeleopServer(scenario=scenario, bind=bind, ws_bind=ws_bind,
                          record_dir=record_dir, seed=seed)
    server.start()
    log.info("teleop daemon on tcp://%s:%s ws://%s:%s",
             *server.tcp_address, *(server.ws_address or ("-", "-")))
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        server.stop()


# ---------------------------------------------------------------------------
# client (tests, demos, synthetic operators)
# ---------------------------------------------------------------------------


class TeleopClient:
    """Minimal TCP client for the teleop protocol."""

    def __init__(self, address):
        self.sock = socket.create_connection(address, timeout=5.0)
        self.hello = recv_frame(self.sock)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def send(self, frame: dict) -> None:
        send_frame(self.sock, frame)

    def send_cmd(self, v_sm, **kw) -> None:
        self.send({"type": "cmd", "v_sm": list(v_sm), **kw})

    def next_frame(self, timeout: float = 2.0) -> dict | None:
        self.sock.settimeout(timeout)
        try:
            return recv_frame(self.sock)
        except socket.timeout:
            return None

    def next_state(self, timeout: float = 2.0) -> dict | None:
        t_end = time.monotonic() + timeout
        while time.monotonic() < t_end:
            frame = self.next_frame(timeout=max(0.05, t_end - time.monotonic()))
            if frame is None:
                return None
            if frame.get("type") == "state":
                return frame
        return None
