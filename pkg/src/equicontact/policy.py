"""Localized policy layer.

Everything here is expressed in the end-effector tool frame: observations
are a body-frame pose error against an estimated reference (GCEV), a
body-frame force-torque reading, and a left-invariant local feature
vector.  Actions are chunks of relative poses plus temporary gain
diagonals.  Because neither observations nor actions mention the world
frame, the policies are left-invariant by construction, and the composed
spatial command g(k) * g_rel is left-equivariant.

Frame conventions (shared with the simulator):
- tool z-axis points toward the workpiece; descending is +z in the body
  frame, and pressing onto a surface shows up as a negative body-z force.
- feature vectors are [valid, offset_xyz, axis_xyz]: the body-frame vector
  from the tool tip to the object target point and the body-frame object
  axis direction, or zeros with valid=0 when the view is invalid.

The scripted policies are deterministic, memoryless stand-ins for a
learned chunking policy: they honor the same observation/action contract
so the surrounding pipeline (reference estimation, temporal ensembling,
admittance control) can be exercised and property-tested end to end.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .liegroup import (
    BODY,
    Pose,
    Wrench,
    euler_xyz_to_matrix,
    skew_part_vee,
    so3_exp,
    weighted_rotation_mean,
)

# Gain envelope shared with the teleop profiles (soft 300 ... stiff 1500).
GAIN_MIN = 300.0
GAIN_MAX = 1500.0

FEATURE_LEN = 7


# ---------------------------------------------------------------------------
# Observation side
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gcev:
    """Body-frame pose error: e_p = R^T (p - p_ref), e_r = (R_ref^T R - R^T R_ref)^vee."""

    e_p: np.ndarray
    e_r: np.ndarray

    def __post_init__(self):
        e_p = np.asarray(self.e_p, dtype=float).reshape(3)
        e_r = np.asarray(self.e_r, dtype=float).reshape(3)
        if not (np.all(np.isfinite(e_p)) and np.all(np.isfinite(e_r))):
            raise ValueError("GCEV entries must be finite")
        # entries of e_r are 2 sin(theta) * axis, so the norm tops out at 2
        if np.linalg.norm(e_r) > 2.0 + 1e-9:
            raise ValueError("rotational error residual exceeds its bound of 2")
        object.__setattr__(self, "e_p", e_p)
        object.__setattr__(self, "e_r", e_r)

    def as_vec(self) -> np.ndarray:
        return np.concatenate([self.e_p, self.e_r])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_vec()))


def compute_gcev(g: Pose, g_ref: Pose) -> Gcev:
    """Left-invariant error of g relative to g_ref, in the body frame of g."""
    e_p = g.R.T @ (g.p - g_ref.p)
    e_r = skew_part_vee(g_ref.R.T @ g.R - g.R.T @ g_ref.R)
    return Gcev(e_p, e_r)


@dataclass(frozen=True)
class LocalFeatures:
    """Decoded left-invariant feature channel (tool-frame measurements)."""

    valid: bool
    offset: np.ndarray   # tool tip -> target point, body frame (m)
    axis: np.ndarray     # target axis direction, body frame (unit)

    def as_vec(self) -> np.ndarray:
        return np.concatenate([[1.0 if self.valid else 0.0],
                               np.asarray(self.offset, dtype=float).reshape(3),
                               np.asarray(self.axis, dtype=float).reshape(3)])

    @staticmethod
    def from_vec(z) -> "LocalFeatures":
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape != (FEATURE_LEN,):
            raise ValueError(f"feature vector must have length {FEATURE_LEN}")
        return LocalFeatures(bool(z[0] > 0.5), z[1:4].copy(), z[4:7].copy())

    @staticmethod
    def invalid() -> "LocalFeatures":
        return LocalFeatures(False, np.zeros(3), np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class Observation:
    """Policy input: GCEV, body-frame wrench, feature vector."""

    gcev: Gcev
    f_ext: Wrench
    features: np.ndarray

    def __post_init__(self):
        self.f_ext.require_frame(BODY)
        z = np.asarray(self.features, dtype=float).reshape(-1)
        if z.shape != (FEATURE_LEN,):
            raise ValueError(f"feature vector must have length {FEATURE_LEN}")
        object.__setattr__(self, "features", z)

    def local_features(self) -> LocalFeatures:
        return LocalFeatures.from_vec(self.features)


# ---------------------------------------------------------------------------
# Action side
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChunkStep:
    """One future action: relative pose plus temporary gain diagonals."""

    g_rel: Pose
    kp: np.ndarray
    kr: np.ndarray

    def __post_init__(self):
        kp = np.asarray(self.kp, dtype=float).reshape(3)
        kr = np.asarray(self.kr, dtype=float).reshape(3)
        for v in (kp, kr):
            if np.any(v < GAIN_MIN - 1e-9) or np.any(v > GAIN_MAX + 1e-9):
                raise ValueError(
                    f"gain outside the [{GAIN_MIN}, {GAIN_MAX}] envelope: {v}")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kr", kr)


@dataclass(frozen=True)
class ActionChunk:
    """N-step action chunk; optionally requests a gripper close at the end."""

    steps: tuple
    gripper_close: bool = False

    def __post_init__(self):
        steps = tuple(self.steps)
        if len(steps) < 1:
            raise ValueError("an action chunk needs at least one step")
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)


def expand_chunk(g_now: Pose, chunk: ActionChunk) -> list[Pose]:
    """Spatial-frame temporary targets: g_now composed with each relative pose."""
    return [g_now @ step.g_rel for step in chunk.steps]


class EnsembleBuffer:
    """Blends overlapping chunk predictions with exponential age decay.

    Each push at policy step s records targets for steps s+1 .. s+N; the
    queried target for the upcoming step mixes all live predictions with
    weights exp(-decay * age), age 0 being the freshest chunk.
    """

    def __init__(self, decay: float = 0.1):
        if decay < 0:
            raise ValueError("decay must be nonnegative")
        self.decay = decay
        self._step = 0
        self._pending: dict[int, list[tuple[int, Pose, np.ndarray, np.ndarray]]] = {}

    def __len__(self) -> int:
        return len(self._pending.get(self._step + 1, []))

    @property
    def step(self) -> int:
        return self._step

    def push(self, g_now: Pose, chunk: ActionChunk) -> None:
        for i, (target, step) in enumerate(zip(expand_chunk(g_now, chunk),
                                               chunk.steps), start=1):
            self._pending.setdefault(self._step + i, []).append(
                (self._step, target, step.kp, step.kr))

    def advance(self) -> None:
        self._step += 1
        for key in [k for k in self._pending if k <= self._step]:
            del self._pending[key]

    def entries(self) -> list[tuple[float, Pose, np.ndarray, np.ndarray]]:
        """(weight, pose, kp, kr) for the upcoming step, weights normalized."""
        raw = self._pending.get(self._step + 1, [])
        if not raw:
            return []
        ws = np.array([math.exp(-self.decay * (self._step - emit))
                       for emit, _, _, _ in raw])
        ws = ws / ws.sum()
        return [(float(w), pose, kp, kr)
                for w, (_, pose, kp, kr) in zip(ws, raw)]


def blend_pose_predictions(entries) -> tuple[Pose, np.ndarray, np.ndarray]:
    """Weighted mean of (weight, pose, kp, kr): positions and gains linearly,
    rotations by the chordal-L2 rotation mean."""
    if not entries:
        raise ValueError("cannot ensemble an empty prediction set")
    ws = np.array([e[0] for e in entries], dtype=float)
    ws = ws / ws.sum()
    p = sum(w * e[1].p for w, e in zip(ws, entries))
    R = weighted_rotation_mean([e[1].R for e in entries], ws)
    kp = sum(w * np.asarray(e[2], dtype=float) for w, e in zip(ws, entries))
    kr = sum(w * np.asarray(e[3], dtype=float) for w, e in zip(ws, entries))
    return Pose(p, R), kp, kr


def temporal_ensemble(buf: EnsembleBuffer) -> tuple[Pose, np.ndarray, np.ndarray]:
    """Ensembled (desired pose, kp, kr) for the buffer's upcoming step."""
    return blend_pose_predictions(buf.entries())


# ---------------------------------------------------------------------------
# Reference-noise augmentation
# ---------------------------------------------------------------------------


def augment_reference(g_ref: Pose, rng: np.random.Generator,
                      trans_bound: float = 0.02,
                      rot_bound_deg: float = 8.0) -> Pose:
    """Perturb a reference pose with per-axis uniform noise.

    p + U(-trans_bound, trans_bound)^3 and R * euler_xyz(U(-rot, rot)^3);
    the defaults match the training-time corruption of the reference frame.
    """
    n_p = rng.uniform(-trans_bound, trans_bound, size=3)
    n_r = rng.uniform(-math.radians(rot_bound_deg),
                      math.radians(rot_bound_deg), size=3)
    return Pose(g_ref.p + n_p, g_ref.R @ euler_xyz_to_matrix(n_r))


# ---------------------------------------------------------------------------
# Scripted policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicyConfig:
    """Thresholds and shaping constants for the scripted policies."""

    chunk_len: int = 20            # N, steps per chunk
    ensemble_decay: float = 0.1    # m, exponential age decay
    gain_min: float = GAIN_MIN
    gain_max: float = GAIN_MAX
    contact_force: float = 5.0     # N, body-z force that counts as contact
    hover_height: float = 0.010    # m above the hole mouth
    approach_height: float = 0.080 # m used while the lateral offset is large
    approach_lat: float = 0.030    # m lateral offset that triggers high approach
    align_tol: float = 0.0012      # m, lateral alignment tolerance (must sit
                                   # above the visual noise floor and inside
                                   # the chamfer capture radius)
    step_xy: float = 0.004         # m, per-step translation clip (approach)
    step_z: float = 0.0005         # m, per-step descent clip
    step_rot: float = 0.05         # rad, per-step rotation clip
    descend_lookahead: float = 0.006   # m cap on commanded descent past the tip
    spiral_pitch: float = 0.0004   # m radial growth per turn (< clearance/2)
    spiral_max_radius: float = 0.008
    spiral_dphi: float = 0.6       # rad of spiral arc per step
    lost_lateral: float = 0.016    # believed lateral error beyond which an
                                   # "in the bore" belief is incoherent
    press_cmd: float = 0.03        # m commanded below the surface while pressing
    surface_window: float = 0.0015 # m of depth still counted as blocked-at-surface
    seat_hold: float = 0.001       # m of gentle press once seated
    insert_depth: float = 0.027    # m below the mouth that counts as seated
    grasp_tol: float = 0.0015      # m, pick: close gripper within this radius

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PolicyConfig":
        return PolicyConfig(**json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @staticmethod
    def load(path) -> "PolicyConfig":
        with open(path) as fh:
            return PolicyConfig.from_json(fh.read())


def _clip_vec(v: np.ndarray, limit: float) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n <= limit or n == 0.0:
        return v
    return v * (limit / n)


def _axis_correction(axis_body: np.ndarray) -> np.ndarray:
    """Rotation vector aligning the body z-axis onto axis_body."""
    a = np.asarray(axis_body, dtype=float)
    n = np.linalg.norm(a)
    if n < 1e-12:
        return np.zeros(3)
    a = a / n
    z = np.array([0.0, 0.0, 1.0])
    cross = np.cross(z, a)
    s, c = float(np.linalg.norm(cross)), float(z @ a)
    if s < 1e-12:
        return np.zeros(3) if c > 0 else np.array([math.pi, 0.0, 0.0])
    return cross / s * math.atan2(s, c)


def _ramp_steps(cfg: PolicyConfig, total_t: np.ndarray, total_r: np.ndarray,
                kp, kr, n: int | None = None,
                gripper_close: bool = False) -> ActionChunk:
    """Chunk whose i-th relative pose moves a clipped fraction of the way."""
    n = cfg.chunk_len if n is None else n
    steps = []
    step_lin = max(cfg.step_xy, cfg.step_z)
    for i in range(1, n + 1):
        t = _clip_vec(total_t, i * step_lin)
        r = _clip_vec(total_r, i * cfg.step_rot)
        steps.append(ChunkStep(Pose(t, so3_exp(r)), kp, kr))
    return ActionChunk(tuple(steps), gripper_close=gripper_close)


def _believed_offset(obs: Observation) -> tuple[np.ndarray, np.ndarray]:
    """(tip->target translation, rotation correction) from GCEV alone."""
    to_target = -obs.gcev.e_p
    rot_corr = -0.5 * obs.gcev.e_r
    return to_target, rot_corr


def _perceived_target(obs: Observation) -> tuple[np.ndarray, np.ndarray, bool]:
    feats = obs.local_features()
    if feats.valid:
        return feats.offset.copy(), _axis_correction(feats.axis), True
    to_target, rot_corr = _believed_offset(obs)
    return to_target, rot_corr, False


def scripted_insertion_policy(obs: Observation, cfg: PolicyConfig) -> ActionChunk:
    """Deterministic insertion behavior from localized observations only.

    Far from the mouth it approaches a hover point with free-space gains;
    once aligned it descends in insertion mode; pressing on the surface
    with a lateral misfit triggers a bounded spiral search in the body
    xy-plane with a soft-z gain profile until the mouth is found.
    """
    offset, rot_corr, seen = _perceived_target(obs)
    fz = float(obs.f_ext.f[2])
    pressing = fz < -cfg.contact_force
    lateral = offset[:2]
    lat_norm = float(np.linalg.norm(lateral))
    depth = -float(offset[2])   # > 0 once the tip is below the mouth

    kp_free, kr_free = np.full(3, 1000.0), np.full(3, 1000.0)
    kp_ins, kr_ins = np.array([300.0, 300.0, 1500.0]), np.full(3, 300.0)
    kp_con, kr_con = np.array([1500.0, 1500.0, 300.0]), np.full(3, 1500.0)

    lost = lat_norm > cfg.lost_lateral
    if depth >= cfg.insert_depth and not lost:
        # seated: hold position with a light press, soft in z
        hold = np.array([0.0, 0.0, cfg.seat_hold])
        return _ramp_steps(cfg, hold, np.zeros(3), kp_con, kr_con)

    # blocked-at-surface detection: with valid features, trust the measured
    # depth; blind, trust the force unless the believed depth says we are
    # already well inside the bore
    shallow = depth < (cfg.surface_window if seen else 0.5 * cfg.insert_depth)
    if pressing and shallow and not lost:
        # the mouth was missed (lateral misfit by construction): spiral about
        # the believed center, pressing softly
        return _spiral_chunk(cfg, lateral, rot_corr, kp_con, kr_con)

    if lost or (depth <= 0.0 and lat_norm > cfg.align_tol):
        # approach: converge on a hover point above the mouth.  Long lateral
        # transits fly high; fine alignment near the mouth holds altitude
        # so the approach/descend handover stays monotone under noise.
        if lat_norm > cfg.approach_lat:
            goal = np.array([offset[0], offset[1], offset[2] - cfg.approach_height])
        else:
            goal = np.array([offset[0], offset[1],
                             max(0.0, offset[2] - cfg.hover_height)])
        return _ramp_steps(cfg, goal, rot_corr, kp_free, kr_free)

    # aligned at the mouth (or already in the bore): descend to seating
    # depth, never commanding far past the current tip (anti-windup when
    # the descent is blocked)
    goal_z = offset[2] + cfg.insert_depth + cfg.seat_hold
    descend = np.array([offset[0], offset[1], goal_z])
    steps = []
    for i in range(1, cfg.chunk_len + 1):
        dz = min(abs(descend[2]), cfg.step_z * i, cfg.descend_lookahead)
        t = np.array([
            *_clip_vec(descend[:2], cfg.step_xy * i),
            math.copysign(dz, descend[2]),
        ])
        r = _clip_vec(rot_corr, cfg.step_rot * i)
        steps.append(ChunkStep(Pose(t, so3_exp(r)), kp_ins, kr_ins))
    return ActionChunk(tuple(steps))


def _spiral_chunk(cfg: PolicyConfig, lateral: np.ndarray, rot_corr: np.ndarray,
                  kp, kr) -> ActionChunk:
    """Archimedean spiral about the believed mouth center, pressing softly.

    The current believed radial position seeds the spiral phase, so the
    memoryless policy continues the pattern across re-planning.
    """
    center_rel = -np.asarray(lateral, dtype=float)  # believed center -> tip
    r0 = float(np.linalg.norm(center_rel))
    phi0 = math.atan2(center_rel[1], center_rel[0]) if r0 > 1e-9 else 0.0
    r0 = max(r0, cfg.spiral_pitch / 4.0)
    steps = []
    for i in range(1, cfg.chunk_len + 1):
        phi = phi0 + i * cfg.spiral_dphi
        r = min(r0 + cfg.spiral_pitch * (i * cfg.spiral_dphi) / (2 * math.pi),
                cfg.spiral_max_radius)
        point = np.array([r * math.cos(phi), r * math.sin(phi)])
        t = np.array([point[0] - center_rel[0], point[1] - center_rel[1],
                      cfg.press_cmd])
        steps.append(ChunkStep(Pose(t, so3_exp(_clip_vec(rot_corr, cfg.step_rot))),
                               kp, kr))
    return ActionChunk(tuple(steps))


def scripted_pick_policy(obs: Observation, cfg: PolicyConfig) -> ActionChunk:
    """Deterministic grasp approach: hover above, descend, close at alignment.

    The pick reference frame sits hover_height above the grasp point, so a
    zero error vector means "descend straight down".  Force-torque input is
    ignored by contract and the gains stay at the free-space profile.
    """
    feats = obs.local_features()
    if feats.valid:
        offset, rot_corr = feats.offset.copy(), _axis_correction(feats.axis)
    else:
        to_ref, rot_corr = _believed_offset(obs)
        offset = to_ref + np.array([0.0, 0.0, cfg.hover_height])
    kp, kr = np.full(3, 1000.0), np.full(3, 1000.0)
    lat_norm = float(np.linalg.norm(offset[:2]))
    dist = float(np.linalg.norm(offset))

    if dist <= cfg.grasp_tol:
        hold = ActionChunk(tuple(
            ChunkStep(Pose(np.zeros(3), np.eye(3)), kp, kr)
            for _ in range(max(2, cfg.chunk_len // 4))), gripper_close=True)
        return hold

    if offset[2] >= 0.0 and lat_norm > cfg.align_tol:
        # hover above the grasp point before descending onto it
        goal = np.array([offset[0], offset[1],
                         max(0.0, offset[2] - cfg.hover_height)])
        return _ramp_steps(cfg, goal, rot_corr, kp, kr)

    return _ramp_steps(cfg, offset, rot_corr, kp, kr)
