"""Deterministic fixed-timestep peg-in-hole plant.

The plant is quasi-kinematic: the admittance law itself is the dynamics.
Each step computes the contact wrench from penalty springs, runs one
admittance update toward the commanded pose, and integrates the body
velocity with a semi-implicit Euler step.  A stiff mode bypasses the
admittance (rate-limited pose tracking that ignores forces) to model
non-compliant execution.

Geometry conventions:
- The hole frame sits at the mouth center with its z-axis pointing down
  the bore; the platform surface is the local z=0 plane and material
  occupies z > 0 outside the bore.
- The end-effector body z-axis points toward the workpiece.  A grasped
  peg extends along body +z with its insertion tip at ``tip_offset``.
- The peg frame origin is the tip with z pointing along the insertion
  direction, so an upright peg ready for grasping has the same
  orientation as a flat platform's hole frame.

Every contact quantity is computed from hole-local coordinates and
body-frame velocities, so transforming a scene by a rigid motion
transforms simulated trajectories by exactly that motion (seed for seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace, asdict

import numpy as np

from .admittance import DEFAULT_TS, Gains, gac_step
from .liegroup import BODY, Pose, Twist, Wrench, exp_se3, log_se3, so3_exp
from .policy import LocalFeatures

GRIPPER_OPEN = "open"
GRIPPER_HOLDING = "holding"

BLOWUP_SPEED = 10.0          # m/s; faster body velocity aborts the run
# Coulomb regularization knee.  The effective viscous slope mu*f_n/eps must
# stay inside the semi-implicit stability bound m/dt, which caps how sharp
# the knee can be at the 200 Hz step.
FRICTION_V_EPS = 0.02        # m/s

# canonical desk layout (before randomization and left transforms)
FLIP = np.diag([1.0, -1.0, -1.0])        # z-down orientation, 180 deg about x
CANON_PLATFORM_P = np.array([0.45, 0.0, 0.10])
CANON_PEG_P = np.array([0.30, -0.18, 0.10])
CANON_EE_HOME_P = np.array([0.30, 0.10, 0.34])


class SimulationBlowupError(RuntimeError):
    """Body velocity exceeded the sanity bound; the run is unusable."""


@dataclass(frozen=True)
class PegHoleGeom:
    """Peg, hole, and tool geometry (meters)."""

    peg_diameter: float = 0.020
    hole_diameter: float = 0.021     # 1 mm diametral clearance
    hole_depth: float = 0.030
    chamfer: float = 0.002           # 45 degree lead-in width
    peg_length: float = 0.050
    jaw_offset: float = 0.100        # EE origin -> jaw center, body z
    grip_depth: float = 0.010        # jaw engagement below the peg top
    platform_radius: float = 0.100   # solid surface extent around the mouth

    @property
    def clearance(self) -> float:
        return self.hole_diameter - self.peg_diameter

    @property
    def tip_offset(self) -> float:
        """EE origin -> held peg tip distance along body z."""
        return self.jaw_offset - self.grip_depth + self.peg_length

    def tip_pose(self, g_ee: Pose) -> Pose:
        return g_ee @ Pose([0.0, 0.0, self.tip_offset], np.eye(3))

    def jaw_pose(self, g_ee: Pose) -> Pose:
        return g_ee @ Pose([0.0, 0.0, self.jaw_offset], np.eye(3))


@dataclass(frozen=True)
class ContactParams:
    """Penalty-contact constants."""

    k_n: float = 1e4      # N/m normal stiffness
    d_n: float = 50.0     # N s/m normal damping
    mu: float = 0.3       # Coulomb friction coefficient
    k_t: float = 0.0      # unused tangential spring, kept for config compat

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ContactParams":
        return ContactParams(**d)


@dataclass(frozen=True)
class Scene:
    """Ground-truth world: platform-with-hole, staged peg, start pose."""

    g_platform: Pose             # world pose of the hole mouth frame
    g_hole: Pose                 # hole frame relative to the platform
    g_peg_initial: Pose          # world pose of the staged upright peg (tip origin)
    g_ee_start: Pose             # where the end-effector begins
    tilt_deg: float = 0.0
    distractor: bool = False
    g_l_applied: Pose = None     # the left transform baked into this scene

    def __post_init__(self):
        if self.g_l_applied is None:
            object.__setattr__(self, "g_l_applied", Pose.identity())

    def hole_frame(self) -> Pose:
        return self.g_platform @ self.g_hole

    def place_target(self, geom: PegHoleGeom) -> Pose:
        """EE pose putting the held peg's tip at the mouth center, aligned."""
        return self.hole_frame() @ Pose([0.0, 0.0, -geom.tip_offset], np.eye(3))

    def pick_target(self, geom: PegHoleGeom) -> Pose:
        """EE pose engaging the jaws on the staged peg, aligned."""
        return self.g_peg_initial @ Pose([0.0, 0.0, -geom.tip_offset], np.eye(3))

    def transformed(self, g_l: Pose) -> "Scene":
        return Scene(
            g_platform=g_l @ self.g_platform,
            g_hole=self.g_hole,
            g_peg_initial=g_l @ self.g_peg_initial,
            g_ee_start=g_l @ self.g_ee_start,
            tilt_deg=self.tilt_deg,
            distractor=self.distractor,
            g_l_applied=g_l @ self.g_l_applied,
        )


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative scenario description; deterministic given the seed."""

    tilt_deg: float = 0.0
    trans_bound: float = 0.0      # platform xy randomization half-range (m)
    distractor: bool = False
    seed: int = 0
    g_l: Pose = None

    def __post_init__(self):
        if self.g_l is None:
            object.__setattr__(self, "g_l", Pose.identity())

    def to_dict(self) -> dict:
        return {
            "tilt_deg": self.tilt_deg,
            "trans_bound": self.trans_bound,
            "distractor": self.distractor,
            "seed": self.seed,
            "g_l": self.g_l.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "ScenarioSpec":
        d = dict(d)
        d["g_l"] = Pose.from_dict(d["g_l"]) if "g_l" in d else Pose.identity()
        return ScenarioSpec(**d)


def build_scenario(spec: ScenarioSpec) -> Scene:
    """Materialize a scene: tilt and translate the platform, then apply g_l."""
    rng = np.random.default_rng(spec.seed)
    shift = rng.uniform(-spec.trans_bound, spec.trans_bound, size=2)
    tilt = so3_exp([0.0, math.radians(spec.tilt_deg), 0.0])
    platform = Pose(CANON_PLATFORM_P + [shift[0], shift[1], 0.0], tilt @ FLIP)
    scene = Scene(
        g_platform=platform,
        g_hole=Pose.identity(),
        g_peg_initial=Pose(CANON_PEG_P, FLIP),
        g_ee_start=Pose(CANON_EE_HOME_P, FLIP),
        tilt_deg=spec.tilt_deg,
        distractor=spec.distractor,
    )
    return scene.transformed(spec.g_l)


@dataclass(frozen=True)
class SimState:
    """Plant state; advanced only by step()."""

    g_ee: Pose
    v_b: Twist
    gripper: str = GRIPPER_OPEN
    t: float = 0.0
    contact_active: bool = False

    @staticmethod
    def initial(scene: Scene) -> "SimState":
        return SimState(scene.g_ee_start, Twist.zero(BODY))


# ---------------------------------------------------------------------------
# contact model
# ---------------------------------------------------------------------------


def _point_velocity_local(X: Pose, v_b: Twist, r_body: np.ndarray) -> np.ndarray:
    """Hole-local velocity of a body-fixed point at r_body from the EE origin."""
    v_body = v_b.v + np.cross(v_b.w, r_body)
    return X.R @ v_body


def contact_wrench(state: SimState, scene: Scene, geom: PegHoleGeom,
                   cp: ContactParams) -> Wrench:
    """Penalty contact wrench on the held peg, in the EE body frame.

    Features tested: flat surface around the funnel, 45-degree chamfer
    cone, bore wall at the tip ring, bore bottom, and the mouth-rim ring
    against the peg side.  Forces vanish whenever every signed distance
    is positive.
    """
    if state.gripper != GRIPPER_HOLDING:
        return Wrench.zero(BODY)

    hole = scene.hole_frame()
    X = hole.inverse() @ state.g_ee          # EE pose in hole-local coordinates
    r_p = geom.peg_diameter / 2.0
    r_h = geom.hole_diameter / 2.0
    r_open = r_h + geom.chamfer

    tip_body = np.array([0.0, 0.0, geom.tip_offset])
    tip = X.transform_point(tip_body)
    axis = X.R @ np.array([0.0, 0.0, 1.0])   # peg axis, local, tip-ward

    f_total = np.zeros(3)
    tau_total = np.zeros(3)

    def add_contact(point_local: np.ndarray, normal: np.ndarray, depth: float):
        nonlocal f_total, tau_total
        if depth <= 0.0:
            return
        point_body = X.inverse().transform_point(point_local)
        v_pt = _point_velocity_local(X, state.v_b, point_body)
        rate = -float(v_pt @ normal)          # approach speed along the normal
        f_n = cp.k_n * depth + cp.d_n * rate
        if f_n <= 0.0:
            return
        v_t = v_pt - float(v_pt @ normal) * normal
        speed = float(np.linalg.norm(v_t))
        f_local = f_n * normal
        if speed > 1e-12:
            f_local -= cp.mu * f_n * v_t / (speed + FRICTION_V_EPS)
        f_body = X.R.T @ f_local
        f_total += f_body
        tau_total += np.cross(point_body, f_body)

    rho_vec = tip[:2]
    rho = float(np.linalg.norm(rho_vec))
    rho_hat = rho_vec / rho if rho > 1e-12 else np.array([1.0, 0.0])
    up = np.array([0.0, 0.0, -1.0])          # out of the platform surface

    # flat surface: the tip ring rests on solid material (finite platform)
    if tip[2] > 0.0 and rho + r_p > r_open and rho - r_p < geom.platform_radius:
        if rho - r_p >= r_open:
            point = np.array([tip[0], tip[1], tip[2]])   # fully supported
        else:
            mid = (r_open + rho + r_p) / 2.0             # supported arc centroid
            point = np.array([*(rho_hat * mid), tip[2]])
        add_contact(point, up, tip[2])

    # chamfer cone (45 deg): outer rim point against the funnel face.  The
    # perpendicular foot must land on the face segment, otherwise the flat
    # surface / edge branches own the contact.
    if 0.0 <= tip[2] <= geom.chamfer:
        outer = rho + r_p
        foot = (tip[2] - (outer - r_open)) / 2.0
        if 0.0 <= foot <= geom.chamfer:
            depth = (outer + tip[2] - r_open) / math.sqrt(2.0)
            if depth > 0.0:
                normal = np.concatenate([-rho_hat, [-1.0]]) / math.sqrt(2.0)
                point = np.array([*(rho_hat * (r_open - foot)), foot])
                add_contact(point, normal, depth)

    # bore wall at the tip ring (ring must straddle the bore radius)
    if (geom.chamfer < tip[2] <= geom.hole_depth
            and rho + r_p > r_h and rho - r_p < r_h):
        point = np.array([*(rho_hat * r_h), tip[2]])
        add_contact(point, np.concatenate([-rho_hat, [0.0]]), rho + r_p - r_h)

    # bore bottom
    if tip[2] > geom.hole_depth and rho < r_h:
        add_contact(tip, up, tip[2] - geom.hole_depth)

    # ring edges against the peg side (two-point jamming when tilted).
    # Penetration is how deep the edge circle's nearest arc sits inside the
    # cylinder surface; the reaction pushes the shaft off the edge, inward
    # when the section center is inside the edge circle, outward otherwise.
    if abs(axis[2]) > 0.5:
        for edge_z, edge_r in ((0.0, r_open), (geom.chamfer, r_h)):
            if tip[2] <= edge_z + 1e-9:
                continue
            s = (tip[2] - edge_z) / axis[2]   # arc back from the tip to the edge plane
            if not 0.0 < s < geom.peg_length:
                continue
            c = tip - s * axis                # peg section center at the edge plane
            rc = float(np.linalg.norm(c[:2]))
            # radial penetration of the edge arc into the cylinder, capped by
            # the axial crossing so skimming the plane cannot spike
            pen = min(r_p - abs(rc - edge_r), 2.0 * (tip[2] - edge_z))
            if pen > 0.0:
                rc_hat = c[:2] / rc if rc > 1e-12 else np.array([1.0, 0.0])
                direction = rc_hat if rc > edge_r else -rc_hat
                point = np.array([*(rc_hat * edge_r), edge_z])
                add_contact(point, np.concatenate([direction, [0.0]]), pen)

    return Wrench(f_total, tau_total, BODY)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

STIFF_LIN_RATE = 0.25    # m/s pose-tracking rate in stiff mode
STIFF_ANG_RATE = 1.5     # rad/s


def step(state: SimState, scene: Scene, geom: PegHoleGeom, cp: ContactParams,
         g_d: Pose, gains: Gains, dt: float = DEFAULT_TS,
         stiff: bool = False) -> tuple[SimState, Wrench]:
    """Advance one control period; returns the new state and the raw
    (noise-free) contact wrench at the pre-step configuration."""
    f_contact = contact_wrench(state, scene, geom, cp)

    if stiff:
        err = log_se3(state.g_ee.inverse() @ g_d)
        v_lin = np.linalg.norm(err.v) / dt
        v_ang = np.linalg.norm(err.w) / dt
        scale = min(1.0,
                    STIFF_LIN_RATE / v_lin if v_lin > 1e-12 else 1.0,
                    STIFF_ANG_RATE / v_ang if v_ang > 1e-12 else 1.0)
        motion = Twist(err.v * scale / dt, err.w * scale / dt, BODY)
        g_next = state.g_ee @ exp_se3(motion, dt)
        v_next = motion
    else:
        v_next, g_next = gac_step(state.g_ee, g_d, state.v_b, f_contact,
                                  gains, dt)

    speed = float(np.linalg.norm(v_next.v))
    if speed > BLOWUP_SPEED:
        raise SimulationBlowupError(
            f"body speed {speed:.2f} m/s exceeded {BLOWUP_SPEED} at t={state.t:.3f}")

    new_state = replace(
        state,
        g_ee=g_next,
        v_b=v_next,
        t=state.t + dt,
        contact_active=bool(np.any(f_contact.as_vec() != 0.0)),
    )
    return new_state, f_contact


def try_close_gripper(state: SimState, scene: Scene, geom: PegHoleGeom,
                      capture: float = 0.004) -> SimState:
    """Close the jaws; the peg attaches if the jaw center is within capture
    distance of the staged peg's grasp point."""
    if state.gripper == GRIPPER_HOLDING:
        return state
    grasp_point = scene.g_peg_initial.transform_point(
        [0.0, 0.0, -(geom.peg_length - geom.grip_depth)])
    jaw = geom.jaw_pose(state.g_ee).p
    if np.linalg.norm(jaw - grasp_point) <= capture:
        return replace(state, gripper=GRIPPER_HOLDING)
    return state


# ---------------------------------------------------------------------------
# sensing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FtNoise:
    """Additive sensor corruption: white noise plus a constant bias."""

    sigma_f: float = 0.1       # N per axis
    sigma_tau: float = 0.01    # N m per axis
    bias: np.ndarray = None

    def __post_init__(self):
        b = np.zeros(6) if self.bias is None else np.asarray(self.bias, dtype=float).reshape(6)
        object.__setattr__(self, "bias", b)

    @staticmethod
    def none() -> "FtNoise":
        return FtNoise(0.0, 0.0, np.zeros(6))


def ft_sense(f_raw: Wrench, noise: FtNoise, rng: np.random.Generator) -> Wrench:
    """Simulated sensor reading in the body frame (so corruption is
    invariant under scene transforms)."""
    f_raw.require_frame(BODY)
    n = np.concatenate([
        rng.normal(0.0, 1.0, 3) * noise.sigma_f,
        rng.normal(0.0, 1.0, 3) * noise.sigma_tau,
    ])
    return Wrench.from_vec(f_raw.as_vec() + n + noise.bias, BODY)


@dataclass(frozen=True)
class VisionCfg:
    """Abstract wrist-view feature channel configuration."""

    sigma: float = 0.001      # m of measurement noise per axis
    range: float = 0.060      # m visibility radius around the target
    brittle: bool = False     # corrupt features on distractor / 45 deg scenes
    enabled: bool = True      # hard off: force the blind (search) behavior


def observe_features(state: SimState, scene: Scene, geom: PegHoleGeom,
                     kind: str, cfg: VisionCfg,
                     rng: np.random.Generator) -> np.ndarray:
    """Left-invariant local features: body-frame offset from the active tool
    point to the task target, plus the target axis direction.

    The measurement is synthesized from ground truth with body-frame noise;
    it goes invalid outside the visibility range or when the channel is
    configured brittle on a corrupted scene.
    """
    noise = rng.normal(0.0, 1.0, 3) * cfg.sigma   # always drawn: stable stream
    if kind == "place":
        target = scene.hole_frame()
        tool = geom.tip_pose(state.g_ee)
    elif kind == "pick":
        grasp_p = scene.g_peg_initial.transform_point(
            [0.0, 0.0, -(geom.peg_length - geom.grip_depth)])
        target = Pose(grasp_p, scene.g_peg_initial.R)
        tool = geom.jaw_pose(state.g_ee)
    else:
        raise ValueError(f"unknown feature kind {kind!r}")

    offset = state.g_ee.R.T @ (target.p - tool.p)
    axis = state.g_ee.R.T @ (target.R @ np.array([0.0, 0.0, 1.0]))
    corrupted = cfg.brittle and (scene.distractor or scene.tilt_deg >= 45.0)
    if not cfg.enabled or corrupted or np.linalg.norm(offset) > cfg.range:
        return LocalFeatures.invalid().as_vec()
    return LocalFeatures(True, offset + noise, axis).as_vec()


# ---------------------------------------------------------------------------
# outcome checking
# ---------------------------------------------------------------------------

SUCCESS = "success"
FAIL = "fail"
IN_PROGRESS = "in-progress"

AXIS_TOL_RAD = 0.05
DEFAULT_TIMEOUT_S = 15.0


def success_check(state: SimState, scene: Scene, geom: PegHoleGeom,
                  timeout_s: float = DEFAULT_TIMEOUT_S) -> str:
    """Insertion completed iff the held peg sits deep, centered, aligned."""
    if state.gripper == GRIPPER_HOLDING:
        hole = scene.hole_frame()
        X = hole.inverse() @ state.g_ee
        tip = X.transform_point([0.0, 0.0, geom.tip_offset])
        axis = X.R @ np.array([0.0, 0.0, 1.0])
        lateral = float(np.linalg.norm(tip[:2]))
        angle = math.acos(max(-1.0, min(1.0, float(axis[2]))))
        if (tip[2] >= 0.8 * geom.hole_depth
                and lateral <= geom.clearance / 2.0
                and angle <= AXIS_TOL_RAD):
            return SUCCESS
    if state.t > timeout_s:
        return FAIL
    return IN_PROGRESS


def trajectory_record(state: SimState, f_ext: Wrench, gains_kp, gains_kr,
                      phase: str) -> dict:
    """One line-delimited log record for a trajectory stream."""
    return {
        "t": state.t,
        "g_ee": state.g_ee.to_dict(),
        "v_b": state.v_b.as_vec().tolist(),
        "f_ext": f_ext.as_vec().tolist(),
        "kp": np.asarray(gains_kp, dtype=float).tolist(),
        "kr": np.asarray(gains_kr, dtype=float).tolist(),
        "phase": phase,
    }
