"""Geometric admittance control.

The controller renders mass-damper-spring behavior on SE(3): an elastic
wrench pulls the end-effector toward a desired pose, and measured external
wrenches deflect it.  The discrete update produces a body velocity and a
pose command

    v_d = v + dt * M^-1 (F_ext - f_elastic - Kd v)
    g_cmd = g * exp(v_d * dt)

All stiffness acts in the desired frame, which keeps the elastic wrench
invariant under left translation of both poses (the property the rest of
the pipeline is built on).

Also here: the joint-space variant of the update, spatial->body frame
adaptors for velocities/Jacobians, and the force-torque conditioning
chain (first-order low-pass + rebias).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .liegroup import (
    BODY,
    SPATIAL,
    Pose,
    Twist,
    Wrench,
    exp_se3,
    skew_part_vee,
)

# Control-loop rate of the whole stack (200 Hz).
DEFAULT_SAMPLE_HZ = 200.0
DEFAULT_TS = 1.0 / DEFAULT_SAMPLE_HZ

# Rebias window: 2 s of samples at the loop rate.
REBIAS_MIN_SAMPLES = 400

DEFAULT_INERTIA = np.diag([10.0, 10.0, 10.0, 1.0, 1.0, 1.0])
DEFAULT_FT_CUTOFF_HZ = 10.0


def _check_spd(A: np.ndarray, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (6, 6):
        raise ValueError(f"{name} must be 6x6")
    if np.max(np.abs(A - A.T)) > 1e-9:
        raise ValueError(f"{name} must be symmetric")
    if np.any(np.linalg.eigvalsh(A) <= 0):
        raise ValueError(f"{name} must be positive definite")
    return A


@dataclass(frozen=True)
class Gains:
    """Diagonal task stiffness plus admittance inertia and damping."""

    kp: np.ndarray          # translational stiffness diagonal, N/m
    kr: np.ndarray          # rotational stiffness diagonal, N*m/rad
    M: np.ndarray           # 6x6 SPD inertia
    Kd: np.ndarray          # 6x6 SPD damping

    def __post_init__(self):
        kp = np.asarray(self.kp, dtype=float).reshape(-1)
        kr = np.asarray(self.kr, dtype=float).reshape(-1)
        if kp.shape != (3,) or kr.shape != (3,):
            raise ValueError("kp and kr must be 3-vectors")
        if np.any(kp <= 0) or np.any(kr <= 0):
            raise ValueError("stiffness diagonals must be positive")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kr", kr)
        object.__setattr__(self, "M", _check_spd(self.M, "M"))
        object.__setattr__(self, "Kd", _check_spd(self.Kd, "Kd"))

    @staticmethod
    def from_stiffness(kp, kr, M: np.ndarray | None = None) -> "Gains":
        """Build gains with critically damped Kd = 2 sqrt(M K) (diagonal M)."""
        kp = np.asarray(kp, dtype=float).reshape(3)
        kr = np.asarray(kr, dtype=float).reshape(3)
        M = DEFAULT_INERTIA if M is None else np.asarray(M, dtype=float)
        if np.max(np.abs(M - np.diag(np.diag(M)))) > 1e-12:
            raise ValueError("from_stiffness expects a diagonal inertia")
        k_eff = np.concatenate([kp, kr])
        Kd = np.diag(2.0 * np.sqrt(np.diag(M) * k_eff))
        return Gains(kp, kr, M, Kd)

    def stiffness_matrix(self) -> np.ndarray:
        return np.diag(np.concatenate([self.kp, self.kr]))


class GainProfile(Enum):
    """Operator gain modes: stiffness per axis, teleop key bindings."""

    FREE = "free"            # 1000 everywhere: precise free-space motion
    CONTACT = "contact"      # soft z (300), stiff elsewhere (1500)
    INSERTION = "insertion"  # stiff z (1500), soft elsewhere (300)
    COMPLIANT = "compliant"  # 300 everywhere

    def stiffness(self) -> tuple[np.ndarray, np.ndarray]:
        table = {
            GainProfile.FREE: ([1000.0, 1000.0, 1000.0], [1000.0, 1000.0, 1000.0]),
            GainProfile.CONTACT: ([1500.0, 1500.0, 300.0], [1500.0, 1500.0, 1500.0]),
            GainProfile.INSERTION: ([300.0, 300.0, 1500.0], [300.0, 300.0, 300.0]),
            GainProfile.COMPLIANT: ([300.0, 300.0, 300.0], [300.0, 300.0, 300.0]),
        }
        kp, kr = table[self]
        return np.array(kp), np.array(kr)

    def gains(self) -> Gains:
        kp, kr = self.stiffness()
        return Gains.from_stiffness(kp, kr)


def elastic_wrench(g: Pose, g_d: Pose, gains: Gains) -> Wrench:
    """Stiffness wrench in the end-effector body frame.

    f_p = R^T R_d Kp R_d^T (p - p_d)
    f_R = (K_R R_d^T R - R^T R_d K_R)^vee
    """
    Kp = np.diag(gains.kp)
    KR = np.diag(gains.kr)
    f_p = g.R.T @ g_d.R @ Kp @ g_d.R.T @ (g.p - g_d.p)
    Q = g_d.R.T @ g.R
    f_R = skew_part_vee(KR @ Q - Q.T @ KR)
    return Wrench(f_p, f_R, BODY)


def gac_step(g: Pose, g_d: Pose, v_b: Twist, f_ext: Wrench, gains: Gains,
             dt: float = DEFAULT_TS) -> tuple[Twist, Pose]:
    """One discrete admittance update: (desired body velocity, pose command).

    f_ext must already be filtered and rebias-corrected.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_b.require_frame(BODY)
    f_ext.require_frame(BODY)
    f_el = elastic_wrench(g, g_d, gains).as_vec()
    rhs = f_ext.as_vec() - f_el - gains.Kd @ v_b.as_vec()
    v_d = v_b.as_vec() + dt * np.linalg.solve(gains.M, rhs)
    v_d_tw = Twist.from_vec(v_d, BODY)
    return v_d_tw, g @ exp_se3(v_d_tw, dt)


def joint_space_step(q, dq, J_b: np.ndarray, f_ext: Wrench, f_elastic: Wrench,
                     v_b: Twist, gains: Gains,
                     dt: float = DEFAULT_TS) -> tuple[np.ndarray, np.ndarray]:
    """Joint-space admittance update for a 6-DoF arm.

    dq_d = dq + dt * Jb^-1 M^-1 (F_ext - f_elastic - Kd v)
    q_d  = q + dt * dq_d
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    dq = np.asarray(dq, dtype=float).reshape(-1)
    J_b = np.asarray(J_b, dtype=float)
    if J_b.shape != (6, 6):
        raise ValueError("body Jacobian must be 6x6 (6-DoF arm)")
    if np.linalg.cond(J_b) > 1e8:
        raise ValueError("Jacobian is near-singular (condition number > 1e8)")
    f_ext.require_frame(BODY)
    f_elastic.require_frame(BODY)
    v_b.require_frame(BODY)
    rhs = f_ext.as_vec() - f_elastic.as_vec() - gains.Kd @ v_b.as_vec()
    dq_d = dq + dt * np.linalg.solve(J_b, np.linalg.solve(gains.M, rhs))
    return dq_d, q + dt * dq_d


def twist_to_body(V: Twist, R: np.ndarray) -> Twist:
    """Re-express a spatial-frame velocity pair in the body frame of R."""
    V.require_frame(SPATIAL)
    return Twist(R.T @ V.v, R.T @ V.w, BODY)


def twist_to_spatial(V: Twist, R: np.ndarray) -> Twist:
    V.require_frame(BODY)
    return Twist(R @ V.v, R @ V.w, SPATIAL)


def jacobian_to_body(J: np.ndarray, R: np.ndarray) -> np.ndarray:
    """blockdiag(R^T, R^T) @ J for a Jacobian with spatial-frame rows."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != 6:
        raise ValueError("Jacobian must have 6 rows")
    B = np.zeros((6, 6))
    B[:3, :3] = R.T
    B[3:, 3:] = R.T
    return B @ J


# ---------------------------------------------------------------------------
# Force-torque conditioning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FtFilterState:
    """First-order low-pass state for a six-axis force-torque stream."""

    y_prev: np.ndarray
    bias: np.ndarray
    cutoff_hz: float = DEFAULT_FT_CUTOFF_HZ
    sample_hz: float = DEFAULT_SAMPLE_HZ

    def __post_init__(self):
        if not 0.0 < self.cutoff_hz < self.sample_hz / 2.0:
            raise ValueError("cutoff must lie in (0, sample_hz/2)")
        object.__setattr__(self, "y_prev",
                           np.asarray(self.y_prev, dtype=float).reshape(6).copy())
        object.__setattr__(self, "bias",
                           np.asarray(self.bias, dtype=float).reshape(6).copy())

    @staticmethod
    def fresh(bias=None, cutoff_hz: float = DEFAULT_FT_CUTOFF_HZ,
              sample_hz: float = DEFAULT_SAMPLE_HZ) -> "FtFilterState":
        b = np.zeros(6) if bias is None else bias
        return FtFilterState(np.zeros(6), b, cutoff_hz, sample_hz)

    @property
    def smoothing(self) -> float:
        return math.exp(-2.0 * math.pi * self.cutoff_hz / self.sample_hz)


def ft_filter_step(state: FtFilterState, raw: Wrench) -> tuple[FtFilterState, Wrench]:
    """y(k) = a y(k-1) + (1-a)(raw - bias), a = exp(-2 pi fc / fs)."""
    raw.require_frame(BODY)
    a = state.smoothing
    y = a * state.y_prev + (1.0 - a) * (raw.as_vec() - state.bias)
    new_state = FtFilterState(y, state.bias, state.cutoff_hz, state.sample_hz)
    return new_state, Wrench.from_vec(y, BODY)


def ft_rebias(samples) -> np.ndarray:
    """Mean of a quiet-period sample window (>= 2 s at the loop rate)."""
    vecs = [s.require_frame(BODY).as_vec() if isinstance(s, Wrench)
            else np.asarray(s, dtype=float).reshape(6)
            for s in samples]
    if len(vecs) < REBIAS_MIN_SAMPLES:
        raise ValueError(
            f"rebias needs at least {REBIAS_MIN_SAMPLES} samples, got {len(vecs)}")
    return np.mean(np.stack(vecs), axis=0)
