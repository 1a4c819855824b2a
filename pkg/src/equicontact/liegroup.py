"""SE(3)/SO(3) primitives: hat/vee maps, exponential/logarithm, adjoint
wrench transport, rotation codecs, and weighted rotation averaging.

Conventions used throughout the package:

- A pose ``g = (p, R)`` maps body-frame coordinates to world coordinates,
  ``x_world = R @ x_body + p``.  Composition ``g1 @ g2`` chains maps.
- Twists are ``(v, omega)``, wrenches ``(f, tau)``; both carry an explicit
  ``frame`` tag ("body" or "spatial") that is fixed at construction.
- ``exp_se3`` integrates a *body* twist: ``g_next = g @ exp_se3(xi, dt)``.
- Rotation-vector and euler codecs use intrinsic xyz order,
  ``R = Rx(a) @ Ry(b) @ Rz(c)``.

Numerical policy: small rotation angles (< SMALL_ANGLE) take truncated
series branches; the logarithm's branch cut at pi resolves axis sign by
preferring a nonnegative z component, then y, then x.  These thresholds
affect only the computational path, never the mathematical result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this angle (rad) Rodrigues coefficients switch to series form.
SMALL_ANGLE = 1e-8
# Within this distance of pi the log takes the explicit branch-cut path.
PI_BRANCH = 1e-9

BODY = "body"
SPATIAL = "spatial"


class FrameError(ValueError):
    """A twist/wrench arrived in the wrong frame for the requested map."""


def _vec(x, n: int) -> np.ndarray:
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.shape != (n,):
        raise ValueError(f"expected {n}-vector, got shape {np.shape(x)}")
    return a


def check_rotation(R: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate that R is a proper rotation (orthonormal, det +1)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    if np.max(np.abs(R @ R.T - np.eye(3))) > tol:
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")
    return R


def project_rotation(M: np.ndarray) -> np.ndarray:
    """Orthogonal polar factor of M: the closest rotation in Frobenius norm."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt


# ---------------------------------------------------------------------------
# hat / vee
# ---------------------------------------------------------------------------


def hat(x) -> np.ndarray:
    """Hat map: 3-vector -> 3x3 skew matrix, 6-vector (v, w) -> 4x4 se(3)."""
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.shape == (3,):
        return np.array([
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ])
    if a.shape == (6,):
        X = np.zeros((4, 4))
        X[:3, :3] = hat(a[3:])
        X[:3, 3] = a[:3]
        return X
    raise ValueError(f"hat expects a 3- or 6-vector, got shape {np.shape(x)}")


def vee(X, tol: float = 1e-8) -> np.ndarray:
    """Vee map, inverse of hat.  Rejects 3x3 inputs that are not skew."""
    X = np.asarray(X, dtype=float)
    if X.shape == (3, 3):
        if np.max(np.abs(X + X.T)) > tol:
            raise ValueError("vee of a 3x3 matrix requires skew symmetry")
        return np.array([X[2, 1], X[0, 2], X[1, 0]])
    if X.shape == (4, 4):
        w = vee(X[:3, :3], tol=tol)
        return np.concatenate([X[:3, 3], w])
    raise ValueError(f"vee expects 3x3 or 4x4, got shape {X.shape}")


def skew_part_vee(X: np.ndarray) -> np.ndarray:
    """Vee of the antisymmetric part of X (no skewness check).

    Used where the operand is skew analytically but carries float residue.
    """
    A = 0.5 * (X - X.T)
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


# ---------------------------------------------------------------------------
# SO(3) exp / log
# ---------------------------------------------------------------------------


def so3_exp(w) -> np.ndarray:
    """Rodrigues formula; series branch below SMALL_ANGLE."""
    w = _vec(w, 3)
    theta = float(np.linalg.norm(w))
    W = hat(w)
    if theta < SMALL_ANGLE:
        # sin(t)/t ~ 1 - t^2/6, (1-cos t)/t^2 ~ 1/2 - t^2/24
        return np.eye(3) + (1.0 - theta**2 / 6.0) * W + (0.5 - theta**2 / 24.0) * (W @ W)
    A = math.sin(theta) / theta
    B = (1.0 - math.cos(theta)) / theta**2
    return np.eye(3) + A * W + B * (W @ W)


def _pi_axis(R: np.ndarray) -> np.ndarray:
    """Rotation axis for angle pi, sign fixed to the documented convention.

    R = I + 2*hat(a)^2 at theta == pi, so a_i^2 = (R_ii + 1)/2.  The axis
    sign is ambiguous (a and -a rotate identically); prefer a_z >= 0, then
    a_y >= 0, then a_x >= 0.
    """
    d = np.clip((np.diag(R) + 1.0) / 2.0, 0.0, None)
    k = int(np.argmax(d))
    a = np.zeros(3)
    a[k] = math.sqrt(d[k])
    # Off-diagonal terms give the relative signs: R_ij = 2 a_i a_j (i != j).
    for j in range(3):
        if j != k:
            a[j] = (R[k, j] + R[j, k]) / (4.0 * a[k])
    a = a / np.linalg.norm(a)
    for idx in (2, 1, 0):
        if abs(a[idx]) > 1e-12:
            if a[idx] < 0.0:
                a = -a
            break
    return a


def so3_log(R) -> np.ndarray:
    """Rotation vector (axis * angle) of R; branch at pi per _pi_axis."""
    R = np.asarray(R, dtype=float)
    tr = float(np.trace(R))
    c = max(-1.0, min(1.0, (tr - 1.0) / 2.0))
    theta = math.acos(c)
    if theta < SMALL_ANGLE:
        return skew_part_vee(R)
    if theta > math.pi - PI_BRANCH:
        return math.pi * _pi_axis(R)
    return theta / (2.0 * math.sin(theta)) * np.array(
        [R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]
    )


# ---------------------------------------------------------------------------
# Pose / Twist / Wrench
# ---------------------------------------------------------------------------


def _frozen_array(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Pose:
    """Rigid transform (p, R): x_world = R @ x_body + p."""

    p: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen_array(_vec(self.p, 3)))
        object.__setattr__(self, "R", _frozen_array(check_rotation(self.R)))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.eye(3))

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.R @ other.p + self.p, self.R @ other.R)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        Rt = self.R.T
        return Pose(-Rt @ self.p, Rt)

    def transform_point(self, x) -> np.ndarray:
        return self.R @ _vec(x, 3) + self.p

    def rotate(self, x) -> np.ndarray:
        return self.R @ _vec(x, 3)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.p
        return T

    @staticmethod
    def from_matrix(T) -> "Pose":
        T = np.asarray(T, dtype=float)
        if T.shape != (4, 4) or np.max(np.abs(T[3] - [0, 0, 0, 1])) > 1e-9:
            raise ValueError("expected a homogeneous 4x4 matrix")
        return Pose(T[:3, 3], T[:3, :3])

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        return (np.max(np.abs(self.p - other.p)) <= tol
                and np.max(np.abs(self.R - other.R)) <= tol)

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "R": self.R.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(np.array(d["p"]), np.array(d["R"]))


@dataclass(frozen=True)
class Twist:
    """Velocity 6-vector (v, omega) with a fixed frame tag."""

    v: np.ndarray
    w: np.ndarray
    frame: str = BODY

    def __post_init__(self):
        if self.frame not in (BODY, SPATIAL):
            raise FrameError(f"unknown frame {self.frame!r}")
        object.__setattr__(self, "v", _frozen_array(_vec(self.v, 3)))
        object.__setattr__(self, "w", _frozen_array(_vec(self.w, 3)))

    @staticmethod
    def zero(frame: str = BODY) -> "Twist":
        return Twist(np.zeros(3), np.zeros(3), frame)

    @staticmethod
    def from_vec(x, frame: str = BODY) -> "Twist":
        x = _vec(x, 6)
        return Twist(x[:3], x[3:], frame)

    def as_vec(self) -> np.ndarray:
        return np.concatenate([self.v, self.w])

    def require_frame(self, frame: str) -> "Twist":
        if self.frame != frame:
            raise FrameError(f"expected {frame} twist, got {self.frame}")
        return self


@dataclass(frozen=True)
class Wrench:
    """Force/torque 6-vector (f, tau) with a fixed frame tag."""

    f: np.ndarray
    tau: np.ndarray
    frame: str = BODY

    def __post_init__(self):
        if self.frame not in (BODY, SPATIAL):
            raise FrameError(f"unknown frame {self.frame!r}")
        object.__setattr__(self, "f", _frozen_array(_vec(self.f, 3)))
        object.__setattr__(self, "tau", _frozen_array(_vec(self.tau, 3)))

    @staticmethod
    def zero(frame: str = BODY) -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3), frame)

    @staticmethod
    def from_vec(x, frame: str = BODY) -> "Wrench":
        x = _vec(x, 6)
        return Wrench(x[:3], x[3:], frame)

    def as_vec(self) -> np.ndarray:
        return np.concatenate([self.f, self.tau])

    def require_frame(self, frame: str) -> "Wrench":
        if self.frame != frame:
            raise FrameError(f"expected {frame} wrench, got {self.frame}")
        return self


# ---------------------------------------------------------------------------
# SE(3) exp / log
# ---------------------------------------------------------------------------


def _v_matrix(phi: np.ndarray) -> np.ndarray:
    """Left Jacobian of SO(3): couples translation into exp_se3."""
    theta = float(np.linalg.norm(phi))
    W = hat(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * W + (W @ W) / 6.0
    A = (1.0 - math.cos(theta)) / theta**2
    B = (theta - math.sin(theta)) / theta**3
    return np.eye(3) + A * W + B * (W @ W)


def _v_matrix_inv(phi: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(phi))
    W = hat(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) - 0.5 * W + (W @ W) / 12.0
    half = 0.5 * theta
    cot = half / math.tan(half) if abs(math.sin(half)) > 1e-300 else 0.0
    coef = (1.0 - cot) / theta**2
    return np.eye(3) - 0.5 * W + coef * (W @ W)


def exp_se3(xi: Twist, dt: float = 1.0) -> Pose:
    """Closed-form exponential of a body twist scaled by dt."""
    xi.require_frame(BODY)
    phi = xi.w * dt
    R = so3_exp(phi)
    p = _v_matrix(phi) @ (xi.v * dt)
    return Pose(p, R)


def log_se3(g: Pose) -> Twist:
    """Body twist xi with exp_se3(xi, 1) == g.

    At rotation angle pi the axis sign follows the _pi_axis convention;
    callers crossing that branch deliberately should normalize angles
    upstream.
    """
    phi = so3_log(g.R)
    v = _v_matrix_inv(phi) @ g.p
    return Twist(v, phi, BODY)


# ---------------------------------------------------------------------------
# Adjoint wrench transport
# ---------------------------------------------------------------------------


def adjoint(g: Pose) -> np.ndarray:
    """6x6 Adjoint of g mapping body twists to spatial twists, (v, w) order."""
    A = np.zeros((6, 6))
    A[:3, :3] = g.R
    A[:3, 3:] = hat(g.p) @ g.R
    A[3:, 3:] = g.R
    return A


def ad_wrench(g: Pose, F: Wrench) -> Wrench:
    """Transport a body wrench to the spatial frame: Ad(g^-1)^T acting on F."""
    F.require_frame(BODY)
    f_s = g.R @ F.f
    tau_s = hat(g.p) @ f_s + g.R @ F.tau
    return Wrench(f_s, tau_s, SPATIAL)


def ad_wrench_inverse(g: Pose, F: Wrench) -> Wrench:
    """Inverse of ad_wrench: spatial wrench back to the body frame of g."""
    F.require_frame(SPATIAL)
    f_b = g.R.T @ F.f
    tau_b = g.R.T @ (F.tau - hat(g.p) @ F.f)
    return Wrench(f_b, tau_b, BODY)


# ---------------------------------------------------------------------------
# Rotation codecs
# ---------------------------------------------------------------------------


def rotvec_to_matrix(r) -> np.ndarray:
    return so3_exp(_vec(r, 3))


def matrix_to_rotvec(R) -> np.ndarray:
    return so3_log(R)


def matrix_to_rot6d(R) -> np.ndarray:
    """First two columns of R, flattened (x column then y column)."""
    R = np.asarray(R, dtype=float)
    return np.concatenate([R[:, 0], R[:, 1]])


def rot6d_to_matrix(x6) -> np.ndarray:
    """Gram-Schmidt the two encoded columns, complete with a cross product."""
    x6 = _vec(x6, 6)
    a, b = x6[:3], x6[3:]
    na = np.linalg.norm(a)
    if na < 1e-12:
        raise ValueError("rot6d decode: first column is numerically zero")
    c0 = a / na
    b_perp = b - (c0 @ b) * c0
    nb = np.linalg.norm(b_perp)
    if nb < 1e-12:
        raise ValueError("rot6d decode: columns are parallel")
    c1 = b_perp / nb
    return np.column_stack([c0, c1, np.cross(c0, c1)])


def euler_xyz_to_matrix(e) -> np.ndarray:
    """Intrinsic xyz euler angles: R = Rx(a) @ Ry(b) @ Rz(c)."""
    a, b, c = _vec(e, 3)
    return (so3_exp([a, 0, 0]) @ so3_exp([0, b, 0]) @ so3_exp([0, 0, c]))


def matrix_to_euler_xyz(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    sb = max(-1.0, min(1.0, R[0, 2]))
    b = math.asin(sb)
    if abs(sb) > 1.0 - 1e-10:
        # Gimbal: only a +/- c observable; take c = 0.
        return np.array([math.atan2(R[2, 1], R[1, 1]), b, 0.0])
    a = math.atan2(-R[1, 2], R[2, 2])
    c = math.atan2(-R[0, 1], R[0, 0])
    return np.array([a, b, c])


# ---------------------------------------------------------------------------
# Weighted rotation averaging
# ---------------------------------------------------------------------------


def weighted_rotation_mean(Rs, weights=None) -> np.ndarray:
    """Chordal-L2 mean: polar projection of the weighted matrix sum.

    Minimizes sum_i w_i * ||R - R_i||_F^2 over SO(3).  Left-equivariant:
    averaging {Q R_i} gives Q times the average of {R_i}.
    """
    mats = [np.asarray(R, dtype=float) for R in Rs]
    if not mats:
        raise ValueError("weighted_rotation_mean needs at least one rotation")
    if weights is None:
        w = np.ones(len(mats))
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (len(mats),) or np.any(w < 0):
        raise ValueError("weights must be nonnegative, one per rotation")
    total = float(np.sum(w))
    if total <= 0:
        raise ValueError("weights sum to zero")
    M = np.zeros((3, 3))
    for wi, Ri in zip(w, mats):
        M += (wi / total) * Ri
    U, S, Vt = np.linalg.svd(M)
    if S[2] < 1e-9:
        raise ValueError("degenerate rotation sum: rank below 3")
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt


def random_pose(rng: np.random.Generator, trans_scale: float = 1.0,
                max_angle: float = math.pi - 1e-3) -> Pose:
    """Uniform-ish random pose for property tests: random axis, uniform angle."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    return Pose(rng.uniform(-trans_scale, trans_scale, size=3),
                so3_exp(axis * angle))
