import math

import numpy as np
import pytest

from equicontact import liegroup as lie
from equicontact.liegroup import (
    BODY,
    SPATIAL,
    FrameError,
    Pose,
    Twist,
    Wrench,
    ad_wrench,
    ad_wrench_inverse,
    adjoint,
    euler_xyz_to_matrix,
    exp_se3,
    hat,
    log_se3,
    matrix_to_euler_xyz,
    matrix_to_rot6d,
    matrix_to_rotvec,
    rot6d_to_matrix,
    rotvec_to_matrix,
    so3_exp,
    vee,
    weighted_rotation_mean,
)


def se3_exp_series(xi_vec: np.ndarray, dt: float, terms: int = 12,
                   scale_square: bool = False) -> np.ndarray:
    """Independent oracle: truncated matrix-exponential power series on 4x4.

    Plain truncation is accurate to ~||X||^terms / terms!; scale_square
    repeatedly halves X and squares the result, making the truncation
    negligible for any angle.
    """
    X = hat(np.asarray(xi_vec) * dt)
    squarings = 0
    if scale_square:
        while np.linalg.norm(X) > 0.25:
            X = X / 2.0
            squarings += 1
    out = np.eye(4)
    term = np.eye(4)
    for k in range(1, terms):
        term = term @ X / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def rz(theta: float) -> np.ndarray:
    return so3_exp([0.0, 0.0, theta])


# ---------------------------------------------------------------------------
# hat / vee
# ---------------------------------------------------------------------------


def test_hat_vee_roundtrip_exact():
    v3 = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(vee(hat(v3)), v3)
    v6 = np.array([1.0, -2.0, 3.0, 0.5, 0.25, -0.125])
    assert np.array_equal(vee(hat(v6)), v6)


def test_hat_zero_is_zero_matrix():
    assert np.array_equal(hat([0.0, 0.0, 0.0]), np.zeros((3, 3)))


def test_hat_matches_cross_product():
    # oracle: hat(w) @ x == cross(w, x)
    rng = np.random.default_rng(7)
    for _ in range(50):
        w, x = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(hat(w) @ x, np.cross(w, x), atol=1e-14)
    assert np.allclose(hat([0, 0, 1]) @ [1, 0, 0], [0, 1, 0])


def test_hat_skew_symmetric():
    S = hat([0.3, -0.7, 1.1])
    assert np.array_equal(S, -S.T)


def test_vee_rejects_non_skew():
    with pytest.raises(ValueError):
        vee(np.eye(3))


# ---------------------------------------------------------------------------
# exp / log
# ---------------------------------------------------------------------------


def test_exp_zero_twist_is_identity():
    g = exp_se3(Twist.zero(), dt=0.5)
    assert g.almost_equal(Pose.identity(), tol=0.0)


def test_exp_pure_translation():
    g = exp_se3(Twist([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]), dt=0.5)
    assert np.allclose(g.p, [0.5, 0.0, 0.0])
    assert np.allclose(g.R, np.eye(3))


def test_exp_pure_rotation_matches_series_oracle():
    # plain 12-term truncation at pi/2 is only good to ~3e-7
    xi = np.array([0.0, 0.0, 0.0, 0.0, 0.0, math.pi / 2])
    T = se3_exp_series(xi, dt=1.0)
    g = exp_se3(Twist.from_vec(xi), dt=1.0)
    assert np.max(np.abs(g.matrix() - T)) < 1e-6
    assert np.allclose(g.R, rz(math.pi / 2), atol=1e-12)
    assert np.allclose(g.p, 0.0, atol=1e-12)


def test_exp_matches_plain_series_on_convergent_domain():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(200):
        xi = rng.uniform(-0.45, 0.45, size=6)
        dt = rng.uniform(0.05, 1.0)
        T = se3_exp_series(xi, dt)
        g = exp_se3(Twist.from_vec(xi), dt)
        worst = max(worst, float(np.max(np.abs(g.matrix() - T))))
    assert worst < 1e-9


def test_exp_matches_scaled_series_full_domain():
    rng = np.random.default_rng(1235)
    worst = 0.0
    for _ in range(200):
        xi = rng.uniform(-3.0, 3.0, size=6)
        T = se3_exp_series(xi, dt=1.0, scale_square=True)
        g = exp_se3(Twist.from_vec(xi), dt=1.0)
        worst = max(worst, float(np.max(np.abs(g.matrix() - T))))
    assert worst < 1e-9


def test_log_identity_is_zero():
    xi = log_se3(Pose.identity())
    assert np.array_equal(xi.as_vec(), np.zeros(6))


def test_exp_log_roundtrip_random():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(500):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0.0, 2.9)
        g = Pose(rng.uniform(-1, 1, size=3), so3_exp(axis * angle))
        g2 = exp_se3(log_se3(g), dt=1.0)
        worst = max(worst, float(np.max(np.abs(g2.matrix() - g.matrix()))))
    assert worst < 1e-10


def test_log_small_angle_branch():
    g = Pose([1e-12, 0, 0], so3_exp([1e-10, 2e-10, -1e-10]))
    xi = log_se3(g)
    assert np.allclose(xi.w, [1e-10, 2e-10, -1e-10], atol=1e-15)


def test_log_pi_branch_convention():
    # 180 deg about x: axis sign ambiguous, convention picks +x.
    g = Pose(np.zeros(3), so3_exp([math.pi, 0.0, 0.0]))
    xi = log_se3(g)
    assert np.allclose(xi.w, [math.pi, 0.0, 0.0], atol=1e-9)
    # 180 deg about -z must come back as +z.
    g = Pose(np.zeros(3), so3_exp([0.0, 0.0, -math.pi]))
    xi = log_se3(g)
    assert np.allclose(xi.w, [0.0, 0.0, math.pi], atol=1e-9)


def test_pose_composition_associative():
    rng = np.random.default_rng(3)
    for _ in range(100):
        g1, g2, g3 = (lie.random_pose(rng) for _ in range(3))
        a = (g1 @ g2) @ g3
        b = g1 @ (g2 @ g3)
        assert np.max(np.abs(a.matrix() - b.matrix())) < 1e-12


# ---------------------------------------------------------------------------
# adjoint wrench transport
# ---------------------------------------------------------------------------


def test_ad_wrench_identity_pose():
    F = Wrench([1.0, 2.0, 3.0], [0.1, 0.2, 0.3], BODY)
    Fs = ad_wrench(Pose.identity(), F)
    assert Fs.frame == SPATIAL
    assert np.allclose(Fs.as_vec(), F.as_vec())


def test_ad_wrench_pure_rotation_force():
    R = rz(0.7)
    g = Pose(np.zeros(3), R)
    F = Wrench([1.0, -2.0, 0.5], np.zeros(3), BODY)
    Fs = ad_wrench(g, F)
    assert np.allclose(Fs.f, R @ F.f, atol=1e-14)
    assert np.allclose(Fs.tau, 0.0, atol=1e-14)


def test_ad_wrench_matches_block_matrix_oracle():
    # oracle: spatial = Ad(g^-1)^T @ body, built from the 6x6 block adjoint
    rng = np.random.default_rng(11)
    for _ in range(100):
        g = lie.random_pose(rng)
        F = Wrench.from_vec(rng.normal(size=6), BODY)
        expected = adjoint(g.inverse()).T @ F.as_vec()
        got = ad_wrench(g, F).as_vec()
        assert np.max(np.abs(got - expected)) < 1e-12


def test_ad_wrench_roundtrip():
    rng = np.random.default_rng(12)
    for _ in range(100):
        g = lie.random_pose(rng)
        F = Wrench.from_vec(rng.normal(size=6), BODY)
        back = ad_wrench_inverse(g, ad_wrench(g, F))
        assert back.frame == BODY
        assert np.max(np.abs(back.as_vec() - F.as_vec())) < 1e-12


def test_ad_wrench_composition_law():
    rng = np.random.default_rng(13)
    for _ in range(100):
        g1, g2 = lie.random_pose(rng), lie.random_pose(rng)
        F = Wrench.from_vec(rng.normal(size=6), BODY)
        lhs = ad_wrench(g1 @ g2, F).as_vec()
        inner = ad_wrench(g2, F)
        rhs = ad_wrench(g1, Wrench.from_vec(inner.as_vec(), BODY)).as_vec()
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_ad_wrench_frame_mismatch():
    F = Wrench.zero(SPATIAL)
    with pytest.raises(FrameError):
        ad_wrench(Pose.identity(), F)


# ---------------------------------------------------------------------------
# rotation codecs
# ---------------------------------------------------------------------------


def test_codec_identity():
    assert np.allclose(matrix_to_rotvec(np.eye(3)), 0.0)
    assert np.allclose(matrix_to_rot6d(np.eye(3)), [1, 0, 0, 0, 1, 0])


def test_codec_roundtrips():
    rng = np.random.default_rng(21)
    for _ in range(200):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        R = so3_exp(axis * rng.uniform(0, 3.0))
        assert np.max(np.abs(rotvec_to_matrix(matrix_to_rotvec(R)) - R)) < 1e-10
        assert np.max(np.abs(rot6d_to_matrix(matrix_to_rot6d(R)) - R)) < 1e-10
        assert np.max(np.abs(euler_xyz_to_matrix(matrix_to_euler_xyz(R)) - R)) < 1e-10


def test_rot6d_continuous_near_pi_while_rotvec_jumps():
    R1 = rz(math.radians(179.9))
    R2 = rz(math.radians(180.1))
    d6 = np.linalg.norm(matrix_to_rot6d(R1) - matrix_to_rot6d(R2))
    dv = np.linalg.norm(matrix_to_rotvec(R1) - matrix_to_rotvec(R2))
    assert d6 < 0.01
    assert dv > 2 * math.pi - 0.1


def test_euler_xyz_composition_convention():
    # euler (0, 0, pi/2) equals a pure z rotation of pi/2
    assert np.allclose(
        euler_xyz_to_matrix([0, 0, math.pi / 2]),
        rotvec_to_matrix([0, 0, math.pi / 2]),
        atol=1e-14,
    )
    # intrinsic xyz: Rx @ Ry @ Rz
    a, b, c = 0.3, -0.5, 1.1
    expected = so3_exp([a, 0, 0]) @ so3_exp([0, b, 0]) @ so3_exp([0, 0, c])
    assert np.allclose(euler_xyz_to_matrix([a, b, c]), expected, atol=1e-14)


def test_rot6d_degenerate_inputs():
    with pytest.raises(ValueError):
        rot6d_to_matrix([0, 0, 0, 0, 1, 0])
    with pytest.raises(ValueError):
        rot6d_to_matrix([1, 0, 0, 2, 0, 0])


# ---------------------------------------------------------------------------
# weighted rotation mean
# ---------------------------------------------------------------------------


def chordal_cost(R: np.ndarray, Rs, w) -> float:
    return float(sum(wi * np.sum((R - Ri) ** 2) for wi, Ri in zip(w, Rs)))


def test_mean_of_identical_rotations():
    R = rz(0.9)
    assert np.max(np.abs(weighted_rotation_mean([R, R, R]) - R)) < 1e-12


def test_mean_symmetry_cancels():
    Rm = weighted_rotation_mean([rz(0.4), rz(-0.4)])
    assert np.max(np.abs(Rm - np.eye(3))) < 1e-12


def test_mean_small_angle_bisector():
    got = weighted_rotation_mean([rz(0.0), rz(0.2)])
    assert np.max(np.abs(got - rz(0.1))) < 1e-6


def test_mean_minimizes_chordal_cost_brute_force():
    # oracle: sampled perturbations around the returned mean never do better
    rng = np.random.default_rng(31)
    Rs = [so3_exp(rng.normal(scale=0.3, size=3)) for _ in range(5)]
    w = rng.uniform(0.5, 2.0, size=5)
    Rm = weighted_rotation_mean(Rs, w)
    best = chordal_cost(Rm, Rs, w)
    for _ in range(2000):
        delta = rng.normal(scale=rng.uniform(1e-3, 0.5), size=3)
        assert chordal_cost(so3_exp(delta) @ Rm, Rs, w) >= best - 1e-12


def test_mean_left_equivariance():
    rng = np.random.default_rng(32)
    for _ in range(50):
        Rs = [so3_exp(rng.normal(scale=0.4, size=3)) for _ in range(6)]
        w = rng.uniform(0.1, 1.0, size=6)
        Q = so3_exp(rng.normal(size=3))
        lhs = weighted_rotation_mean([Q @ R for R in Rs], w)
        rhs = Q @ weighted_rotation_mean(Rs, w)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_mean_rejects_degenerate_sum():
    with pytest.raises(ValueError):
        weighted_rotation_mean([rz(math.pi / 2), rz(-math.pi / 2)])
    with pytest.raises(ValueError):
        weighted_rotation_mean([rz(0.1)], [0.0])


def test_mean_validates_weights():
    with pytest.raises(ValueError):
        weighted_rotation_mean([rz(0.1), rz(0.2)], [1.0, -1.0])


# ---------------------------------------------------------------------------
# type guards
# ---------------------------------------------------------------------------


def test_pose_rejects_invalid_rotation():
    with pytest.raises(ValueError):
        Pose(np.zeros(3), 2 * np.eye(3))
    with pytest.raises(ValueError):
        Pose(np.zeros(3), np.diag([1.0, 1.0, -1.0]))


def test_twist_wrench_frames_fixed():
    t = Twist.zero(BODY)
    assert t.frame == BODY
    with pytest.raises(FrameError):
        Twist.zero("world")
    with pytest.raises(FrameError):
        Wrench.zero(BODY).require_frame(SPATIAL)


def test_pose_arrays_immutable():
    g = Pose.identity()
    with pytest.raises(ValueError):
        g.p[0] = 1.0
