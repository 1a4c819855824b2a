import math

import numpy as np
import pytest

from equicontact import liegroup as lie
from equicontact.admittance import (
    DEFAULT_TS,
    REBIAS_MIN_SAMPLES,
    FtFilterState,
    GainProfile,
    Gains,
    elastic_wrench,
    ft_filter_step,
    ft_rebias,
    gac_step,
    jacobian_to_body,
    joint_space_step,
    twist_to_body,
    twist_to_spatial,
)
from equicontact.liegroup import (
    BODY,
    SPATIAL,
    FrameError,
    Pose,
    Twist,
    Wrench,
    ad_wrench,
    adjoint,
    so3_exp,
)


def default_gains() -> Gains:
    return GainProfile.FREE.gains()


def gcev_norm(g: Pose, g_d: Pose) -> float:
    e_p = g.R.T @ (g.p - g_d.p)
    e_r = lie.skew_part_vee(g_d.R.T @ g.R - g.R.T @ g_d.R)
    return float(np.linalg.norm(np.concatenate([e_p, e_r])))


# ---------------------------------------------------------------------------
# gains and profiles
# ---------------------------------------------------------------------------


def test_gain_profile_values():
    kp, kr = GainProfile.FREE.stiffness()
    assert np.allclose(kp, 1000.0) and np.allclose(kr, 1000.0)
    kp, kr = GainProfile.CONTACT.stiffness()
    assert np.allclose(kp, [1500, 1500, 300]) and np.allclose(kr, 1500.0)
    kp, kr = GainProfile.INSERTION.stiffness()
    assert np.allclose(kp, [300, 300, 1500]) and np.allclose(kr, 300.0)
    kp, kr = GainProfile.COMPLIANT.stiffness()
    assert np.allclose(kp, 300.0) and np.allclose(kr, 300.0)


def test_gains_validation():
    with pytest.raises(ValueError):
        Gains([0, 1, 1], [1, 1, 1], np.eye(6), np.eye(6))
    with pytest.raises(ValueError):
        Gains([1, 1, 1], [1, 1, 1], -np.eye(6), np.eye(6))
    asym = np.eye(6)
    asym[0, 1] = 0.5
    with pytest.raises(ValueError):
        Gains([1, 1, 1], [1, 1, 1], asym, np.eye(6))


def test_critical_damping_heuristic():
    g = Gains.from_stiffness([1000, 1000, 1000], [1000, 1000, 1000])
    # Kd_ii = 2 sqrt(M_ii * k_ii): translation 2*sqrt(10*1000) = 200
    assert np.allclose(np.diag(g.Kd)[:3], 200.0)
    assert np.allclose(np.diag(g.Kd)[3:], 2 * math.sqrt(1000.0))


# ---------------------------------------------------------------------------
# elastic wrench
# ---------------------------------------------------------------------------


def test_elastic_wrench_zero_at_target():
    rng = np.random.default_rng(0)
    g = lie.random_pose(rng)
    F = elastic_wrench(g, g, default_gains())
    assert np.allclose(F.as_vec(), 0.0, atol=1e-12)
    assert F.frame == BODY


def test_elastic_wrench_pure_translation():
    g = Pose([0.01, 0.0, 0.0], np.eye(3))
    F = elastic_wrench(g, Pose.identity(), default_gains())
    assert np.allclose(F.f, [10.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(F.tau, 0.0, atol=1e-12)


def test_elastic_wrench_pure_rotation_closed_form():
    # R_d = I, R = Rz(theta), K_R = k I  =>  f_R = (0, 0, 2 k sin(theta))
    k = 700.0
    gains = Gains.from_stiffness([1000, 1000, 1000], [k, k, k])
    for theta in (0.1, 0.5, 1.2, -0.8):
        g = Pose(np.zeros(3), so3_exp([0, 0, theta]))
        F = elastic_wrench(g, Pose.identity(), gains)
        assert np.allclose(F.tau, [0, 0, 2 * k * math.sin(theta)], atol=1e-10)
        assert np.allclose(F.f, 0.0, atol=1e-12)


def test_elastic_wrench_left_invariance():
    rng = np.random.default_rng(5)
    gains = GainProfile.CONTACT.gains()
    worst = 0.0
    for _ in range(300):
        g, g_d, g_l = (lie.random_pose(rng) for _ in range(3))
        a = elastic_wrench(g, g_d, gains).as_vec()
        b = elastic_wrench(g_l @ g, g_l @ g_d, gains).as_vec()
        worst = max(worst, float(np.max(np.abs(a - b))))
    assert worst < 1e-10


def test_elastic_wrench_spatial_adjoint_equivariance():
    rng = np.random.default_rng(6)
    gains = default_gains()
    for _ in range(200):
        g, g_d, g_l = (lie.random_pose(rng) for _ in range(3))
        F = elastic_wrench(g, g_d, gains)
        lhs = ad_wrench(g_l @ g, elastic_wrench(g_l @ g, g_l @ g_d, gains)).as_vec()
        rhs = adjoint(g_l.inverse()).T @ ad_wrench(g, F).as_vec()
        assert np.max(np.abs(lhs - rhs)) < 1e-10


# ---------------------------------------------------------------------------
# gac step
# ---------------------------------------------------------------------------


def test_gac_step_rest_equilibrium():
    g = Pose([0.3, -0.2, 0.5], so3_exp([0.1, 0.2, 0.3]))
    v_d, g_cmd = gac_step(g, g, Twist.zero(), Wrench.zero(), default_gains())
    assert np.allclose(v_d.as_vec(), 0.0, atol=1e-15)
    assert g_cmd.almost_equal(g, tol=1e-15)


def test_gac_step_force_balance_holds_velocity():
    rng = np.random.default_rng(8)
    gains = default_gains()
    g, g_d = lie.random_pose(rng), lie.random_pose(rng)
    v_b = Twist.from_vec(rng.normal(scale=0.1, size=6), BODY)
    f_bal = (elastic_wrench(g, g_d, gains).as_vec()
             + gains.Kd @ v_b.as_vec())
    v_d, _ = gac_step(g, g_d, v_b, Wrench.from_vec(f_bal, BODY), gains)
    assert np.max(np.abs(v_d.as_vec() - v_b.as_vec())) < 1e-12


def test_gac_step_impulse_from_rest():
    # g = g_d, v = 0: v_d = dt * M^-1 F
    gains = default_gains()
    g = Pose.identity()
    F = Wrench([4.0, 0, 0], np.zeros(3), BODY)
    v_d, _ = gac_step(g, g, Twist.zero(), F, gains, dt=DEFAULT_TS)
    assert np.allclose(v_d.v, [DEFAULT_TS * 4.0 / 10.0, 0, 0], atol=1e-15)
    assert np.allclose(v_d.w, 0.0, atol=1e-15)


def test_gac_step_left_equivariance():
    rng = np.random.default_rng(9)
    gains = default_gains()
    worst = 0.0
    for _ in range(200):
        g, g_d, g_l = (lie.random_pose(rng) for _ in range(3))
        v_b = Twist.from_vec(rng.normal(scale=0.2, size=6), BODY)
        F = Wrench.from_vec(rng.normal(scale=5.0, size=6), BODY)
        v1, c1 = gac_step(g, g_d, v_b, F, gains)
        v2, c2 = gac_step(g_l @ g, g_l @ g_d, v_b, F, gains)
        worst = max(worst, float(np.max(np.abs(v1.as_vec() - v2.as_vec()))))
        worst = max(worst, float(np.max(np.abs((g_l @ c1).matrix() - c2.matrix()))))
    assert worst < 1e-10


def test_gac_loop_error_non_increasing():
    # free motion toward a fixed target from rest: no overshoot at critical damping
    gains = default_gains()
    g_d = Pose.identity()
    g = Pose([0.05, -0.03, 0.02], so3_exp([0.2, -0.1, 0.3]))
    v = Twist.zero()
    prev = gcev_norm(g, g_d)
    for _ in range(1000):
        v, g = gac_step(g, g_d, v, Wrench.zero(), gains)
        cur = gcev_norm(g, g_d)
        assert cur <= prev + 1e-12
        prev = cur
    assert prev < 1e-4


# ---------------------------------------------------------------------------
# joint-space variant
# ---------------------------------------------------------------------------


def test_joint_space_rest():
    gains = default_gains()
    q = np.array([0.1, -0.2, 0.3, 0.4, -0.5, 0.6])
    f = Wrench([1.0, 2, 3], [0.1, 0.2, 0.3], BODY)
    dq_d, q_d = joint_space_step(q, np.zeros(6), np.eye(6), f, f,
                                 Twist.zero(), gains)
    assert np.allclose(dq_d, 0.0)
    assert np.allclose(q_d, q)


def test_joint_space_identity_jacobian_matches_task_space():
    rng = np.random.default_rng(10)
    gains = default_gains()
    g, g_d = lie.random_pose(rng), lie.random_pose(rng)
    v_b = Twist.from_vec(rng.normal(scale=0.1, size=6), BODY)
    F = Wrench.from_vec(rng.normal(scale=3.0, size=6), BODY)
    f_el = elastic_wrench(g, g_d, gains)
    v_d, _ = gac_step(g, g_d, v_b, F, gains)
    dq_d, _ = joint_space_step(np.zeros(6), v_b.as_vec(), np.eye(6), F, f_el,
                               v_b, gains)
    assert np.max(np.abs(dq_d - v_d.as_vec())) < 1e-12


def test_joint_space_inertia_linearity():
    gains1 = Gains.from_stiffness([1000] * 3, [1000] * 3, np.diag([10.0] * 3 + [1.0] * 3))
    gains2 = Gains(gains1.kp, gains1.kr, 2 * gains1.M, gains1.Kd)
    F = Wrench([6.0, 0, 0], np.zeros(3), BODY)
    zero = Wrench.zero()
    dq1, _ = joint_space_step(np.zeros(6), np.zeros(6), np.eye(6), F, zero,
                              Twist.zero(), gains1)
    dq2, _ = joint_space_step(np.zeros(6), np.zeros(6), np.eye(6), F, zero,
                              Twist.zero(), gains2)
    assert np.allclose(dq2, dq1 / 2.0)


def test_joint_space_singularity_error():
    J = np.eye(6)
    J[5, 5] = 1e-12
    with pytest.raises(ValueError):
        joint_space_step(np.zeros(6), np.zeros(6), J, Wrench.zero(),
                         Wrench.zero(), Twist.zero(), default_gains())


# ---------------------------------------------------------------------------
# frame adaptors
# ---------------------------------------------------------------------------


def test_twist_adaptor_identity():
    V = Twist([1, 2, 3], [4, 5, 6], SPATIAL)
    Vb = twist_to_body(V, np.eye(3))
    assert np.allclose(Vb.as_vec(), V.as_vec())
    assert Vb.frame == BODY


def test_twist_adaptor_rotation():
    R = so3_exp([0, 0, math.pi / 2])
    Vb = twist_to_body(Twist([1, 0, 0], np.zeros(3), SPATIAL), R)
    assert np.allclose(Vb.v, [0, -1, 0], atol=1e-12)


def test_twist_adaptor_roundtrip():
    rng = np.random.default_rng(14)
    for _ in range(50):
        R = so3_exp(rng.normal(size=3))
        V = Twist.from_vec(rng.normal(size=6), SPATIAL)
        back = twist_to_spatial(twist_to_body(V, R), R)
        assert np.max(np.abs(back.as_vec() - V.as_vec())) < 1e-12


def test_twist_adaptor_frame_guard():
    with pytest.raises(FrameError):
        twist_to_body(Twist.zero(BODY), np.eye(3))


def test_jacobian_adaptor():
    rng = np.random.default_rng(15)
    R = so3_exp(rng.normal(size=3))
    J = rng.normal(size=(6, 6))
    Jb = jacobian_to_body(J, R)
    B = np.zeros((6, 6))
    B[:3, :3] = R.T
    B[3:, 3:] = R.T
    assert np.allclose(Jb, B @ J)


# ---------------------------------------------------------------------------
# force-torque conditioning
# ---------------------------------------------------------------------------


def test_ft_filter_constant_at_bias_converges_to_zero():
    bias = np.array([1.0, -2.0, 0.5, 0.1, 0.0, -0.3])
    state = FtFilterState.fresh(bias=bias, cutoff_hz=5.0)
    raw = Wrench.from_vec(bias, BODY)
    y = None
    for _ in range(500):
        state, y = ft_filter_step(state, raw)
    assert np.max(np.abs(y.as_vec())) < 1e-12


def test_ft_filter_step_response_time_constant():
    # interpolated 63.2% crossing of a unit step must land at 1/(2 pi fc) +- 5%
    cutoff = 5.0
    state = FtFilterState.fresh(cutoff_hz=cutoff, sample_hz=200.0)
    raw = Wrench([1.0, 0, 0, 0, 0, 0][:3], [0, 0, 0], BODY)
    target = 1.0 - math.exp(-1.0)
    ts = 1.0 / 200.0
    t_prev, y_prev_val = 0.0, 0.0
    crossing = None
    for k in range(1, 200):
        state, y = ft_filter_step(state, raw)
        val = y.f[0]
        t = k * ts
        if val >= target and crossing is None:
            crossing = t_prev + (target - y_prev_val) / (val - y_prev_val) * (t - t_prev)
        t_prev, y_prev_val = t, val
    tau = 1.0 / (2.0 * math.pi * cutoff)
    assert crossing is not None
    assert abs(crossing - tau) / tau < 0.05


def test_ft_filter_dc_gain_unity_at_high_cutoff():
    state = FtFilterState.fresh(cutoff_hz=50.0, sample_hz=200.0)  # Nyquist/2
    raw = Wrench([2.0, 0, 0], [0, 0, 0.5], BODY)
    y = None
    for _ in range(400):
        state, y = ft_filter_step(state, raw)
    assert np.max(np.abs(y.as_vec() - raw.as_vec())) < 1e-9


def test_ft_filter_cutoff_validation():
    with pytest.raises(ValueError):
        FtFilterState.fresh(cutoff_hz=100.0, sample_hz=200.0)
    with pytest.raises(ValueError):
        FtFilterState.fresh(cutoff_hz=0.0)


def test_ft_rebias_constant():
    c = np.array([1.0, 2.0, 3.0, 0.1, 0.2, 0.3])
    samples = [Wrench.from_vec(c, BODY) for _ in range(REBIAS_MIN_SAMPLES)]
    assert np.allclose(ft_rebias(samples), c)


def test_ft_rebias_sinusoid_integer_periods():
    n = 400
    t = np.arange(n) / 200.0
    amp = 2.0
    vals = amp * np.sin(2 * math.pi * 5.0 * t)  # 10 full periods in 2 s
    samples = [Wrench([v, 0, 0], np.zeros(3), BODY) for v in vals]
    bias = ft_rebias(samples)
    assert np.max(np.abs(bias)) < amp / math.sqrt(n)


def test_ft_rebias_sample_count_gate():
    mk = lambda n: [Wrench.zero(BODY) for _ in range(n)]
    ft_rebias(mk(400))
    with pytest.raises(ValueError):
        ft_rebias(mk(399))
