"""Verification harness: equivariance property suites, seeded benchmark
trials over the full estimator -> policy -> ensemble -> admittance stack,
and result export with exact-replay metadata.

Benchmark policies:
- ``gcev-local``: the localized stack; observations are the body-frame
  error against an estimated reference plus filtered force-torque and
  local visual features.
- ``world-frame-replay``: a command trajectory recorded once on the
  nominal scene is replayed verbatim in world coordinates, modeling a
  policy whose observation/action representation is tied to the spatial
  frame.
Compliance off executes commanded poses with a stiff rate-limited servo
that ignores contact forces.

Every random quantity in a trial derives from its published trial seed
and is drawn in a scene-local frame, so re-running from an export
reproduces each trial bit for bit and left-transformed scenes replay to
left-transformed trajectories.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, asdict, field, replace
from pathlib import Path

import numpy as np

from . import refframe
from .admittance import (
    DEFAULT_TS,
    FtFilterState,
    Gains,
    elastic_wrench,
    ft_filter_step,
    ft_rebias,
)
from .liegroup import (
    BODY,
    Pose,
    Twist,
    Wrench,
    ad_wrench,
    adjoint,
    euler_xyz_to_matrix,
    random_pose,
)
from .policy import (
    EnsembleBuffer,
    Observation,
    PolicyConfig,
    augment_reference,
    compute_gcev,
    expand_chunk,
    scripted_insertion_policy,
    scripted_pick_policy,
    temporal_ensemble,
)
from .refframe import EstimatorNoise, ToolOffset, mock_candidates, refine_pick, refine_place
from .sim import (
    FAIL,
    GRIPPER_HOLDING,
    IN_PROGRESS,
    SUCCESS,
    ContactParams,
    FtNoise,
    PegHoleGeom,
    ScenarioSpec,
    Scene,
    SimState,
    SimulationBlowupError,
    VisionCfg,
    build_scenario,
    ft_sense,
    observe_features,
    step,
    success_check,
    try_close_gripper,
)

INFER_EVERY = 5                 # control ticks between policy inferences
FORCE_LIMIT_N = 60.0            # safety shutdown on any force axis
OUTCOME_BLOWUP = "blowup"

SCENARIO_IDS = ("flat-ind", "flat-ood", "tilt30-ood", "tilt45", "flat-distractor")

_NOMINAL_SEED = 889_001


def scenario_spec(scenario_id: str, trial_seed: int) -> ScenarioSpec:
    if scenario_id == "flat-ind":
        return ScenarioSpec(seed=trial_seed)
    if scenario_id == "flat-ood":
        return ScenarioSpec(trans_bound=0.10, seed=trial_seed)
    if scenario_id == "tilt30-ood":
        return ScenarioSpec(tilt_deg=30.0, trans_bound=0.05, seed=trial_seed)
    if scenario_id == "tilt45":
        return ScenarioSpec(tilt_deg=45.0, seed=trial_seed)
    if scenario_id == "flat-distractor":
        return ScenarioSpec(distractor=True, seed=trial_seed)
    raise ValueError(f"unknown scenario id {scenario_id!r}")


# ---------------------------------------------------------------------------
# trial configuration and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkConfig:
    policy: str = "gcev-local"          # gcev-local | world-frame-replay
    compliance: bool = True
    scenarios: tuple = ("flat-ood",)
    trials: int = 20
    seed: int = 0
    ref_noise: str = "bench"            # none | bench | rmse-table
    visual: str = "augmented"           # augmented | brittle
    gain_schedule: str = "adaptive"     # adaptive | fixed-high
    timeout_s: float = 15.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenarios"] = list(self.scenarios)
        return d

    @staticmethod
    def from_dict(d: dict) -> "BenchmarkConfig":
        d = dict(d)
        d["scenarios"] = tuple(d["scenarios"])
        return BenchmarkConfig(**d)


@dataclass(frozen=True)
class TrialReport:
    scenario: str
    policy: str
    outcome: str            # success | fail | blowup
    steps: int
    peak_force: tuple       # max |F| per axis (fx fy fz tx ty tz)
    seed: int

    def __post_init__(self):
        if self.outcome not in (SUCCESS, FAIL, OUTCOME_BLOWUP):
            raise ValueError(f"bad outcome {self.outcome!r}")
        object.__setattr__(self, "peak_force",
                           tuple(float(x) for x in self.peak_force))

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrialReport":
        d = dict(d)
        d["peak_force"] = tuple(d["peak_force"])
        return TrialReport(**d)


@dataclass
class TrialResult:
    report: TrialReport
    force_trace: list           # [t, fx, fy, fz, tx, ty, tz] per tick
    trajectory: list | None = None   # Pose per tick when recording is on


def trial_seed_for(master_seed: int, index: int) -> int:
    return master_seed * 1_000_003 + index * 97 + 13


# ---------------------------------------------------------------------------
# closed-loop insertion trial
# ---------------------------------------------------------------------------


def _insertion_start(scene: Scene, geom: PegHoleGeom,
                     rng: np.random.Generator) -> Pose:
    """Randomized start near the platform, drawn in the target-local frame."""
    local = Pose(
        [rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
         -rng.uniform(0.06, 0.10)],
        euler_xyz_to_matrix(rng.uniform(-0.08, 0.08, 3)),
    )
    return scene.place_target(geom) @ local


def _reference_pose(cfg: BenchmarkConfig, scene: Scene, geom: PegHoleGeom,
                    trial_seed: int) -> Pose:
    true_ref = scene.place_target(geom)
    if cfg.ref_noise == "none":
        return true_ref
    if cfg.ref_noise == "bench":
        # local-frame uniform corruption bounded by (5 mm, 8 deg)
        rng = np.random.default_rng(trial_seed + 4)
        return true_ref @ augment_reference(Pose.identity(), rng,
                                            trans_bound=0.005, rot_bound_deg=8.0)
    if cfg.ref_noise == "rmse-table":
        cands = mock_candidates(scene, refframe.KIND_PLACE,
                                EstimatorNoise.place_default(),
                                trial_seed + 4, geom)
        return refine_place(cands, ToolOffset([0.0, 0.0, geom.tip_offset]))
    if cfg.ref_noise.startswith("lateral-"):
        # fixed-magnitude lateral offset, random direction: guarantees the
        # blind stack lands on the flat surface and must search
        radius = float(cfg.ref_noise.removeprefix("lateral-").removesuffix("mm")) / 1000.0
        rng = np.random.default_rng(trial_seed + 4)
        phi = rng.uniform(-math.pi, math.pi)
        dz = rng.uniform(-0.002, 0.002)
        local = Pose([radius * math.cos(phi), radius * math.sin(phi), dz],
                     np.eye(3))
        return true_ref @ local
    raise ValueError(f"unknown ref_noise preset {cfg.ref_noise!r}")


def _gains_from(kp, kr, schedule: str) -> Gains:
    if schedule == "fixed-high":
        return Gains.from_stiffness([1500.0] * 3, [1500.0] * 3)
    return Gains.from_stiffness(np.clip(kp, 300.0, 1500.0),
                                np.clip(kr, 300.0, 1500.0))


def _vision_cfg(visual: str) -> VisionCfg:
    if visual == "augmented":
        return VisionCfg()
    if visual == "brittle":
        return VisionCfg(brittle=True)
    if visual == "off":
        return VisionCfg(enabled=False)
    raise ValueError(f"unknown visual mode {visual!r}")


_nominal_cache: dict = {}


def _nominal_command_trace(pcfg: PolicyConfig, geom: PegHoleGeom,
                           cp: ContactParams, timeout_s: float) -> list:
    """World-frame command log of the localized stack on the nominal scene."""
    key = (pcfg.to_json(), timeout_s)
    if key not in _nominal_cache:
        cfg = BenchmarkConfig(policy="gcev-local", ref_noise="none",
                              scenarios=("flat-ind",), timeout_s=timeout_s)
        res = run_insertion_trial(cfg, "flat-ind", _NOMINAL_SEED, pcfg, geom, cp,
                                  record_commands=True)
        _nominal_cache[key] = res.commands
    return _nominal_cache[key]


@dataclass
class _RichResult(TrialResult):
    commands: list = field(default_factory=list)


def run_insertion_trial(cfg: BenchmarkConfig, scenario_id: str, trial_seed: int,
                        pcfg: PolicyConfig | None = None,
                        geom: PegHoleGeom | None = None,
                        cp: ContactParams | None = None,
                        record_trajectory: bool = False,
                        record_commands: bool = False,
                        scene: Scene | None = None) -> _RichResult:
    """One seeded insertion trial of the configured policy stack."""
    pcfg = pcfg or PolicyConfig()
    geom = geom or PegHoleGeom()
    cp = cp or ContactParams()
    if scene is None:
        scene = build_scenario(scenario_spec(scenario_id, trial_seed))

    start_rng = np.random.default_rng(trial_seed + 1)
    ft_rng = np.random.default_rng(trial_seed + 2)
    vis_rng = np.random.default_rng(trial_seed + 3)

    state = SimState(_insertion_start(scene, geom, start_rng), Twist.zero(),
                     gripper=GRIPPER_HOLDING)
    g_ref = _reference_pose(cfg, scene, geom, trial_seed)
    vision = _vision_cfg(cfg.visual)

    # FT conditioning: constant bias estimated over a quiet 2 s window
    bias_true = ft_rng.uniform(-2.0, 2.0, 6) * np.array([1, 1, 1, 0.1, 0.1, 0.1])
    noise = FtNoise(bias=bias_true)
    quiet = [ft_sense(Wrench.zero(BODY), noise, ft_rng) for _ in range(400)]
    filt = FtFilterState.fresh(bias=ft_rebias(quiet))
    f_filtered = Wrench.zero(BODY)

    tool = Pose([0.0, 0.0, geom.tip_offset], np.eye(3))
    tool_inv = tool.inverse()
    buf = EnsembleBuffer(decay=pcfg.ensemble_decay)
    replay = (_nominal_command_trace(pcfg, geom, cp, cfg.timeout_s)
              if cfg.policy == "world-frame-replay" else None)

    g_cmd = state.g_ee
    gains = _gains_from(np.full(3, 1000.0), np.full(3, 1000.0), cfg.gain_schedule)

    max_ticks = int(round(cfg.timeout_s / DEFAULT_TS)) + 1
    peak = np.zeros(6)
    force_trace: list = []
    trajectory: list = [] if record_trajectory else None
    commands: list = [] if record_commands else []
    outcome = FAIL
    tick = 0

    try:
        for tick in range(max_ticks):
            if replay is not None:
                g_cmd, kp, kr = replay[min(tick, len(replay) - 1)]
                gains = _gains_from(kp, kr, cfg.gain_schedule)
            elif tick % INFER_EVERY == 0:
                if tick > 0:
                    buf.advance()
                g_tip = geom.tip_pose(state.g_ee)
                obs = Observation(
                    compute_gcev(g_tip, geom.tip_pose(g_ref)),
                    f_filtered,
                    observe_features(state, scene, geom, "place", vision, vis_rng),
                )
                buf.push(g_tip, scripted_insertion_policy(obs, pcfg))
                g_d_tip, kp, kr = temporal_ensemble(buf)
                g_cmd = g_d_tip @ tool_inv
                gains = _gains_from(kp, kr, cfg.gain_schedule)

            if record_commands:
                commands.append((g_cmd, gains.kp.copy(), gains.kr.copy()))

            state, f_raw = step(state, scene, geom, cp, g_cmd, gains,
                                stiff=not cfg.compliance)
            fvec = f_raw.as_vec()
            peak = np.maximum(peak, np.abs(fvec))
            force_trace.append([state.t, *fvec.tolist()])
            if trajectory is not None:
                trajectory.append(state.g_ee)

            filt, f_filtered = ft_filter_step(filt, ft_sense(f_raw, noise, ft_rng))

            if np.max(np.abs(fvec[:3])) > FORCE_LIMIT_N:
                outcome = OUTCOME_BLOWUP
                break
            verdict = success_check(state, scene, geom, timeout_s=cfg.timeout_s)
            if verdict != IN_PROGRESS:
                outcome = verdict
                break
    except SimulationBlowupError:
        outcome = OUTCOME_BLOWUP

    report = TrialReport(scenario=scenario_id, policy=cfg.policy,
                         outcome=outcome, steps=tick + 1,
                         peak_force=tuple(peak.tolist()), seed=trial_seed)
    return _RichResult(report, force_trace, trajectory, commands)


# ---------------------------------------------------------------------------
# pick-then-place pipeline trial
# ---------------------------------------------------------------------------


def run_pipeline_trial(trial_seed: int, scenario_id: str = "flat-ood",
                       pcfg: PolicyConfig | None = None,
                       geom: PegHoleGeom | None = None,
                       cp: ContactParams | None = None,
                       ref_noise: str = "rmse-table",
                       pick_timeout_s: float = 10.0,
                       place_timeout_s: float = 15.0) -> TrialResult:
    """Full pick-then-place run; success requires both stages to land."""
    pcfg = pcfg or PolicyConfig()
    geom = geom or PegHoleGeom()
    cp = cp or ContactParams()
    scene = build_scenario(scenario_spec(scenario_id, trial_seed))

    ft_rng = np.random.default_rng(trial_seed + 2)
    vis_rng = np.random.default_rng(trial_seed + 3)

    # stage 1: pick.  Tool point is the jaw center; the reference hovers
    # above the refined grasp pose.
    jaw_tool = ToolOffset([0.0, 0.0, geom.jaw_offset])
    if ref_noise == "none":
        g_pick = scene.pick_target(geom)
    else:
        cands = mock_candidates(scene, refframe.KIND_PICK,
                                EstimatorNoise.pick_default(), trial_seed + 5,
                                geom)
        g_pick = refine_pick(cands, scene.g_peg_initial.R, jaw_tool)
    pick_ref = g_pick @ Pose([0.0, 0.0, -pcfg.hover_height], np.eye(3))

    state = SimState.initial(scene)
    jaw = Pose([0.0, 0.0, geom.jaw_offset], np.eye(3))
    jaw_inv = jaw.inverse()
    buf = EnsembleBuffer(decay=pcfg.ensemble_decay)
    gains = Gains.from_stiffness([1000.0] * 3, [1000.0] * 3)
    g_cmd = state.g_ee
    force_trace: list = []
    peak = np.zeros(6)
    close_at: int | None = None

    max_ticks = int(round(pick_timeout_s / DEFAULT_TS))
    picked = False
    for tick in range(max_ticks):
        if tick % INFER_EVERY == 0:
            if tick > 0:
                buf.advance()
            g_jaw = jaw_pose = geom.jaw_pose(state.g_ee)
            obs = Observation(
                compute_gcev(g_jaw, geom.jaw_pose(pick_ref)),
                Wrench.zero(BODY),   # pick policy ignores FT by contract
                observe_features(state, scene, geom, "pick", VisionCfg(), vis_rng),
            )
            chunk = scripted_pick_policy(obs, pcfg)
            buf.push(g_jaw, chunk)
            g_d_jaw, kp, kr = temporal_ensemble(buf)
            g_cmd = g_d_jaw @ jaw_inv
            gains = Gains.from_stiffness(np.clip(kp, 300, 1500),
                                         np.clip(kr, 300, 1500))
            if chunk.gripper_close and close_at is None:
                close_at = tick + INFER_EVERY  # close after settling this window
        state, f_raw = step(state, scene, geom, cp, g_cmd, gains)
        force_trace.append([state.t, *f_raw.as_vec().tolist()])
        if close_at is not None and tick >= close_at:
            state = try_close_gripper(state, scene, geom)
            if state.gripper == GRIPPER_HOLDING:
                picked = True
                break
            close_at = tick + INFER_EVERY    # not captured yet; keep trying

    if not picked:
        report = TrialReport(scenario=scenario_id, policy="pipeline",
                             outcome=FAIL, steps=len(force_trace),
                             peak_force=tuple(peak.tolist()), seed=trial_seed)
        return TrialResult(report, force_trace)

    # stage 2: place, using the insertion stack from the grasped state
    place_cfg = BenchmarkConfig(policy="gcev-local", ref_noise=ref_noise,
                                timeout_s=place_timeout_s)
    tool = Pose([0.0, 0.0, geom.tip_offset], np.eye(3))
    tool_inv = tool.inverse()
    g_ref = _reference_pose(place_cfg, scene, geom, trial_seed)
    vision = VisionCfg()

    bias_true = ft_rng.uniform(-2.0, 2.0, 6) * np.array([1, 1, 1, 0.1, 0.1, 0.1])
    noise = FtNoise(bias=bias_true)
    quiet = [ft_sense(Wrench.zero(BODY), noise, ft_rng) for _ in range(400)]
    filt = FtFilterState.fresh(bias=ft_rebias(quiet))
    f_filtered = Wrench.zero(BODY)

    buf = EnsembleBuffer(decay=pcfg.ensemble_decay)
    outcome = FAIL
    t0 = state.t
    tick = 0
    try:
        for tick in range(int(round(place_timeout_s / DEFAULT_TS))):
            if tick % INFER_EVERY == 0:
                if tick > 0:
                    buf.advance()
                g_tip = geom.tip_pose(state.g_ee)
                obs = Observation(
                    compute_gcev(g_tip, geom.tip_pose(g_ref)),
                    f_filtered,
                    observe_features(state, scene, geom, "place", vision, vis_rng),
                )
                buf.push(g_tip, scripted_insertion_policy(obs, pcfg))
                g_d_tip, kp, kr = temporal_ensemble(buf)
                g_cmd = g_d_tip @ tool_inv
                gains = Gains.from_stiffness(np.clip(kp, 300, 1500),
                                             np.clip(kr, 300, 1500))
            state, f_raw = step(state, scene, geom, cp, g_cmd, gains)
            fvec = f_raw.as_vec()
            peak = np.maximum(peak, np.abs(fvec))
            force_trace.append([state.t, *fvec.tolist()])
            filt, f_filtered = ft_filter_step(filt, ft_sense(f_raw, noise, ft_rng))
            if np.max(np.abs(fvec[:3])) > FORCE_LIMIT_N:
                outcome = OUTCOME_BLOWUP
                break
            verdict = success_check(replace(state, t=state.t - t0), scene, geom,
                                    timeout_s=place_timeout_s)
            if verdict != IN_PROGRESS:
                outcome = verdict
                break
    except SimulationBlowupError:
        outcome = OUTCOME_BLOWUP

    report = TrialReport(scenario=scenario_id, policy="pipeline",
                         outcome=outcome, steps=len(force_trace),
                         peak_force=tuple(peak.tolist()), seed=trial_seed)
    return TrialResult(report, force_trace)


# ---------------------------------------------------------------------------
# benchmark driver
# ---------------------------------------------------------------------------


def run_benchmark(cfg: BenchmarkConfig,
                  pcfg: PolicyConfig | None = None,
                  collect_traces: bool = False) -> tuple[list[TrialReport], dict]:
    """Seeded trial matrix; returns reports and (optionally) force traces."""
    pcfg = pcfg or PolicyConfig()
    reports: list[TrialReport] = []
    traces: dict = {}
    for scenario in cfg.scenarios:
        scenario_spec(scenario, 0)   # validate the id up front
        for i in range(cfg.trials):
            seed = trial_seed_for(cfg.seed, i)
            res = run_insertion_trial(cfg, scenario, seed, pcfg)
            reports.append(res.report)
            if collect_traces:
                traces[(scenario, seed)] = res.force_trace
    return reports, traces


def success_counts(reports) -> dict:
    out: dict = {}
    for r in reports:
        key = (r.scenario, r.policy)
        row = out.setdefault(key, {"trials": 0, "success": 0, "fail": 0,
                                   "blowup": 0})
        row["trials"] += 1
        row[r.outcome if r.outcome != SUCCESS else "success"] += 1
    return out


# ---------------------------------------------------------------------------
# equivariance suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteCheck:
    name: str
    samples: int
    max_err: float
    tol: float
    passed: bool
    worst_case: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SuiteReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": [c.to_dict() for c in self.checks]}

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"[{status}] {c.name}: max_err={c.max_err:.3e} "
                         f"tol={c.tol:.1e} n={c.samples}")
        return lines


def _tuple_record(g, g_ref, g_d, F, g_l) -> dict:
    return {"g": g.to_dict(), "g_ref": g_ref.to_dict(), "g_d": g_d.to_dict(),
            "F": F.as_vec().tolist(), "g_l": g_l.to_dict()}


def run_equivariance_suite(n_samples: int = 1000, tol: float = 1e-9,
                           seed: int = 0) -> SuiteReport:
    """Randomized checks of the five core invariance/equivariance claims."""
    rng = np.random.default_rng(seed)
    gains = Gains.from_stiffness([1000.0] * 3, [800.0] * 3)
    kp = np.full(3, 1000.0)

    errs = {k: (0.0, None) for k in
            ("gcev-invariance", "elastic-wrench-invariance",
             "adjoint-wrench-equivariance", "ensemble-equivariance",
             "chunk-expansion-equivariance")}

    def track(name, err, record):
        cur, _ = errs[name]
        if err > cur:
            errs[name] = (err, record if err > tol else None)

    for _ in range(n_samples):
        g, g_ref, g_d, g_l = (random_pose(rng) for _ in range(4))
        F = Wrench.from_vec(rng.normal(scale=5.0, size=6), BODY)
        rec = _tuple_record(g, g_ref, g_d, F, g_l)

        a = compute_gcev(g, g_ref).as_vec()
        b = compute_gcev(g_l @ g, g_l @ g_ref).as_vec()
        track("gcev-invariance", float(np.max(np.abs(a - b))), rec)

        a = elastic_wrench(g, g_d, gains).as_vec()
        b = elastic_wrench(g_l @ g, g_l @ g_d, gains).as_vec()
        track("elastic-wrench-invariance", float(np.max(np.abs(a - b))), rec)

        lhs = ad_wrench(g_l @ g, F).as_vec()
        rhs = adjoint(g_l.inverse()).T @ ad_wrench(g, F).as_vec()
        track("adjoint-wrench-equivariance", float(np.max(np.abs(lhs - rhs))), rec)

        entries = []
        for k in range(4):
            w = float(rng.uniform(0.2, 1.0))
            entries.append((w, random_pose(rng),
                            rng.uniform(300, 1500, 3), rng.uniform(300, 1500, 3)))
        from .policy import blend_pose_predictions
        pose_a, kp_a, kr_a = blend_pose_predictions(entries)
        pose_b, kp_b, kr_b = blend_pose_predictions(
            [(w, g_l @ p, a_, b_) for w, p, a_, b_ in entries])
        err = float(np.max(np.abs((g_l @ pose_a).matrix() - pose_b.matrix())))
        err = max(err, float(np.max(np.abs(kp_a - kp_b))),
                  float(np.max(np.abs(kr_a - kr_b))))
        track("ensemble-equivariance", err, rec)

        rel = [Pose(rng.uniform(-0.01, 0.01, 3),
                    euler_xyz_to_matrix(rng.uniform(-0.1, 0.1, 3)))
               for _ in range(3)]
        from .policy import ActionChunk, ChunkStep
        chunk = ActionChunk(tuple(ChunkStep(r, kp, kp) for r in rel))
        lhs_list = [g_l @ t for t in expand_chunk(g, chunk)]
        rhs_list = expand_chunk(g_l @ g, chunk)
        err = max(float(np.max(np.abs(a.matrix() - b.matrix())))
                  for a, b in zip(lhs_list, rhs_list))
        track("chunk-expansion-equivariance", err, rec)

    checks = tuple(
        SuiteCheck(name, n_samples, err, tol, err <= tol, worst)
        for name, (err, worst) in errs.items()
    )
    return SuiteReport(checks)


def run_rollout_equivariance(n_transforms: int = 20, n_steps: int = 2000,
                             tol: float = 1e-6, seed: int = 0) -> SuiteCheck:
    """Closed-loop rollouts on a transformed scene must be the transformed
    rollouts of the base scene, seed for seed."""
    cfg = BenchmarkConfig(policy="gcev-local", ref_noise="rmse-table",
                          timeout_s=n_steps * DEFAULT_TS + 1.0)
    base_scene = build_scenario(scenario_spec("flat-ind", 7))
    base = _rollout_poses(cfg, base_scene, seed, n_steps)
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_rec = None
    for _ in range(n_transforms):
        g_l = random_pose(rng)
        moved = _rollout_poses(cfg, base_scene.transformed(g_l), seed, n_steps)
        for ga, gb in zip(base, moved):
            lhs = g_l @ ga
            err_p = float(np.max(np.abs(lhs.p - gb.p)))
            err_r = float(np.max(np.abs(lhs.R - gb.R)))
            err = max(err_p, err_r)
            if err > worst:
                worst = err
                worst_rec = {"g_l": g_l.to_dict()} if err > tol else None
    return SuiteCheck("rollout-equivariance", n_transforms, worst, tol,
                      worst <= tol, worst_rec)


def _rollout_poses(cfg: BenchmarkConfig, scene: Scene, seed: int,
                   n_steps: int) -> list[Pose]:
    res = run_insertion_trial(cfg, "flat-ind", seed, scene=scene,
                              record_trajectory=True)
    traj = res.trajectory
    if len(traj) < n_steps:                      # hold the final pose
        traj = traj + [traj[-1]] * (n_steps - len(traj))
    return traj[:n_steps]


# ---------------------------------------------------------------------------
# export / replay
# ---------------------------------------------------------------------------

TRIAL_COLUMNS = ("scenario", "policy", "outcome", "steps", "seed",
                 "peak_fx", "peak_fy", "peak_fz", "peak_tx", "peak_ty", "peak_tz")


def export_results(reports, out_dir, cfg: BenchmarkConfig | None = None,
                   traces: dict | None = None, formats=("csv", "json")) -> list:
    """Write the success-rate table, per-trial rows, and force profiles.

    Returns the created paths.  Seeds and the config ride along so the
    export can be replayed exactly.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created = []

    if "csv" in formats:
        trials_path = out / "trials.csv"
        with open(trials_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRIAL_COLUMNS)
            for r in reports:
                w.writerow([r.scenario, r.policy, r.outcome, r.steps, r.seed,
                            *[repr(x) for x in r.peak_force]])
        created.append(trials_path)

        summary_path = out / "success_table.csv"
        with open(summary_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "policy", "trials", "success", "fail",
                        "blowup", "success_rate"])
            for (scenario, policy), row in sorted(success_counts(reports).items()):
                w.writerow([scenario, policy, row["trials"], row["success"],
                            row["fail"], row["blowup"],
                            f"{row['success'] / row['trials']:.3f}"])
        created.append(summary_path)

        if traces:
            prof_path = out / "force_profiles.csv"
            with open(prof_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["scenario", "seed", "t", "fx", "fy", "fz",
                            "tx", "ty", "tz"])
                for (scenario, seed), rows in sorted(traces.items()):
                    for row in rows:
                        w.writerow([scenario, seed, *[repr(x) for x in row]])
            created.append(prof_path)

    if "json" in formats:
        json_path = out / "trials.json"
        payload = {
            "config": cfg.to_dict() if cfg else None,
            "reports": [r.to_dict() for r in reports],
        }
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        created.append(json_path)

    return created


def replay_export(json_path, pcfg: PolicyConfig | None = None) -> list[TrialReport]:
    """Re-run every trial recorded in an export, from its stored seed."""
    with open(json_path) as fh:
        payload = json.load(fh)
    if payload.get("config") is None:
        raise ValueError("export carries no config; cannot replay")
    cfg = BenchmarkConfig.from_dict(payload["config"])
    out = []
    for rec in payload["reports"]:
        res = run_insertion_trial(cfg, rec["scenario"], rec["seed"], pcfg)
        out.append(res.report)
    return out
