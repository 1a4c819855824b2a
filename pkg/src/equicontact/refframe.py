"""Reference-frame estimation: equivariant candidate mock and refinement.

A pose-in/pose-out stand-in for a global grasp/placement planner.  The
mock samples candidate end-effector poses around the ground-truth target
*in the target's local frame*, which makes the whole estimator exactly
left-equivariant by construction: transforming the scene by g_l
transforms every candidate by g_l, seed for seed.

Candidate energies are generated to be monotone in the noise magnitude
but deliberately unreliable for ranking; the refinement heuristics
average the candidates' tool-tip positions instead of trusting the
energy ordering, which is where the accuracy gain comes from.

Noise presets default to the per-axis RMSE calibration of the upstream
estimator (mm / deg); the rotation about the target's symmetry axis is
drawn uniformly on [-pi, pi] since a symmetric task leaves it
unobservable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .liegroup import Pose, euler_xyz_to_matrix, weighted_rotation_mean

PICK_CANDIDATES = 20
PLACE_CANDIDATES = 10

KIND_PICK = "pick"
KIND_PLACE = "place"

_EXPECTED_COUNT = {KIND_PICK: PICK_CANDIDATES, KIND_PLACE: PLACE_CANDIDATES}


@dataclass(frozen=True)
class EstimatorNoise:
    """Per-axis candidate scatter: translational std (mm), rotational std (deg).

    symmetric_z draws the local-z rotation uniformly on [-pi, pi] instead
    of using rot_std_deg[2].
    """

    trans_std_mm: tuple = (0.0, 0.0, 0.0)
    rot_std_deg: tuple = (0.0, 0.0, 0.0)
    symmetric_z: bool = False

    def __post_init__(self):
        t = tuple(float(x) for x in self.trans_std_mm)
        r = tuple(float(x) for x in self.rot_std_deg)
        if len(t) != 3 or len(r) != 3 or any(x < 0 for x in t + r):
            raise ValueError("noise stds must be three nonnegative values each")
        object.__setattr__(self, "trans_std_mm", t)
        object.__setattr__(self, "rot_std_deg", r)

    @staticmethod
    def zero() -> "EstimatorNoise":
        return EstimatorNoise()

    @staticmethod
    def pick_default() -> "EstimatorNoise":
        return EstimatorNoise((16.76, 5.886, 10.79), (19.88, 40.55, 106.7),
                              symmetric_z=True)

    @staticmethod
    def place_default() -> "EstimatorNoise":
        return EstimatorNoise((4.981, 7.422, 5.236), (13.74, 18.99, 91.41),
                              symmetric_z=True)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "EstimatorNoise":
        d = dict(d)
        d["trans_std_mm"] = tuple(d["trans_std_mm"])
        d["rot_std_deg"] = tuple(d["rot_std_deg"])
        return EstimatorNoise(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "EstimatorNoise":
        with open(path) as fh:
            return EstimatorNoise.from_dict(json.load(fh))


@dataclass(frozen=True)
class ToolOffset:
    """End-effector origin to tool-tip offset, body frame (m)."""

    p_et: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_et",
                           np.asarray(self.p_et, dtype=float).reshape(3))


@dataclass(frozen=True)
class CandidatePoseSet:
    """Ranked candidate end-effector poses with (unreliable) energies."""

    poses: tuple
    energies: np.ndarray
    kind: str

    def __post_init__(self):
        poses = tuple(self.poses)
        energies = np.asarray(self.energies, dtype=float).reshape(-1)
        if self.kind not in _EXPECTED_COUNT:
            raise ValueError(f"kind must be pick or place, got {self.kind!r}")
        if len(poses) != _EXPECTED_COUNT[self.kind]:
            raise ValueError(
                f"{self.kind} sets carry {_EXPECTED_COUNT[self.kind]} candidates, "
                f"got {len(poses)}")
        if energies.shape != (len(poses),):
            raise ValueError("one energy per candidate required")
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "energies", energies)

    def lowest_energy(self) -> Pose:
        return self.poses[int(np.argmin(self.energies))]

    def tip_positions(self, tool: ToolOffset) -> np.ndarray:
        return np.stack([g.p + g.R @ tool.p_et for g in self.poses])

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "candidates": [
                {"pose": g.to_dict(), "energy": float(e)}
                for g, e in zip(self.poses, self.energies)
            ],
        }

    @staticmethod
    def from_record(d: dict) -> "CandidatePoseSet":
        poses = tuple(Pose.from_dict(c["pose"]) for c in d["candidates"])
        energies = np.array([c["energy"] for c in d["candidates"]])
        return CandidatePoseSet(poses, energies, d["kind"])


def save_candidate_sets(path, sets) -> None:
    """Line-delimited records, one candidate set per line."""
    with open(path, "w") as fh:
        for cs in sets:
            fh.write(json.dumps(cs.to_record()) + "\n")


def load_candidate_sets(path) -> list[CandidatePoseSet]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(CandidatePoseSet.from_record(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# mock estimator
# ---------------------------------------------------------------------------


def _noise_pose(noise: EstimatorNoise, rng: np.random.Generator) -> Pose:
    n_p = rng.normal(0.0, 1.0, 3) * (np.array(noise.trans_std_mm) / 1000.0)
    rx, ry, rz = rng.normal(0.0, 1.0, 3) * np.radians(noise.rot_std_deg)
    u = rng.uniform(-math.pi, math.pi)
    if noise.symmetric_z:
        rz = u
    return Pose(n_p, euler_xyz_to_matrix([rx, ry, rz]))


def mock_candidates(scene, kind: str, noise: EstimatorNoise, seed: int,
                    geom=None, tool_offset: float | None = None) -> CandidatePoseSet:
    """Candidate target poses scattered around the scene's ground truth.

    scene is either a ground-truth target Pose directly, or an object with
    pick_target(geom)/place_target(geom) methods (the simulator's Scene).
    The noise pose is applied about the tool-tip point, since that is where
    the observed object sits: candidate orientations scatter around the tip
    while the tip positions themselves deviate only by the translational
    noise.  Sampling happens in the target-local frame, so
    mock_candidates(g_l . scene) == g_l . mock_candidates(scene) exactly,
    for the same seed.
    """
    if kind not in _EXPECTED_COUNT:
        raise ValueError(f"kind must be pick or place, got {kind!r}")
    if geom is None and (not isinstance(scene, Pose) or tool_offset is None):
        from .sim import PegHoleGeom
        geom = PegHoleGeom()
    if isinstance(scene, Pose):
        target = scene
    else:
        target = (scene.pick_target(geom) if kind == KIND_PICK
                  else scene.place_target(geom))
    if tool_offset is None:
        tool_offset = geom.jaw_offset if kind == KIND_PICK else geom.tip_offset
    shift = Pose([0.0, 0.0, tool_offset], np.eye(3))
    shift_inv = shift.inverse()
    rng = np.random.default_rng(seed)
    n = _EXPECTED_COUNT[kind]
    trans_scale = max(np.linalg.norm(np.array(noise.trans_std_mm)) / 1000.0, 1e-9)
    poses = []
    magnitudes = []
    for _ in range(n):
        d = _noise_pose(noise, rng)
        poses.append(target @ shift @ d @ shift_inv)
        magnitudes.append(float(np.linalg.norm(d.p)) / trans_scale)
    # energies: monotone in noise magnitude, scrambled enough to be a poor rank
    jitter = rng.uniform(0.0, 1.5, n)
    energies = np.array(magnitudes) + jitter
    return CandidatePoseSet(tuple(poses), energies, kind)


# ---------------------------------------------------------------------------
# refinement heuristics
# ---------------------------------------------------------------------------


def refine_pick(cands: CandidatePoseSet, R_peg: np.ndarray,
                tool: ToolOffset) -> Pose:
    """Grasp pose from tip averaging: the candidates' orientations scatter,
    but their tool-tip positions cluster; combine the mean tip with the
    known upright grasp orientation."""
    if cands.kind != KIND_PICK:
        raise ValueError("refine_pick needs a pick candidate set")
    if len(cands.poses) == 0:
        raise ValueError("empty candidate set")
    R_peg = np.asarray(R_peg, dtype=float)
    tip_mean = cands.tip_positions(tool).mean(axis=0)
    return Pose(tip_mean - R_peg @ tool.p_et, R_peg)


def refine_place(cands: CandidatePoseSet, tool: ToolOffset) -> Pose:
    """Placement pose from tip averaging plus the rotation mean."""
    if cands.kind != KIND_PLACE:
        raise ValueError("refine_place needs a place candidate set")
    if len(cands.poses) == 0:
        raise ValueError("empty candidate set")
    R_bar = weighted_rotation_mean([g.R for g in cands.poses])
    tip_mean = cands.tip_positions(tool).mean(axis=0)
    return Pose(tip_mean - R_bar @ tool.p_et, R_bar)


def transform_candidates(g_l: Pose, cands: CandidatePoseSet) -> CandidatePoseSet:
    """Apply a left transform to every candidate (energies unchanged)."""
    return CandidatePoseSet(tuple(g_l @ g for g in cands.poses),
                            cands.energies.copy(), cands.kind)
