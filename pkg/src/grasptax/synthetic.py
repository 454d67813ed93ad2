"""Synthetic egocentric recordings for demos and tests.

Each interaction holds one grasp drawn from a small set of prototypes. Poses
are the prototype plus joint noise under a random rigid motion; appearance
vectors are a per-grasp direction plus isotropic noise.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from .ingestion import (APPEARANCE_DIM, GRASP_LABELS, N_JOINTS, AppearanceFeature, Dataset,
                        FrameRecord, HandPose)


def grasp_prototypes(n_grasps: int, seed: int = 0) -> np.ndarray:
    """``n_grasps`` distinct 21-joint 3D hand shapes, shape (n_grasps, 21, 3)."""
    rng = np.random.default_rng(seed)
    base = np.zeros((N_JOINTS, 3))
    # five fingers of four joints fanning out from the wrist
    for finger in range(5):
        angle = np.deg2rad(-40 + 20 * finger)
        direction = np.array([np.sin(angle), np.cos(angle), 0.0])
        for j in range(4):
            base[1 + 4 * finger + j] = direction * (3.0 + 1.5 * j)
    protos = []
    for _ in range(n_grasps):
        curl = rng.uniform(0.0, 1.2, size=5)
        p = base.copy()
        for finger in range(5):
            for j in range(1, 4):
                idx = 1 + 4 * finger + j
                p[idx, 2] -= 2.0 * curl[finger] * j
                p[idx, :2] *= 1.0 - 0.2 * curl[finger] * j
        protos.append(p)
    return np.stack(protos)


def synthetic_dataset(n_interactions: int = 24, n_grasps: int = 3, seed: int = 0,
                      pose_noise: float = 0.05, appearance_noise: float = 0.5,
                      with_max_pooling: bool = False, participant_id: str = "P01",
                      hand_side: str = "right") -> Dataset:
    """A contact-annotated recording with 2D/3D poses, appearance and labels.

    Interactions last 20-60 frames and are separated by 10-30 frames without
    contact; isolated contact flickers are sprinkled into the gaps.
    """
    rng = np.random.default_rng(seed)
    protos = grasp_prototypes(n_grasps, seed)
    directions = rng.standard_normal((n_grasps, APPEARANCE_DIM))
    labels = [GRASP_LABELS[g % len(GRASP_LABELS)] for g in range(n_grasps)]

    records = []
    fid = 0

    def gap_frames(count):
        nonlocal fid
        flicker = rng.integers(count) if count > 4 else -1
        for i in range(count):
            records.append(FrameRecord(fid, task_id=task, contact=bool(i == flicker),
                                       sharpness=float(rng.uniform(10, 100))))
            fid += 1

    for it in range(n_interactions):
        task = f"task{it % 6:02d}"
        gap_frames(int(rng.integers(10, 31)))
        grasp = int(rng.integers(n_grasps))
        rot = Rotation.random(random_state=rng).as_matrix()
        shift = rng.uniform(-20, 20, size=3)
        for _ in range(int(rng.integers(20, 61))):
            jitter = Rotation.from_rotvec(rng.normal(0, 0.05, 3)).as_matrix()
            p3 = (protos[grasp] + rng.normal(0, pose_noise, (N_JOINTS, 3))) @ (jitter @ rot).T + shift
            p2 = p3[:, :2] * 10.0 + 100.0
            conf = rng.uniform(0.5, 1.0, N_JOINTS)
            app = directions[grasp] + rng.normal(0, appearance_noise, APPEARANCE_DIM)
            appearance = {"average": AppearanceFeature(app, "average")}
            if with_max_pooling:
                appearance["max"] = AppearanceFeature(app + np.abs(rng.normal(0, 1, APPEARANCE_DIM)), "max")
            records.append(FrameRecord(
                fid, task_id=task, contact=True,
                pose2d=HandPose(p2, conf), pose3d=HandPose(p3),
                appearance=appearance, grasp_label=labels[grasp],
                sharpness=float(rng.uniform(10, 100)),
            ))
            fid += 1
    task = f"task{n_interactions % 6:02d}"
    gap_frames(int(rng.integers(10, 31)))
    return Dataset(participant_id, hand_side, tuple(records))
