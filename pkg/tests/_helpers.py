"""Small builders shared by the test modules."""
import numpy as np

from grasptax.clustering import ClusterModel
from grasptax.ingestion import N_JOINTS, FrameRecord, HandPose


def make_model(assignments, scores=None, distances=None, frame_ids=None, algorithm="kmeans"):
    a = np.asarray(assignments, dtype=np.int64)
    k = int(a.max()) + 1
    n = a.size
    return ClusterModel(
        algorithm=algorithm, k=k, assignments=a,
        score_per_row=np.zeros(n) if scores is None else scores,
        center_distance=np.zeros(n) if distances is None else distances,
        centers=np.zeros((k, 1)), seed=0, converged=True, n_iter=1,
        frame_ids=frame_ids,
    )


def random_pose(rng, dim=3):
    """Random hand pose whose wrist, index MCP and little MCP are well apart."""
    coords = rng.normal(0.0, 1.0, (N_JOINTS, dim))
    coords[5] = coords[0] + rng.normal(0, 1, dim) + 3.0
    coords[17] = coords[0] + rng.normal(0, 1, dim) - 3.0 * (np.arange(dim) % 2)
    return HandPose(coords)


def random_rotation(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def frame(fid, interaction_id=None, sharpness=None, image_path=None):
    return FrameRecord(fid, interaction_id=interaction_id, sharpness=sharpness, image_path=image_path)
