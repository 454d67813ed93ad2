"""Pose registration and multiview fusion.

A hand pose is moved to a wrist-centered frame, so a rotated and shifted copy
of the same hand registers to the same coordinates. The registered pose and an
appearance vector are z-scored separately and concatenated with a pose weight.
"""
import numpy as np
from scipy.spatial.transform import Rotation

from grasptax import FeatureMatrix, HandPose, PoseFeatureConfig, fuse_views, zscore_normalize
from grasptax.registration import flatten_pose, register_pose
from grasptax.synthetic import grasp_prototypes

rng = np.random.default_rng(0)
hand = grasp_prototypes(1, seed=0)[0]
moved = Rotation.random(random_state=1).apply(hand) + [0.3, -1.2, 0.8]

a = register_pose(HandPose(hand)).coords
b = register_pose(HandPose(moved)).coords
print("max coordinate difference after registration:", np.abs(a - b).max())
print("index MCP after registration:", np.round(a[5], 6))

# 40 noisy copies of three grasps, pose view plus a 1024-d appearance view
protos = grasp_prototypes(3, seed=0)
labels = np.repeat(np.arange(3), 40)
cfg = PoseFeatureConfig("d3")
pose_rows = np.array([flatten_pose(register_pose(HandPose(protos[g] + rng.normal(0, 0.05, (21, 3)))), cfg)
                      for g in labels])
appearance = rng.normal(size=(3, 1024))[labels] + rng.normal(0, 2.0, (120, 1024))

pose = zscore_normalize(FeatureMatrix(pose_rows, ("pose",)))
app = zscore_normalize(FeatureMatrix(appearance, ("appearance",)))
for w in (0.1, 1.0, 5.0):
    fused = fuse_views(pose, app, w)
    d = np.linalg.norm(fused.data[:, None] - fused.data[None], axis=2)
    same = d[labels[:, None] == labels[None]].mean()
    other = d[labels[:, None] != labels[None]].mean()
    print(f"pose weight {w:>4}: {fused.shape[1]} columns, within/between distance {same / other:.3f}")
