import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import random_pose, random_rotation
from grasptax.errors import ConfigMismatch, DegeneratePose, ValidationError
from grasptax.ingestion import N_JOINTS, HandPose
from grasptax.registration import (PoseFeatureConfig, flatten_pose, pose_feature_rows, register_pose,
                                   register_pose_2d, register_pose_3d)


def _pose(points: dict, dim: int, fill=None) -> HandPose:
    coords = np.zeros((N_JOINTS, dim)) if fill is None else np.array(fill, dtype=float)
    for j, p in points.items():
        coords[j] = p
    return HandPose(coords)


class TestRegister2D:
    def test_pure_translation(self):
        rng = np.random.default_rng(0)
        coords = rng.normal(size=(N_JOINTS, 2))
        coords[0], coords[5] = (3, 4), (3, 9)
        out = register_pose_2d(HandPose(coords))
        np.testing.assert_allclose(out.coords, coords - (3, 4), atol=1e-12)
        assert out.coords[5].tolist() == [0.0, 5.0]
        assert out.space == "registered"

    def test_quarter_turn(self):
        pose = _pose({0: (0, 0), 5: (5, 0), 1: (0, 1)}, 2)
        out = register_pose_2d(pose)
        np.testing.assert_allclose(out.coords[5], (0, 5), atol=1e-12)
        np.testing.assert_allclose(out.coords[1], (-1, 0), atol=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegeneratePose):
            register_pose_2d(_pose({0: (2, 2), 5: (2, 2)}, 2, fill=np.ones((21, 2))))

    def test_confidence_carried(self):
        conf = np.linspace(0, 1, 21)
        pose = HandPose(np.random.default_rng(1).normal(size=(21, 2)), conf)
        np.testing.assert_array_equal(register_pose_2d(pose).confidence, conf)


class TestRegister3D:
    def test_canonical_unchanged(self):
        rng = np.random.default_rng(2)
        coords = rng.normal(size=(N_JOINTS, 3))
        coords[0], coords[5], coords[17] = (0, 0, 0), (0, 2, 0), (1, 1, 0)
        np.testing.assert_allclose(register_pose_3d(HandPose(coords)).coords, coords, atol=1e-12)

    def test_index_along_z(self):
        pose = _pose({0: (0, 0, 0), 5: (0, 0, 2), 17: (1, 0, 1)}, 3)
        out = register_pose_3d(pose)
        np.testing.assert_allclose(out.coords[5], (0, 2, 0), atol=1e-12)
        np.testing.assert_allclose(out.coords[17], (1, 1, 0), atol=1e-12)
        # an explicit composition of the two alignment rotations agrees
        tilt = np.array([[1, 0, 0], [0, 0, 1], [0, -1, 0]], dtype=float)  # +z onto +y
        np.testing.assert_allclose(tilt @ pose.coords[17], out.coords[17], atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(out.coords, axis=1),
                                   np.linalg.norm(pose.coords, axis=1), atol=1e-12)

    def test_collinear_little_mcp(self):
        with pytest.raises(DegeneratePose):
            register_pose_3d(_pose({0: (0, 0, 0), 5: (0, 1, 0), 17: (0, 3, 0)}, 3))

    def test_dim_mismatch(self):
        with pytest.raises(ConfigMismatch):
            register_pose_3d(HandPose(np.ones((21, 2))))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_rigid_invariance(seed, dim):
    rng = np.random.default_rng(seed)
    pose = random_pose(rng, dim)
    moved = HandPose(pose.coords @ random_rotation(rng, dim).T + rng.normal(0, 10, dim))
    a, b = register_pose(pose).coords, register_pose(moved).coords
    scale = np.abs(a).max()
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9 * scale)
    np.testing.assert_allclose(np.linalg.norm(a - a[7], axis=1),
                               np.linalg.norm(pose.coords - pose.coords[7], axis=1), rtol=1e-9, atol=1e-12)


class TestFlatten:
    def _registered(self, dim, conf=None):
        coords = np.arange(N_JOINTS * dim, dtype=float).reshape(N_JOINTS, dim)
        return HandPose(coords, conf, "registered")

    def test_plain_2d(self):
        pose = self._registered(2)
        row = flatten_pose(pose, PoseFeatureConfig())
        assert row.shape == (42,)
        np.testing.assert_array_equal(row, pose.coords.ravel())

    def test_with_confidence(self):
        conf = np.full(21, 0.5)
        row = flatten_pose(self._registered(2, conf), PoseFeatureConfig(include_confidence=True))
        assert row.shape == (63,)

    def test_thumb_weight(self):
        coords = np.zeros((N_JOINTS, 2))
        coords[2] = (1, -2)
        row = flatten_pose(HandPose(coords, None, "registered"), PoseFeatureConfig(thumb_weight=5.0))
        assert row[4:6].tolist() == [5.0, -10.0]

    def test_thumb_weight_leaves_confidence(self):
        conf = np.linspace(0.1, 0.9, 21)
        coords = np.ones((N_JOINTS, 2))
        row = flatten_pose(HandPose(coords, conf, "registered"),
                           PoseFeatureConfig(include_confidence=True, thumb_weight=3.0)).reshape(21, 3)
        np.testing.assert_array_equal(row[:, 2], conf)
        assert row[1:5, :2].tolist() == [[3.0, 3.0]] * 4

    def test_3d(self):
        assert flatten_pose(self._registered(3), PoseFeatureConfig("d3")).shape == (63,)

    def test_needs_registered_pose(self):
        with pytest.raises(ValidationError):
            flatten_pose(HandPose(np.ones((21, 2))), PoseFeatureConfig())

    def test_config_mismatch(self):
        with pytest.raises(ConfigMismatch):
            PoseFeatureConfig("d3", include_confidence=True)
        with pytest.raises(ConfigMismatch):
            flatten_pose(self._registered(3), PoseFeatureConfig("d2"))


def test_feature_rows_skip_degenerate():
    rng = np.random.default_rng(4)
    good = [random_pose(rng, 3) for _ in range(3)]
    bad = HandPose(np.zeros((21, 3)))
    rows, kept = pose_feature_rows([good[0], bad, good[1], None, good[2]], PoseFeatureConfig("d3"))
    assert rows.shape == (3, 63)
    assert kept.tolist() == [0, 2, 4]
