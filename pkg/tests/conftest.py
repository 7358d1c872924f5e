import numpy as np
import pytest

from privis.frame_io import PointCloudFrame, SceneSpec, generate_frame
from privis.partition import partition_frame


@pytest.fixture(scope="session")
def small_scene() -> SceneSpec:
    """Fast synthetic scene used across unit tests."""
    return SceneSpec(
        seed=7,
        frame_count=12,
        points_per_frame=8000,
        sensitive_fraction=0.2,
        motion_amplitude=0.1,
    )


@pytest.fixture(scope="session")
def small_frames(small_scene) -> list[PointCloudFrame]:
    return [generate_frame(small_scene, i) for i in range(small_scene.frame_count)]


@pytest.fixture(scope="session")
def small_cubes(small_frames):
    return partition_frame(small_frames[0], 64)


def make_frame(positions, sensitivity=None, frame_id=0, viewpoint=(0, 0, 0), anchor=(0, 0, 0)):
    """Hand-built frame with default colors."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(positions)
    if sensitivity is None:
        sensitivity = np.zeros(n)
    return PointCloudFrame(
        frame_id=frame_id,
        positions=positions,
        colors=np.full((n, 3), 128, dtype=np.uint8),
        sensitivity=np.asarray(sensitivity),
        viewpoint=np.asarray(viewpoint, dtype=np.float64),
        user_anchor=np.asarray(anchor, dtype=np.float64),
    )
