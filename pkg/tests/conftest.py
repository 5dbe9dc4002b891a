import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bogdetect.descriptor import DescriptorParams
from bogdetect.detector import SmoothingParams
from bogdetect.pipeline import TrainParams, train_detector
from bogdetect.skeleton import SkeletonTopology
from bogdetect.synthetic import SyntheticSpec, generate_corpus

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def topo():
    return SkeletonTopology.kinect()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_corpus():
    spec = SyntheticSpec(n_classes=3, n_instances=5)
    return generate_corpus(6, spec, seed=11)


@pytest.fixture(scope="session")
def small_bundle(topo, small_corpus):
    params = TrainParams(K=60, m=3, seed=0, smoothing=SmoothingParams(5))
    return train_detector(small_corpus, topo, DescriptorParams.msrc12(), params)


def random_positions(rng, n_frames, n_joints=20, scale=0.5):
    base = rng.normal(scale=scale, size=(1, n_joints, 3))
    walk = np.cumsum(rng.normal(scale=0.02, size=(n_frames, n_joints, 3)), axis=0)
    return base + walk
